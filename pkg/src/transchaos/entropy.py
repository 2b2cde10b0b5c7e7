"""Counting (t, eps)-separated subsets of finite families.

A finite family stands in for a compact set. Pairwise orbit distances are
computed once per family as a profile over the time grid, so the separation
graph for any ``(t, eps)`` is a prefix maximum and a threshold away.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .errors import ExactBudgetExceeded
from .space import Mode, SpaceSpec, shifted_norms
from .weights import certify_admissibility
from . import witness as W

__all__ = [
    "EXACT_CAP",
    "SeparationQuery",
    "EntropyRow",
    "EntropyTable",
    "EntropyExperiment",
    "pair_profiles",
    "is_separated_pair",
    "separation_graph",
    "max_clique",
    "greedy_separated",
    "max_separated",
    "entropy_scan",
    "infinite_entropy_experiment",
]

EXACT_CAP = 24


@dataclass(frozen=True)
class SeparationQuery:
    """A family, a horizon ``t`` and a threshold ``epsilon``.

    ``time_grid`` holds the times ``u`` at which orbits are compared; by
    default every grid multiple in ``[0, t]``.
    """

    family: Sequence
    t: float
    epsilon: float
    time_grid: Optional[np.ndarray] = None

    def __post_init__(self):
        if len(self.family) == 0:
            raise ValueError("family must be nonempty")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.t < 0:
            raise ValueError("t must be non-negative")
        if self.time_grid is not None and np.any(np.asarray(self.time_grid) > self.t + 1e-12):
            raise ValueError("time grid exceeds t")

    def time_steps(self, spec):
        if self.time_grid is None:
            return np.arange(spec.steps(self.t) + 1)
        return np.array(sorted({spec.steps(u) for u in self.time_grid}), dtype=int)


def _pair_index(m):
    i, j = np.triu_indices(m, k=1)
    return list(zip(i.tolist(), j.tolist()))


def pair_profiles(family, spec, max_steps, stride=1, threads=1):
    """Distances ``d(T_u f_i, T_u f_j)`` for ``u = 0, stride, ... <= max_steps`` cells.

    Returns an array of shape ``(m, m, K)``, symmetric with a zero diagonal.
    """
    m = len(family)
    ks = np.arange(0, max_steps + 1, stride)
    out = np.zeros((m, m, len(ks)))
    pairs = _pair_index(m)

    def one(pair):
        i, j = pair
        return shifted_norms(family[i] - family[j], spec, max_steps, stride)

    if threads > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, pairs))
    else:
        results = [one(p) for p in pairs]
    for (i, j), prof in zip(pairs, results):
        out[i, j] = out[j, i] = prof
    return out


def separation_graph(q, spec, threads=1):
    """Boolean matrix of pairs that are ``(t, eps)``-separated."""
    steps = q.time_steps(spec)
    prof = pair_profiles(list(q.family), spec, int(steps[-1]), threads=threads)
    best = np.max(prof[:, :, steps], axis=2)
    adj = best >= q.epsilon
    np.fill_diagonal(adj, False)
    return adj


def is_separated_pair(f, g, q, spec):
    """True iff ``d(T_u f, T_u g) >= epsilon`` for some ``u`` in the time grid."""
    steps = q.time_steps(spec)
    prof = shifted_norms(f - g, spec, int(steps[-1]))
    return bool(np.max(prof[steps]) >= q.epsilon)


def greedy_separated(adj):
    """Scan in order, keeping every member separated from all kept so far."""
    kept = []
    for i in range(adj.shape[0]):
        if all(adj[i, k] for k in kept):
            kept.append(i)
    return kept


def max_clique(adj):
    """Maximum clique of a small graph by bitmask branch and bound.

    Candidates are expanded in index order and a branch is cut as soon as the
    current clique plus every remaining candidate cannot beat the incumbent.
    The greedy scan seeds the incumbent, so ties resolve to it.
    """
    m = adj.shape[0]
    nbr = [sum(1 << j for j in range(m) if adj[i, j]) for i in range(m)]
    best = greedy_separated(adj)
    best_mask = sum(1 << i for i in best)
    best_size = len(best)

    def expand(clique, size, cand):
        nonlocal best_mask, best_size
        if cand == 0:
            if size > best_size:
                best_mask, best_size = clique, size
            return
        while cand:
            if size + bin(cand).count("1") <= best_size:
                return
            i = (cand & -cand).bit_length() - 1
            cand &= ~(1 << i)
            expand(clique | (1 << i), size + 1, cand & nbr[i])

    expand(0, 0, (1 << m) - 1)
    return [i for i in range(m) if best_mask >> i & 1]


def max_separated(q, spec, mode="Exact", adj=None):
    """Largest ``(t, eps)``-separated subset of the family.

    Parameters
    ----------
    mode : {"Exact", "Greedy"}
        Exact runs branch and bound on the separation graph and is limited to
        24 members; Greedy keeps members in family order.
    adj : ndarray, optional
        Precomputed separation graph.

    Returns
    -------
    (count, subset)
    """
    m = len(q.family)
    if mode == "Exact" and m > EXACT_CAP:
        raise ExactBudgetExceeded(f"exact search is capped at {EXACT_CAP} members, got {m}")
    if mode not in ("Exact", "Greedy"):
        raise ValueError(f"unknown mode {mode!r}")
    if adj is None:
        adj = separation_graph(q, spec)
    subset = max_clique(adj) if mode == "Exact" else greedy_separated(adj)
    return len(subset), subset


@dataclass(frozen=True)
class EntropyRow:
    t: float
    epsilon: float
    count: int
    rate: float


@dataclass
class EntropyTable:
    """Rows sorted by ``epsilon`` descending, then ``t`` ascending."""

    rows: List[EntropyRow]
    family_size: int
    mode: str
    time_stride: int = 1
    meta: dict = field(default_factory=dict)

    HEADER = ("t", "epsilon", "count", "rate")

    def count(self, t, epsilon):
        for r in self.rows:
            if math.isclose(r.t, t) and math.isclose(r.epsilon, epsilon):
                return r.count
        raise KeyError((t, epsilon))

    def as_records(self):
        return [(r.t, r.epsilon, r.count, r.rate) for r in self.rows]


def entropy_scan(family, t_list, eps_list, spec, mode="Exact", time_stride=1, threads=1):
    """Counts ``s(t, eps)`` and rates ``log(s)/t`` for every pair in the lists.

    ``time_stride`` (in cells) coarsens the comparison grid to multiples of
    ``time_stride * step``; a coarser grid can only lower the counts.
    """
    if not t_list or not eps_list:
        raise ValueError("t_list and eps_list must be nonempty")
    family = list(family)
    if mode == "Exact" and len(family) > EXACT_CAP:
        raise ExactBudgetExceeded(f"exact search is capped at {EXACT_CAP} members, got {len(family)}")
    t_steps = [spec.steps(t) for t in t_list]
    if min(t_steps) <= 0:
        raise ValueError("every t must be positive")
    prof = pair_profiles(family, spec, max(t_steps), stride=time_stride, threads=threads)
    running = np.maximum.accumulate(prof, axis=2)

    rows = []
    for eps in sorted(set(eps_list), reverse=True):
        for t, k in sorted(set(zip(t_list, t_steps)), key=lambda p: p[1]):
            adj = running[:, :, k // time_stride] >= eps
            np.fill_diagonal(adj, False)
            subset = max_clique(adj) if mode == "Exact" else greedy_separated(adj)
            c = len(subset)
            rows.append(EntropyRow(float(t), float(eps), c, math.log(c) / t))
    return EntropyTable(rows, len(family), mode, time_stride)


@dataclass
class EntropyExperiment:
    """Per-level counts on a separated family versus the constructed ``a_n``."""

    sequences: object
    family: object
    epsilon: float
    a: tuple
    t: np.ndarray
    counts: List[int]
    modes: List[str]
    measured_rates: np.ndarray
    theoretical_rates: np.ndarray

    @property
    def counts_match(self):
        return list(self.counts) == list(self.a)

    @property
    def rates_increasing(self):
        return bool(np.all(np.diff(self.measured_rates) > 0))

    def rows(self):
        return [
            {"n": n, "t": float(t), "epsilon": self.epsilon, "a": a, "count": c, "mode": m,
             "rate": float(r), "rate_theory": float(rt)}
            for n, (t, a, c, m, r, rt) in enumerate(
                zip(self.t, self.a, self.counts, self.modes, self.measured_rates,
                    self.theoretical_rates), start=1)
        ]


def infinite_entropy_experiment(v, cert, N, a_schedule, spec, sample_budget=0, rng=None,
                                threads=1):
    """Escape sequences, separated family, then a count at each ``(t_n, eps)``.

    ``eps`` is half the guaranteed separation. Level ``n`` is counted exactly
    when ``a_n <= 24`` and greedily otherwise; since the level is pairwise
    separated both give ``a_n``.
    """
    if cert is None:
        cert = certify_admissibility(v, spec.x_max, spec.step)
    if isinstance(a_schedule, str):
        a = W.a_schedule(a_schedule, N, int(math.floor(cert.gamma / spec.step + 1e-9)))
    else:
        a = W.a_schedule(tuple(a_schedule), N)
    seq = W.find_escape_sequences(v, cert, N, spec.x_max, spec.step,
                                  cell_multiple=W.required_cell_multiple(a, spec.mode))
    fam = W.build_separated_family(seq, a, sample_budget, spec, rng=rng)
    eps = W.separation_epsilon(seq, spec)

    counts, modes = [], []
    for n in range(1, N + 1):
        members = fam.level_members(n)
        q = SeparationQuery(members, float(seq.t[n - 1]), eps)
        mode = "Exact" if len(members) <= EXACT_CAP else "Greedy"
        adj = separation_graph(q, spec, threads=threads)
        c, _ = max_separated(q, spec, mode, adj=adj)
        counts.append(c)
        modes.append(mode)
    t = seq.t
    measured = np.log(np.array(counts, dtype=float)) / t
    theory = np.log(np.array(a, dtype=float)) / t
    return EntropyExperiment(seq, fam, eps, a, t, counts, modes, measured, theory)
