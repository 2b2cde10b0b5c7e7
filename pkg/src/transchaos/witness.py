"""Explicit witness functions for the chaos conditions.

Everything here lives on the grid: ``gamma`` is snapped down to a whole number
of cells, so escape points, translation times and subinterval boundaries are
all grid nodes and the norm inequalities can be checked exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Dict, List, Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import GridTooCoarse, HorizonExhausted, NormDiverged, NoSmallWeightSites
from .space import (
    GridFunction,
    Interpretation,
    Mode,
    SpaceSpec,
    norm,
    norm_p,
    restrict,
    translate,
)
from .weights import grid

__all__ = [
    "EscapeSequences",
    "SeparatedFamily",
    "WindowedWitness",
    "find_escape_sequences",
    "build_nonvanishing_witness",
    "verify_nonvanishing",
    "a_schedule",
    "required_cell_multiple",
    "separation_bound",
    "separation_epsilon",
    "build_separated_family",
    "build_periodic_witness",
    "build_windowed_witness",
]

LN2 = math.log(2.0)
MEMBER_CAP = 10_000


@dataclass(frozen=True)
class EscapeSequences:
    """Interleaved points ``y_1 < z_1 < y_2 < ...`` with ``v(y_n)/v(z_n) > 2**n``.

    Positions are stored both as coordinates and as node indices; ``t`` holds
    the translation times ``z_n - y_n - gamma``.
    """

    y_idx: np.ndarray
    z_idx: np.ndarray
    gamma_steps: int
    step: float
    M: float
    w: float
    log_ratios: np.ndarray

    @property
    def N(self):
        return len(self.y_idx)

    @property
    def gamma(self):
        return self.gamma_steps * self.step

    @property
    def y(self):
        return self.y_idx * self.step

    @property
    def z(self):
        return self.z_idx * self.step

    @property
    def t_steps(self):
        return self.z_idx - self.y_idx - self.gamma_steps

    @property
    def t(self):
        return self.t_steps * self.step

    def violations(self):
        """Names of the structural invariants that fail (empty when valid)."""
        bad = []
        pts = np.empty(2 * self.N, dtype=int)
        pts[0::2], pts[1::2] = self.y_idx, self.z_idx
        if np.any(np.diff(pts) <= 0):
            bad.append("interleaving")
        if np.any(np.diff(self.z_idx) <= self.gamma_steps):
            bad.append("z spacing")
        levels = np.arange(1, self.N + 1)
        if np.any(self.log_ratios <= levels * LN2):
            bad.append("ratio")
        if np.any(self.t_steps <= 0):
            bad.append("t positive")
        if self.w > 0:
            upper = math.log(self.M) + self.w * (self.t + self.gamma)
            if np.any(self.log_ratios > upper + 1e-9):
                bad.append("admissibility ceiling")
        return bad

    def to_dict(self):
        return {
            "N": self.N,
            "gamma": self.gamma,
            "step": self.step,
            "M": self.M,
            "w": self.w,
            "y": self.y.tolist(),
            "z": self.z.tolist(),
            "t": self.t.tolist(),
            "ratio": np.exp(self.log_ratios).tolist(),
        }


def _snap_gamma(gamma, step, multiple):
    cells = int(math.floor(gamma / step + 1e-9))
    return (cells // multiple) * multiple


def find_escape_sequences(v, cert, N, x_max, step, cell_multiple=2):
    """Greedy left-to-right search for escape sequences.

    For each level ``n`` the earliest node ``z_n`` is taken that admits some
    ``y_n`` with ``z_{n-1} < y_n``, ``z_n - y_n > gamma``,
    ``v(y_n)/v(z_n) > 2**n`` and ``z_n + gamma <= x_max``; ``y_n`` is the
    first maximiser of ``v`` over the allowed range. ``gamma`` is the
    certificate's window snapped down to a multiple of ``cell_multiple`` cells.

    Raises
    ------
    HorizonExhausted
        When some level cannot be placed; ``levels`` counts the levels found.
    GridTooCoarse
        When the snapped window is shorter than ``cell_multiple`` cells.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    g = _snap_gamma(cert.gamma, step, cell_multiple)
    if g < max(cell_multiple, 2):
        raise GridTooCoarse(
            f"gamma={cert.gamma:.6g} spans fewer than {max(cell_multiple, 2)} cells of {step}"
        )
    xs = grid(x_max, step)
    lv = v.log_evaluate(xs)
    n_cells = len(xs) - 1
    z_hi = n_cells - g

    ys, zs, logs = [], [], []
    y_lo = 0
    for level in range(1, N + 1):
        z_lo = y_lo + g + 1
        if z_lo > z_hi:
            raise HorizonExhausted(level - 1)
        running = np.maximum.accumulate(lv[y_lo:z_hi - g])
        cand = np.arange(z_lo, z_hi + 1)
        drops = running[cand - g - 1 - y_lo] - lv[cand]
        hits = np.nonzero(drops > level * LN2 + 1e-12)[0]
        if hits.size == 0:
            raise HorizonExhausted(level - 1)
        z = int(cand[hits[0]])
        y = y_lo + int(np.argmax(lv[y_lo:z - g]))
        ys.append(y)
        zs.append(z)
        logs.append(float(lv[y] - lv[z]))
        y_lo = z + 1
    return EscapeSequences(
        y_idx=np.array(ys), z_idx=np.array(zs), gamma_steps=g, step=float(step),
        M=cert.M, w=cert.w, log_ratios=np.array(logs),
    )


def _check_grid(seq, spec):
    if not math.isclose(seq.step, spec.step):
        raise ValueError("escape sequences were found on a different grid")
    if seq.z_idx[-1] + seq.gamma_steps > spec.n_cells:
        raise ValueError("z_N + gamma exceeds x_max")


def _tent_into(out, lo, hi, height):
    k = np.arange(lo, hi + 1)
    mid = 0.5 * (lo + hi)
    out[lo:hi + 1] = height * (1.0 - np.abs(k - mid) / (0.5 * (hi - lo)))


def build_nonvanishing_witness(seq, spec):
    """A function whose orbit does not tend to 0.

    ``Lp``: the constant ``(1 / (v(z_n) 2**n))**(1/p)`` on each
    ``[z_n - gamma, z_n]``. ``C0v``: a tent on each such interval with peak
    ``1 / (v(z_n) 2**n)`` at the midpoint.
    """
    _check_grid(seq, spec)
    out = np.zeros(spec.n_cells + 1)
    log_vz = spec.log_v_nodes[seq.z_idx]
    for n, (z, lz) in enumerate(zip(seq.z_idx, log_vz), start=1):
        log_h = -(lz + n * LN2)
        if spec.mode is Mode.C0V:
            _tent_into(out, z - seq.gamma_steps, z, math.exp(log_h))
        else:
            out[z - seq.gamma_steps:z] = math.exp(log_h / spec.p)
    return spec.from_samples(out)


def verify_nonvanishing(f, seq, spec, lower_tol=0.05, upper_tol=0.01):
    """Check every norm inequality the construction promises.

    Returns a list of row dicts ``(check, n, measured, bound, passed)``. In
    ``Lp`` the quantities are ``p``-th powers; in ``C0v`` they are sup norms,
    where the total bound is ``M`` and the orbit bound is ``1/(2M)``.
    """
    M, gamma = seq.M, seq.gamma
    lp = spec.mode is Mode.LP
    rows = []

    def add(check, n, measured, bound, upper):
        passed = measured <= bound * (1 + upper_tol) if upper else measured >= bound * (1 - lower_tol)
        rows.append({"check": check, "n": n, "measured": measured, "bound": bound,
                     "passed": bool(passed)})

    total_bound = 2 * M * gamma if lp else M
    add("norm_total", 0, norm_p(f, spec), total_bound, True)
    for n, (z, t) in enumerate(zip(seq.z_idx, seq.t), start=1):
        piece = np.zeros_like(f.samples)
        piece[z - seq.gamma_steps:z + 1] = f.samples[z - seq.gamma_steps:z + 1]
        piece_bound = (M * gamma if lp else M) / 2 ** (n - 1)
        add("norm_piece", n, norm_p(spec.from_samples(piece, f.interpretation), spec),
            piece_bound, True)
        orbit_bound = gamma / (2 * M) if lp else 1 / (2 * M)
        add("orbit_lower", n, norm_p(translate(f, t), spec), orbit_bound, False)
    return rows


# -- separated family ---------------------------------------------------------


def a_schedule(kind, N, gamma_steps=None, cap=MEMBER_CAP):
    """Subinterval counts ``a_1, ..., a_N``.

    ``"factorial"`` gives ``a_n = n!``; ``"square"`` gives ``2**(n*n)`` clipped
    so that every subinterval keeps two cells (needs ``gamma_steps``) and the
    total member count stays within ``cap``.
    """
    if isinstance(kind, (list, tuple)):
        out = tuple(int(a) for a in kind)
        if len(out) < N:
            raise ValueError(f"schedule has {len(out)} entries, need {N}")
        return out[:N]
    if kind == "factorial":
        return tuple(math.factorial(n) for n in range(1, N + 1))
    if kind == "square":
        limit = cap if gamma_steps is None else min(cap, gamma_steps // 2)
        out, used = [], 0
        for n in range(1, N + 1):
            a = max(1, min(2 ** (n * n), limit, cap - used))
            out.append(a)
            used += a
        return tuple(out)
    raise ValueError(f"unknown a_n schedule {kind!r}")


def required_cell_multiple(a, mode):
    """Cells per ``gamma`` needed for every ``J_n`` to split evenly into ``a_n`` pieces."""
    lcm = reduce(math.lcm, (int(x) for x in a), 1)
    return lcm * (2 if Mode(mode) is Mode.C0V else 1)


def separation_bound(seq, spec):
    """Guaranteed distance between level-``n`` members at time ``t_n``.

    ``gamma / M`` for the ``p``-th power in ``Lp``; ``1 / (2M)`` in ``C0v``.
    """
    if spec.mode is Mode.C0V:
        return 1.0 / (2 * seq.M)
    return seq.gamma / seq.M


def separation_epsilon(seq, spec):
    """Half the guaranteed separation, expressed as a plain distance."""
    if spec.mode is Mode.C0V:
        return 0.5 * separation_bound(seq, spec)
    return 0.5 * separation_bound(seq, spec) ** (1.0 / spec.p)


@dataclass
class SeparatedFamily:
    """Functions ``f_phi`` supported on one subinterval ``J_n^{phi(n)}`` per level.

    ``pieces[n-1][k-1]`` is the half-open cell range ``(lo, hi)`` of
    ``J_n^k = [z_n - k gamma/a_n, z_n - (k-1) gamma/a_n]``. ``levels[n]``
    lists the indices ``phi`` of the ``a_n`` members that differ only at level
    ``n``; ``members`` caches every materialised function.
    """

    sequences: EscapeSequences
    a: Tuple[int, ...]
    spec: SpaceSpec
    pieces: List[List[Tuple[int, int]]]
    log_amplitudes: np.ndarray
    base: Tuple[int, ...]
    levels: Dict[int, List[Tuple[int, ...]]] = field(default_factory=dict)
    samples: List[Tuple[int, ...]] = field(default_factory=list)
    members: Dict[Tuple[int, ...], GridFunction] = field(default_factory=dict)

    def intervals(self, n):
        """``J_n^k`` as coordinate pairs, ``k = 1..a_n``."""
        h = self.spec.step
        return [(lo * h, hi * h) for lo, hi in self.pieces[n - 1]]

    def member(self, phi):
        phi = tuple(int(k) for k in phi)
        if phi in self.members:
            return self.members[phi]
        if len(phi) != len(self.a) or any(not 1 <= k <= a for k, a in zip(phi, self.a)):
            raise ValueError(f"phi={phi} is outside prod {{1..a_n}}")
        out = np.zeros(self.spec.n_cells + 1)
        for n, k in enumerate(phi, start=1):
            lo, hi = self.pieces[n - 1][k - 1]
            amp = math.exp(self.log_amplitudes[n - 1])
            if self.spec.mode is Mode.C0V:
                _tent_into(out, lo, hi, amp)
            else:
                out[lo:hi] = amp
        f = self.spec.from_samples(out)
        self.members[phi] = f
        return f

    def level_members(self, n):
        return [self.member(phi) for phi in self.levels[n]]

    def to_dict(self):
        return {
            "sequences": self.sequences.to_dict(),
            "a": list(self.a),
            "base": list(self.base),
            "intervals": [self.intervals(n) for n in range(1, len(self.a) + 1)],
            "amplitudes": np.exp(self.log_amplitudes).tolist(),
            "sampled_phi": [list(p) for p in self.samples],
        }


def build_separated_family(seq, a, sample_budget, spec, rng=None, base=None):
    """Materialise the separated family over the escape sequences.

    For each level ``n`` the ``a_n`` members ``phi_i`` with ``phi_i(n) = i``
    and ``phi_i = base`` elsewhere are built, plus ``sample_budget`` random
    ``phi``. In ``Lp`` a member equals ``(a_n / (v(z_n) 2**n))**(1/p)`` on its
    chosen subinterval. In ``C0v`` it is a tent of height ``1 / (v(z_n) 2**n)``
    there; the factor ``a_n`` is dropped because a sup norm does not shrink
    with the subinterval width.

    Raises
    ------
    GridTooCoarse
        If a subinterval would be narrower than two cells or the pieces do not
        tile ``J_n`` on whole cells (tents also need an even cell count).
    """
    _check_grid(seq, spec)
    a = tuple(int(x) for x in a[:seq.N])
    if len(a) < seq.N or any(x < 1 for x in a):
        raise ValueError("need a positive a_n for every level")
    if sum(a) + sample_budget > MEMBER_CAP:
        raise ValueError(f"more than {MEMBER_CAP} members requested")
    g = seq.gamma_steps
    pieces, log_amp = [], []
    for n, (an, z) in enumerate(zip(a, seq.z_idx), start=1):
        if g < 2 * an:
            raise GridTooCoarse(f"gamma/a_{n} = {seq.gamma / an:.6g} is below two cells")
        if g % an or (spec.mode is Mode.C0V and (g // an) % 2):
            raise GridTooCoarse(
                f"{g} cells of J_{n} do not split evenly into {an} pieces; "
                f"snap gamma to a multiple of {required_cell_multiple(a, spec.mode)} cells"
            )
        width = g // an
        pieces.append([(z - k * width, z - (k - 1) * width) for k in range(1, an + 1)])
        log_scale = -(spec.log_v_nodes[z] + n * LN2)
        if spec.mode is Mode.C0V:
            log_amp.append(log_scale)
        else:
            log_amp.append((math.log(an) + log_scale) / spec.p)

    base = tuple(base) if base is not None else (1,) * seq.N
    fam = SeparatedFamily(seq, a, spec, pieces, np.array(log_amp), base)
    for n in range(1, seq.N + 1):
        fam.levels[n] = [base[:n - 1] + (i,) + base[n:] for i in range(1, a[n - 1] + 1)]
    if sample_budget:
        rng = rng if rng is not None else np.random.default_rng(0)
        for _ in range(sample_budget):
            fam.samples.append(tuple(int(rng.integers(1, an + 1)) for an in a))

    bound = 2 * seq.M * seq.gamma if spec.mode is Mode.LP else seq.M
    for phi in [p for lvl in fam.levels.values() for p in lvl] + fam.samples:
        size = norm_p(fam.member(phi), spec)
        if size > bound * (1 + 1e-9):
            raise RuntimeError(f"member {phi} has norm {size:.6g} above the bound {bound:.6g}")
    return fam


# -- periodic and windowed witnesses -----------------------------------------


def build_periodic_witness(spec, period, shape, tail_fraction=0.1):
    """Periodic extension of ``shape`` (samples on ``[0, period]``) over the grid.

    ``T_period f = f`` holds exactly on ``[0, x_max - period]``.

    Raises
    ------
    NormDiverged
        In ``Lp`` if more than ``tail_fraction`` of ``||f||^p`` sits in the last
        decade ``[x_max/10, x_max]``; in ``C0v`` if the sup of ``|f| v`` over
        ``[x_max/2, x_max]`` exceeds ``tail_fraction`` times the norm.
    """
    P = spec.steps(period)
    if P < 1 or P > spec.n_cells:
        raise ValueError("period must be a positive grid multiple within x_max")
    base = shape.samples if isinstance(shape, GridFunction) else np.asarray(shape, dtype=float)
    if base.shape != (P + 1,):
        raise ValueError(f"shape must have {P + 1} samples (one period plus the end node)")
    interp = shape.interpretation if isinstance(shape, GridFunction) else spec.interpretation
    idx = np.arange(spec.n_cells + 1) % P
    f = spec.from_samples(base[idx], interp)
    if not np.any(f.samples):
        raise ValueError("periodic witness must be nonzero")

    if spec.mode is Mode.C0V:
        weighted = np.abs(f.samples) * spec.v_nodes
        tail = np.max(weighted[spec.n_cells // 2:]) / np.max(weighted)
    else:
        whole = norm_p(f, spec)
        head = norm_p(restrict(f, (spec.n_cells // 10) * spec.step), spec) if spec.n_cells >= 10 else 0.0
        tail = (whole - head) / whole if whole > 0 else 0.0
    if not math.isfinite(tail) or tail > tail_fraction:
        raise NormDiverged(f"{tail:.3g} of the norm sits in the tail; the weight is not integrable enough")
    return f


@dataclass(frozen=True)
class WindowedWitness:
    """Sum of unit bumps whose windowed orbit norm stays at least ``c0``."""

    f: GridFunction
    visit_times: np.ndarray
    c0: float
    window: float
    bump_norms: np.ndarray


def build_windowed_witness(spec, a, K):
    """Unit bumps on ``[x_k, x_k + a]`` placed where ``v`` is small.

    Site ``k`` is the earliest node after the previous bump where the bump's
    contribution (``||b_k||^p`` in ``Lp``, ``||b_k||`` in ``C0v``) is at most
    ``2**-k``, so the norm of the sum stays below 1. Translating by ``x_k``
    brings bump ``k`` onto the window ``[0, a]``, hence
    ``||(T_{x_k} f) chi_[0,a]|| = c0``, the windowed norm of one unit bump at
    the origin.

    Raises
    ------
    NoSmallWeightSites
        If fewer than ``K`` sites exist before ``x_max``.
    """
    A = spec.steps(a)
    min_cells = 2 if spec.mode is Mode.C0V else 1
    if A < min_cells or A >= spec.n_cells:
        raise ValueError("window width must span at least one cell and fit in the grid")
    n = spec.n_cells
    if spec.mode is Mode.C0V:
        shape = spec.tent(0, A * spec.step).samples[:A + 1]
        contrib = np.max(sliding_window_view(spec.v_nodes, A + 1) * shape, axis=1)
    else:
        cum = np.concatenate([[0.0], np.cumsum(spec.v_mid_weights)])
        contrib = cum[A:] - cum[:-A]
    # contrib[i] is the bump contribution for a bump starting at node i

    sites = []
    pos = A
    for k in range(1, K + 1):
        last = n - A
        if pos > last:
            raise NoSmallWeightSites(k - 1)
        ok = np.nonzero(contrib[pos:last + 1] <= 2.0 ** -k)[0]
        if ok.size == 0:
            raise NoSmallWeightSites(k - 1)
        site = pos + int(ok[0])
        sites.append(site)
        pos = site + A

    out = np.zeros(n + 1)
    for s in sites:
        out += spec.bump(s * spec.step, (s + A) * spec.step).samples
    f = spec.from_samples(out)
    unit = spec.bump(0.0, A * spec.step)
    c0 = norm(restrict(unit, A * spec.step), spec)
    return WindowedWitness(
        f=f,
        visit_times=np.array(sites) * spec.step,
        c0=c0,
        window=A * spec.step,
        bump_norms=contrib[sites],
    )
