"""Orbit diagnostics and epsilon-chains for the translation semigroup.

Asymptotic statements (``liminf``, ``limsup``, ``t -> inf``) are replaced by
statistics over a finite horizon. Every verdict carries that horizon so an
``inconclusive`` answer stays honest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import ContractionViolated, SupportOverflow
from .space import (
    GridFunction,
    Interpretation,
    Mode,
    SpaceSpec,
    distance,
    norm,
    restrict,
    shift_right,
    shifted_norms,
    translate,
)
from .weights import WeightKind

__all__ = [
    "OrbitTrace",
    "LiYorkeVerdict",
    "ProbeResult",
    "Chain",
    "EscapeReport",
    "orbit_trace",
    "li_yorke_check",
    "occupancy_densities",
    "distributional_densities",
    "uniform_bound_probe",
    "valley_probes",
    "build_chain_constant_weight",
    "decay_chain",
    "concatenate",
    "verify_chain",
    "contraction_factor",
    "chain_escape_test",
]

TOL_ZERO = 1e-9


@dataclass(frozen=True)
class OrbitTrace:
    f: GridFunction
    times: np.ndarray
    norms: np.ndarray
    window: Optional[float] = None
    windowed: Optional[np.ndarray] = None

    def rows(self):
        if self.windowed is None:
            return [(float(t), float(n)) for t, n in zip(self.times, self.norms)]
        return [(float(t), float(n), float(w)) for t, n, w in zip(self.times, self.norms, self.windowed)]


def _orbit_norms(h, spec, t_list):
    ks = np.array([spec.steps(t) for t in t_list], dtype=int)
    if ks.size == 0:
        return ks, np.zeros(0)
    prof = shifted_norms(h, spec, int(ks.max()))
    return ks, prof[ks]


def orbit_trace(f, spec, t_list, window=None):
    """``||T_t f||`` at every ``t`` in ``t_list``, optionally also windowed to ``[0, a]``."""
    ks, norms = _orbit_norms(f, spec, t_list)
    times = ks * spec.step
    windowed = None
    if window is not None:
        windowed = np.array([norm(restrict(translate(f, t), window), spec) for t in times])
    return OrbitTrace(f, times, norms, window, windowed)


@dataclass(frozen=True)
class LiYorkeVerdict:
    verdict: str
    min_distance: float
    trailing_max: float
    tol_zero: float
    delta: float
    horizon: float


def li_yorke_check(f, g, spec, t_list, delta):
    """Horizon-relative Li-Yorke test on the orbit distance ``d(t) = ||T_t (f - g)||``.

    ``scrambled`` needs ``min d < tol_zero`` and ``max d > delta`` over the
    trailing half of ``t_list``; ``not_scrambled`` means neither holds; any
    other combination is ``inconclusive``. ``tol_zero`` is ``1e-9 ||f - g||``.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    t_list = sorted(t_list)
    h = f - g
    tol = TOL_ZERO * norm(h, spec)
    _, d = _orbit_norms(h, spec, t_list)
    d_min = float(np.min(d))
    tail = float(np.max(d[len(d) // 2:]))
    near = d_min < tol
    far = tail > delta
    if near and far:
        verdict = "scrambled"
    elif not near and not far:
        verdict = "not_scrambled"
    else:
        verdict = "inconclusive"
    return LiYorkeVerdict(verdict, d_min, tail, tol, delta, float(t_list[-1]))


def occupancy_densities(distances, delta, eps, tail="log"):
    """Lower and upper closeness densities of a sampled distance profile.

    ``distances[k]`` is ``d(T_s f, T_s g)`` at ``s = k * step``. The fraction
    of ``[0, t)`` where ``d < delta`` is minimised, and the fraction where
    ``d < eps`` maximised, over horizons ``t`` in a trailing range of
    ``(0, T]``. ``tail="linear"`` uses ``[T/2, T]``; ``tail="log"`` uses
    ``[sqrt(T), T]`` in cell units, the trailing half on a logarithmic clock.
    """
    d = np.asarray(distances, dtype=float)
    K = d.size - 1
    if K < 1:
        raise ValueError("need at least one cell of horizon")
    k = np.arange(1, K + 1)
    close_delta = np.cumsum(d[:-1] < delta) / k
    close_eps = np.cumsum(d[:-1] < eps) / k
    if tail == "linear":
        start = max(1, (K + 1) // 2)
    elif tail == "log":
        start = max(1, int(math.ceil(math.sqrt(K))))
    else:
        raise ValueError(f"unknown tail {tail!r}")
    return float(np.min(close_delta[start - 1:])), float(np.max(close_eps[start - 1:]))


def distributional_densities(f, g, spec, horizon, delta, eps, tail="log"):
    """Occupancy-density proxies for distributional chaos of the pair ``(f, g)``."""
    K = spec.steps(horizon)
    d = shifted_norms(f - g, spec, K)
    return occupancy_densities(d, delta, eps, tail)


@dataclass(frozen=True)
class ProbeResult:
    max_ratio: float
    ratios: np.ndarray  # shape (probes, times)
    argmax: tuple  # (probe index, t)


def uniform_bound_probe(spec, t_list, probe_functions):
    """Largest observed ``||T_t f|| / ||f||`` over probes and times."""
    ratios = []
    for f in probe_functions:
        base = norm(f, spec)
        if base == 0:
            raise ValueError("probe functions must be nonzero")
        _, d = _orbit_norms(f, spec, t_list)
        ratios.append(d / base)
    ratios = np.array(ratios)
    i, j = np.unravel_index(int(np.argmax(ratios)), ratios.shape)
    return ProbeResult(float(ratios[i, j]), ratios, (int(i), float(t_list[j])))


def valley_probes(spec, levels, width=None):
    """Indicator probes in the baseline valley after each spike of a spike train.

    Returns ``(probe, t)`` pairs; translating by ``t`` moves the probe onto the
    rising edge of spike ``n`` where ``v`` reaches ``e**n``.
    """
    v = spec.weight
    if v.kind is not WeightKind.SPIKE_TRAIN or "positions" in v.params:
        raise ValueError("valley probes need a generated spike train")
    decay, gap = v.params["decay"], v.params["gap"]
    width = min(gap, math.log(2.0)) if width is None else width
    width = spec.steps(math.floor(width / spec.step + 1e-9) * spec.step) * spec.step
    pos = v.spike_positions(spec.x_max)
    out = []
    for n, xn in enumerate(pos[:levels], start=1):
        t = math.ceil(n / decay / spec.step - 1e-9) * spec.step
        lo = round(xn / spec.step) * spec.step + t
        if lo + width > spec.x_max:
            break
        out.append((spec.bump(lo, lo + width), t))
    return out


# -- epsilon-chains --------------------------------------------------------


@dataclass
class Chain:
    """Points ``g_0, ..., g_n`` with ``d(T_t g_i, g_{i+1}) < epsilon``."""

    points: List[GridFunction]
    t: float
    epsilon: float

    def __len__(self):
        return len(self.points)

    def step_errors(self, spec):
        return np.array([
            distance(translate(a, self.t), b, spec) for a, b in zip(self.points, self.points[1:])
        ])


def verify_chain(chain, spec):
    """``(ok, errors)``: every step error must be strictly below ``epsilon``."""
    errs = chain.step_errors(spec)
    return bool(np.all(errs < chain.epsilon)), errs


def build_chain_constant_weight(g, spec, t, epsilon):
    """Chain from 0 to ``g`` through scaled right-shifted copies of ``g``.

    ``g_i = (i/n) T_t^{-(n-i)} g`` with ``n = floor(||g|| / epsilon) + 1``.
    Under a constant weight right shifts are isometries, so every step error
    equals ``||g|| / n``.

    Raises
    ------
    SupportOverflow
        If ``g`` shifted right by ``n t`` leaves the grid.
    """
    if spec.weight.kind is not WeightKind.CONSTANT:
        raise ValueError("this construction needs a constant weight")
    size = norm(g, spec)
    if size == 0:
        return Chain([g], t, epsilon)
    n = int(math.floor(size / epsilon)) + 1
    shifted = [g]
    for _ in range(n):
        shifted.append(shift_right(shifted[-1], t))
    # shifted[k] = T^{-k} g
    points = [shifted[n - i] * (i / n) for i in range(n + 1)]
    return Chain(points, t, epsilon)


def decay_chain(f, spec, t, epsilon, max_steps=100_000):
    """The orbit ``<f, T f, ..., T^{n-1} f, 0>`` stopped once ``||T^n f|| < epsilon``."""
    points = [f]
    cur = f
    for _ in range(max_steps):
        nxt = translate(cur, t)
        if norm(nxt, spec) < epsilon:
            points.append(spec.from_samples(np.zeros_like(f.samples), f.interpretation))
            return Chain(points, t, epsilon)
        points.append(nxt)
        cur = nxt
    raise RuntimeError(f"orbit did not come within {epsilon} of 0 in {max_steps} steps")


def concatenate(first, second):
    """Join two chains whose end and start points coincide."""
    if not (math.isclose(first.t, second.t) and math.isclose(first.epsilon, second.epsilon)):
        raise ValueError("chains use different T or epsilon")
    if not first.points[-1].equals(second.points[0]):
        raise ValueError("first chain does not end where the second starts")
    return Chain(first.points + second.points[1:], first.t, first.epsilon)


# -- contraction under exponential weights ------------------------------------


def contraction_factor(spec, t):
    """``c**(-t/p)`` in ``Lp``, ``c**(-t)`` in ``C0v``, for ``v(x) = c**x``."""
    v = spec.weight
    if v.kind is not WeightKind.EXPONENTIAL:
        raise ValueError("contraction needs an exponential weight")
    c = v.params["base"]
    power = 1.0 if spec.mode is Mode.C0V else 1.0 / spec.p
    return c ** (-t * power)


@dataclass
class EscapeReport:
    verdict: str
    factor: float
    measured_ratios: np.ndarray
    radius: float
    epsilon: float
    steps: int
    max_norm: float
    ball_violations: int
    greedy_steps: int
    random_steps: int
    evidence: dict = field(default_factory=dict)


def _random_function(spec, rng, lo=0, interpretation=None):
    samples = np.zeros(spec.n_cells + 1)
    samples[lo:] = rng.standard_normal(spec.n_cells + 1 - lo)
    return spec.from_samples(samples, interpretation)


def chain_escape_test(spec, t, f, epsilon, search_budget, rng=None, pairs=20, tol=1e-6):
    """Try to build an epsilon-chain from 0 to ``f`` under a contraction.

    First the identity ``||T h|| = factor ||h||`` is checked on random ``h``
    vanishing on ``[0, t)`` and the inequality ``||T h|| <= factor ||h||`` on
    unrestricted ``h``. Then a chain is grown from 0 for ``search_budget``
    steps, alternating at random between pushing along ``T g_i`` (norm
    maximising) and a random perturbation, each of norm below ``epsilon``.
    The walk escapes if some ``T g_i`` lands within ``epsilon`` of ``f`` or a
    point leaves the ball of radius ``||f||/2``; the ball condition is checked
    after every step.

    Raises
    ------
    ContractionViolated
        If the identity or inequality fails beyond ``tol``.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    factor = contraction_factor(spec, t)
    k = spec.steps(t)
    ratios = []
    for i in range(pairs):
        a = _random_function(spec, rng, lo=k)
        b = _random_function(spec, rng, lo=k)
        h = a - b
        r = norm(translate(h, t), spec) / norm(h, spec)
        ratios.append(r)
        if abs(r - factor) > tol * factor:
            raise ContractionViolated(f"ratio {r:.12g} differs from {factor:.12g}")
        free = _random_function(spec, rng)
        if norm(translate(free, t), spec) > factor * norm(free, spec) * (1 + tol):
            raise ContractionViolated("translation expands a function under an exponential weight")

    size = norm(f, spec)
    radius = 0.5 * size
    g = spec.from_samples(np.zeros(spec.n_cells + 1), f.interpretation)
    shrink = 1.0 - 1e-9
    violations = greedy = rand = 0
    peak = 0.0
    verdict = "no_escape"
    steps = 0
    for steps in range(1, search_budget + 1):
        Tg = translate(g, t)
        if distance(Tg, f, spec) < epsilon:
            verdict = "escaped"
            break
        tg_norm = norm(Tg, spec)
        if rng.random() < 0.5 and tg_norm > 0:
            nxt = Tg * (1.0 + epsilon * shrink / tg_norm)
            greedy += 1
        else:
            e = _random_function(spec, rng, interpretation=f.interpretation)
            e = e * (rng.uniform(0.0, epsilon) * shrink / norm(e, spec))
            nxt = Tg + e
            rand += 1
        size_next = norm(nxt, spec)
        peak = max(peak, size_next)
        if size_next >= radius:
            violations += 1
            verdict = "escaped"
            break
        g = nxt
    return EscapeReport(
        verdict=verdict, factor=factor, measured_ratios=np.array(ratios), radius=radius,
        epsilon=epsilon, steps=steps, max_norm=peak, ball_violations=violations,
        greedy_steps=greedy, random_steps=rand,
        evidence={"bound": (0.5 - 0.5 * factor) * size},
    )
