"""Weight functions on the half line, admissibility certificates and tier evidence.

All internal arithmetic is done on ``log v`` so that exponentially growing or
decaying weights can be examined on long horizons without overflow.
"""

from __future__ import annotations

import dataclasses
import enum
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DomainError, InconclusiveEvidence, NotAdmissible

__all__ = [
    "WeightKind",
    "WeightFunction",
    "AdmissibilityCertificate",
    "Tier",
    "TierReport",
    "W_LATTICE",
    "M_LATTICE",
    "grid",
    "evaluate",
    "certify_admissibility",
    "sup_ratio",
    "classify_tier",
]

W_LATTICE = tuple(0.25 * k for k in range(33))  # 0, 0.25, ..., 8
M_LATTICE = tuple(1.0 + 0.5 * k for k in range(127))  # 1, 1.5, ..., 64
DEFAULT_GAMMA = 1.0

_LOG_TOL = 1e-12


class WeightKind(str, enum.Enum):
    CONSTANT = "constant"
    EXPONENTIAL = "exponential"
    RATIONAL_DECAY = "rational_decay"
    INTEGRABLE_EXP = "integrable_exp"
    SPIKE_TRAIN = "spike_train"
    TABULATED = "tabulated"


def grid(x_max, step):
    """Uniform nodes ``0, step, ..., x_max``; ``x_max/step`` must be an integer."""
    n = _cell_count(x_max, step)
    return step * np.arange(n + 1, dtype=float)


def _cell_count(x_max, step):
    if not step > 0:
        raise ValueError(f"step must be positive, got {step}")
    n = int(round(x_max / step))
    if n < 1 or abs(n * step - x_max) > 1e-9 * max(1.0, abs(x_max)):
        raise ValueError(f"x_max={x_max} is not a positive multiple of step={step}")
    return n


@dataclass(frozen=True)
class AdmissibilityCertificate:
    """Certified constants with ``v(x) <= M exp(w t) v(x + t)`` on a grid."""

    M: float
    w: float
    gamma: float
    x_max: float
    step: float

    def to_dict(self):
        return dataclasses.asdict(self)


@dataclass(frozen=True, eq=False)
class WeightFunction:
    """A strictly positive weight ``v`` on ``[0, inf)``.

    Use the named constructors (``constant``, ``spike_train``, ...) rather than
    building one directly.
    """

    kind: WeightKind
    params: dict = field(default_factory=dict)
    certificate: Optional[AdmissibilityCertificate] = None

    # -- constructors -------------------------------------------------------

    @classmethod
    def constant(cls, c=1.0):
        if not c > 0:
            raise ValueError("constant weight must be positive")
        return cls(WeightKind.CONSTANT, {"c": float(c)})

    @classmethod
    def exponential(cls, base):
        """``v(x) = base**x``."""
        if not base > 0:
            raise ValueError("exponential base must be positive")
        return cls(WeightKind.EXPONENTIAL, {"base": float(base)})

    @classmethod
    def rational_decay(cls):
        """``v(x) = 1 / (1 + x)``."""
        return cls(WeightKind.RATIONAL_DECAY, {})

    @classmethod
    def integrable_exp(cls):
        """``v(x) = exp(-x)``."""
        return cls(WeightKind.INTEGRABLE_EXP, {})

    @classmethod
    def spike_train(cls, decay=1.0, gap=1.0, first=1.0, positions=None):
        """Baseline 1 with a spike of height ``e**n`` at ``x_n``.

        Each spike rises instantly and then decays like ``exp(-decay * (x - x_n))``
        until it meets the baseline. Unless ``positions`` is given, spikes sit at
        ``x_1 = first`` and ``x_{n+1} = x_n + n / decay + gap``, so every spike
        has fully decayed before the next one starts.
        """
        if not decay > 0:
            raise ValueError("spike decay rate must be positive")
        params = {"decay": float(decay), "gap": float(gap), "first": float(first)}
        if positions is not None:
            pos = np.asarray(positions, dtype=float)
            if pos.ndim != 1 or pos.size == 0 or np.any(np.diff(pos) <= 0) or pos[0] < 0:
                raise ValueError("spike positions must be increasing and non-negative")
            params["positions"] = tuple(float(p) for p in pos)
        return cls(WeightKind.SPIKE_TRAIN, params)

    @classmethod
    def tabulated(cls, xs, values):
        """Samples on ``[0, xs[-1]]``, interpolated linearly in ``log v``."""
        xs = np.asarray(xs, dtype=float)
        values = np.asarray(values, dtype=float)
        if xs.ndim != 1 or xs.shape != values.shape or xs.size < 2:
            raise ValueError("tabulated weight needs matching 1-d arrays of length >= 2")
        if xs[0] != 0.0 or np.any(np.diff(xs) <= 0):
            raise ValueError("tabulated nodes must start at 0 and increase strictly")
        if np.any(~(values > 0)) or not np.all(np.isfinite(values)):
            raise ValueError("tabulated weight values must be finite and strictly positive")
        xs.setflags(write=False)
        log_values = np.log(values)
        log_values.setflags(write=False)
        return cls(WeightKind.TABULATED, {"xs": xs, "log_values": log_values})

    @classmethod
    def from_mapping(cls, mapping):
        """Build from a plain mapping such as one read from a config file."""
        kind = WeightKind(str(mapping["kind"]).strip().lower())
        if kind is WeightKind.CONSTANT:
            return cls.constant(float(mapping.get("c", 1.0)))
        if kind is WeightKind.EXPONENTIAL:
            return cls.exponential(float(mapping["base"]))
        if kind is WeightKind.RATIONAL_DECAY:
            return cls.rational_decay()
        if kind is WeightKind.INTEGRABLE_EXP:
            return cls.integrable_exp()
        if kind is WeightKind.SPIKE_TRAIN:
            return cls.spike_train(
                decay=float(mapping.get("decay", 1.0)),
                gap=float(mapping.get("gap", 1.0)),
                first=float(mapping.get("first", 1.0)),
                positions=mapping.get("positions"),
            )
        return cls.tabulated(mapping["xs"], mapping["values"])

    # -- evaluation ---------------------------------------------------------

    @property
    def x_max(self):
        """Right end of the domain (``inf`` for closed-form kinds)."""
        if self.kind is WeightKind.TABULATED:
            return float(self.params["xs"][-1])
        return math.inf

    def spike_positions(self, upto):
        """Spike positions ``x_1 < x_2 < ...`` not exceeding ``upto``."""
        if self.kind is not WeightKind.SPIKE_TRAIN:
            raise TypeError("only spike trains have spike positions")
        if "positions" in self.params:
            pos = np.asarray(self.params["positions"])
            return pos[pos <= upto]
        decay, gap = self.params["decay"], self.params["gap"]
        out = []
        x, n = self.params["first"], 1
        while x <= upto:
            out.append(x)
            x += n / decay + gap
            n += 1
        return np.asarray(out, dtype=float)

    def log_evaluate(self, x):
        """``log v(x)``, vectorised over ``x``."""
        x = np.asarray(x, dtype=float)
        if np.any(x < 0):
            raise DomainError("weights are defined on [0, inf) only")
        kind, params = self.kind, self.params
        if kind is WeightKind.CONSTANT:
            return np.full_like(x, math.log(params["c"]))
        if kind is WeightKind.EXPONENTIAL:
            return x * math.log(params["base"])
        if kind is WeightKind.RATIONAL_DECAY:
            return -np.log1p(x)
        if kind is WeightKind.INTEGRABLE_EXP:
            return -x
        if kind is WeightKind.SPIKE_TRAIN:
            return self._spike_log(np.atleast_1d(x)).reshape(x.shape)
        xs = params["xs"]
        if np.any(x > xs[-1] * (1 + 1e-12)):
            raise DomainError(f"tabulated weight is only defined on [0, {xs[-1]}]")
        return np.interp(x, xs, params["log_values"])

    def _spike_log(self, x):
        decay = self.params["decay"]
        top = float(np.max(x)) if x.size else 0.0
        pos = self.spike_positions(top)
        out = np.zeros_like(x)
        if pos.size == 0:
            return out
        if "positions" not in self.params:
            # generated spikes never overlap, so only the latest one matters
            k = np.searchsorted(pos, x, side="right") - 1
            live = k >= 0
            kk = k[live]
            out[live] = np.maximum(0.0, (kk + 1) - decay * (x[live] - pos[kk]))
            return out
        for n, xn in enumerate(pos, start=1):
            after = x >= xn
            out[after] = np.maximum(out[after], n - decay * (x[after] - xn))
        return out

    def evaluate(self, x):
        return np.exp(self.log_evaluate(x))

    __call__ = evaluate

    def with_certificate(self, certificate):
        return dataclasses.replace(self, certificate=certificate)

    def describe(self):
        """JSON-friendly description (tabulated samples are summarised)."""
        out = {"kind": self.kind.value}
        for key, val in self.params.items():
            if isinstance(val, np.ndarray):
                out[key] = f"<{val.size} samples>"
            else:
                out[key] = list(val) if isinstance(val, tuple) else val
        return out


def evaluate(v, x):
    """``v(x)`` for a scalar or array ``x``."""
    out = v.evaluate(x)
    return float(out) if np.ndim(out) == 0 else out


# -- admissibility ----------------------------------------------------------


def _grid_log_weight(v, x_max, step):
    xs = grid(x_max, step)
    if x_max > v.x_max * (1 + 1e-12):
        raise DomainError(f"x_max={x_max} exceeds the weight's domain [0, {v.x_max}]")
    lv = v.log_evaluate(xs)
    if not np.all(np.isfinite(lv)):
        raise ValueError("weight is not strictly positive and finite on the grid")
    return xs, lv


def _suffix_min(a):
    return np.minimum.accumulate(a[::-1])[::-1]


def _log_sup_ratio(lv):
    """Max of ``lv[i] - lv[j]`` over ``i <= j`` and an achieving pair."""
    suf = _suffix_min(lv)
    gaps = lv - suf
    i = int(np.argmax(gaps))
    j = i + int(np.argmax(lv[i:] == suf[i]))
    return float(gaps[i]), i, j


def _safe_exp(x):
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def certify_admissibility(v, x_max, step, *, w_lattice=W_LATTICE, m_lattice=M_LATTICE,
                          default_gamma=DEFAULT_GAMMA):
    """Find the smallest certified ``(M, w)`` pair on the search lattice.

    Pairs are ordered by ``M`` first and ``w`` second. For a fixed ``w`` the
    least admissible constant over all grid pairs ``x < x + t <= x_max`` is the
    largest drop of ``log v(x) + w x`` to any later node, which a suffix minimum
    gives in linear time.

    Raises
    ------
    NotAdmissible
        If no lattice pair covers every grid pair.
    """
    n = _cell_count(x_max, step)
    if n < 10:
        raise ValueError("x_max must be at least 10 grid steps")
    xs, lv = _grid_log_weight(v, x_max, step)
    ws = np.sort(np.asarray(w_lattice, dtype=float))
    required = np.array([_log_sup_ratio(lv + w * xs)[0] for w in ws])

    chosen = None
    for M in sorted(m_lattice):
        ok = np.nonzero(required <= math.log(M) + _LOG_TOL)[0]
        if ok.size:
            chosen = (float(M), float(ws[ok[0]]))
            break
    if chosen is None:
        raise NotAdmissible(
            f"no (M, w) in the lattice certifies {v.kind.value} on [0, {x_max}]"
        )
    M, w = chosen
    gamma = math.log(2.0) / w if w > 0 else float(default_gamma)

    # window property: v(x) / v(x') <= 2M whenever x <= x' <= x + gamma
    width = int(math.floor(gamma / step + 1e-9))
    if width > 0:
        padded = np.concatenate([lv, np.full(width, np.inf)])
        window_min = sliding_window_view(padded, width + 1).min(axis=1)
        worst = float(np.max(lv - window_min))
        if worst > math.log(2 * M) + _LOG_TOL:
            raise NotAdmissible(
                f"window ratio {math.exp(worst):.6g} exceeds 2M={2 * M} for gamma={gamma}"
            )
    return AdmissibilityCertificate(M=M, w=w, gamma=gamma, x_max=float(x_max), step=float(step))


def sup_ratio(v, x_max, step):
    """Exact ``max v(x_i) / v(x_j)`` over grid pairs ``x_i <= x_j``.

    Returns ``(value, (x, y))``; ``value`` is ``inf`` if it overflows a float.
    """
    xs, lv = _grid_log_weight(v, x_max, step)
    log_val, i, j = _log_sup_ratio(lv)
    return _safe_exp(log_val), (float(xs[i]), float(xs[j]))


# -- tier classification ----------------------------------------------------


class Tier(str, enum.Enum):
    TOP_TIER = "TopTier"
    MIXING = "Mixing"
    MIDDLE_TIER = "MiddleTier"
    INFINITE_ENTROPY_ONLY = "InfiniteEntropyOnly"
    TAME = "Tame"


_EVIDENCE_ORDER = ("integral_finite", "lim_is_zero", "liminf_zero", "sup_ratio_divergent")
_TIER_OF_FLAG = {
    "integral_finite": Tier.TOP_TIER,
    "lim_is_zero": Tier.MIXING,
    "liminf_zero": Tier.MIDDLE_TIER,
    "sup_ratio_divergent": Tier.INFINITE_ENTROPY_ONLY,
}


@dataclass
class TierReport:
    """Evidence for each at-infinity condition, measured at two horizons.

    Each ``*_finite`` / ``*_zero`` / ``*_divergent`` flag is ``True``,
    ``False`` or ``None`` (the two horizons disagree).
    """

    weight: dict
    horizons: tuple
    integral_estimate: float
    integral_partials: tuple
    tail_fractions: tuple
    integral_finite: Optional[bool]
    lim_estimates: tuple
    lim_is_zero: Optional[bool]
    liminf_estimates: tuple
    liminf_zero: Optional[bool]
    sup_ratio_estimates: tuple
    sup_ratio_argmax: tuple
    sup_ratio_divergent: Optional[bool]
    certificate: Optional[AdmissibilityCertificate]
    thresholds: dict
    tier: Optional[Tier] = None

    @property
    def liminf_estimate(self):
        return self.liminf_estimates[-1]

    @property
    def lim_estimate(self):
        return self.lim_estimates[-1]

    @property
    def sup_ratio_estimate(self):
        return self.sup_ratio_estimates[-1]

    def flags(self):
        return [getattr(self, name) for name in _EVIDENCE_ORDER]

    def chain_ok(self):
        """True iff each established condition implies all later ones."""
        flags = self.flags()
        for i, flag in enumerate(flags):
            if flag and not all(later is True for later in flags[i + 1:]):
                return False
        if self.tier is None:
            return True
        needed = {
            Tier.TOP_TIER: 0, Tier.MIXING: 1, Tier.MIDDLE_TIER: 2,
            Tier.INFINITE_ENTROPY_ONLY: 3,
        }
        # without refinement a vanishing limit is folded into MiddleTier
        skip = () if self.thresholds.get("refine_mixing") else (1,)
        if self.tier is Tier.TAME:
            return not any(f for k, f in enumerate(flags) if k not in skip)
        start = needed[self.tier]
        higher = [f for k, f in enumerate(flags[:start]) if k not in skip]
        return all(f is True for f in flags[start:]) and not any(higher)

    def to_dict(self):
        out = {
            "tier": self.tier.value if self.tier is not None else "Inconclusive",
            "weight": self.weight,
            "horizons": list(self.horizons),
            "integral_estimate": self.integral_estimate,
            "integral_partials": list(self.integral_partials),
            "tail_fractions": list(self.tail_fractions),
            "integral_finite": self.integral_finite,
            "lim_estimates": list(self.lim_estimates),
            "lim_is_zero": self.lim_is_zero,
            "liminf_estimates": list(self.liminf_estimates),
            "liminf_zero": self.liminf_zero,
            "sup_ratio_estimates": list(self.sup_ratio_estimates),
            "sup_ratio_argmax": list(self.sup_ratio_argmax),
            "sup_ratio_divergent": self.sup_ratio_divergent,
            "certificate": self.certificate.to_dict() if self.certificate else None,
            "thresholds": dict(self.thresholds),
        }
        return out

    def to_json(self, **kwargs):
        kwargs.setdefault("indent", 2)
        kwargs.setdefault("sort_keys", True)
        return json.dumps(self.to_dict(), **kwargs)

    def evidence_rows(self):
        """One ``(field, at_H1, at_H2, verdict)`` row per evidence field."""
        def verdict(flag):
            return "undecided" if flag is None else str(bool(flag)).lower()
        return [
            ("integral", *self.integral_partials, verdict(self.integral_finite)),
            ("tail_fraction", *self.tail_fractions, verdict(self.integral_finite)),
            ("lim_envelope", *self.lim_estimates, verdict(self.lim_is_zero)),
            ("liminf", *self.liminf_estimates, verdict(self.liminf_zero)),
            ("sup_ratio", *self.sup_ratio_estimates, verdict(self.sup_ratio_divergent)),
        ]


def _tristate(established, refuted):
    if established:
        return True
    if refuted:
        return False
    return None


def classify_tier(v, x_max, step, *, refine_mixing=False, tail_fraction=0.1,
                  ratio_threshold=1e6, growth=1.5):
    """Place ``v`` in a chaos tier from grid evidence on ``[0, x_max]``.

    Every at-infinity condition is judged at the horizons ``x_max/2`` and
    ``x_max``:

    * the integral converges if the share of the partial integral lying in the
      last decade ``[H/10, H]`` is at most ``tail_fraction`` at both horizons;
    * ``lim v = 0`` (resp. ``liminf v = 0``) if the maximum (resp. minimum) of
      ``v`` over the trailing half ``[H/2, H]`` is below ``v(0)/ratio_threshold``
      and shrank by ``growth`` between the two horizons;
    * ``sup v(x)/v(y) = inf`` if the grid estimate exceeds ``ratio_threshold``
      and grew by ``growth`` between the horizons.

    A condition passing one half of its test and failing the other is left
    undecided. By default the tier follows the three-tier picture (Mixing is
    folded into MiddleTier); ``refine_mixing=True`` reports Mixing separately.

    Raises
    ------
    InconclusiveEvidence
        If an undecided condition blocks the decision, or established
        conditions contradict the implication chain. The partial report is
        attached to the exception.
    """
    if v.certificate is None:
        v = v.with_certificate(certify_admissibility(v, x_max, step))
    xs, lv = _grid_log_weight(v, x_max, step)
    n = len(xs) - 1
    ends = (n // 2, n)
    log_gate = math.log(ratio_threshold)
    log_growth = math.log(growth)

    shift = float(np.max(lv))
    scaled = np.exp(lv - shift)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (scaled[1:] + scaled[:-1]) * step)])
    partials = tuple(float(cum[e]) * _safe_exp(shift) if cum[e] > 0 else 0.0 for e in ends)
    tails = tuple(float((cum[e] - cum[e // 10]) / cum[e]) for e in ends)
    integral_finite = _tristate(all(t <= tail_fraction for t in tails),
                                all(t > tail_fraction for t in tails))

    ref = lv[0]
    log_env = tuple(float(np.max(lv[e // 2:e + 1])) for e in ends)
    log_low = tuple(float(np.min(lv[e // 2:e + 1])) for e in ends)

    def vanishing(logs):
        small = logs[1] - ref <= -log_gate
        shrinking = logs[0] - logs[1] >= log_growth
        return _tristate(small and shrinking, not small and not shrinking)

    ratio_logs = []
    argmax = None
    for e in ends:
        val, i, j = _log_sup_ratio(lv[:e + 1])
        ratio_logs.append(val)
        argmax = (float(xs[i]), float(xs[j]))
    big = ratio_logs[1] > log_gate
    growing = ratio_logs[1] - ratio_logs[0] >= log_growth

    report = TierReport(
        weight=v.describe(),
        horizons=(float(xs[ends[0]]), float(xs[ends[1]])),
        integral_estimate=partials[1],
        integral_partials=partials,
        tail_fractions=tails,
        integral_finite=integral_finite,
        lim_estimates=tuple(_safe_exp(x) for x in log_env),
        lim_is_zero=vanishing(log_env),
        liminf_estimates=tuple(_safe_exp(x) for x in log_low),
        liminf_zero=vanishing(log_low),
        sup_ratio_estimates=tuple(_safe_exp(x) for x in ratio_logs),
        sup_ratio_argmax=argmax,
        sup_ratio_divergent=_tristate(big and growing, not big and not growing),
        certificate=v.certificate,
        thresholds={"tail_fraction": tail_fraction, "ratio_threshold": ratio_threshold,
                    "growth": growth, "refine_mixing": refine_mixing},
    )

    flags = report.flags()
    for i, flag in enumerate(flags):
        if flag and not all(later is True for later in flags[i + 1:]):
            raise InconclusiveEvidence(
                f"{_EVIDENCE_ORDER[i]} holds but a weaker condition is not established",
                report,
            )
    for name, flag in zip(_EVIDENCE_ORDER, flags):
        if name == "lim_is_zero" and not refine_mixing:
            continue
        if flag is None:
            raise InconclusiveEvidence(f"{name} is undecided at x_max={x_max}", report)
        if flag:
            report.tier = _TIER_OF_FLAG[name]
            return report
    report.tier = Tier.TAME
    return report
