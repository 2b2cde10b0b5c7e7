"""Grid model of ``L^p_v(R+)`` and ``C_{0,v}(R+)`` truncated to ``[0, x_max]``.

Translations are restricted to whole grid cells so that the semigroup law and
linearity hold exactly on samples.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import NonGridShift, SupportOverflow
from .weights import WeightFunction, grid

__all__ = [
    "Mode",
    "Interpretation",
    "SpaceSpec",
    "GridFunction",
    "lp_norm",
    "lp_norm_p",
    "sup_norm",
    "norm",
    "norm_p",
    "translate",
    "shift_right",
    "restrict",
    "distance",
    "shifted_norms",
]

# composite trapezoid on 4 sub-intervals per cell
_SUB = 4
_SUB_FRACTIONS = np.arange(_SUB + 1) / _SUB
_SUB_WEIGHTS = np.array([0.5, 1.0, 1.0, 1.0, 0.5]) / _SUB


class Mode(str, enum.Enum):
    LP = "Lp"
    C0V = "C0v"


class Interpretation(str, enum.Enum):
    PIECEWISE_CONSTANT = "piecewise_constant"
    PIECEWISE_LINEAR = "piecewise_linear"


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Samples at the nodes ``0, step, ..., x_max``.

    With ``PIECEWISE_CONSTANT`` the sample at ``x_i`` is the value on
    ``[x_i, x_{i+1})``; the node at ``x_max`` owns no cell and is stored as 0.
    With ``PIECEWISE_LINEAR`` the function interpolates linearly between nodes.
    """

    samples: np.ndarray
    step: float
    interpretation: Interpretation = Interpretation.PIECEWISE_CONSTANT

    def __post_init__(self):
        arr = np.array(self.samples, dtype=float)
        if arr.ndim != 1 or arr.size < 2:
            raise ValueError("samples must be a 1-d array with at least two nodes")
        if not np.all(np.isfinite(arr)):
            raise ValueError("samples must be finite")
        interp = Interpretation(self.interpretation)
        if interp is Interpretation.PIECEWISE_CONSTANT:
            arr[-1] = 0.0
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "interpretation", interp)
        object.__setattr__(self, "step", float(self.step))

    @property
    def n_cells(self):
        return self.samples.size - 1

    @property
    def x_max(self):
        return self.n_cells * self.step

    @property
    def nodes(self):
        return self.step * np.arange(self.samples.size)

    def support(self):
        """``(first, last)`` node index carrying a nonzero sample, or ``None``."""
        nz = np.nonzero(self.samples)[0]
        if nz.size == 0:
            return None
        return int(nz[0]), int(nz[-1])

    def _check_compatible(self, other):
        if not isinstance(other, GridFunction):
            return NotImplemented
        if other.samples.size != self.samples.size or not math.isclose(other.step, self.step):
            raise ValueError("grid functions live on different grids")
        if other.interpretation is not self.interpretation:
            raise ValueError("grid functions use different interpretations")
        return None

    def _new(self, samples):
        return GridFunction(samples, self.step, self.interpretation)

    def __add__(self, other):
        if self._check_compatible(other) is NotImplemented:
            return NotImplemented
        return self._new(self.samples + other.samples)

    def __sub__(self, other):
        if self._check_compatible(other) is NotImplemented:
            return NotImplemented
        return self._new(self.samples - other.samples)

    def __mul__(self, alpha):
        if not np.isscalar(alpha):
            return NotImplemented
        return self._new(alpha * self.samples)

    __rmul__ = __mul__

    def __truediv__(self, alpha):
        return self._new(self.samples / alpha)

    def __neg__(self):
        return self._new(-self.samples)

    def equals(self, other):
        """Sample-wise equality (grid functions are canonical representatives)."""
        return (
            isinstance(other, GridFunction)
            and other.samples.size == self.samples.size
            and other.interpretation is self.interpretation
            and bool(np.array_equal(other.samples, self.samples))
        )

    def rows(self):
        """``(x, value)`` pairs, one per node."""
        return list(zip(self.nodes.tolist(), self.samples.tolist()))


@dataclass(frozen=True, eq=False)
class SpaceSpec:
    """The space ``X``: its mode, exponent, weight and truncated grid."""

    mode: Mode
    weight: WeightFunction
    x_max: float
    step: float
    p: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if not self.step > 0:
            raise ValueError(f"step must be positive, got {self.step}")
        n = int(round(self.x_max / self.step))
        if abs(n * self.step - self.x_max) > 1e-9 * max(1.0, self.x_max):
            raise ValueError("x_max must be an integer multiple of step")
        if n < 10:
            raise ValueError("the grid needs at least 10 cells")
        if not self.p > 0:
            raise ValueError("p must be positive")
        if self.x_max > self.weight.x_max * (1 + 1e-12):
            raise ValueError("x_max exceeds the weight's domain")

    @cached_property
    def n_cells(self):
        return int(round(self.x_max / self.step))

    @cached_property
    def nodes(self):
        return grid(self.x_max, self.step)

    @cached_property
    def interpretation(self):
        """Default interpretation: step functions in ``Lp``, continuous in ``C0v``."""
        if self.mode is Mode.C0V:
            return Interpretation.PIECEWISE_LINEAR
        return Interpretation.PIECEWISE_CONSTANT

    @cached_property
    def log_v_nodes(self):
        return self.weight.log_evaluate(self.nodes)

    @cached_property
    def v_nodes(self):
        return np.exp(self.log_v_nodes)

    @cached_property
    def v_mid_weights(self):
        """``v`` at cell midpoints times ``step`` (midpoint rule weights)."""
        mids = self.nodes[:-1] + 0.5 * self.step
        return self.weight.evaluate(mids) * self.step

    @cached_property
    def v_sub_weights(self):
        """Trapezoid weights times ``v`` at the 5 sub-points of every cell, shape (5, n)."""
        sub = self.nodes[:-1][None, :] + self.step * _SUB_FRACTIONS[:, None]
        return self.weight.evaluate(sub) * (self.step * _SUB_WEIGHTS)[:, None]

    def steps(self, t):
        """Number of cells in a translation by ``t``; ``t`` must sit on the grid."""
        k = int(round(t / self.step))
        if t < 0 or abs(k * self.step - t) > 1e-9 * max(1.0, abs(t)):
            raise NonGridShift(f"t={t} is not a non-negative multiple of step={self.step}")
        return k

    def index(self, x):
        """Node index of ``x``, which must be a grid point in ``[0, x_max]``."""
        k = self.steps(x)
        if k > self.n_cells:
            raise ValueError(f"x={x} lies beyond x_max={self.x_max}")
        return k

    # -- builders ---------------------------------------------------------

    def from_samples(self, samples, interpretation=None):
        samples = np.asarray(samples, dtype=float)
        if samples.shape != (self.n_cells + 1,):
            raise ValueError(f"expected {self.n_cells + 1} samples, got {samples.shape}")
        return GridFunction(samples, self.step, interpretation or self.interpretation)

    def zeros(self):
        return self.from_samples(np.zeros(self.n_cells + 1))

    def from_callable(self, func, interpretation=None):
        """Sample ``func`` at the nodes (the cell's left end for step functions)."""
        return self.from_samples(np.asarray(func(self.nodes), dtype=float), interpretation)

    def indicator(self, a, b, height=1.0):
        """``height`` times the indicator of ``[a, b]`` as a step function."""
        i, j = self.index(a), self.index(b)
        out = np.zeros(self.n_cells + 1)
        out[i:j] = height
        return GridFunction(out, self.step, Interpretation.PIECEWISE_CONSTANT)

    def tent(self, a, b, height=1.0):
        """Continuous tent on ``[a, b]``: zero at the ends, ``height`` at the midpoint."""
        i, j = self.index(a), self.index(b)
        if j - i < 2:
            raise ValueError("a tent needs at least two cells")
        out = np.zeros(self.n_cells + 1)
        k = np.arange(i, j + 1)
        mid = 0.5 * (i + j)
        out[i:j + 1] = height * (1.0 - np.abs(k - mid) / (0.5 * (j - i)))
        return GridFunction(out, self.step, Interpretation.PIECEWISE_LINEAR)

    def bump(self, a, b, height=1.0):
        """Indicator in ``Lp`` mode, tent in ``C0v`` mode."""
        if self.mode is Mode.C0V:
            return self.tent(a, b, height)
        return self.indicator(a, b, height)

    def describe(self):
        return {
            "mode": self.mode.value,
            "p": self.p,
            "x_max": self.x_max,
            "step": self.step,
            "weight": self.weight.describe(),
        }


def _check(f, spec):
    if f.samples.size != spec.n_cells + 1 or not math.isclose(f.step, spec.step):
        raise ValueError("grid function does not match the space grid")


def _cell_values(samples, interpretation):
    """Function values at the quadrature points: shape (n,) or (5, n)."""
    if interpretation is Interpretation.PIECEWISE_CONSTANT:
        return samples[:-1]
    left, right = samples[:-1], samples[1:]
    return left[None, :] * (1.0 - _SUB_FRACTIONS[:, None]) + right[None, :] * _SUB_FRACTIONS[:, None]


def lp_norm_p(f, spec):
    """``||f||^p = int |f|^p v dx`` on ``[0, x_max]``.

    Midpoint rule for step functions; composite trapezoid with four
    sub-intervals per cell for piecewise-linear functions.
    """
    _check(f, spec)
    vals = np.abs(_cell_values(f.samples, f.interpretation)) ** spec.p
    if f.interpretation is Interpretation.PIECEWISE_CONSTANT:
        return float(vals @ spec.v_mid_weights)
    return float(np.sum(vals * spec.v_sub_weights))


def lp_norm(f, spec):
    return lp_norm_p(f, spec) ** (1.0 / spec.p)


def sup_norm(f, spec):
    """``max |f(x_i)| v(x_i)`` over the nodes."""
    _check(f, spec)
    return float(np.max(np.abs(f.samples) * spec.v_nodes))


def norm(f, spec):
    """The norm of ``f`` in the space described by ``spec``."""
    if spec.mode is Mode.C0V:
        if f.interpretation is not Interpretation.PIECEWISE_LINEAR:
            raise ValueError("C0v elements must be continuous (piecewise linear)")
        return sup_norm(f, spec)
    return lp_norm(f, spec)


def norm_p(f, spec):
    """``||f||^p`` in ``Lp`` mode; the plain sup norm in ``C0v`` mode."""
    if spec.mode is Mode.C0V:
        return norm(f, spec)
    return lp_norm_p(f, spec)


def distance(f, g, spec):
    return norm(f - g, spec)


def translate(f, t):
    """Left translation ``(T_t f)(x) = f(x + t)``; vacated cells become 0."""
    k = _grid_steps(t, f.step)
    out = np.zeros_like(f.samples)
    if k <= f.n_cells:
        out[:f.samples.size - k] = f.samples[k:]
    return GridFunction(out, f.step, f.interpretation)


def shift_right(f, t):
    """Right shift by ``t`` filling with zeros, the inverse of :func:`translate`.

    Raises
    ------
    SupportOverflow
        If a nonzero sample would be pushed past ``x_max``.
    """
    k = _grid_steps(t, f.step)
    if k == 0:
        return f
    tail = f.samples[f.samples.size - k:] if k <= f.samples.size else f.samples
    if f.interpretation is Interpretation.PIECEWISE_CONSTANT:
        tail = tail[:-1]
    if np.any(tail != 0):
        raise SupportOverflow(f"shifting right by {t} pushes mass past x_max={f.x_max}")
    out = np.zeros_like(f.samples)
    out[k:] = f.samples[:f.samples.size - k]
    return GridFunction(out, f.step, f.interpretation)


def restrict(f, a):
    """``f`` times the indicator of ``[0, a]``: samples beyond ``a`` are zeroed.

    For step functions the cells inside ``[0, a]`` are kept; for piecewise
    linear functions the nodes ``x_i <= a``.
    """
    k = _grid_steps(a, f.step)
    if k <= 0 or k > f.n_cells:
        raise ValueError(f"restriction point a={a} must lie in (0, x_max]")
    out = np.array(f.samples)
    if f.interpretation is Interpretation.PIECEWISE_CONSTANT:
        out[k:] = 0.0
    else:
        out[k + 1:] = 0.0
    return GridFunction(out, f.step, f.interpretation)


def _grid_steps(t, step):
    k = int(round(t / step))
    if t < 0 or abs(k * step - t) > 1e-9 * max(1.0, abs(t)):
        raise NonGridShift(f"t={t} is not a non-negative multiple of step={step}")
    return k


_BLOCK = 4_000_000


def _profile(values, weights, ks, reduce_max):
    m = weights.shape[-1]
    out = np.empty(len(ks))
    block = max(1, _BLOCK // m)
    offsets = np.arange(m)
    for s in range(0, len(ks), block):
        kk = ks[s:s + block]
        rows = values[kk[:, None] + offsets]
        if reduce_max:
            out[s:s + block] = np.max(rows * weights, axis=1)
        else:
            out[s:s + block] = rows @ weights
    return out


def shifted_norms(h, spec, max_steps, stride=1, power=False):
    """``||T_{k step} h||`` for ``k = 0, stride, 2 stride, ..., <= max_steps``.

    Equivalent to ``norm(translate(h, k * step), spec)`` for each ``k`` but
    evaluated in one batched pass. With ``power=True`` the ``Lp`` values are
    returned as ``||.||^p``.
    """
    _check(h, spec)
    ks = np.arange(0, max_steps + 1, stride)
    n = spec.n_cells
    if spec.mode is Mode.C0V:
        if h.interpretation is not Interpretation.PIECEWISE_LINEAR:
            raise ValueError("C0v elements must be continuous (piecewise linear)")
        padded = np.concatenate([np.abs(h.samples), np.zeros(max_steps + 1)])
        return _profile(padded, spec.v_nodes, ks, reduce_max=True)
    padded = np.concatenate([h.samples, np.zeros(max_steps + 1)])
    if h.interpretation is Interpretation.PIECEWISE_CONSTANT:
        padded[n] = 0.0
        vals = np.abs(padded) ** spec.p
        total = _profile(vals, spec.v_mid_weights, ks, reduce_max=False)
    else:
        sub = _cell_values(padded, h.interpretation)
        vals = np.abs(sub) ** spec.p
        total = np.zeros(len(ks))
        for j in range(_SUB + 1):
            total += _profile(vals[j], spec.v_sub_weights[j], ks, reduce_max=False)
    total = np.maximum(total, 0.0)
    return total if power else total ** (1.0 / spec.p)
