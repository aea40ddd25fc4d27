"""
Static risk measures on discrete distributions and their Lipschitz constants.

Every measure evaluates a single :class:`DiscreteDistribution` and, through
``evaluate_rows``, a batch of distributions that share one support vector
(the next-state value vector) but carry different probability rows. The
batched path is what the planners use; the single-distribution path is the
reference for tests.

Lipschitz constants are reported over ``D([a, b])`` with respect to the sup
distance between CDFs (``lipschitz_linf``) and the Wasserstein-1 distance
(``lipschitz_l1``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .distributions import DiscreteDistribution
from .errors import (
    AlphaOutOfRange,
    IntervalEmpty,
    InvalidRiskMeasure,
    NegativeSupportForDistortion,
    ScheduleLengthMismatch,
)

_TOL = 1e-9


def _check_interval(a: float, b: float) -> float:
    if not a < b:
        raise IntervalEmpty(f"need a < b, got [{a}, {b}]")
    return b - a


class RiskMeasure:
    """Law-invariant, monotone, translation-invariant functional."""

    def evaluate(self, d: DiscreteDistribution) -> float:
        return float(self.evaluate_rows(d.support, d.probs[None, :])[0])

    def evaluate_rows(self, values: np.ndarray, probs: np.ndarray) -> np.ndarray:
        """Evaluate ``rho((values, probs[i]))`` for every row ``i`` of ``probs``."""
        raise NotImplementedError

    def lipschitz_l1(self, a: float, b: float) -> float:
        raise NotImplementedError

    def lipschitz_linf(self, a: float, b: float) -> float:
        return self.lipschitz_l1(a, b) * _check_interval(a, b)


def _sorted(values: np.ndarray, probs: np.ndarray):
    order = np.argsort(values, kind="stable")
    return values[order], probs[:, order]


@dataclass(frozen=True)
class Mean(RiskMeasure):
    def evaluate_rows(self, values, probs):
        return probs @ values

    def lipschitz_l1(self, a, b):
        _check_interval(a, b)
        return 1.0

    def __str__(self):
        return "Mean"


@dataclass(frozen=True)
class CVaR(RiskMeasure):
    """Mean of the lower ``alpha``-tail; the atom at the quantile is split."""

    alpha: float

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise AlphaOutOfRange(f"CVaR level must lie in (0, 1], got {self.alpha!r}")

    def evaluate_rows(self, values, probs):
        xs, p = _sorted(np.asarray(values, float), np.asarray(probs, float))
        before = np.cumsum(p, axis=1) - p
        w = np.minimum(np.clip(self.alpha - before, 0.0, None), p)
        return (w @ xs) / self.alpha

    def lipschitz_l1(self, a, b):
        _check_interval(a, b)
        return 1.0 / self.alpha

    def lipschitz_linf(self, a, b):
        return _check_interval(a, b) / self.alpha

    def __str__(self):
        return f"CVaR({self.alpha:g})"


@dataclass(frozen=True)
class ERM(RiskMeasure):
    """Entropic risk ``(1/beta) log E exp(beta X)``; risk-averse for beta < 0."""

    beta: float

    def __post_init__(self):
        if self.beta == 0 or not np.isfinite(self.beta):
            raise InvalidRiskMeasure("ERM needs a finite nonzero beta")

    def evaluate_rows(self, values, probs):
        z = self.beta * np.asarray(values, float)[None, :]
        probs = np.asarray(probs, float)
        shift = np.max(np.where(probs > 0, z, -np.inf), axis=1, keepdims=True)
        lse = shift[:, 0] + np.log(np.sum(probs * np.exp(z - shift), axis=1))
        return lse / self.beta

    def lipschitz_l1(self, a, b):
        return float(np.exp(abs(self.beta) * _check_interval(a, b)))

    def lipschitz_linf(self, a, b):
        m = _check_interval(a, b)
        return float(np.expm1(abs(self.beta) * m) / abs(self.beta))

    def __str__(self):
        return f"ERM({self.beta:g})"


@dataclass(frozen=True, eq=False)
class PiecewiseLinearUtility:
    """Continuous piecewise-linear utility with linear extrapolation.

    ``knots`` must be strictly increasing; outside them the function
    continues with ``left_slope`` / ``right_slope``.
    """

    knots: np.ndarray
    values: np.ndarray
    left_slope: float
    right_slope: float

    def __post_init__(self):
        k = np.asarray(self.knots, float).reshape(-1)
        v = np.asarray(self.values, float).reshape(-1)
        if k.size == 0 or k.size != v.size:
            raise InvalidRiskMeasure("utility needs matching, nonempty knots and values")
        if np.any(np.diff(k) <= 0):
            raise InvalidRiskMeasure("utility knots must be strictly increasing")
        object.__setattr__(self, "knots", k)
        object.__setattr__(self, "values", v)
        slopes = self.slopes
        if np.any(slopes < -1e-12):
            raise InvalidRiskMeasure("utility must be nondecreasing")
        if abs(float(self(0.0))) > 1e-12:
            raise InvalidRiskMeasure("utility must satisfy u(0) = 0")
        left, right = self.derivatives_at(0.0)
        if not min(left, right) - 1e-9 <= 1.0 <= max(left, right) + 1e-9:
            raise InvalidRiskMeasure("1 must belong to the subdifferential of u at 0")

    @property
    def slopes(self) -> np.ndarray:
        """Slopes of all linear pieces, extrapolation pieces included."""
        inner = np.diff(self.values) / np.diff(self.knots)
        return np.concatenate([[self.left_slope], inner, [self.right_slope]])

    def __call__(self, x):
        x = np.asarray(x, float)
        k, v = self.knots, self.values
        out = np.interp(x, k, v)
        out = np.where(x < k[0], v[0] + self.left_slope * (x - k[0]), out)
        out = np.where(x > k[-1], v[-1] + self.right_slope * (x - k[-1]), out)
        return out

    def derivatives_at(self, x: float) -> tuple[float, float]:
        """One-sided derivatives ``(u'_-(x), u'_+(x))``."""
        slopes = self.slopes
        left = slopes[np.searchsorted(self.knots, x, side="left")]
        right = slopes[np.searchsorted(self.knots, x, side="right")]
        return float(left), float(right)

    @property
    def is_concave(self) -> bool:
        return bool(np.all(np.diff(self.slopes) <= 1e-12))

    @property
    def is_convex(self) -> bool:
        return bool(np.all(np.diff(self.slopes) >= -1e-12))

    @classmethod
    def from_function(cls, f, knots: Sequence[float]) -> "PiecewiseLinearUtility":
        """Interpolate ``f`` on ``knots``; end pieces extend the outer chords."""
        k = np.asarray(knots, float)
        v = np.asarray([f(t) for t in k], float)
        v[np.isclose(k, 0.0, atol=0.0)] = 0.0
        left = (v[1] - v[0]) / (k[1] - k[0])
        right = (v[-1] - v[-2]) / (k[-1] - k[-2])
        return cls(k, v, left, right)


def cvar_utility(alpha: float) -> PiecewiseLinearUtility:
    """``u(y) = min(y, 0) / alpha``; its OCE is CVaR at level ``alpha``."""
    return PiecewiseLinearUtility(np.array([0.0]), np.array([0.0]), 1.0 / alpha, 0.0)


def exponential_utility(beta: float, lo: float = -1.0, hi: float = 1.0,
                        n_knots: int = 200) -> PiecewiseLinearUtility:
    """Piecewise-linear interpolant of ``(exp(beta y) - 1) / beta`` with a knot at 0."""
    n_left = n_knots // 2
    knots = np.concatenate([np.linspace(lo, 0.0, n_left), np.linspace(0.0, hi, n_knots - n_left + 1)[1:]])
    return PiecewiseLinearUtility.from_function(lambda y: np.expm1(beta * y) / beta, knots)


@dataclass(frozen=True)
class OCE(RiskMeasure):
    """Optimized certainty equivalent ``sup_lam lam + E u(X - lam)``.

    The supremum is taken over ``lam`` in the hull of the support. For a
    piecewise-linear utility the objective is piecewise linear in ``lam``,
    so it is maximized exactly over its breakpoints.
    """

    utility: PiecewiseLinearUtility

    def evaluate(self, d):
        keep = d.probs > 0
        x, p = d.support[keep], d.probs[keep]
        lo, hi = x.min(), x.max()
        cand = (x[:, None] - self.utility.knots[None, :]).reshape(-1)
        cand = np.concatenate([[lo, hi], cand[(cand > lo) & (cand < hi)]])
        obj = cand + self.utility(x[None, :] - cand[:, None]) @ p
        return float(obj.max())

    def evaluate_rows(self, values, probs):
        values = np.asarray(values, float)
        return np.array([self.evaluate(DiscreteDistribution(values, row)) for row in np.asarray(probs, float)])

    def lipschitz_l1(self, a, b):
        m = _check_interval(a, b)
        u = self.utility
        # max slope of u on [-m, m]
        idx_lo = np.searchsorted(u.knots, -m, side="right")
        idx_hi = np.searchsorted(u.knots, m, side="left")
        return float(np.max(u.slopes[idx_lo:idx_hi + 1]))

    def lipschitz_linf(self, a, b):
        m = _check_interval(a, b)
        u = self.utility
        # max over y in [0, m] of u(y) - u(y - m); piecewise linear in y
        k = u.knots
        y = np.concatenate([[0.0, m], k, k + m])
        y = y[(y >= 0.0) & (y <= m)]
        return float(np.max(u(y) - u(y - m)))

    def __str__(self):
        return "OCE"


@dataclass(frozen=True, eq=False)
class DistortionFunction:
    """Piecewise-linear nondecreasing ``g`` on [0, 1] with g(0)=0, g(1)=1."""

    knots: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.knots, float).reshape(-1)
        v = np.asarray(self.values, float).reshape(-1)
        if k.size < 2 or k.size != v.size:
            raise InvalidRiskMeasure("distortion needs at least two matching knots/values")
        if k[0] != 0.0 or k[-1] != 1.0 or np.any(np.diff(k) <= 0):
            raise InvalidRiskMeasure("distortion knots must increase from 0 to 1")
        if abs(v[0]) > 1e-12 or abs(v[-1] - 1.0) > 1e-12 or np.any(np.diff(v) < 0):
            raise InvalidRiskMeasure("distortion must be nondecreasing from g(0)=0 to g(1)=1")
        object.__setattr__(self, "knots", k)
        object.__setattr__(self, "values", v)

    def __call__(self, t):
        return np.interp(t, self.knots, self.values)

    @property
    def max_slope(self) -> float:
        return float(np.max(np.diff(self.values) / np.diff(self.knots)))

    @classmethod
    def identity(cls) -> "DistortionFunction":
        return cls(np.array([0.0, 1.0]), np.array([0.0, 1.0]))

    @classmethod
    def cvar(cls, alpha: float) -> "DistortionFunction":
        """``g(t) = max(t - (1 - alpha), 0) / alpha``, which reproduces CVaR."""
        if alpha == 1.0:
            return cls.identity()
        return cls(np.array([0.0, 1.0 - alpha, 1.0]), np.array([0.0, 0.0, 1.0]))


@dataclass(frozen=True)
class Distortion(RiskMeasure):
    """``int_0^inf g(1 - F(x)) dx`` on nonnegative distributions."""

    g: DistortionFunction

    def evaluate(self, d):
        keep = d.probs > 0
        x, p = d.support[keep], d.probs[keep]
        if np.any(x < 0):
            raise NegativeSupportForDistortion("distortion risk needs a nonnegative support")
        xs, inv = np.unique(x, return_inverse=True)
        cum = np.cumsum(np.bincount(inv.reshape(-1), weights=p, minlength=xs.size))
        tail = np.clip(1.0 - cum[:-1], 0.0, 1.0)
        return float(xs[0] + np.sum(self.g(tail) * np.diff(xs)))

    def evaluate_rows(self, values, probs):
        values = np.asarray(values, float)
        return np.array([self.evaluate(DiscreteDistribution(values, row)) for row in np.asarray(probs, float)])

    def lipschitz_l1(self, a, b):
        _check_interval(a, b)
        return self.g.max_slope

    def __str__(self):
        return "Distortion"


@dataclass(frozen=True, eq=False)
class PiecewiseConstantSpectrum:
    """Weights ``levels[j]`` on ``[breakpoints[j], breakpoints[j+1])``."""

    breakpoints: np.ndarray
    levels: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.breakpoints, float).reshape(-1)
        lv = np.asarray(self.levels, float).reshape(-1)
        if y.size != lv.size + 1 or y[0] != 0.0 or y[-1] != 1.0 or np.any(np.diff(y) <= 0):
            raise InvalidRiskMeasure("spectrum breakpoints must increase from 0 to 1, one more than levels")
        if np.any(lv < 0):
            raise InvalidRiskMeasure("spectrum must be nonnegative")
        mass = float(np.sum(lv * np.diff(y)))
        if abs(mass - 1.0) > _TOL:
            raise InvalidRiskMeasure(f"spectrum integrates to {mass!r}, not 1")
        object.__setattr__(self, "breakpoints", y)
        object.__setattr__(self, "levels", lv)
        object.__setattr__(self, "_primitive", np.concatenate([[0.0], np.cumsum(lv * np.diff(y))]))

    def integral(self, t):
        """``Phi(t) = int_0^t phi``."""
        return np.interp(t, self.breakpoints, self._primitive)

    @classmethod
    def cvar(cls, alpha: float) -> "PiecewiseConstantSpectrum":
        if alpha == 1.0:
            return cls(np.array([0.0, 1.0]), np.array([1.0]))
        return cls(np.array([0.0, alpha, 1.0]), np.array([1.0 / alpha, 0.0]))


@dataclass(frozen=True)
class Spectral(RiskMeasure):
    """``int_0^1 phi(y) F^{-1}(y) dy`` for a piecewise-constant ``phi``."""

    phi: PiecewiseConstantSpectrum

    def evaluate_rows(self, values, probs):
        xs, p = _sorted(np.asarray(values, float), np.asarray(probs, float))
        cum = np.minimum(np.cumsum(p, axis=1), 1.0)
        prim = self.phi.integral(cum)
        weights = np.diff(np.concatenate([np.zeros((p.shape[0], 1)), prim], axis=1), axis=1)
        return weights @ xs

    def lipschitz_l1(self, a, b):
        _check_interval(a, b)
        return float(self.phi.levels.max())

    def __str__(self):
        return "Spectral"


def evaluate(rm: RiskMeasure, d: DiscreteDistribution) -> float:
    if not isinstance(rm, RiskMeasure):
        raise InvalidRiskMeasure(f"not a risk measure: {rm!r}")
    return rm.evaluate(d)


def lipschitz_l1(rm: RiskMeasure, a: float, b: float) -> float:
    return rm.lipschitz_l1(a, b)


def lipschitz_linf(rm: RiskMeasure, a: float, b: float) -> float:
    return rm.lipschitz_linf(a, b)


def cvar_opt_oracle(alpha: float, d: DiscreteDistribution, grid_size: int = 100_000) -> float:
    """Grid maximisation of ``nu - E[(nu - X)^+] / alpha`` over the support hull."""
    if not 0.0 < alpha <= 1.0:
        raise AlphaOutOfRange(f"alpha must lie in (0, 1], got {alpha!r}")
    if grid_size < 100:
        raise ValueError("grid_size must be at least 100")
    x, p = d.support, d.probs
    grid = np.linspace(x.min(), x.max(), grid_size)
    shortfall = np.maximum(grid[:, None] - x[None, :], 0.0) @ p
    return float(np.max(grid - shortfall / alpha))


@dataclass(frozen=True)
class RiskSchedule:
    """Stage risk measures ``rho_1 .. rho_{H-1}`` (index 0 is stage 1)."""

    measures: tuple = field(default_factory=tuple)

    def __post_init__(self):
        ms = tuple(self.measures)
        for m in ms:
            if not isinstance(m, RiskMeasure):
                raise InvalidRiskMeasure(f"schedule entry is not a risk measure: {m!r}")
        object.__setattr__(self, "measures", ms)

    @classmethod
    def homogeneous(cls, rm: RiskMeasure, H: int) -> "RiskSchedule":
        return cls((rm,) * max(H - 1, 0))

    def check_horizon(self, H: int) -> None:
        if len(self.measures) != H - 1:
            raise ScheduleLengthMismatch(
                f"horizon {H} needs {H - 1} stage risk measures, got {len(self.measures)}"
            )

    def __len__(self) -> int:
        return len(self.measures)

    def __getitem__(self, i) -> RiskMeasure:
        return self.measures[i]

    def __iter__(self) -> Iterator[RiskMeasure]:
        return iter(self.measures)

    def __str__(self):
        return "[" + ", ".join(str(m) for m in self.measures) + "]"


def build_schedule(family: str, params, H: int) -> RiskSchedule:
    """Schedule from a family name and a scalar or per-stage parameter list.

    ``family`` is one of ``mean``, ``cvar`` (params = alpha) or ``erm``
    (params = beta).
    """
    family = family.strip().lower()
    n = H - 1
    if family == "mean":
        return RiskSchedule((Mean(),) * n)
    if family not in ("cvar", "erm"):
        raise InvalidRiskMeasure(f"unknown risk family {family!r}")
    if params is None:
        raise InvalidRiskMeasure(f"{family} needs a parameter")
    vals = list(params) if isinstance(params, (list, tuple)) else [params] * n
    if len(vals) != n:
        raise ScheduleLengthMismatch(f"horizon {H} needs {n} per-stage parameters, got {len(vals)}")
    make = CVaR if family == "cvar" else ERM
    return RiskSchedule(tuple(make(float(v)) for v in vals))
