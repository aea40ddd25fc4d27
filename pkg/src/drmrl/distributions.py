"""
Finite discrete distributions, their CDFs, and the distances and
concentration radii used throughout the package.

A value distribution ``(x, P)`` puts mass ``P[i]`` on the point ``x[i]``.
Support points may repeat; they are merged only when a CDF is built.
All distances are computed exactly on the union of breakpoints.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    DeltaOutOfRange,
    LengthMismatch,
    MassNotOne,
    NegativeMass,
    SupportTooLarge,
)

MASS_TOL = 1e-9
COUPLING_MAX_SUPPORT = 12


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=np.float64).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """Point masses ``probs[i]`` at ``support[i]``; duplicates allowed."""

    support: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        x = _frozen(self.support)
        p = _frozen(self.probs)
        if x.size != p.size:
            raise LengthMismatch(f"support has {x.size} points but probs has {p.size}")
        if x.size == 0:
            raise LengthMismatch("a distribution needs at least one support point")
        if np.any(p < 0):
            raise NegativeMass(f"negative probability mass {p.min()!r}")
        total = float(p.sum())
        if abs(total - 1.0) > MASS_TOL:
            raise MassNotOne(f"probabilities sum to {total!r}")
        object.__setattr__(self, "support", x)
        object.__setattr__(self, "probs", p)

    def __len__(self) -> int:
        return self.support.size

    def shift(self, c: float) -> "DiscreteDistribution":
        return DiscreteDistribution(self.support + c, self.probs)

    def mean(self) -> float:
        return float(self.probs @ self.support)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.choice(self.support, size=n, p=self.probs / self.probs.sum())


@dataclass(frozen=True, eq=False)
class Cdf:
    """Right-continuous step CDF with strictly increasing ``breakpoints``."""

    breakpoints: np.ndarray
    cumulative: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "breakpoints", _frozen(self.breakpoints))
        object.__setattr__(self, "cumulative", _frozen(self.cumulative))

    def __call__(self, x) -> np.ndarray:
        idx = np.searchsorted(self.breakpoints, x, side="right") - 1
        out = np.where(idx >= 0, self.cumulative[np.maximum(idx, 0)], 0.0)
        return out

    @property
    def lower(self) -> float:
        return float(self.breakpoints[0])

    @property
    def upper(self) -> float:
        return float(self.breakpoints[-1])


def make_dist(support: Sequence[float], probs: Sequence[float]) -> DiscreteDistribution:
    return DiscreteDistribution(np.asarray(support, float), np.asarray(probs, float))


def to_cdf(d: DiscreteDistribution) -> Cdf:
    values, inverse = np.unique(d.support, return_inverse=True)
    mass = np.bincount(inverse.reshape(-1), weights=d.probs, minlength=values.size)
    cum = np.minimum(np.cumsum(mass), 1.0)
    cum[-1] = 1.0
    return Cdf(values, cum)


def _on_union(F: Cdf, G: Cdf):
    grid = np.union1d(F.breakpoints, G.breakpoints)
    return grid, F(grid), G(grid)


def sup_distance(F: Cdf, G: Cdf) -> float:
    """Kolmogorov distance ``sup_x |F(x) - G(x)|``."""
    _, f, g = _on_union(F, G)
    return float(np.max(np.abs(f - g)))


def wasserstein_distance(F: Cdf, G: Cdf) -> float:
    """``int |F(x) - G(x)| dx``, summed exactly over the step segments."""
    grid, f, g = _on_union(F, G)
    if grid.size < 2:
        return 0.0
    return float(np.sum(np.abs(f[:-1] - g[:-1]) * np.diff(grid)))


def wasserstein_coupling_oracle(dx: DiscreteDistribution, dy: DiscreteDistribution) -> float:
    """Cost of the monotone (quantile) coupling between two small distributions.

    Pairs the ``t``-quantiles of both laws for every ``t`` in (0, 1] and
    integrates ``|qx(t) - qy(t)|`` over the merged cumulative levels. This
    works in the probability domain and never touches a CDF difference, so it
    serves as an independent check of :func:`wasserstein_distance`.
    """
    if len(dx) > COUPLING_MAX_SUPPORT or len(dy) > COUPLING_MAX_SUPPORT:
        raise SupportTooLarge(
            f"coupling oracle supports at most {COUPLING_MAX_SUPPORT} points per side"
        )
    ox = np.argsort(dx.support, kind="stable")
    oy = np.argsort(dy.support, kind="stable")
    xs, px = dx.support[ox], dx.probs[ox] / dx.probs.sum()
    ys, py = dy.support[oy], dy.probs[oy] / dy.probs.sum()
    cx, cy = np.cumsum(px), np.cumsum(py)
    cx[-1] = cy[-1] = 1.0

    levels = np.union1d(np.concatenate([[0.0], cx]), cy)
    cost = 0.0
    for lo, hi in zip(levels[:-1], levels[1:]):
        mid = 0.5 * (lo + hi)
        qx = xs[min(np.searchsorted(cx, mid), xs.size - 1)]
        qy = ys[min(np.searchsorted(cy, mid), ys.size - 1)]
        cost += (hi - lo) * abs(qx - qy)
    return float(cost)


def transport_bound(x: Sequence[float], y: Sequence[float], P: Sequence[float]) -> float:
    """``sum_i P_i |x_i - y_i|``: an upper bound on W1((x,P), (y,P))."""
    x, y, P = (np.asarray(v, float) for v in (x, y, P))
    if not (x.shape == y.shape == P.shape):
        raise LengthMismatch("x, y and P must have equal lengths")
    return float(np.sum(P * np.abs(x - y)))


def pmf_l1(P: Sequence[float], Q: Sequence[float]) -> float:
    P, Q = np.asarray(P, float), np.asarray(Q, float)
    if P.shape != Q.shape:
        raise LengthMismatch("P and Q must have equal lengths")
    return float(np.sum(np.abs(P - Q)))


def _check_delta(delta: float) -> None:
    if not 0.0 < delta < 1.0:
        raise DeltaOutOfRange(f"delta must lie in (0, 1), got {delta!r}")


def l1_concentration_radius(support_size: int, n: int, delta: float) -> float:
    """Weissman-type radius ``sqrt(2 S log(1/delta) / (n v 1))`` for the l1 error."""
    _check_delta(delta)
    return float(np.sqrt(2.0 * support_size * np.log(1.0 / delta) / max(n, 1)))


def dkw_radius(n: int, delta: float) -> float:
    """DKW radius ``sqrt(log(2/delta) / (2 (n v 1)))`` for the sup-norm CDF error."""
    _check_delta(delta)
    return float(np.sqrt(np.log(2.0 / delta) / (2.0 * max(n, 1))))


def empirical(samples: np.ndarray) -> DiscreteDistribution:
    values, counts = np.unique(np.asarray(samples, float), return_counts=True)
    return DiscreteDistribution(values, counts / counts.sum())
