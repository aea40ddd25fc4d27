"""
Optimistic model-based learners for DRM objectives.

``UCBVI_DRM`` adds a Lipschitz-scaled Hoeffding bonus to the empirical risk
backup. ``OVI_DRM`` instead plans on an optimistic kernel obtained by moving
probability mass toward the best successor (:func:`om`). Both replan every
episode from the empirical model kept in :class:`LearnerState`.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import DeltaOutOfRange, DimensionMismatch, InvalidDimensions, NotAProbabilityVector
from .mdp import Policy, TabularMDP, Trajectory, rollout
from .planning import drm_policy_evaluation, drm_value_iteration, greedy, risk_backup
from .risk import RiskSchedule

UCBVI_DRM = "UCBVI_DRM"
OVI_DRM = "OVI_DRM"
ALGORITHMS = (UCBVI_DRM, OVI_DRM)


@dataclass
class LearnerState:
    """Counts, empirical kernels and the latest optimistic tables."""

    S: int
    A: int
    H: int
    K: int
    delta: float
    N_sas: np.ndarray = field(init=False)
    N_sa: np.ndarray = field(init=False)
    P_hat: np.ndarray = field(init=False)
    Q: np.ndarray | None = None
    V: np.ndarray | None = None
    k: int = 0

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise DeltaOutOfRange(f"delta must lie in (0, 1), got {self.delta!r}")
        shape = (self.H - 1, self.S, self.A)
        self.N_sas = np.zeros(shape + (self.S,), dtype=np.int64)
        self.N_sa = np.zeros(shape, dtype=np.int64)
        self.P_hat = np.full(shape + (self.S,), 1.0 / self.S)

    @property
    def iota(self) -> float:
        T = self.K * self.H
        return float(np.log(4.0 * self.S * self.A * T / self.delta))


def update_counts(state: LearnerState, traj: Trajectory) -> LearnerState:
    """Add one episode's transitions and refresh the touched kernel rows."""
    if len(traj) != state.H:
        raise DimensionMismatch(f"trajectory has {len(traj)} stages, learner expects {state.H}")
    for h, s, a, s_next in traj.transitions():
        if not (0 <= s < state.S and 0 <= a < state.A and 0 <= s_next < state.S):
            raise DimensionMismatch(f"transition ({s}, {a}, {s_next}) out of range")
        state.N_sas[h, s, a, s_next] += 1
        state.N_sa[h, s, a] += 1
        state.P_hat[h, s, a] = state.N_sas[h, s, a] / state.N_sa[h, s, a]
    state.k += 1
    return state


def _check_prob(P: np.ndarray) -> None:
    if P.ndim != 1 or np.any(P < 0) or abs(P.sum() - 1.0) > 1e-9:
        raise NotAProbabilityVector("P must be a nonnegative vector summing to 1")


def om(P, V, c: float) -> np.ndarray:
    """Shift mass ``c/2`` from the lowest-value states onto the highest-value one.

    States are ranked by ``V`` with a stable sort, so the top state is the
    last index among tied maxima. When the top state cannot absorb ``c/2``
    the result is a point mass on it.
    """
    P = np.asarray(P, dtype=np.float64)
    V = np.asarray(V, dtype=np.float64)
    _check_prob(P)
    if P.shape != V.shape:
        raise NotAProbabilityVector("P and V must have equal lengths")
    if c < 0:
        raise ValueError(f"radius must be nonnegative, got {c!r}")
    return om_rows(P[None, :], V, np.array([c]))[0]


def om_rows(P: np.ndarray, V: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Row-wise :func:`om` for a batch of kernels that share one value vector."""
    order = np.argsort(V, kind="stable")
    Ps = P[:, order]
    half = 0.5 * np.asarray(c, dtype=np.float64)
    top = Ps[:, -1]
    out = np.zeros_like(Ps)
    fits = top + half <= 1.0
    if np.any(fits):
        cum = np.maximum(np.cumsum(Ps[fits, :-1], axis=1) - half[fits, None], 0.0)
        out[fits, :-1] = np.diff(cum, axis=1, prepend=0.0)
        out[fits, -1] = top[fits] + half[fits]
    out[~fits, -1] = 1.0
    res = np.empty_like(out)
    res[:, order] = out
    return res


def _finish_stage(Q_h: np.ndarray, h: int, H: int, clip: bool) -> np.ndarray:
    V_h = Q_h.max(axis=1)
    if clip:
        V_h = np.clip(V_h, 0.0, H - h)
    return V_h


def ucbvi_drm_plan(state: LearnerState, rewards: np.ndarray, risks: RiskSchedule, *,
                   clip_values: bool = True, bonus_scale: float = 1.0):
    """Optimistic Q and V tables with additive bonuses ``L_inf,h sqrt(iota / 2N)``."""
    H, S, A = state.H, state.S, state.A
    risks.check_horizon(H)
    if rewards.shape != (H, S, A):
        raise DimensionMismatch(f"rewards have shape {rewards.shape}, expected {(H, S, A)}")
    iota = state.iota
    Q = np.zeros((H, S, A))
    V = np.zeros((H + 1, S))
    Q[H - 1] = rewards[H - 1]
    V[H - 1] = rewards[H - 1].max(axis=1)
    for h in range(H - 2, -1, -1):
        L = risks[h].lipschitz_linf(0.0, H - h - 1)
        bonus = bonus_scale * L * np.sqrt(iota / (2.0 * np.maximum(state.N_sa[h], 1)))
        Q[h] = rewards[h] + risk_backup(risks[h], V[h + 1], state.P_hat[h]) + bonus
        V[h] = _finish_stage(Q[h], h, H, clip_values)
    state.Q, state.V = Q, V
    return Q, V


def ovi_drm_plan(state: LearnerState, rewards: np.ndarray, risks: RiskSchedule, *,
                 clip_values: bool = True, bonus_scale: float = 1.0):
    """Optimistic tables from the OM-shifted kernels; also returns those kernels."""
    H, S, A = state.H, state.S, state.A
    risks.check_horizon(H)
    if rewards.shape != (H, S, A):
        raise DimensionMismatch(f"rewards have shape {rewards.shape}, expected {(H, S, A)}")
    iota = state.iota
    Q = np.zeros((H, S, A))
    V = np.zeros((H + 1, S))
    P_tilde = np.empty_like(state.P_hat)
    Q[H - 1] = rewards[H - 1]
    V[H - 1] = rewards[H - 1].max(axis=1)
    for h in range(H - 2, -1, -1):
        c = bonus_scale * np.sqrt(2.0 * S * iota / np.maximum(state.N_sa[h], 1))
        P_tilde[h] = om_rows(state.P_hat[h].reshape(S * A, S), V[h + 1], c.reshape(-1)).reshape(S, A, S)
        Q[h] = rewards[h] + risk_backup(risks[h], V[h + 1], P_tilde[h])
        V[h] = _finish_stage(Q[h], h, H, clip_values)
    state.Q, state.V = Q, V
    return Q, V, P_tilde


@dataclass(frozen=True)
class AgentConfig:
    """Learner settings. ``objective`` is the schedule regret is measured under
    (defaults to ``risks``); a Mean learner scored under CVaR is the
    risk-neutral baseline."""

    algorithm: str
    risks: RiskSchedule
    delta: float
    K: int
    clip_values: bool = True
    bonus_scale: float = 1.0
    objective: RiskSchedule | None = None
    name: str | None = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if not 0.0 < self.delta < 1.0:
            raise DeltaOutOfRange(f"delta must lie in (0, 1), got {self.delta!r}")
        if self.K < 1:
            raise InvalidDimensions(f"K must be at least 1, got {self.K}")
        if self.bonus_scale < 0:
            raise ValueError("bonus_scale must be nonnegative")

    @property
    def label(self) -> str:
        return self.name or self.algorithm

    @property
    def target(self) -> RiskSchedule:
        return self.objective if self.objective is not None else self.risks


@dataclass(frozen=True, eq=False)
class RegretCurve:
    """Per-episode regret of one (algorithm, seed) run; episodes are 1-based."""

    algo: str
    seed: int
    inst: np.ndarray
    cum: np.ndarray
    v_optimistic: np.ndarray | None = None
    v_star: np.ndarray | None = None
    config_hash: str = ""

    @property
    def episodes(self) -> np.ndarray:
        return np.arange(1, self.inst.size + 1)

    def __len__(self) -> int:
        return self.inst.size

    @property
    def final(self) -> float:
        return float(self.cum[-1])


def episode_rng(seed: int, algo: str, episode: int) -> np.random.Generator:
    """Independent stream per (seed, algorithm, episode)."""
    return np.random.default_rng([seed, zlib.crc32(algo.encode()), episode])


def run_algorithm(mdp: TabularMDP, config: AgentConfig, rng_seed: int):
    """Play ``config.K`` episodes and return the regret curve and final learner state."""
    H, S, A = mdp.H, mdp.S, mdp.A
    config.risks.check_horizon(H)
    target = config.target
    v_star = drm_value_iteration(mdp, target).V[0]
    state = LearnerState(S, A, H, config.K, config.delta)
    plan = ucbvi_drm_plan if config.algorithm == UCBVI_DRM else ovi_drm_plan
    cache: dict[bytes, np.ndarray] = {}
    inst = np.empty(config.K)
    v_opt = np.empty(config.K)
    v_ref = np.empty(config.K)
    for k in range(config.K):
        Q, V = plan(state, mdp.r, config.risks, clip_values=config.clip_values,
                    bonus_scale=config.bonus_scale)[:2]
        pi = Policy(greedy(Q))
        key = pi.key()
        if key not in cache:
            cache[key] = drm_policy_evaluation(mdp, target, pi)[0]
        traj = rollout(mdp, pi, episode_rng(rng_seed, config.label, k))
        s1 = int(traj.states[0])
        inst[k] = v_star[s1] - cache[key][s1]
        v_opt[k] = V[0, s1]
        v_ref[k] = v_star[s1]
        update_counts(state, traj)
    curve = RegretCurve(config.label, rng_seed, inst, np.cumsum(inst), v_opt, v_ref)
    return curve, state


def optimism_rate(curve: RegretCurve, tol: float = 1e-9) -> float:
    """Fraction of episodes whose optimistic value covers the optimal one."""
    if curve.v_optimistic is None or curve.v_star is None:
        raise ValueError("curve carries no recorded optimistic values")
    return float(np.mean(curve.v_optimistic >= curve.v_star - tol))
