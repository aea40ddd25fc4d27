"""Exact backward induction under a dynamic risk measure."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NegativeGap
from .mdp import Policy, TabularMDP
from .risk import RiskSchedule

GAP_ZERO = 1e-9
GAP_SLACK = 1e-10


@dataclass(frozen=True, eq=False)
class ValueTables:
    """``V[h]`` for h = 0..H (``V[H] = 0``), ``Q[h]`` for h = 0..H-1, greedy policy."""

    V: np.ndarray
    Q: np.ndarray
    pi: Policy


@dataclass(frozen=True, eq=False)
class GapTable:
    gaps: np.ndarray
    delta_min: float | None


def greedy(Q: np.ndarray) -> np.ndarray:
    """Row argmax; ties go to the lowest action index."""
    return np.argmax(Q, axis=-1)


def risk_backup(rm, values: np.ndarray, P_stage: np.ndarray) -> np.ndarray:
    """``rho((values, P_stage[s, a]))`` for every (s, a) of one stage."""
    S, A, _ = P_stage.shape
    return rm.evaluate_rows(values, P_stage.reshape(S * A, -1)).reshape(S, A)


def drm_value_iteration(mdp: TabularMDP, risks: RiskSchedule) -> ValueTables:
    risks.check_horizon(mdp.H)
    H, S, A = mdp.H, mdp.S, mdp.A
    V = np.zeros((H + 1, S))
    Q = np.zeros((H, S, A))
    for h in range(H - 1, -1, -1):
        Q[h] = mdp.r[h]
        if h < H - 1:
            Q[h] = Q[h] + risk_backup(risks[h], V[h + 1], mdp.P[h])
        V[h] = Q[h].max(axis=1)
    return ValueTables(V, Q, Policy(greedy(Q)))


def drm_policy_evaluation(mdp: TabularMDP, risks: RiskSchedule, pi: Policy) -> np.ndarray:
    """``V^pi`` with shape (H + 1, S); the last row is zero."""
    risks.check_horizon(mdp.H)
    H, S = mdp.H, mdp.S
    states = np.arange(S)
    V = np.zeros((H + 1, S))
    for h in range(H - 1, -1, -1):
        a = pi.actions[h]
        V[h] = mdp.r[h, states, a]
        if h < H - 1:
            V[h] = V[h] + risks[h].evaluate_rows(V[h + 1], mdp.P[h, states, a])
    return V


def compute_gaps(tables: ValueTables) -> GapTable:
    gaps = tables.V[:-1, :, None] - tables.Q
    if np.any(gaps < -GAP_SLACK):
        raise NegativeGap(f"Q exceeds V by {-gaps.min()!r}")
    gaps = np.maximum(gaps, 0.0)
    positive = gaps[gaps > GAP_ZERO]
    return GapTable(gaps, float(positive.min()) if positive.size else None)
