"""
Finite-horizon tabular MDPs, policies and trajectories, plus generators for
the experiment instance and the two lower-bound families.

Indexing: arrays are 0-based. Stage ``h`` (1-based in docs) lives at array
index ``h - 1``; state and action ``i`` (1-based in docs) at index ``i - 1``.
The text file format written by :func:`write_mdp` uses 1-based indices.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import (
    AssumptionViolated,
    ConfigInvalid,
    GapOutOfRange,
    InvalidDimensions,
    NoOptimalAction,
)

ROW_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class TabularMDP:
    """Episodic MDP with kernels ``P[h, s, a, s']`` (h < H-1) and rewards ``r[h, s, a]``."""

    P: np.ndarray
    r: np.ndarray
    initial: np.ndarray

    def __post_init__(self):
        P = np.array(self.P, dtype=np.float64)
        r = np.array(self.r, dtype=np.float64)
        init = np.array(self.initial, dtype=np.float64).reshape(-1)
        if r.ndim != 3 or r.shape[0] < 1:
            raise InvalidDimensions(f"rewards must have shape (H, S, A), got {r.shape}")
        H, S, A = r.shape
        if P.shape != (H - 1, S, A, S):
            raise InvalidDimensions(f"kernels must have shape {(H - 1, S, A, S)}, got {P.shape}")
        if init.shape != (S,):
            raise InvalidDimensions(f"initial distribution must have length {S}")
        for arr in (P, r, init):
            arr.setflags(write=False)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "initial", init)

    @property
    def H(self) -> int:
        return self.r.shape[0]

    @property
    def S(self) -> int:
        return self.r.shape[1]

    @property
    def A(self) -> int:
        return self.r.shape[2]


@dataclass(frozen=True, eq=False)
class Policy:
    """Deterministic stage-dependent policy; ``actions[h, s]`` is 0-based."""

    actions: np.ndarray

    def __post_init__(self):
        a = np.array(self.actions, dtype=np.int64)
        if a.ndim != 2:
            raise InvalidDimensions("policy table must have shape (H, S)")
        a.setflags(write=False)
        object.__setattr__(self, "actions", a)

    def __call__(self, h: int, s: int) -> int:
        return int(self.actions[h, s])

    def key(self) -> bytes:
        return self.actions.tobytes()


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States, actions and rewards for stages 1..H; the episode ends after stage H."""

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    terminated: bool = True

    def __len__(self) -> int:
        return self.states.size

    def transitions(self):
        """Yield ``(h, s, a, s_next)`` for h = 0..H-2 (0-based stage)."""
        for h in range(self.states.size - 1):
            yield h, int(self.states[h]), int(self.actions[h]), int(self.states[h + 1])


def _sample(probs: np.ndarray, u: float) -> int:
    cum = np.cumsum(probs)
    return int(min(np.searchsorted(cum, u * cum[-1], side="right"), probs.size - 1))


def rollout(mdp: TabularMDP, pi: Policy, rng_seed) -> Trajectory:
    """Sample one episode. ``rng_seed`` is an int seed or a numpy Generator."""
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    H = mdp.H
    u = rng.random(H)
    states = np.empty(H, dtype=np.int64)
    actions = np.empty(H, dtype=np.int64)
    rewards = np.empty(H)
    s = _sample(mdp.initial, u[0])
    for h in range(H):
        a = pi(h, s)
        states[h], actions[h], rewards[h] = s, a, mdp.r[h, s, a]
        if h < H - 1:
            s = _sample(mdp.P[h, s, a], u[h + 1])
    return Trajectory(states, actions, rewards)


# --------------------------------------------------------------------------
# Generators


def gen_experiment_mdp(A: int = 5, H: int = 5) -> TabularMDP:
    """Four-state risk-sensitive benchmark.

    From state 0, actions 1..A-1 reach states 1 and 2 uniformly while action A
    reaches state 2 w.p. 0.001 and state 3 w.p. 0.999. States 1, 2, 3 are
    absorbing and pay 1, 0, 0.4 per stage from stage 2 on.
    """
    if A < 2 or H < 2:
        raise InvalidDimensions(f"need A >= 2 and H >= 2, got A={A}, H={H}")
    S = 4
    P = np.zeros((H - 1, S, A, S))
    P[:, 0, : A - 1, 1] = 0.5
    P[:, 0, : A - 1, 2] = 0.5
    P[:, 0, A - 1, 2] = 0.001
    P[:, 0, A - 1, 3] = 0.999
    for s in (1, 2, 3):
        P[:, s, :, s] = 1.0
    r = np.zeros((H, S, A))
    r[1:, 1, :] = 1.0
    r[1:, 3, :] = 0.4
    initial = np.zeros(S)
    initial[0] = 1.0
    return TabularMDP(P, r, initial)


@dataclass(frozen=True)
class TreeLayout:
    """State indices of the tree instance."""

    A: int
    d: int
    H: int
    H_bar: int

    @property
    def n_tree(self) -> int:
        return (self.A ** self.d - 1) // (self.A - 1)

    @property
    def n_leaves(self) -> int:
        return self.A ** (self.d - 1)

    @property
    def S(self) -> int:
        return 3 + self.n_tree

    @property
    def wait(self) -> int:
        return 0

    @property
    def root(self) -> int:
        return 1

    @property
    def good(self) -> int:
        return self.n_tree + 1

    @property
    def bad(self) -> int:
        return self.n_tree + 2

    @property
    def first_leaf(self) -> int:
        return 1 + self.n_tree - self.n_leaves

    @property
    def H_tilde(self) -> int:
        return self.H_bar + self.d + 1


def gen_tree_hard_instance(A: int, d: int, H: int, p: float, eps: float,
                           hstar: int = 0, leaf_star: int = 1, astar: int = 1,
                           H_bar: int | None = None) -> TabularMDP:
    """Waiting state, A-ary tree of depth d-1, and absorbing good/bad states.

    The agent waits in state 0 with action 1 up to stage ``H_bar``, then walks
    down the tree (action a picks child a). Leaves move to the good state
    w.p. ``p``, or ``p + eps`` for the planted ``(hstar, leaf_star, astar)``
    (1-based stage, leaf and action). ``hstar = 0`` gives the reference MDP.
    Reward is 1 in the good state from stage ``H_bar + d + 1`` on.
    """
    if H_bar is None:
        H_bar = H // 3
    lay = TreeLayout(A, d, H, H_bar)
    if A < 2 or d < 1 or lay.S < 6:
        raise AssumptionViolated(f"need A >= 2 and S >= 6, got A={A}, S={lay.S if A >= 2 else '?'}")
    if H < 3 * d:
        raise AssumptionViolated(f"need H >= 3d, got H={H}, d={d}")
    if H_bar < 1 or lay.H_tilde > H:
        raise AssumptionViolated(f"waiting horizon {H_bar} incompatible with H={H}, d={d}")
    if not 0.0 <= p <= 1.0:
        raise AssumptionViolated(f"p must lie in [0, 1], got {p}")
    if not 0.0 <= eps <= min(p, 1.0 - p):
        raise AssumptionViolated(f"eps must lie in [0, min(p, 1-p)], got {eps}")
    if hstar != 0:
        if not d + 1 <= hstar <= H_bar + d:
            raise AssumptionViolated(f"hstar must lie in [{d + 1}, {H_bar + d}], got {hstar}")
        if not 1 <= leaf_star <= lay.n_leaves or not 1 <= astar <= A:
            raise AssumptionViolated("planted leaf or action out of range")

    S = lay.S
    P = np.zeros((H - 1, S, A, S))
    for h in range(H - 1):
        stage = h + 1
        if stage <= H_bar:
            P[h, lay.wait, 0, lay.wait] = 1.0
            P[h, lay.wait, 1:, lay.root] = 1.0
        else:
            P[h, lay.wait, :, lay.root] = 1.0
        for node in range(lay.first_leaf - 1):
            for a in range(A):
                P[h, 1 + node, a, 1 + A * node + a + 1] = 1.0
        P[h, lay.first_leaf:lay.good, :, lay.good] = p
        P[h, lay.first_leaf:lay.good, :, lay.bad] = 1.0 - p
        P[h, lay.good, :, lay.good] = 1.0
        P[h, lay.bad, :, lay.bad] = 1.0
    if hstar != 0:
        leaf = lay.first_leaf + leaf_star - 1
        P[hstar - 1, leaf, astar - 1, lay.good] = p + eps
        P[hstar - 1, leaf, astar - 1, lay.bad] = 1.0 - p - eps
    r = np.zeros((H, S, A))
    r[lay.H_tilde - 1:, lay.good, :] = 1.0
    initial = np.zeros(S)
    initial[lay.wait] = 1.0
    return TabularMDP(P, r, initial)


def gen_gap_hard_instance(S: int, A: int, H: int, gaps) -> TabularMDP:
    """States 0..S-1 branch at stage 1 into a good (index S) or bad (S+1) sink.

    ``P_1(good | s, a) = 3/4 - 2 gaps[s, a] / (H - 1)``. The good sink pays 1
    and the bad sink 1/2, both on action 1. The start state is uniform on 0..S-1.
    """
    if S < 2 or A < 2 or H < 2:
        raise InvalidDimensions(f"need S, A, H >= 2, got S={S}, A={A}, H={H}")
    g = np.asarray(gaps, dtype=np.float64)
    if g.shape != (S, A):
        raise InvalidDimensions(f"gaps must have shape {(S, A)}, got {g.shape}")
    zeros = g == 0.0
    if np.any(zeros.sum(axis=1) != 1):
        raise NoOptimalAction("each state needs exactly one zero-gap action")
    nz = g[~zeros]
    if np.any(nz <= 0) or np.any(nz >= H / 8):
        raise GapOutOfRange(f"nonzero gaps must lie in (0, {H / 8})")
    good, bad = S, S + 1
    n = S + 2
    P = np.zeros((H - 1, n, A, n))
    p_good = 0.75 - 2.0 * g / (H - 1)
    P[0, :S, :, good] = p_good
    P[0, :S, :, bad] = 1.0 - p_good
    for h in range(1, H - 1):
        P[h, np.arange(S), :, np.arange(S)] = 1.0
    P[:, good, :, good] = 1.0
    P[:, bad, :, bad] = 1.0
    r = np.zeros((H, n, A))
    r[:, good, 0] = 1.0
    r[:, bad, 0] = 0.5
    initial = np.zeros(n)
    initial[:S] = 1.0 / S
    return TabularMDP(P, r, initial)


GENERATORS = {
    "experiment": gen_experiment_mdp,
    "tree": gen_tree_hard_instance,
    "gap": gen_gap_hard_instance,
}


def make_instance(name: str, params: dict) -> TabularMDP:
    """Build a generator instance from a name and a parameter mapping."""
    if name not in GENERATORS:
        raise ConfigInvalid(f"unknown instance {name!r}; choose from {sorted(GENERATORS)}")
    try:
        return GENERATORS[name](**params)
    except TypeError as exc:
        raise ConfigInvalid(f"bad parameters for {name!r}: {exc}") from None


# --------------------------------------------------------------------------
# Validation


@dataclass(frozen=True)
class Violation:
    kind: str
    h: int | None
    s: int | None
    a: int | None
    detail: str

    def __str__(self):
        where = ", ".join(f"{k}={v}" for k, v in (("h", self.h), ("s", self.s), ("a", self.a)) if v is not None)
        return f"{self.kind}({where}): {self.detail}"


def validate_mdp(mdp: TabularMDP) -> list[Violation]:
    """List every broken invariant; indices in the report are 1-based."""
    out: list[Violation] = []
    sums = mdp.P.sum(axis=-1)
    neg = (mdp.P < 0).any(axis=-1)
    for h, s, a in zip(*np.nonzero((np.abs(sums - 1.0) > ROW_TOL) | neg)):
        out.append(Violation("RowNotStochastic", h + 1, s + 1, a + 1, f"row sums to {sums[h, s, a]!r}"))
    bad_r = (mdp.r < 0) | (mdp.r > 1) | ~np.isfinite(mdp.r)
    for h, s, a in zip(*np.nonzero(bad_r)):
        out.append(Violation("RewardOutOfRange", h + 1, s + 1, a + 1, f"reward {mdp.r[h, s, a]!r}"))
    if np.any(mdp.initial < 0) or abs(mdp.initial.sum() - 1.0) > ROW_TOL:
        out.append(Violation("InitialNotStochastic", None, None, None, f"sums to {mdp.initial.sum()!r}"))
    return out


# --------------------------------------------------------------------------
# Text serialization


def write_mdp(mdp: TabularMDP, path) -> None:
    lines = [f"# S {mdp.S}", f"# A {mdp.A}", f"# H {mdp.H}", "# initial", _row(mdp.initial)]
    for h in range(mdp.H):
        lines.append(f"# reward h={h + 1}")
        lines.extend(_row(mdp.r[h, s]) for s in range(mdp.S))
    for h in range(mdp.H - 1):
        for s in range(mdp.S):
            for a in range(mdp.A):
                lines.append(f"# kernel h={h + 1} s={s + 1} a={a + 1}")
                lines.append(_row(mdp.P[h, s, a]))
    Path(path).write_text("\n".join(lines) + "\n")


def _row(v: Iterable[float]) -> str:
    return " ".join(repr(float(x)) for x in v)


def read_mdp(path) -> TabularMDP:
    text = Path(path).read_text().splitlines()
    dims: dict[str, int] = {}
    i = 0
    try:
        while len(dims) < 3:
            key, val = text[i].lstrip("#").split()
            dims[key] = int(val)
            i += 1
        S, A, H = dims["S"], dims["A"], dims["H"]
        P = np.zeros((H - 1, S, A, S))
        r = np.zeros((H, S, A))
        initial = None
        while i < len(text):
            head = text[i].lstrip("#").split()
            if not head:
                i += 1
                continue
            if head[0] == "initial":
                initial = np.array(text[i + 1].split(), dtype=float)
                i += 2
            elif head[0] == "reward":
                h = _field(head, "h")
                r[h] = np.array([text[i + 1 + s].split() for s in range(S)], dtype=float)
                i += 1 + S
            elif head[0] == "kernel":
                P[_field(head, "h"), _field(head, "s"), _field(head, "a")] = np.array(text[i + 1].split(), dtype=float)
                i += 2
            else:
                raise ValueError(f"unrecognised header {text[i]!r}")
    except (IndexError, KeyError, ValueError) as exc:
        raise ConfigInvalid(f"cannot parse MDP file {path}: {exc}") from None
    if initial is None:
        raise ConfigInvalid(f"MDP file {path} has no initial distribution")
    return TabularMDP(P, r, initial)


def _field(tokens: list[str], name: str) -> int:
    for t in tokens:
        if t.startswith(name + "="):
            return int(t.split("=", 1)[1]) - 1
    raise KeyError(name)
