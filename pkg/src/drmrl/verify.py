"""
Randomized oracle checks backing ``drmrl verify`` and the acceptance tests.

Each ``check_*`` function returns a :class:`CheckResult`. The classical
value-iteration and Hoeffding-UCBVI oracles below are written directly with
loops and share no planning code with the package.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .agents import (
    OVI_DRM,
    UCBVI_DRM,
    AgentConfig,
    LearnerState,
    episode_rng,
    om,
    optimism_rate,
    run_algorithm,
    ucbvi_drm_plan,
    update_counts,
)
from .distributions import (
    DiscreteDistribution,
    pmf_l1,
    sup_distance,
    to_cdf,
    transport_bound,
    wasserstein_coupling_oracle,
    wasserstein_distance,
)
from .harness import slope_test
from .mdp import (
    Policy,
    TabularMDP,
    TreeLayout,
    gen_experiment_mdp,
    gen_gap_hard_instance,
    gen_tree_hard_instance,
    rollout,
)
from .planning import compute_gaps, drm_value_iteration, greedy
from .risk import (
    CVaR,
    ERM,
    OCE,
    Distortion,
    DistortionFunction,
    Mean,
    PiecewiseConstantSpectrum,
    RiskSchedule,
    Spectral,
    build_schedule,
    cvar_opt_oracle,
    cvar_utility,
    exponential_utility,
)


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0
    limit: float | None = None

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        budget = f" / {self.limit:.0f}s" if self.limit else ""
        return f"[{status}] {self.number}. {self.name}: {self.detail} ({self.seconds:.1f}s{budget})"


def _timed(number, name, limit):
    def deco(fn):
        def wrapper(*args, **kwargs):
            t0 = time.perf_counter()
            passed, detail = fn(*args, **kwargs)
            dt = time.perf_counter() - t0
            ok = passed and (limit is None or dt < limit)
            if passed and not ok:
                detail += f"; over the {limit:.0f}s budget"
            return CheckResult(number, name, ok, detail, dt, limit)
        wrapper.__name__ = fn.__name__
        wrapper.__doc__ = fn.__doc__
        return wrapper
    return deco


# --------------------------------------------------------------------------
# Random inputs


def random_dist(rng, lo=0.0, hi=4.0, max_n=10, ties=False) -> DiscreteDistribution:
    n = int(rng.integers(1, max_n + 1))
    if ties:
        x = rng.choice(np.linspace(lo, hi, 5), size=n)
    else:
        x = rng.uniform(lo, hi, size=n)
    p = rng.dirichlet(np.full(n, 0.5))
    p = p / p.sum()
    return DiscreteDistribution(x, p)


def random_pair(rng, lo=0.0, hi=4.0, max_n=10):
    """Pairs of several kinds: independent, reweighted, and moved support."""
    kind = rng.integers(4)
    d1 = random_dist(rng, lo, hi, max_n, ties=kind == 3)
    n = len(d1)
    if kind == 0:
        return d1, random_dist(rng, lo, hi, max_n)
    if kind == 1:
        q = rng.dirichlet(np.full(n, 0.5))
        return d1, DiscreteDistribution(d1.support, q / q.sum())
    y = np.clip(d1.support + rng.normal(0, 0.3, size=n), lo, hi)
    return d1, DiscreteDistribution(y, d1.probs)


def lipschitz_suite():
    """Measures exercised by the Lipschitz and range checks (support in [0, 4])."""
    return [
        Mean(),
        CVaR(0.05), CVaR(0.25), CVaR(0.5), CVaR(1.0),
        ERM(-1.0), ERM(0.5),
        OCE(cvar_utility(0.2)),
        OCE(exponential_utility(-1.0, lo=-4.0, hi=4.0)),
        Distortion(DistortionFunction.cvar(0.3)),
        Distortion(DistortionFunction(np.array([0.0, 0.4, 1.0]), np.array([0.0, 0.7, 1.0]))),
        Spectral(PiecewiseConstantSpectrum.cvar(0.3)),
        Spectral(PiecewiseConstantSpectrum(np.array([0.0, 0.2, 0.6, 1.0]), np.array([3.0, 0.75, 0.25]))),
    ]


def random_mdp(rng, S, A, H) -> TabularMDP:
    P = rng.dirichlet(np.ones(S), size=(max(H - 1, 0), S, A)).reshape(H - 1, S, A, S)
    P = P / P.sum(axis=-1, keepdims=True)
    r = rng.uniform(0, 1, size=(H, S, A))
    init = rng.dirichlet(np.ones(S))
    return TabularMDP(P, r, init / init.sum())


# --------------------------------------------------------------------------
# Independent oracles


def classical_value_iteration(mdp: TabularMDP):
    """Risk-neutral finite-horizon Bellman recursion written with plain loops."""
    H, S, A = mdp.H, mdp.S, mdp.A
    V = [[0.0] * S for _ in range(H + 1)]
    Q = [[[0.0] * A for _ in range(S)] for _ in range(H)]
    for h in reversed(range(H)):
        for s in range(S):
            for a in range(A):
                q = float(mdp.r[h, s, a])
                if h < H - 1:
                    q += sum(float(mdp.P[h, s, a, t]) * V[h + 1][t] for t in range(S))
                Q[h][s][a] = q
            V[h][s] = max(Q[h][s])
    return np.array(V), np.array(Q)


def classical_ucbvi(mdp: TabularMDP, K: int, delta: float, seed: int, label: str):
    """Hoeffding-bonus UCBVI with value clipping; yields the Q table of each episode."""
    H, S, A = mdp.H, mdp.S, mdp.A
    iota = np.log(4.0 * S * A * K * H / delta)
    counts = np.zeros((H - 1, S, A, S), dtype=np.int64)
    visits = np.zeros((H - 1, S, A), dtype=np.int64)
    P_hat = np.full((H - 1, S, A, S), 1.0 / S)
    for k in range(K):
        Q = np.zeros((H, S, A))
        V = np.zeros((H + 1, S))
        Q[H - 1] = mdp.r[H - 1]
        V[H - 1] = Q[H - 1].max(axis=1)
        for h in range(H - 2, -1, -1):
            horizon_left = float(H - h - 1)
            n = np.maximum(visits[h], 1)
            expected = (P_hat[h].reshape(S * A, S) @ V[h + 1]).reshape(S, A)
            Q[h] = mdp.r[h] + expected + 1.0 * horizon_left * np.sqrt(iota / (2.0 * n))
            V[h] = np.minimum(np.maximum(Q[h].max(axis=1), 0.0), H - h)
        yield Q
        actions = np.argmax(Q, axis=-1)
        traj = rollout(mdp, Policy(actions), episode_rng(seed, label, k))
        for h in range(H - 1):
            s, a, t = int(traj.states[h]), int(traj.actions[h]), int(traj.states[h + 1])
            counts[h, s, a, t] += 1
            visits[h, s, a] += 1
            P_hat[h, s, a] = counts[h, s, a] / visits[h, s, a]


def _cdf_levels(P_sorted: np.ndarray, V_sorted: np.ndarray) -> np.ndarray:
    """Cumulative mass at each distinct value (rows of ``P_sorted``)."""
    cum = np.cumsum(P_sorted, axis=-1)
    last_of_group = np.append(V_sorted[1:] != V_sorted[:-1], True)
    return cum[..., last_of_group]


def sample_l1_ball(rng, P: np.ndarray, c: float, m: int) -> np.ndarray:
    """``m`` kernels inside the simplex with ``||Q - P||_1 <= c``."""
    n = P.size
    X = rng.dirichlet(np.full(n, 0.3), size=m)
    vert = np.eye(n)[rng.integers(n, size=m)]
    X = np.where(rng.random((m, 1)) < 0.3, vert, X)
    dist = np.abs(X - P).sum(axis=1)
    t = np.minimum(1.0, c * rng.random(m) ** 0.25 / np.maximum(dist, 1e-300))
    Q = P + t[:, None] * (X - P)
    Q = np.clip(Q, 0.0, None)
    return Q / Q.sum(axis=1, keepdims=True)


# --------------------------------------------------------------------------
# Acceptance checks


@_timed(1, "risk-measure oracles", 10)
def check_risk_oracles(seed: int = 1, n: int = 1000):
    rng = np.random.default_rng(seed)
    alphas = (0.05, 0.25, 0.5, 1.0)
    worst_cvar = worst_erm = worst_spec = 0.0
    ok = True
    for i in range(n):
        a = rng.uniform(-5, 5)
        b = a + rng.uniform(0.5, 10)
        d = random_dist(rng, a, b, 10, ties=i % 5 == 0)
        alpha = alphas[i % 4]
        err = abs(CVaR(alpha).evaluate(d) - cvar_opt_oracle(alpha, d, 100_000))
        worst_cvar = max(worst_cvar, err / (b - a))
        ok &= err <= (b - a) / 1e4
        beta = (-2.0, -0.5, 0.5, 2.0)[i % 4]
        direct = np.log(np.sum(d.probs * np.exp(beta * d.support))) / beta
        err = abs(ERM(beta).evaluate(d) - direct)
        worst_erm = max(worst_erm, err)
        ok &= err <= 1e-9 * max(1.0, abs(direct))
        err = abs(Spectral(PiecewiseConstantSpectrum.cvar(alpha)).evaluate(d) - CVaR(alpha).evaluate(d))
        worst_spec = max(worst_spec, err)
        ok &= err <= 1e-9
    return ok, (f"{n} dists; CVaR err/(b-a) max {worst_cvar:.2e} (tol 1e-4), "
                f"ERM err {worst_erm:.1e}, spectral-vs-CVaR err {worst_spec:.1e}")


@_timed(2, "Lipschitz constants", 30)
def check_lipschitz(seed: int = 2, n: int = 1000, b: float = 4.0):
    rng = np.random.default_rng(seed)
    pairs = [random_pair(rng, 0.0, b) for _ in range(n)]
    dists = [(sup_distance(to_cdf(f), to_cdf(g)), wasserstein_distance(to_cdf(f), to_cdf(g))) for f, g in pairs]
    bad = []
    tightest = 0.0
    for rm in lipschitz_suite():
        L_inf, L_1 = rm.lipschitz_linf(0.0, b), rm.lipschitz_l1(0.0, b)
        for (f, g), (ds, dw) in zip(pairs, dists):
            gap = abs(rm.evaluate(f) - rm.evaluate(g))
            if gap > L_inf * ds + 1e-8 or gap > L_1 * dw + 1e-8:
                bad.append(str(rm))
                break
            if dw > 1e-6:
                tightest = max(tightest, gap / (L_1 * dw))
    detail = f"{len(lipschitz_suite())} measures x {n} pairs on [0,{b:g}]; max |drho|/(L1 W1) = {tightest:.3f}"
    if bad:
        detail += f"; violated by {', '.join(bad)}"
    return not bad, detail


@_timed(3, "transport and distance oracles", 10)
def check_transport(seed: int = 3, n: int = 10_000, n_coupling: int = 1000):
    rng = np.random.default_rng(seed)
    transport_bad = sup_bad = 0
    for _ in range(n):
        k = int(rng.integers(1, 11))
        x = rng.uniform(-3, 3, k)
        y = rng.uniform(-3, 3, k)
        P = rng.dirichlet(np.ones(k))
        P = P / P.sum()
        w = wasserstein_distance(to_cdf(DiscreteDistribution(x, P)), to_cdf(DiscreteDistribution(y, P)))
        transport_bad += w > transport_bound(x, y, P) + 1e-12
        Q = rng.dirichlet(np.ones(k))
        Q = Q / Q.sum()
        s = sup_distance(to_cdf(DiscreteDistribution(x, P)), to_cdf(DiscreteDistribution(x, Q)))
        sup_bad += s > pmf_l1(P, Q) + 1e-12
    worst = 0.0
    for i in range(n_coupling):
        f = random_dist(rng, -2, 2, 12, ties=i % 3 == 0)
        g = random_dist(rng, -2, 2, 12, ties=i % 4 == 0)
        worst = max(worst, abs(wasserstein_distance(to_cdf(f), to_cdf(g)) - wasserstein_coupling_oracle(f, g)))
    ok = transport_bad == 0 and sup_bad == 0 and worst <= 1e-9
    return ok, (f"transport violations {transport_bad}/{n}, sup-vs-l1 violations {sup_bad}/{n}, "
                f"W1 vs coupling max err {worst:.1e} over {n_coupling}")


@_timed(4, "OM dominance", 30)
def check_om_dominance(seed: int = 4, n: int = 1000, m: int = 200):
    rng = np.random.default_rng(seed)
    worst_dom = -np.inf
    worst_l1 = -np.inf
    for i in range(n):
        k = int(rng.integers(1, 7))
        P = rng.dirichlet(np.full(k, 0.7))
        P = P / P.sum()
        V = rng.integers(0, 3, k).astype(float) if i % 4 == 0 else rng.uniform(0, 5, k)
        c = float(rng.choice([rng.uniform(0, 0.5), rng.uniform(0, 2.5)]))
        Pt = om(P, V, c)
        worst_l1 = max(worst_l1, pmf_l1(Pt, P) - c)
        if abs(Pt.sum() - 1.0) > 1e-12 or np.any(Pt < 0):
            return False, f"OM output is not a probability vector at trial {i}"
        order = np.argsort(V, kind="stable")
        Vs = V[order]
        Qs = sample_l1_ball(rng, P, c, m)
        F_om = _cdf_levels(Pt[order], Vs)
        F_q = _cdf_levels(Qs[:, order], Vs)
        worst_dom = max(worst_dom, float(np.max(F_om - F_q)))
    ok = worst_dom <= 1e-12 and worst_l1 <= 1e-12
    return ok, (f"{n} (P,V,c) x {m} Q; max F_om - F_Q = {worst_dom:.1e}, "
                f"max ||Pt-P||_1 - c = {worst_l1:.1e}")


@_timed(5, "risk-neutral reduction", 20)
def check_risk_neutral(seed: int = 5, n: int = 100, K: int = 300):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        S, A, H = (int(v) for v in rng.integers(1, 7, size=3))
        mdp = random_mdp(rng, S, A, H)
        tables = drm_value_iteration(mdp, RiskSchedule.homogeneous(Mean(), H))
        V_ref, Q_ref = classical_value_iteration(mdp)
        worst = max(worst, float(np.max(np.abs(tables.V - V_ref))), float(np.max(np.abs(tables.Q - Q_ref))))
    mismatched = 0
    instances = [gen_experiment_mdp(5, 5)] + [random_mdp(rng, 4, 3, 4) for _ in range(2)]
    for j, mdp in enumerate(instances):
        risks = RiskSchedule.homogeneous(Mean(), mdp.H)
        state = LearnerState(mdp.S, mdp.A, mdp.H, K, 0.05)
        for k, Q_ref in enumerate(classical_ucbvi(mdp, K, 0.05, seed + j, UCBVI_DRM)):
            Q, _ = ucbvi_drm_plan(state, mdp.r, risks)
            mismatched += not np.array_equal(Q, Q_ref)
            traj = rollout(mdp, Policy(greedy(Q)), episode_rng(seed + j, UCBVI_DRM, k))
            update_counts(state, traj)
    ok = worst <= 1e-12 and mismatched == 0
    return ok, (f"VI vs classical max err {worst:.1e} on {n} MDPs; "
                f"UCBVI Q-tables not bitwise equal in {mismatched}/{K * len(instances)} episodes")


# --- experiment instance runs (shared by checks 6 and 7)

HOMOGENEOUS = (0.05, 0.05, 0.05, 0.05)
INHOMOGENEOUS = (0.09, 0.08, 0.07, 0.05)


@dataclass
class BenchmarkRuns:
    """Regret curves on the four-state benchmark, keyed by (setting, algorithm)."""

    K: int
    seeds: tuple
    bonus_scale: float = 1.0
    curves: dict = field(default_factory=dict)

    def get(self, setting: str, algo: str, K: int | None = None):
        K = K or self.K
        key = (setting, algo, K)
        if key not in self.curves:
            self.curves[key] = [self._run(setting, algo, K, s) for s in self.seeds]
        return self.curves[key]

    def _run(self, setting, algo, K, seed):
        mdp = gen_experiment_mdp(5, 5)
        alphas = HOMOGENEOUS if setting == "homogeneous" else INHOMOGENEOUS
        target = build_schedule("cvar", list(alphas), 5)
        if algo == "Mean":
            kind, risks = UCBVI_DRM, build_schedule("mean", None, 5)
        else:
            kind, risks = algo, target
        cfg = AgentConfig(kind, risks, 0.005, K, bonus_scale=self.bonus_scale, objective=target, name=algo)
        return run_algorithm(mdp, cfg, seed)[0]


def default_runs() -> BenchmarkRuns:
    return BenchmarkRuns(K=10_000, seeds=(0, 1, 2, 3, 4))


@_timed(6, "optimism rate", 120)
def check_optimism(runs: BenchmarkRuns):
    rates = {algo: [optimism_rate(c) for c in runs.get("homogeneous", algo)] for algo in (UCBVI_DRM, OVI_DRM)}
    ok = all(min(r) >= 0.99 for r in rates.values())
    return ok, "; ".join(f"{a} min rate {min(r):.4f}" for a, r in rates.items())


def _mean_curve(curves) -> np.ndarray:
    return np.mean([c.cum for c in curves], axis=0)


@_timed(7, "benchmark reproduction", 600)
def check_reproduction(runs: BenchmarkRuns):
    parts = []
    hom = {a: runs.get("homogeneous", a) for a in ("Mean", UCBVI_DRM, OVI_DRM)}
    ratio = {a: slope_test(_mean_curve(c)) for a, c in hom.items()}
    final = {a: float(np.mean([c.final for c in cs])) for a, cs in hom.items()}
    a_ok = ratio["Mean"] > 0.8
    b_ok = ratio[UCBVI_DRM] < 0.5 and ratio[OVI_DRM] < 0.5
    c_ok = final[OVI_DRM] < final[UCBVI_DRM]
    inh = {a: slope_test(_mean_curve(runs.get("inhomogeneous", a))) for a in (UCBVI_DRM, OVI_DRM)}
    d_ok = all(r < 0.5 for r in inh.values())
    short = float(np.mean([c.final for c in runs.get("homogeneous", OVI_DRM, runs.K // 4)]))
    e_ok = final[OVI_DRM] < 4.0 * short
    parts.append(f"(a) Mean ratio {ratio['Mean']:.3f} {'ok' if a_ok else 'FAIL'}")
    parts.append(f"(b) UCBVI {ratio[UCBVI_DRM]:.3f} OVI {ratio[OVI_DRM]:.3f} {'ok' if b_ok else 'FAIL'}")
    parts.append(f"(c) final OVI {final[OVI_DRM]:.1f} < UCBVI {final[UCBVI_DRM]:.1f} {'ok' if c_ok else 'FAIL'}")
    parts.append(f"(d) inhomog UCBVI {inh[UCBVI_DRM]:.3f} OVI {inh[OVI_DRM]:.3f} {'ok' if d_ok else 'FAIL'}")
    parts.append(f"K-scaling OVI {final[OVI_DRM]:.1f} < 4 x {short:.1f} {'ok' if e_ok else 'FAIL'}")
    return a_ok and b_ok and c_ok and d_ok and e_ok, "; ".join(parts)


@_timed(8, "hard-instance sanity", 5)
def check_hard_instances():
    S = A = H = 3
    gaps = np.array([[0.0, 0.1, 0.2], [0.2, 0.0, 0.1], [0.1, 0.2, 0.0]])
    mdp = gen_gap_hard_instance(S, A, H, gaps)
    notes = []
    ok = True
    for risks in (RiskSchedule.homogeneous(Mean(), H), RiskSchedule.homogeneous(CVaR(0.5), H)):
        g = compute_gaps(drm_value_iteration(mdp, risks))
        stage1 = g.gaps[0, :S]
        unique = bool(np.all((stage1 <= 1e-9).sum(axis=1) == 1))
        planted = bool(np.array_equal(np.argmin(stage1, axis=1), np.argmin(gaps, axis=1)))
        ok &= unique and planted and g.delta_min is not None and g.delta_min > 0
        notes.append(f"{risks[0]}: unique={unique}, planted={planted}, gap_min={g.delta_min:.4f}")
    Ad, d, Ht, p = 2, 2, 6, 0.5
    lay = TreeLayout(Ad, d, Ht, Ht // 3)
    mismatches = total = 0
    for risks in (RiskSchedule.homogeneous(Mean(), Ht), RiskSchedule.homogeneous(CVaR(0.3), Ht)):
        ref = drm_value_iteration(gen_tree_hard_instance(Ad, d, Ht, p, 0.0), risks).V[0]
        for hstar in range(d + 1, lay.H_bar + d + 1):
            for leaf in range(1, lay.n_leaves + 1):
                for a in range(1, Ad + 1):
                    inst = gen_tree_hard_instance(Ad, d, Ht, p, 0.0, hstar, leaf, a)
                    total += 1
                    mismatches += not np.array_equal(drm_value_iteration(inst, risks).V[0], ref)
    ok &= mismatches == 0
    notes.append(f"tree eps=0 value mismatches {mismatches}/{total}")
    return ok, "; ".join(notes)


def run_checks(full: bool = False, runs: BenchmarkRuns | None = None) -> list[CheckResult]:
    results = [check_risk_oracles(), check_lipschitz(), check_transport(),
               check_om_dominance(), check_risk_neutral()]
    if full:
        runs = runs or default_runs()
        results += [check_optimism(runs), check_reproduction(runs)]
    results.append(check_hard_instances())
    return results
