"""
Experiment configuration, multi-seed execution, CSV output and the slope test.

Config files are INI::

    [instance]
    name = experiment
    A = 5
    H = 5

    [experiment]
    K = 10000
    seeds = [0, 1, 2, 3, 4]
    delta = 0.005
    objective = cvar:0.05

    [algorithm OVI-DRM]
    type = OVI_DRM
    risk = cvar
    alpha = 0.05

Instance keys other than ``name`` are passed to the generator. ``objective``
sets the schedule regret is scored under; without it every algorithm is
scored under its own schedule.
"""

from __future__ import annotations

import ast
import configparser
import csv
import hashlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .agents import ALGORITHMS, AgentConfig, RegretCurve, run_algorithm
from .errors import ConfigInvalid, CurveTooShort, DRMError
from .mdp import TabularMDP, make_instance, read_mdp
from .risk import RiskSchedule, build_schedule

CSV_HEADER = ("algo", "seed", "episode", "inst_regret", "cum_regret")


def _literal(text: str):
    try:
        return ast.literal_eval(text.strip())
    except (ValueError, SyntaxError):
        return text.strip()


def parse_risk_spec(text: str, H: int) -> RiskSchedule:
    """``mean``, ``cvar:0.05``, ``cvar:[0.09,0.08,0.07,0.05]`` or ``erm:-1``."""
    family, _, arg = text.strip().partition(":")
    params = _literal(arg) if arg else None
    try:
        return build_schedule(family, params, H)
    except DRMError as exc:
        raise ConfigInvalid(f"bad risk schedule {text!r}: {exc}") from None


def parse_params(pairs) -> dict:
    """Turn ``["A=5", "H=5"]`` into ``{"A": 5, "H": 5}``."""
    out = {}
    for item in pairs:
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigInvalid(f"expected key=value, got {item!r}")
        out[key.strip()] = _literal(val)
    return out


def load_instance(source: str, params: dict | None = None) -> TabularMDP:
    """A generator name with parameters, or a path to an MDP text file."""
    if Path(source).is_file():
        return read_mdp(source)
    return make_instance(source, params or {})


@dataclass(frozen=True)
class ExperimentConfig:
    instance: str
    instance_params: dict
    algorithms: tuple
    K: int
    seeds: tuple
    delta: float
    out: str | None = None
    source_hash: str = ""

    def __post_init__(self):
        if not self.seeds:
            raise ConfigInvalid("at least one seed is required")
        if self.K < 1:
            raise ConfigInvalid("K must be at least 1")
        if not self.algorithms:
            raise ConfigInvalid("at least one [algorithm ...] section is required")

    def build_mdp(self) -> TabularMDP:
        return load_instance(self.instance, self.instance_params)


def _schedule_from_section(sec, H: int, prefix: str = "") -> RiskSchedule | None:
    risk = sec.get(prefix + "risk")
    if risk is None:
        return None
    if ":" in risk:
        return parse_risk_spec(risk, H)
    for key in ("alpha", "beta"):
        if prefix + key in sec:
            return parse_risk_spec(f"{risk}:{sec[prefix + key]}", H)
    return parse_risk_spec(risk, H)


def load_config(path, *, seeds=None, out=None, delta=None, clip=None,
                bonus_scale=None) -> ExperimentConfig:
    """Parse an INI experiment file; keyword arguments override file values."""
    raw = Path(path).read_bytes()
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        cp.read_string(raw.decode())
    except configparser.Error as exc:
        raise ConfigInvalid(f"cannot parse {path}: {exc}") from None
    if "instance" not in cp or "experiment" not in cp:
        raise ConfigInvalid("config needs [instance] and [experiment] sections")
    inst = dict(cp["instance"])
    name = inst.pop("name", None)
    if name is None:
        raise ConfigInvalid("[instance] needs a name")
    params = {k: _literal(v) for k, v in inst.items()}
    try:
        mdp = load_instance(name, params)
    except DRMError as exc:
        raise ConfigInvalid(f"cannot build instance {name!r}: {exc}") from None
    H = mdp.H

    exp = cp["experiment"]
    try:
        K = int(exp.get("K", "1"))
        file_seeds = _literal(exp.get("seeds", "[0]"))
        file_seeds = tuple(int(s) for s in (file_seeds if isinstance(file_seeds, (list, tuple)) else [file_seeds]))
        d = float(exp.get("delta", "0.005")) if delta is None else float(delta)
        file_clip = exp.getboolean("clip", True)
        scale = float(exp.get("bonus_scale", "1.0")) if bonus_scale is None else float(bonus_scale)
    except ValueError as exc:
        raise ConfigInvalid(f"bad [experiment] value: {exc}") from None
    objective = parse_risk_spec(exp["objective"], H) if "objective" in exp else None

    algos = []
    for sec_name in cp.sections():
        if not sec_name.startswith("algorithm"):
            continue
        sec = cp[sec_name]
        label = sec_name[len("algorithm"):].strip() or sec.get("type", "")
        kind = sec.get("type", label).upper().replace("-", "_")
        if kind not in ALGORITHMS:
            raise ConfigInvalid(f"[{sec_name}]: unknown algorithm type {kind!r}")
        risks = _schedule_from_section(sec, H)
        if risks is None:
            raise ConfigInvalid(f"[{sec_name}]: missing risk")
        target = _schedule_from_section(sec, H, "objective_") or objective
        try:
            algos.append(AgentConfig(
                algorithm=kind, risks=risks, delta=d, K=K,
                clip_values=sec.getboolean("clip", file_clip) if clip is None else clip,
                bonus_scale=float(sec.get("bonus_scale", scale)),
                objective=target, name=label,
            ))
        except DRMError as exc:
            raise ConfigInvalid(f"[{sec_name}]: {exc}") from None
    return ExperimentConfig(
        instance=name, instance_params=params, algorithms=tuple(algos), K=K,
        seeds=tuple(seeds) if seeds is not None else file_seeds, delta=d,
        out=out if out is not None else exp.get("out"),
        source_hash=hashlib.sha256(raw).hexdigest()[:16],
    )


@dataclass
class ExperimentResult:
    curves: list
    summary: dict

    def finals(self, algo: str) -> np.ndarray:
        return np.array([c.final for c in self.curves if c.algo == algo])


def _run_cell(args) -> RegretCurve:
    mdp, agent, seed, tag = args
    curve, _ = run_algorithm(mdp, agent, seed)
    return replace(curve, config_hash=tag)


def summarize(curves) -> dict:
    """``{algo: (mean, std, n)}`` of the final cumulative regret."""
    out = {}
    for algo in dict.fromkeys(c.algo for c in curves):
        finals = np.array([c.final for c in curves if c.algo == algo])
        out[algo] = (float(finals.mean()), float(finals.std()), int(finals.size))
    return out


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    """Run every (algorithm, seed) cell; results come back in config order."""
    mdp = cfg.build_mdp()
    cells = [(mdp, agent, seed, cfg.source_hash) for agent in cfg.algorithms for seed in cfg.seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            curves = list(pool.map(_run_cell, cells))
    else:
        curves = [_run_cell(c) for c in cells]
    result = ExperimentResult(curves, summarize(curves))
    if cfg.out:
        write_csv(curves, cfg.out)
        write_summary(result.summary, summary_path(cfg.out))
    return result


def summary_path(out) -> Path:
    p = Path(out)
    return p.with_name(p.stem + ".summary.csv")


def write_csv(curves, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for c in curves:
            for ep, inst, cum in zip(c.episodes, c.inst, c.cum):
                w.writerow((c.algo, c.seed, int(ep), f"{inst:.17g}", f"{cum:.17g}"))


def read_csv(path) -> dict:
    """``{(algo, seed): (inst, cum)}`` from a regret CSV."""
    rows: dict = {}
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.setdefault((rec["algo"], int(rec["seed"])), []).append(
                (float(rec["inst_regret"]), float(rec["cum_regret"])))
    return {k: tuple(np.array(col) for col in zip(*v)) for k, v in rows.items()}


def write_summary(summary: dict, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("algo", "n_seeds", "mean_final_regret", "std_final_regret"))
        for algo, (mean, std, n) in summary.items():
            w.writerow((algo, n, f"{mean:.17g}", f"{std:.17g}"))


def format_summary(summary: dict) -> str:
    width = max(len(a) for a in summary) if summary else 4
    lines = [f"{'algo':<{width}}  seeds  final cumulative regret"]
    for algo, (mean, std, n) in summary.items():
        lines.append(f"{algo:<{width}}  {n:5d}  {mean:.4f} +/- {std:.4f}")
    return "\n".join(lines)


def _ls_slope(y: np.ndarray, x: np.ndarray) -> float:
    xc = x - x.mean()
    return float(np.dot(xc, y - y.mean()) / np.dot(xc, xc))


def slope_test(curve, tail_fraction: float = 0.2) -> float:
    """Ratio of the least-squares slope of cumulative regret on the last
    ``tail_fraction`` of episodes to the slope on the first one.

    Values below 0.5 indicate sublinear growth; a linear curve gives 1.
    """
    cum = np.asarray(curve.cum if isinstance(curve, RegretCurve) else curve, dtype=np.float64)
    if not 0.0 < tail_fraction < 1.0:
        raise ValueError(f"tail_fraction must lie in (0, 1), got {tail_fraction!r}")
    if cum.size < 10:
        raise CurveTooShort(f"need at least 10 episodes, got {cum.size}")
    m = max(2, int(round(tail_fraction * cum.size)))
    x = np.arange(1, cum.size + 1, dtype=np.float64)
    first = _ls_slope(cum[:m], x[:m])
    last = _ls_slope(cum[-m:], x[-m:])
    scale = max(abs(first), abs(last), 1.0)
    if abs(first) <= 1e-12 * scale:
        return 0.0 if abs(last) <= 1e-12 * scale else float("inf")
    return last / first
