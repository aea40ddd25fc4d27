import numpy as np
import pytest

from drmrl.agents import RegretCurve
from drmrl.errors import ConfigInvalid, CurveTooShort
from drmrl.harness import (
    load_config,
    parse_params,
    parse_risk_spec,
    read_csv,
    run_experiment,
    slope_test,
    summary_path,
)

CONFIG = """
[instance]
name = experiment
A = 3
H = 4

[experiment]
K = {K}
seeds = [0, 1]
delta = 0.05
objective = cvar:0.1

[algorithm OVI-DRM]
type = OVI_DRM
risk = cvar
alpha = [0.2, 0.15, 0.1]

[algorithm Mean]
type = UCBVI_DRM
risk = mean
"""


def _write(tmp_path, K=30, text=CONFIG):
    path = tmp_path / "exp.ini"
    path.write_text(text.format(K=K))
    return path


def test_slope_test_shapes():
    x = np.arange(1, 101, dtype=float)
    assert slope_test(2.0 * x) == pytest.approx(1.0)
    assert slope_test(np.minimum(x, 10.0)) == 0.0
    assert slope_test(np.zeros(50)) == 0.0
    flat_then_up = np.concatenate([np.zeros(50), np.arange(1, 51.0)])
    assert slope_test(flat_then_up) == float("inf")
    ratio = slope_test(np.sqrt(np.arange(1, 10_001)))
    assert 0.2 < ratio < 0.3
    with pytest.raises(CurveTooShort):
        slope_test(np.arange(9.0))
    with pytest.raises(ValueError):
        slope_test(x, tail_fraction=1.0)
    curve = RegretCurve("a", 0, np.ones(20), np.cumsum(np.ones(20)))
    assert slope_test(curve, 0.5) == pytest.approx(1.0)


def test_parse_helpers():
    assert len(parse_risk_spec("cvar:[0.09,0.08,0.07,0.05]", 5)) == 4
    assert parse_risk_spec("erm:-1", 3)[0].beta == -1
    assert parse_params(["A=5", "p=0.5", "gaps=[[0, 0.1], [0.1, 0]]", "name=x"]) == {
        "A": 5, "p": 0.5, "gaps": [[0, 0.1], [0.1, 0]], "name": "x"}
    with pytest.raises(ConfigInvalid):
        parse_risk_spec("cvar:[0.1]", 5)
    with pytest.raises(ConfigInvalid):
        parse_params(["A"])


def test_load_config(tmp_path):
    cfg = load_config(_write(tmp_path))
    assert cfg.K == 30 and cfg.seeds == (0, 1) and cfg.delta == 0.05
    ovi, mean = cfg.algorithms
    assert ovi.label == "OVI-DRM" and [m.alpha for m in ovi.risks] == [0.2, 0.15, 0.1]
    assert str(mean.target) == "[CVaR(0.1), CVaR(0.1), CVaR(0.1)]"
    over = load_config(_write(tmp_path), seeds=[4], delta=0.01, clip=False, bonus_scale=0.5)
    assert over.seeds == (4,) and all(not a.clip_values and a.bonus_scale == 0.5 for a in over.algorithms)


@pytest.mark.parametrize("mutate", [
    lambda t: t.replace("name = experiment", "name = moon"),
    lambda t: t.replace("type = OVI_DRM", "type = SARSA"),
    lambda t: t.replace("alpha = [0.2, 0.15, 0.1]", "alpha = [0.2]"),
    lambda t: t.replace("seeds = [0, 1]", "seeds = []"),
    lambda t: t.replace("[experiment]", "[experimnt]"),
    lambda t: t.replace("risk = mean", ""),
])
def test_bad_configs(tmp_path, mutate):
    with pytest.raises(ConfigInvalid):
        load_config(_write(tmp_path, text=mutate(CONFIG)))


def test_run_experiment_csv_and_summary(tmp_path):
    out = tmp_path / "res" / "curves.csv"
    cfg = load_config(_write(tmp_path), out=str(out))
    result = run_experiment(cfg)
    assert len(result.curves) == 4
    rows = read_csv(out)
    assert set(rows) == {("OVI-DRM", 0), ("OVI-DRM", 1), ("Mean", 0), ("Mean", 1)}
    for curve in result.curves:
        inst, cum = rows[(curve.algo, curve.seed)]
        assert np.array_equal(inst, curve.inst) and np.array_equal(cum, curve.cum)
        assert np.allclose(np.cumsum(inst), cum, atol=1e-9) and np.all(inst >= -1e-9)
    for algo, (mean, std, n) in result.summary.items():
        finals = [rows[(algo, s)][1][-1] for s in (0, 1)]
        assert n == 2 and mean == pytest.approx(np.mean(finals), abs=1e-9)
        assert std == pytest.approx(np.std(finals), abs=1e-9)
    assert summary_path(out).read_text().startswith("algo,n_seeds,mean_final_regret")


def test_reruns_are_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run_experiment(load_config(_write(tmp_path), out=str(a)))
    run_experiment(load_config(_write(tmp_path), out=str(b)), workers=2)
    assert a.read_bytes() == b.read_bytes()


def test_single_episode_single_seed(tmp_path):
    out = tmp_path / "one.csv"
    run_experiment(load_config(_write(tmp_path, K=1), seeds=[0], out=str(out)))
    lines = out.read_text().splitlines()
    assert lines[0] == "algo,seed,episode,inst_regret,cum_regret"
    assert len(lines) == 1 + 2  # one row per algorithm
