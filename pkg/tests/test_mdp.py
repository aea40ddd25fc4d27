import numpy as np
import pytest

from drmrl.errors import AssumptionViolated, ConfigInvalid, GapOutOfRange, InvalidDimensions, NoOptimalAction
from drmrl.mdp import (
    Policy,
    TabularMDP,
    TreeLayout,
    gen_experiment_mdp,
    gen_gap_hard_instance,
    gen_tree_hard_instance,
    make_instance,
    read_mdp,
    rollout,
    validate_mdp,
    write_mdp,
)

GAPS = np.array([[0.0, 0.1, 0.2], [0.2, 0.0, 0.1], [0.1, 0.2, 0.0]])


def test_experiment_instance_rows():
    mdp = gen_experiment_mdp(5, 5)
    assert (mdp.S, mdp.A, mdp.H) == (4, 5, 5)
    assert mdp.P[0, 0, 0].tolist() == [0, 0.5, 0.5, 0]
    assert mdp.P[0, 0, 4].tolist() == [0, 0, 0.001, 0.999]
    assert mdp.r[1:, 1:, 0].tolist() == [[1, 0, 0.4]] * 4
    assert np.all(mdp.r[0] == 0)
    assert validate_mdp(mdp) == []
    with pytest.raises(InvalidDimensions):
        gen_experiment_mdp(1, 5)


def test_rollout_from_state_zero_under_last_action():
    mdp = gen_experiment_mdp(5, 5)
    pi = Policy(np.full((5, 4), 4))
    for seed in range(50):
        traj = rollout(mdp, pi, seed)
        assert traj.states[0] == 0 and traj.states[1] in (2, 3)
        assert np.all(traj.states[1:] == traj.states[1])
        assert traj.rewards.tolist() == [mdp.r[h, s, 4] for h, s in enumerate(traj.states)]


def test_rollout_deterministic():
    rng = np.random.default_rng(0)
    P = rng.dirichlet(np.ones(3), size=(3, 3, 2))
    mdp = TabularMDP(P / P.sum(-1, keepdims=True), rng.uniform(size=(4, 3, 2)), np.ones(3) / 3)
    pi = Policy(rng.integers(0, 2, size=(4, 3)))
    a, b = rollout(mdp, pi, 11), rollout(mdp, pi, 11)
    assert np.array_equal(a.states, b.states) and np.array_equal(a.rewards, b.rewards)
    # point-mass kernels: trajectory independent of the seed
    det = np.zeros((3, 3, 2, 3))
    det[:, :, :, 1] = 1.0
    mdp = TabularMDP(det, np.zeros((4, 3, 2)), np.array([1.0, 0, 0]))
    assert all(rollout(mdp, pi, s).states.tolist() == [0, 1, 1, 1] for s in range(10))


def test_tree_dimensions_and_structure():
    mdp = gen_tree_hard_instance(2, 2, 6, 0.5, 0.0)
    assert mdp.S == 6
    lay = TreeLayout(2, 2, 6, 2)
    assert (lay.root, lay.first_leaf, lay.good, lay.bad) == (1, 2, 4, 5)
    assert validate_mdp(mdp) == []
    assert mdp.P[0, 0, 0, 0] == 1.0 and mdp.P[0, 0, 1, 1] == 1.0
    assert mdp.P[2, 0, 0, 1] == 1.0  # no waiting after H_bar
    assert mdp.P[0, 1, 1, 3] == 1.0  # root, action 2 -> second leaf
    big = gen_tree_hard_instance(3, 3, 9, 0.4, 0.1, hstar=5, leaf_star=7, astar=2)
    assert big.S == 3 + 13
    assert validate_mdp(big) == []


def test_tree_planted_row_and_reference():
    ref = gen_tree_hard_instance(2, 2, 6, 0.5, 0.0)
    planted = gen_tree_hard_instance(2, 2, 6, 0.5, 0.2, hstar=3, leaf_star=2, astar=1)
    diff = np.argwhere(ref.P != planted.P)
    assert {tuple(x[:3]) for x in diff} == {(2, 3, 0)}
    assert planted.P[2, 3, 0, 4] == pytest.approx(0.7) and planted.P[2, 3, 0, 5] == pytest.approx(0.3)
    for h in (3, 4):
        for leaf in (1, 2):
            for a in (1, 2):
                zero = gen_tree_hard_instance(2, 2, 6, 0.5, 0.0, hstar=h, leaf_star=leaf, astar=a)
                assert np.array_equal(zero.P, ref.P) and np.array_equal(zero.r, ref.r)


@pytest.mark.parametrize("kwargs", [
    dict(A=2, d=1, H=6, p=0.5, eps=0.0),
    dict(A=2, d=2, H=5, p=0.5, eps=0.0),
    dict(A=2, d=2, H=6, p=0.5, eps=0.6),
    dict(A=2, d=2, H=6, p=1.2, eps=0.0),
    dict(A=2, d=2, H=6, p=0.5, eps=0.1, hstar=2),
    dict(A=2, d=2, H=6, p=0.5, eps=0.1, hstar=3, leaf_star=3),
])
def test_tree_assumption_errors(kwargs):
    with pytest.raises(AssumptionViolated):
        gen_tree_hard_instance(**kwargs)


def test_gap_instance():
    mdp = gen_gap_hard_instance(3, 3, 3, GAPS)
    assert mdp.S == 5 and validate_mdp(mdp) == []
    assert mdp.P[0, 0, 0, 3] == pytest.approx(0.75)
    half = gen_gap_hard_instance(2, 2, 3, np.array([[0.0, 0.25], [0.25, 0.0]]))
    assert half.P[0, 0, 1, 2] == pytest.approx(0.5)
    assert mdp.r[0, 3, 0] == 1.0 and mdp.r[0, 4, 0] == 0.5 and mdp.r[0, 3, 1] == 0.0
    assert np.allclose(mdp.initial, [1 / 3] * 3 + [0, 0])
    assert np.array_equal(np.argmax(mdp.P[0, :3, :, 3], axis=1), np.argmin(GAPS, axis=1))


def test_gap_instance_errors():
    with pytest.raises(NoOptimalAction):
        gen_gap_hard_instance(2, 2, 3, np.array([[0.0, 0.0], [0.1, 0.0]]))
    with pytest.raises(NoOptimalAction):
        gen_gap_hard_instance(2, 2, 3, np.array([[0.1, 0.2], [0.1, 0.0]]))
    with pytest.raises(GapOutOfRange):
        gen_gap_hard_instance(2, 2, 3, np.array([[0.0, 0.4], [0.1, 0.0]]))
    with pytest.raises(GapOutOfRange):
        gen_gap_hard_instance(2, 2, 3, np.array([[0.0, -0.1], [0.1, 0.0]]))


def test_validate_reports_violations():
    mdp = gen_experiment_mdp(2, 3)
    P = mdp.P.copy()
    P[1, 2, 0] *= 0.9
    r = mdp.r.copy()
    r[0, 1, 1] = 1.5
    bad = validate_mdp(TabularMDP(P, r, mdp.initial))
    kinds = sorted((v.kind, v.h, v.s, v.a) for v in bad)
    assert kinds == [("RewardOutOfRange", 1, 2, 2), ("RowNotStochastic", 2, 3, 1)]


def test_text_round_trip(tmp_path):
    mdp = gen_gap_hard_instance(3, 3, 4, GAPS)
    path = tmp_path / "gap.txt"
    write_mdp(mdp, path)
    back = read_mdp(path)
    assert np.array_equal(back.P, mdp.P) and np.array_equal(back.r, mdp.r)
    assert np.array_equal(back.initial, mdp.initial)
    (tmp_path / "junk.txt").write_text("# S 2\n# A x\n")
    with pytest.raises(ConfigInvalid):
        read_mdp(tmp_path / "junk.txt")


def test_make_instance_by_name():
    assert make_instance("experiment", {"A": 3, "H": 4}).A == 3
    with pytest.raises(ConfigInvalid):
        make_instance("nope", {})
    with pytest.raises(ConfigInvalid):
        make_instance("experiment", {"B": 3})
