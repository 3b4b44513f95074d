"""Trajectory container validation and byte-stable JSON-lines round-trips."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from genil.errors import InvalidTrajectoryError
from genil.trajectory import (
    Trajectory,
    dumps_trajectory,
    gt_return,
    load_trajectories,
    loads_trajectory,
    save_trajectories,
    trajectories_equal,
)


def make_traj(T=4, d=3, actions="int", ranks=True, traj_id="t0"):
    rng = np.random.default_rng(0)
    return Trajectory(
        id=traj_id,
        env="GridNav",
        states=rng.normal(size=(T, d)),
        actions=(
            None
            if actions is None
            else rng.integers(4, size=T)
            if actions == "int"
            else rng.normal(size=T)
        ),
        gt_step_rewards=rng.normal(size=T),
        step_ranks=rng.uniform(0, 4, size=T) if ranks else None,
        source="demo",
        meta={"quality": 0.25, "seed": 3},
    )


# ---------------------------------------------------------------------------
# Validation


def test_len_and_dtype_coercion():
    traj = make_traj(T=6)
    assert len(traj) == 6
    assert traj.states.dtype == np.float64
    assert traj.gt_step_rewards.dtype == np.float64
    assert traj.step_ranks.dtype == np.float64


def test_validation_errors():
    good = make_traj()
    with pytest.raises(InvalidTrajectoryError):
        Trajectory("x", "GridNav", np.empty((0, 3)), None, np.empty(0), None, "demo")
    with pytest.raises(InvalidTrajectoryError):
        Trajectory("x", "GridNav", good.states, None, good.gt_step_rewards[:-1], None, "demo")
    with pytest.raises(InvalidTrajectoryError):
        Trajectory("x", "GridNav", good.states, good.actions[:-1], good.gt_step_rewards, None, "demo")
    with pytest.raises(InvalidTrajectoryError):
        Trajectory("x", "GridNav", good.states, None, good.gt_step_rewards, good.step_ranks[:-1], "demo")
    with pytest.raises(InvalidTrajectoryError):
        Trajectory("x", "GridNav", good.states, None, good.gt_step_rewards, None, "imagined")
    bad_states = good.states.copy()
    bad_states[1, 1] = np.nan
    with pytest.raises(InvalidTrajectoryError):
        Trajectory("x", "GridNav", bad_states, None, good.gt_step_rewards, None, "demo")


def test_gt_return_hand_value():
    traj = Trajectory(
        id="h",
        env="GridNav",
        states=np.zeros((3, 2)),
        actions=None,
        gt_step_rewards=[1.0, 2.0, 3.0],
        step_ranks=None,
        source="demo",
    )
    # 1 + 0.5*2 + 0.25*3
    assert gt_return(traj, 0.5) == pytest.approx(2.75, abs=1e-15)
    assert gt_return(traj, 0.0) == 1.0


# ---------------------------------------------------------------------------
# Serialization


@pytest.mark.parametrize(
    "actions,ranks",
    [("int", True), ("float", True), (None, False), ("int", False)],
)
def test_round_trip_bit_identical(actions, ranks):
    traj = make_traj(actions=actions, ranks=ranks)
    back = loads_trajectory(dumps_trajectory(traj))
    assert trajectories_equal(traj, back)
    if actions == "int":
        assert back.actions.dtype == np.int64
    elif actions == "float":
        assert back.actions.dtype == np.float64


def test_dump_load_dump_byte_stable():
    traj = make_traj(T=7, actions="float")
    line = dumps_trajectory(traj)
    assert dumps_trajectory(loads_trajectory(line)) == line


def test_integer_valued_float_actions_keep_dtype():
    # a leading 2.0 must not drag the whole array to int64 (clipped
    # continuous actions sit exactly on the bound all the time)
    traj = make_traj(T=3)
    traj.actions = np.array([2.0, 0.371, -1.0])
    back = loads_trajectory(dumps_trajectory(traj))
    assert back.actions.dtype == np.float64
    assert np.array_equal(back.actions, traj.actions)


def test_awkward_floats_round_trip():
    values = np.array([1 / 3, 0.1, -1e-300, 1e300, 5e-324, -0.0, 123456.789012345])
    traj = Trajectory(
        id="awk",
        env="PointChase",
        states=values[:, None],
        actions=None,
        gt_step_rewards=values,
        step_ranks=None,
        source="eval",
    )
    back = loads_trajectory(dumps_trajectory(traj))
    assert np.array_equal(back.states, traj.states)
    assert np.array_equal(back.gt_step_rewards, traj.gt_step_rewards)


def test_non_finite_floats_refused():
    traj = make_traj()
    traj.gt_step_rewards = traj.gt_step_rewards.copy()
    traj.gt_step_rewards[0] = np.inf
    with pytest.raises(InvalidTrajectoryError):
        dumps_trajectory(traj)


def test_field_order_fixed():
    line = dumps_trajectory(make_traj(T=2))
    keys = ["id", "env", "states", "actions", "gt_step_rewards", "step_ranks", "source", "meta"]
    positions = [line.index(f'"{k}":') for k in keys]
    assert positions == sorted(positions)


def test_save_load_file(tmp_path):
    trajs = [make_traj(traj_id=f"t{i}", actions=a) for i, a in enumerate(["int", "float", None])]
    path = tmp_path / "trajs.jsonl"
    save_trajectories(path, trajs)
    loaded = load_trajectories(path)
    assert len(loaded) == 3
    assert all(trajectories_equal(a, b) for a, b in zip(trajs, loaded))
    # a second save produces identical bytes
    path2 = tmp_path / "again.jsonl"
    save_trajectories(path2, loaded)
    assert path.read_bytes() == path2.read_bytes()


def test_blank_lines_skipped(tmp_path):
    path = tmp_path / "gap.jsonl"
    line = dumps_trajectory(make_traj())
    path.write_text(line + "\n\n" + line + "\n")
    assert len(load_trajectories(path)) == 2


def test_trajectories_equal_detects_differences():
    a = make_traj()
    b = make_traj()
    assert trajectories_equal(a, b)
    c = make_traj()
    c.states = c.states.copy()
    c.states[0, 0] += 1e-12
    assert not trajectories_equal(a, c)
    d = make_traj(ranks=False)
    assert not trajectories_equal(a, d)
    e = make_traj()
    e.meta = {**e.meta, "extra": 1}
    assert not trajectories_equal(a, e)


finite = st.floats(
    allow_nan=False, allow_infinity=False, min_value=-1e15, max_value=1e15
)


@settings(max_examples=40, deadline=None)
@given(data=st.data(), T=st.integers(1, 6), d=st.integers(1, 4))
def test_round_trip_property(data, T, d):
    states = np.array(
        data.draw(st.lists(st.lists(finite, min_size=d, max_size=d), min_size=T, max_size=T))
    )
    rewards = np.array(data.draw(st.lists(finite, min_size=T, max_size=T)))
    traj = Trajectory(
        id="p",
        env="GridNav",
        states=states,
        actions=None,
        gt_step_rewards=rewards,
        step_ranks=None,
        source="offspring",
        meta={},
    )
    back = loads_trajectory(dumps_trajectory(traj))
    assert trajectories_equal(traj, back)
