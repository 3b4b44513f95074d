"""Comparator data builders and behavioral cloning."""

import numpy as np
import pytest

from genil.baselines import (
    BCConfig,
    BCPolicy,
    MixturePolicy,
    build_drex_dataset,
    build_trex2_dataset,
    build_trex_dataset,
    train_bc,
)
from genil.envs import DemoPolicy, make_demo_pair, make_env, make_spec, rollout
from genil.errors import ConfigError
from genil.trajectory import gt_return, trajectories_equal


@pytest.fixture(scope="module")
def grid_bc():
    """A clone of the optimal GridNav policy from one clean demo."""
    spec = make_spec("GridNav")
    demo = rollout(make_env(spec, 0), DemoPolicy(spec, 0.0), seed=0)
    return spec, demo, train_bc([demo], spec, BCConfig(seed=0))


# ---------------------------------------------------------------------------
# Quality-ranked datasets


def test_trex_dataset_structure(grid_spec):
    qualities = [0.1, 0.5, 0.3]
    ds = build_trex_dataset(grid_spec, qualities, n_per_quality=2, seed=3)
    assert len(ds.trajectories) == 6
    assert ds.n_ranks == 3
    # worst quality gets rank 0, best gets the top rank
    by_rank = ds.by_rank()
    assert by_rank[0] == ["trex-q0.5-0", "trex-q0.5-1"]
    assert by_rank[2] == ["trex-q0.1-0", "trex-q0.1-1"]
    for traj in ds.trajectories:
        rank = ds.ranks[traj.id]
        assert np.all(traj.step_ranks == float(rank))


def test_trex_dataset_deterministic(grid_spec):
    a = build_trex_dataset(grid_spec, [0.0, 0.4], 2, seed=5)
    b = build_trex_dataset(grid_spec, [0.0, 0.4], 2, seed=5)
    assert all(trajectories_equal(x, y) for x, y in zip(a.trajectories, b.trajectories))


def test_trex_dataset_validation(grid_spec):
    with pytest.raises(ConfigError):
        build_trex_dataset(grid_spec, [0.5], 1, seed=0)
    with pytest.raises(ConfigError):
        build_trex_dataset(grid_spec, [0.5, 0.5], 1, seed=0)
    with pytest.raises(ConfigError):
        build_trex_dataset(grid_spec, [0.1, 0.5], 0, seed=0)


def test_trex_dataset_warns_on_degenerate_ordering(grid_spec):
    # near-identical qualities: single rollouts do not separate, so the
    # mean-return-vs-rank check must flag the dataset
    ds = build_trex_dataset(grid_spec, [0.55, 0.5], 1, seed=0)
    assert any("degenerate ordering" in w for w in ds.warnings)
    clean = build_trex_dataset(grid_spec, [0.05, 0.6], 3, seed=0)
    assert clean.warnings == []


def test_trex2_dataset(grid_spec):
    good, bad = make_demo_pair(grid_spec, 0.1, 0.5, seed=2)
    ds = build_trex2_dataset(good, bad)
    assert ds.n_ranks == 2
    assert ds.ranks == {"demo-good": 1, "demo-bad": 0}
    assert np.all(ds.get("demo-good").step_ranks == 1.0)
    assert np.all(ds.get("demo-bad").step_ranks == 0.0)
    # the input demos are not mutated
    assert good.step_ranks is None


# ---------------------------------------------------------------------------
# Behavioral cloning


def test_bc_config_validation():
    with pytest.raises(ConfigError):
        BCConfig(hidden_width=0)
    with pytest.raises(ConfigError):
        BCConfig(learning_rate=0)
    with pytest.raises(ConfigError):
        BCConfig(steps=-1)
    with pytest.raises(ConfigError):
        BCConfig(batch_size=0)
    assert BCConfig(steps=0).steps == 0


def test_bc_clones_optimal_grid_policy(grid_bc):
    spec, demo, bc = grid_bc
    assert bc.kind == "bc_classifier"
    out = bc.net.predict(demo.states)
    agreement = float((np.argmax(out, axis=1) == demo.actions).mean())
    assert agreement >= 0.9
    # the cloned policy should track the demo return closely
    cloned = rollout(make_env(spec, 0), bc, seed=0)
    assert gt_return(cloned, spec.discount) == pytest.approx(
        gt_return(demo, spec.discount), rel=0.05
    )


def test_bc_regresses_pointchase_actions():
    spec = make_spec("PointChase")
    demo = rollout(make_env(spec, 0), DemoPolicy(spec, 0.0), seed=0)
    bc = train_bc([demo], spec, BCConfig(seed=0))
    assert bc.kind == "bc_regressor"
    pred = np.clip(bc.net.predict(demo.states)[:, 0], -1.0, 1.0)
    mse = float(np.mean((pred - demo.actions) ** 2))
    assert mse < 0.1 * float(demo.actions.var()) + 1e-3


def test_bc_act_types(grid_bc, rng):
    spec, demo, bc = grid_bc
    a = bc.act(demo.states[0], rng)
    assert isinstance(a, int) and 0 <= a < 4
    pspec = make_spec("PointChase")
    pdemo = rollout(make_env(pspec, 0), DemoPolicy(pspec, 0.3), seed=0)
    pbc = train_bc([pdemo], pspec, BCConfig(steps=10, seed=0))
    action = pbc.act(pdemo.states[0], rng)
    assert isinstance(action, float) and abs(action) <= 1.0


def test_bc_validation(grid_spec):
    demo = rollout(make_env(grid_spec, 0), DemoPolicy(grid_spec, 0.0), seed=0)
    with pytest.raises(ConfigError):
        train_bc([], grid_spec, BCConfig())
    import dataclasses

    no_actions = dataclasses.replace(demo, actions=None)
    with pytest.raises(ConfigError):
        train_bc([no_actions], grid_spec, BCConfig())
    with pytest.raises(ConfigError):
        train_bc([demo], make_spec("PointChase"), BCConfig())


def test_bc_deterministic(grid_spec):
    demo = rollout(make_env(grid_spec, 0), DemoPolicy(grid_spec, 0.1), seed=4)
    a = train_bc([demo], grid_spec, BCConfig(steps=100, seed=7))
    b = train_bc([demo], grid_spec, BCConfig(steps=100, seed=7))
    assert np.array_equal(a.net.get_flat(), b.net.get_flat())


# ---------------------------------------------------------------------------
# Noise injection


def test_mixture_policy_epsilon_extremes(grid_bc, rng):
    spec, demo, bc = grid_bc
    pure = MixturePolicy(base=bc, epsilon=0.0)
    for t in range(5):
        assert pure.act(demo.states[t], rng) == bc.act(demo.states[t], rng)
    noisy = MixturePolicy(base=bc, epsilon=1.0)
    draws = {noisy.act(demo.states[0], rng) for _ in range(60)}
    assert draws == {0, 1, 2, 3}
    with pytest.raises(ConfigError):
        MixturePolicy(base=bc, epsilon=1.5)


def test_drex_dataset_structure(grid_bc):
    spec, demo, bc = grid_bc
    ds = build_drex_dataset(bc, spec, [0.1, 0.4, 0.8], n_per_level=2, seed=1)
    assert len(ds.trajectories) == 6
    assert ds.n_ranks == 3
    # least noise earns the top rank
    assert ds.ranks["drex-e0.1-0"] == 2
    assert ds.ranks["drex-e0.8-1"] == 0
    for traj in ds.trajectories:
        assert np.all(traj.step_ranks == float(ds.ranks[traj.id]))
        assert traj.meta["noise"] in (0.1, 0.4, 0.8)


def test_drex_returns_track_rank(grid_bc):
    spec, demo, bc = grid_bc
    ds = build_drex_dataset(bc, spec, [0.05, 0.9], n_per_level=3, seed=0)
    means = {}
    for traj in ds.trajectories:
        means.setdefault(ds.ranks[traj.id], []).append(gt_return(traj, spec.discount))
    assert np.mean(means[1]) > np.mean(means[0])


def test_drex_validation(grid_bc):
    spec, demo, bc = grid_bc
    with pytest.raises(ConfigError):
        build_drex_dataset(bc, spec, [0.5], 1, seed=0)
    with pytest.raises(ConfigError):
        build_drex_dataset(bc, spec, [0.5, 0.2], 1, seed=0)  # not increasing
    with pytest.raises(ConfigError):
        build_drex_dataset(bc, spec, [0.2, 1.5], 1, seed=0)
    with pytest.raises(ConfigError):
        build_drex_dataset(bc, spec, [0.2, 0.5], 0, seed=0)
    with pytest.raises(ConfigError):
        build_drex_dataset(bc, make_spec("PointChase"), [0.2, 0.5], 1, seed=0)
