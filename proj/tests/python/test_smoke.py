"""Python-side smoke tests for the covq._core extension."""

import numpy as np
import pytest

import covq


@pytest.fixture(scope="module")
def tiny_env():
    grid = covq.GridMap.parse("S..\n...\n...")
    return covq.Env(grid, 12)


def test_map_round_trip():
    text = "S.#\n.C.\n...\n"
    grid = covq.GridMap.parse(text)
    assert grid.render() == text
    assert grid.rows == 3 and grid.cols == 3
    assert grid.start == (0, 0)
    assert grid.obstacle_count == 1
    assert grid.charging_count == 2
    with pytest.raises(ValueError):
        covq.GridMap.parse("S.\nXX")


def test_mapgen_is_deterministic_and_valid():
    a = covq.generate_map(n=8, stations=2, density=0.1, seed=7)
    b = covq.generate_map(n=8, stations=2, density=0.1, seed=7)
    assert a.render() == b.render()
    free = a.rows * a.cols - a.obstacle_count
    assert len(covq.reachable_cells(a, 5 * 8)) == free


def test_env_rollout_and_encoding(tiny_env):
    state = tiny_env.reset()
    assert state.budget_remaining == 12
    assert tiny_env.coverage_fraction(state) == pytest.approx(1.0 / 9.0)

    mask = tiny_env.action_mask(state)
    assert mask == [False, True, False, True]  # corner: Down, Right

    state, outcome = tiny_env.step(state, int(covq.Action.RIGHT))
    assert outcome.reward == pytest.approx(1.05)
    assert outcome.new_cell_covered

    obs, budget_scalar = tiny_env.encode(state)
    assert isinstance(obs, np.ndarray)
    assert obs.shape == (4, 3, 3)
    assert set(np.unique(obs)) <= {0.0, 1.0}
    assert obs[2].sum() == 1.0  # one-hot current position
    assert obs[3].sum() == 2.0  # two visited cells
    assert budget_scalar == pytest.approx(11.0 / 12.0)


def test_oracle_agrees_with_env(tiny_env):
    grid = covq.GridMap.parse("S..\n.#.\n...")
    assert covq.verify_reachable(grid, 8) == covq.reachable_cells(grid, 8)

    result = covq.optimal_coverage(covq.Env(covq.GridMap.parse("S.\n.."), 8))
    assert result.feasible
    assert result.optimal_length == 3

    replay = covq.replay_path(tiny_env, [(0, 0), (0, 1), (0, 2)])
    assert replay.steps == 2
    assert replay.violations == 0


def test_training_smoke(tmp_path, tiny_env):
    cfg = covq.TrainConfig()
    cfg.episodes = 120
    cfg.batch_size = 16
    cfg.buffer_capacity = 4000
    cfg.warmup = 100
    cfg.hidden = 16
    cfg.eps_decay = 40.0
    cfg.update_every = 4
    cfg.seed = 7

    csv_path = tmp_path / "metrics.csv"
    ckpt_path = tmp_path / "policy.cbqn"
    result = covq.train(tiny_env, cfg, metrics_csv=str(csv_path), checkpoint=str(ckpt_path))

    assert len(result.log) == cfg.episodes
    assert csv_path.exists() and ckpt_path.exists()
    header = csv_path.read_text().splitlines()[0]
    assert header == "episode,steps,coverage_pct,violations,reward,epsilon,is_best"

    epsilons = [rec.epsilon for rec in result.log]
    assert all(a >= b for a, b in zip(epsilons, epsilons[1:]))

    if result.best is not None:
        replay = covq.replay_path(tiny_env, result.best.path)
        assert replay.full_coverage
        assert replay.violations == 0
        assert replay.total_reward == pytest.approx(result.best.reward)

    rollout = covq.evaluate_checkpoint(str(ckpt_path), tiny_env)
    again = covq.evaluate_checkpoint(str(ckpt_path), tiny_env)
    assert rollout.path == again.path
    assert rollout.record.steps == len(rollout.path) - 1


def test_schedule_helpers():
    cfg = covq.TrainConfig()
    assert covq.epsilon_at(0, cfg) == pytest.approx(cfg.eps_start)
    closed_form = cfg.eps_end + (cfg.eps_start - cfg.eps_end) / np.e
    assert covq.epsilon_at(2100, cfg) == pytest.approx(closed_form, abs=1e-9)

    series = list(range(1, 201))
    ma = covq.moving_average([float(x) for x in series], 100)
    assert ma[149] == pytest.approx(100.5)
