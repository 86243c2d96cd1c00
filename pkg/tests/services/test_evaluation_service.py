import numpy as np
import pytest
from pydantic import ValidationError

from cannav.core.errors import EmptyBatchError, SeedOverlapError
from cannav.core.seeding import eval_seeds
from cannav.models.agent import NavigationAgent
from cannav.schemas.config_schemas import EnvConfig
from cannav.schemas.metrics_schemas import EpisodeRecord, MetricsReport
from cannav.services.evaluation_service import (
    check_seeds,
    evaluate,
    evaluate_policy,
    oracle_actor_factory,
    random_actor_factory,
    spl,
    summarize,
)


def _record(seed, success, path, shortest, final=0):
    return EpisodeRecord(seed=seed, success=success, path_length=path, shortest_path=shortest, final_geodesic=final, steps=path)


@pytest.fixture
def env_config():
    return EnvConfig(width=9, height=9, obstacle_density=0.2, window=3, max_steps=100)


def test_spl_by_hand():
    records = [_record(1, True, 8, 4), _record(2, True, 3, 3), _record(3, False, 2, 5, final=4)]
    assert spl(records) == pytest.approx((0.5 + 1.0 + 0.0) / 3)
    assert spl([_record(1, True, 2, 4)]) == 1.0


def test_spl_of_nothing():
    with pytest.raises(EmptyBatchError):
        spl([])


def test_summary_groups_by_seed():
    report = summarize([_record(7, True, 4, 4), _record(7, False, 1, 4, final=2), _record(9, True, 5, 5)])
    assert report.sr == pytest.approx(2 / 3)
    assert report.gd == pytest.approx(2 / 3)
    assert report.seeds == [7, 9]
    assert report.per_seed["7"]["sr"] == 0.5
    assert report.per_seed["9"]["n"] == 1.0


def test_report_rejects_spl_above_sr():
    with pytest.raises(ValidationError):
        MetricsReport(sr=0.2, spl=0.5, gd=0.0, n_episodes=1, seeds=[1])


def test_expert_scores_perfectly(env_config):
    report, records = evaluate(oracle_actor_factory(env_config), env_config, eval_seeds(500))
    assert report.n_episodes == 500
    assert report.sr == 1.0
    assert report.spl == pytest.approx(1.0)
    assert report.gd == 0.0
    assert all(r.path_length == r.shortest_path for r in records)


def test_spl_never_exceeds_sr_on_random_records():
    rng = np.random.default_rng(0)
    for _ in range(2000):
        n = int(rng.integers(1, 12))
        records = [
            _record(
                int(rng.integers(0, 3)),
                bool(rng.random() < 0.5),
                int(rng.integers(0, 30)),
                int(rng.integers(1, 30)),
                final=int(rng.integers(0, 10)),
            )
            for _ in range(n)
        ]
        report = summarize(records)
        assert 0.0 <= report.spl <= report.sr <= 1.0
        for stats in report.per_seed.values():
            assert stats["spl"] <= stats["sr"]


def test_random_actor_is_bounded_and_reproducible(env_config):
    a, _ = evaluate(random_actor_factory(), env_config, eval_seeds(6), episodes_per_seed=2)
    b, _ = evaluate(random_actor_factory(), env_config, eval_seeds(6), episodes_per_seed=2)
    assert a == b
    assert 0.0 <= a.spl <= a.sr <= 1.0
    assert a.n_episodes == 12


def test_parallel_evaluation_matches_serial(env_config):
    serial, _ = evaluate(oracle_actor_factory(env_config), env_config, eval_seeds(4), workers=1)
    parallel, _ = evaluate(oracle_actor_factory(env_config), env_config, eval_seeds(4), workers=3)
    assert serial == parallel


def test_greedy_policy_evaluation_is_deterministic(make_config):
    config = make_config()
    agent = NavigationAgent(config)
    a, _ = evaluate_policy(agent.policy, config.env, eval_seeds(3))
    b, _ = evaluate_policy(agent.policy, config.env, eval_seeds(3))
    assert a == b


def test_training_seeds_are_refused_unless_allowed(env_config):
    with pytest.raises(SeedOverlapError):
        check_seeds([3, 1_000_001])
    check_seeds([3], allow_seed_overlap=True)
    report, _ = evaluate(oracle_actor_factory(env_config), env_config, [1, 2], allow_seed_overlap=True)
    assert report.sr == 1.0


def test_evaluation_needs_episodes(env_config):
    with pytest.raises(EmptyBatchError):
        evaluate(oracle_actor_factory(env_config), env_config, [])
    with pytest.raises(EmptyBatchError):
        evaluate(oracle_actor_factory(env_config), env_config, eval_seeds(2), episodes_per_seed=0)
