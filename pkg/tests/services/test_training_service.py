import json

import numpy as np
import pytest

from cannav.core.errors import ConfigError
from cannav.models.agent import NavigationAgent
from cannav.services.artifact_service import LOCK_NAME, read_csv, read_stamp, stamp_for
from cannav.services.demo_service import DemoService
from cannav.services.training_service import LOG_COLUMNS, LOG_NAME, train

CORRIDOR = [
    "#########",
    "#.......#",
    "#########",
]


def test_ppo_run_writes_every_artifact(make_config):
    config = make_config()
    result = train(config)
    out = result.output_dir
    for name in ("config.json", "ckpt_0.json", "best_sr.json", LOG_NAME, "report.json"):
        assert (out / name).exists(), name
    assert not (out / LOCK_NAME).exists()
    assert result.final_step == 32

    header, rows = read_csv(result.log_path)
    assert header == LOG_COLUMNS
    assert [int(r["step"]) for r in rows] == [16, 32]
    assert all(float(r["wall_time"]) == 0.0 for r in rows)
    assert (out / "ckpt_16.json").exists() and (out / "ckpt_32.json").exists()
    assert read_stamp(result.log_path)["config_hash"] == config.config_hash()

    report = json.loads((out / "report.json").read_text())
    assert set(report) >= {"sr", "spl", "gd", "n", "seeds", "checkpoint", "config_hash"}
    assert report["checkpoint"] == "best_sr.json"
    assert report["config_hash"] == config.config_hash()
    assert report["n"] == config.eval.episodes
    assert report["step"] == 32
    assert report["sr"] == result.best_sr


def test_runs_are_reproducible(make_config, tmp_path):
    first = train(make_config(), tmp_path / "first")
    second = train(make_config(), tmp_path / "second")
    assert first.log_path.read_bytes() == second.log_path.read_bytes()
    a, _, _ = NavigationAgent.from_checkpoint(first.output_dir / "ckpt_32.json")
    b, _, _ = NavigationAgent.from_checkpoint(second.output_dir / "ckpt_32.json")
    for name, array in a.state_arrays().items():
        np.testing.assert_array_equal(array, b.state_arrays()[name])


def test_zero_step_run_still_reports(make_config):
    result = train(make_config(ppo={"total_steps": 0}))
    assert result.final_step == 0
    assert read_csv(result.log_path)[1] == []
    assert (result.output_dir / "report.json").exists()


def test_rnn_variant_trains(make_config):
    result = train(make_config(agent={"encoder_variant": "rnn"}, ppo={"total_steps": 16}))
    assert result.final_step == 16


def test_behavior_cloning_run(make_config, tmp_path):
    demo_config = make_config(env={"max_steps": 64}, agent={"max_episode_steps": 64})
    service = DemoService(demo_config)
    demos = service.write(tmp_path / "demos.jsonl", service.generate(3), stamp_for(demo_config))

    config = make_config(
        trainer="bc",
        env={"max_steps": 64},
        agent={"max_episode_steps": 64},
        bc={"demos_path": str(demos), "updates": 4, "batch_episodes": 2},
        eval={"interval": 2},
    )
    result = train(config)
    _, rows = read_csv(result.log_path)
    assert [int(r["step"]) for r in rows] == [2, 4]
    assert all(float(r["value_loss"]) == 0.0 for r in rows)


def test_behavior_cloning_needs_demos(make_config):
    with pytest.raises(ConfigError):
        train(make_config(trainer="bc"))


@pytest.mark.slow
def test_corridor_is_learned(make_config):
    config = make_config(
        env={"layout": CORRIDOR, "window": 3, "max_steps": 32, "min_spawn_distance": 2},
        agent={"d_model": 32, "heads": 4, "max_episode_steps": 32},
        ppo={"num_envs": 8, "rollout_horizon": 64, "total_steps": 60_000, "lr0": 3e-4, "epochs": 4, "minibatches": 4},
        eval={"interval": 10_000, "episodes": 50},
    )
    result = train(config)
    assert result.best_sr >= 0.95
