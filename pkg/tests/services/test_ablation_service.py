import numpy as np
import pytest

from cannav.core.errors import UsageError
from cannav.services.ablation_service import (
    VARIANTS,
    AblationService,
    parse_seeds,
    parse_variants,
    variant_config,
)
from cannav.services.artifact_service import read_csv


def test_parse_seeds():
    assert parse_seeds("0..2") == [0, 1, 2]
    assert parse_seeds("1,3, 7") == [1, 3, 7]
    for bad in ("", "a..b", "x"):
        with pytest.raises(UsageError):
            parse_seeds(bad)


def test_parse_variants():
    assert parse_variants("can, rnn_no_causal") == ["can", "rnn_no_causal"]
    with pytest.raises(UsageError):
        parse_variants("can,lstm")
    with pytest.raises(UsageError):
        parse_variants(" , ")


def test_variant_configs(make_config, tmp_path):
    base = make_config()
    for name, (encoder, causal) in VARIANTS.items():
        config = variant_config(base, name, 3, tmp_path / name)
        assert config.agent.encoder_variant == encoder
        assert config.seed == 3
        assert (config.ppo.alpha > 0) == causal
        assert (config.bc.alpha > 0) == causal
    with pytest.raises(UsageError):
        variant_config(base, "gru", 0, tmp_path)


def test_sweep_writes_summary_curves_and_plot(make_config, tmp_path):
    config = make_config(ppo={"total_steps": 16}, eval={"interval": 16, "episodes": 1})
    result = AblationService(config, ["can", "transformer_no_causal"], [0, 1], tmp_path / "sweep").run()
    assert len(result.runs) == 4

    _, rows = read_csv(result.summary_path)
    assert [(r["variant"], r["seed"]) for r in rows] == [
        ("can", "0"), ("can", "1"), ("transformer_no_causal", "0"), ("transformer_no_causal", "1"),
        ("can", "mean"), ("can", "std"), ("transformer_no_causal", "mean"), ("transformer_no_causal", "std"),
    ]
    for variant in ("can", "transformer_no_causal"):
        _, curve = read_csv(result.curve_paths[variant])
        assert curve[0]["step"] == "16" and curve[0]["runs"] == "2"
    assert (tmp_path / "sweep" / "curves.svg").exists()
    assert run_log(tmp_path / "sweep", "can", 1).exists()

    by_key = {(r["variant"], r["seed"]): r for r in rows}
    for variant in ("can", "transformer_no_causal"):
        finals = [float(read_csv(run_log(tmp_path / "sweep", variant, s))[1][-1]["sr"]) for s in (0, 1)]
        assert float(by_key[variant, "mean"]["sr"]) == pytest.approx(np.mean(finals), abs=1e-12)
        assert float(by_key[variant, "std"]["sr"]) == pytest.approx(np.std(finals), abs=1e-12)


def test_unknown_variant_is_rejected_up_front(make_config, tmp_path):
    with pytest.raises(UsageError):
        AblationService(make_config(), ["can", "bogus"], [0], tmp_path)


CAUSAL_PAIRS = {"can": "transformer_no_causal", "causal_rnn": "rnn_no_causal"}


def run_log(sweep_dir, variant, seed):
    return sweep_dir / f"{variant}_seed{seed}" / "train_log.csv"


def steps_to_reach(curve_rows, target):
    for row in curve_rows:
        if float(row["sr"]) >= target:
            return int(row["step"])
    return None


@pytest.mark.slow
def test_causal_term_improves_success_at_scale(make_config, tmp_path):
    config = make_config(
        env={"width": 11, "height": 11, "obstacle_density": 0.2, "window": 5, "max_steps": 64},
        agent={"d_model": 32, "heads": 4, "max_episode_steps": 64},
        ppo={"num_envs": 8, "rollout_horizon": 128, "total_steps": 1_000_000, "lr0": 3e-4, "epochs": 4, "minibatches": 4},
        eval={"interval": 50_000, "episodes": 100},
    )
    seeds = [0, 1, 2, 3, 4]
    result = AblationService(config, list(VARIANTS), seeds, tmp_path / "scaled").run()
    assert len(result.runs) == 20
    assert all(run_log(tmp_path / "scaled", v, s).exists() for v in VARIANTS for s in seeds)

    final = {(r.variant, r.seed): r.sr for r in result.runs}
    for causal, plain in CAUSAL_PAIRS.items():
        causal_mean = np.mean([final[causal, s] for s in seeds])
        plain_mean = np.mean([final[plain, s] for s in seeds])
        assert causal_mean > plain_mean, (causal, causal_mean, plain_mean)
        assert sum(final[causal, s] > final[plain, s] for s in seeds) >= 4

        # sample efficiency: the causal curve reaches the plain variant's final SR early
        _, curve = read_csv(result.curve_paths[causal])
        reached = steps_to_reach(curve, plain_mean)
        assert reached is not None and reached <= 0.6 * config.ppo.total_steps
