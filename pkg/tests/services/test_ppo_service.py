import numpy as np
import pytest

from cannav.core.errors import EmptyBatchError
from cannav.env.gridworld import Action
from cannav.env.vec_env import VecEnv
from cannav.models.agent import NavigationAgent
from cannav.numeric.gradcheck import gradcheck
from cannav.numeric.optim import Adam
from cannav.services.ppo_service import minibatch_groups, minibatch_loss, ppo_update, segment_transitions
from cannav.services.rollout_service import RolloutBuffer, collect_rollouts, compute_gae


def _rollout(config):
    agent = NavigationAgent(config)
    buffer = collect_rollouts(agent.policy, VecEnv(config.env, config.ppo.num_envs, config.seed), horizon=8)
    compute_gae(buffer, config.ppo.gamma, config.ppo.gae_lambda)
    return agent, buffer


def _causal_arrays(agent):
    return {k: v.copy() for k, v in agent.causal.state_arrays().items()}


def test_segment_transitions_pair_consecutive_steps(make_config):
    config = make_config()
    agent = NavigationAgent(config)
    envs = VecEnv(config.env, 1, config.seed)
    envs.step(0, Action.ROTATE_LEFT)
    envs.step(0, Action.ROTATE_LEFT)
    out = agent.policy(envs.slots[0].context)
    batch = segment_transitions(out, [1, 2], detach_targets=True)
    np.testing.assert_array_equal(batch.h_o.data, out.h_visual.data[[0, 1]])
    np.testing.assert_array_equal(batch.h_a.data, out.h_action.data[[1, 2]])
    np.testing.assert_array_equal(batch.h_next.data, out.h_visual.data[[1, 2]])
    assert not batch.h_next.requires_grad
    assert segment_transitions(out, [], detach_targets=True) is None


def test_minibatch_groups_partition_segments():
    groups = minibatch_groups(7, 3, np.random.default_rng(0))
    assert len(groups) == 3
    assert sorted(np.concatenate(groups).tolist()) == list(range(7))
    assert len(minibatch_groups(2, 4, np.random.default_rng(0))) == 2


def test_first_minibatch_has_unit_ratio(make_config):
    agent, buffer = _rollout(make_config())
    segments = list(buffer)
    advantages = [s.advantages for s in segments]
    _, stats = minibatch_loss(agent, segments, advantages, agent.config.ppo, agent.config.causal)
    assert stats.clip_fraction == 0.0
    assert stats.surrogate == pytest.approx(float(np.concatenate(advantages).mean()), abs=1e-9)
    assert stats.causal_loss > 0.0
    assert stats.entropy > 0.0


def test_update_changes_parameters_and_counts_steps(make_config):
    config = make_config(ppo={"epochs": 2, "minibatches": 2})
    agent, buffer = _rollout(config)
    before = agent.state_arrays()
    stats = ppo_update(agent, buffer, Adam(agent.named_parameters()), config.ppo, config.causal, 1e-3, np.random.default_rng(0))
    assert stats.updates == 2 * min(2, len(buffer.segments))
    after = agent.state_arrays()
    assert any(not np.array_equal(before[k], after[k]) for k in before if k.startswith("policy.actor"))


def test_causal_weight_zero_leaves_causal_module_untouched(make_config):
    config = make_config(ppo={"alpha": 0.0})
    agent, buffer = _rollout(config)
    before = _causal_arrays(agent)
    ppo_update(agent, buffer, Adam(agent.named_parameters()), config.ppo, config.causal, 1e-3, np.random.default_rng(0))
    for name, array in agent.causal.state_arrays().items():
        np.testing.assert_array_equal(array, before[name])


def test_causal_weight_trains_causal_module(make_config):
    config = make_config()
    agent, buffer = _rollout(config)
    before = _causal_arrays(agent)
    ppo_update(agent, buffer, Adam(agent.named_parameters()), config.ppo, config.causal, 1e-3, np.random.default_rng(0))
    assert not np.array_equal(agent.causal.state_arrays()["predictor.weight"], before["predictor.weight"])


def test_empty_buffer_and_minibatch(make_config):
    config = make_config()
    agent = NavigationAgent(config)
    with pytest.raises(EmptyBatchError):
        ppo_update(agent, RolloutBuffer(2, 8), Adam(agent.named_parameters()), config.ppo, config.causal, 1e-3,
                   np.random.default_rng(0))
    with pytest.raises(EmptyBatchError):
        minibatch_loss(agent, [], [], config.ppo, config.causal)


def _toy_config(make_config, **ppo):
    return make_config(
        agent={"d_model": 4, "heads": 1, "ff_multiplier": 1},
        causal={"detach_targets": False},
        ppo=ppo,
    )


def test_full_loss_gradient_matches_finite_differences(make_config):
    config = _toy_config(make_config, num_envs=2, alpha=1.0)
    agent = NavigationAgent(config)
    buffer = collect_rollouts(agent.policy, VecEnv(config.env, 2, config.seed), horizon=3)
    compute_gae(buffer, config.ppo.gamma, config.ppo.gae_lambda)
    segments = list(buffer)
    advantages = [s.advantages for s in segments]
    assert len(buffer) == 6 and buffer.num_transitions > 0

    def loss():
        return minibatch_loss(agent, segments, advantages, config.ppo, config.causal)[0]

    params = agent.named_parameters()
    assert gradcheck(loss, list(params.values())) <= 1e-3
    for group in ("policy.encoder.", "policy.sequence.", "policy.actor.", "policy.critic.", "causal.predictor."):
        assert any(p.grad is not None and np.any(p.grad) for n, p in params.items() if n.startswith(group)), group


@pytest.mark.parametrize("shift, clipped", [(0.1, False), (0.5, True)])
def test_single_transition_surrogate_gradient(make_config, shift, clipped):
    config = _toy_config(make_config, num_envs=1, clip_eps=0.2, value_coef=0.0, entropy_coef=0.0, alpha=0.0)
    agent = NavigationAgent(config)
    buffer = collect_rollouts(agent.policy, VecEnv(config.env, 1, config.seed), horizon=1)
    (segment,) = buffer.segments
    # old log-prob lowered by `shift` so the ratio starts at exp(shift)
    segment.log_probs = [segment.log_probs[0] - shift]
    segment.returns = np.zeros(1)
    advantage = [np.array([2.0])]

    def loss():
        return minibatch_loss(agent, [segment], advantage, config.ppo, config.causal)[0]

    total, stats = minibatch_loss(agent, [segment], advantage, config.ppo, config.causal)
    assert total.item() == pytest.approx(-stats.surrogate)
    expected = 2.0 * (1.2 if clipped else np.exp(shift))
    assert stats.surrogate == pytest.approx(expected, rel=1e-9)
    assert stats.clip_fraction == (1.0 if clipped else 0.0)

    params = list(agent.policy.named_parameters().values())
    assert gradcheck(loss, params) <= 1e-4
    grads = [p.grad for p in params if p.grad is not None]
    if clipped:
        assert all(not np.any(g) for g in grads)
    else:
        assert any(np.any(g) for g in grads)
