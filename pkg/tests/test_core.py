import math

import numpy as np
import pytest

from cbwk.core import (
    ArmFeatures,
    EnvironmentSpec,
    ProblemInstance,
    RunTrace,
    clipped_gaussian_mean,
    make_fixed_linear_env,
    make_glm_env,
    realized_regret,
    sample_outcome,
)
from cbwk.errors import ConfigurationError

HALF_PLUS_INV_SQRT2 = 0.5 + 1.0 / math.sqrt(2.0)  # 1.20710678...


def test_problem_instance_invariants():
    ProblemInstance(T=10, B=5, d=1, K=2)
    with pytest.raises(ConfigurationError):
        ProblemInstance(T=0, B=1, d=1, K=2)
    with pytest.raises(ConfigurationError):
        ProblemInstance(T=10, B=11, d=1, K=2)
    with pytest.raises(ConfigurationError):
        ProblemInstance(T=10, B=0.5, d=1, K=2)
    with pytest.raises(ConfigurationError):
        ProblemInstance(T=10, B=5, d=0, K=2)
    with pytest.raises(ConfigurationError):
        ProblemInstance(T=10, B=5, d=1, K=1)


def test_benchmark_env_expected_values():
    env = make_fixed_linear_env(10, 3, 4, 0.2, T=1000, B=1000)
    rewards = env.expected_rewards()
    costs = env.expected_costs()
    # arm 1: 1/2 + 1/sqrt(2); other arms 1/2
    assert rewards[0] == pytest.approx(HALF_PLUS_INV_SQRT2, abs=1e-12)
    assert rewards[1] == pytest.approx(0.5, abs=1e-12)
    assert rewards[2] == pytest.approx(0.5, abs=1e-12)
    # cost of arm 2 under the first cost parameter: 1/2 + 1/sqrt(2)
    assert costs[1, 0] == pytest.approx(HALF_PLUS_INV_SQRT2, abs=1e-12)
    assert costs[0, 0] == pytest.approx(0.5, abs=1e-12)
    # later cost coordinates are indicators: coordinate i hits arm i only
    assert costs[2, 2] == pytest.approx(1.0, abs=1e-12)
    assert costs[0, 2] == pytest.approx(0.0, abs=1e-12)
    assert costs[1, 3] == pytest.approx(0.0, abs=1e-12)
    # context norms are sqrt(3/2)
    norms = np.linalg.norm(env.contexts.reward, axis=1)
    assert np.allclose(norms, math.sqrt(1.5), atol=1e-12)


def test_benchmark_env_dimension_guards():
    with pytest.raises(ConfigurationError):
        make_fixed_linear_env(5, 3, 4, 0.2, T=100, B=100)
    with pytest.raises(ConfigurationError) as err:
        make_fixed_linear_env(10, 10, 4, 0.2, T=100, B=100)
    assert "K <= m-1" in str(err.value)
    with pytest.raises(ConfigurationError) as err:
        make_fixed_linear_env(10, 3, 10, 0.2, T=100, B=100)
    assert "d <= m-1" in str(err.value)
    with pytest.raises(ConfigurationError):
        make_fixed_linear_env(10, 3, 3, 0.2, T=100, B=100)


def test_glm_env_zero_parameter_means_half():
    inst = ProblemInstance(T=100, B=100, d=2, K=2)
    env = make_glm_env(inst, np.zeros(3), np.zeros((2, 3)),
                       np.eye(3)[:2] * 0.9)
    assert np.allclose(env.expected_rewards(), 0.5)
    assert np.allclose(env.expected_costs(), 0.5)


def test_glm_env_logistic_mean():
    inst = ProblemInstance(T=100, B=100, d=1, K=2)
    contexts = np.array([[1.0, 0.0], [0.0, 1.0]])
    env = make_glm_env(inst, np.array([1.0, 0.0]), np.zeros((1, 2)), contexts)
    assert env.expected_rewards()[0] == pytest.approx(1 / (1 + math.exp(-1)), abs=1e-9)
    assert env.expected_rewards()[0] == pytest.approx(0.73106, abs=1e-5)


def test_glm_env_rejects_large_parameters():
    inst = ProblemInstance(T=100, B=100, d=1, K=2)
    with pytest.raises(ConfigurationError):
        make_glm_env(inst, np.array([1.5, 0.0]), np.zeros((1, 2)), np.eye(2))


def test_glm_outcomes_are_binary():
    inst = ProblemInstance(T=100, B=100, d=2, K=2)
    env = make_glm_env(inst, np.array([0.5, 0.0]), np.zeros((2, 2)) + 0.3, np.eye(2) * 0.8)
    rng = np.random.default_rng(0)
    for _ in range(50):
        out = sample_outcome(env, env.features(), 0, rng)
        assert out.reward in (0.0, 1.0)
        assert set(np.unique(out.cost)) <= {0.0, 1.0}


def test_null_arm_outcomes_identically_zero():
    env = make_fixed_linear_env(10, 3, 4, 0.2, T=1000, B=1000,
                                bounded=True, null_arm=True)
    rng = np.random.default_rng(3)
    feats = env.features()
    for _ in range(10**4):
        out = sample_outcome(env, feats, 2, rng)
        assert out.reward == 0.0
        assert (out.cost == 0.0).all()


def test_zero_noise_matches_analytic_means():
    env = make_fixed_linear_env(10, 3, 4, 0.0, T=1000, B=1000)
    rng = np.random.default_rng(1)
    feats = env.features()
    out = sample_outcome(env, feats, 1, rng)
    assert out.reward == pytest.approx(0.5, abs=1e-12)
    assert out.cost[0] == pytest.approx(HALF_PLUS_INV_SQRT2, abs=1e-12)
    out = sample_outcome(env, feats, 0, rng)
    assert out.cost[0] == pytest.approx(0.5, abs=1e-12)


def test_arm_out_of_range():
    env = make_fixed_linear_env(10, 3, 4, 0.2, T=1000, B=1000)
    with pytest.raises(IndexError):
        sample_outcome(env, env.features(), 3, np.random.default_rng(0))


def test_monte_carlo_mean_within_four_standard_errors():
    env = make_fixed_linear_env(10, 3, 4, 0.2, T=1000, B=1000)
    rng = np.random.default_rng(42)
    feats = env.features()
    n = 10**5
    draws = np.array([sample_outcome(env, feats, 0, rng).reward for _ in range(n)])
    se = math.sqrt(0.2 / n)
    assert abs(draws.mean() - HALF_PLUS_INV_SQRT2) <= 4 * se


def test_bounded_mode_clips_and_adjusts_means():
    env = make_fixed_linear_env(10, 3, 4, 0.2, T=1000, B=1000, bounded=True)
    rng = np.random.default_rng(9)
    feats = env.features()
    draws = np.array([sample_outcome(env, feats, 0, rng).reward for _ in range(2000)])
    assert draws.min() >= 0.0 and draws.max() <= 1.0
    # clipped-mean helper agrees with a direct Monte Carlo estimate
    mc = np.clip(np.random.default_rng(5).normal(HALF_PLUS_INV_SQRT2,
                                                 math.sqrt(0.2), 10**6), 0, 1).mean()
    assert clipped_gaussian_mean(np.array([HALF_PLUS_INV_SQRT2]), 0.2)[0] == \
        pytest.approx(mc, abs=2e-3)
    assert env.expected_rewards()[0] < HALF_PLUS_INV_SQRT2


def test_feature_norm_bound_enforced():
    with pytest.raises(ConfigurationError):
        ArmFeatures(reward=np.array([[2.0, 0.0]]), cost=np.array([[0.0, 0.0]]),
                    norm_bound=1.0)


def _dummy_trace(total_reward, tau, T=1000, B=1000.0):
    z = np.zeros
    return RunTrace(horizon=T, budget=B, arm_features=None, arms=z(tau, dtype=int),
                    rewards=z(tau), costs=z((tau, 1)), probs=z((tau, 2)),
                    rhat=z((tau, 2)), chat=z((tau, 2, 1)), lam=z((tau, 1)),
                    scores=z((tau, 2)), tau=tau, total_reward=total_reward,
                    total_cost=z(1))


def test_realized_regret_arithmetic():
    assert realized_regret(_dummy_trace(500.0, 900), 0.55, 1000) == pytest.approx(50.0)
    assert realized_regret(_dummy_trace(0.0, 0), 0.55, 1000) == pytest.approx(550.0)
    assert realized_regret(_dummy_trace(550.0, 1000), 0.55, 1000) == pytest.approx(0.0)
