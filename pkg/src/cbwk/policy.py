"""Budgeted contextual bandit policy: oracle scores, IGW sampling, dual prices.

Each round the policy predicts rewards and costs for every arm, combines them
into a price-penalized score, samples an arm with probability inversely
proportional to its score gap from the greedy arm, then feeds the realized
outcome back into the oracles and the dual update.  The run stops the first
round any resource's cumulative consumption reaches B - 1.
"""

import math
import time
from dataclasses import dataclass

import numpy as np

from .core import EnvironmentSpec, RunTrace, sample_outcome
from .dual import dual_init, dual_lambda, dual_update
from .errors import ConfigurationError
from .oracles import OracleBoundSpec, bound_spec, make_predictor, make_vector_predictor


@dataclass
class PolicyConfig:
    """Knobs for one run.

    ``gamma`` and ``z`` default to the learning rate derived from the oracle
    family's regret bounds and to T/B respectively.  ``bound_scale`` is the
    leading constant applied to those closed-form bounds.
    """

    oracle: str = "glmtron"
    gamma: float | None = None
    z: float | None = None
    bound_scale: float = 1.0
    eta_scale: float = 1.0

    def __post_init__(self):
        if self.gamma is not None and self.gamma <= 0:
            raise ConfigurationError(f"gamma must be positive (got {self.gamma})")
        if self.z is not None and self.z <= 0:
            raise ConfigurationError(f"z must be positive (got {self.z})")


def gamma_default(K: int, T: int, bounds: OracleBoundSpec, Z: float) -> float:
    """Learning rate sqrt(KT / (Reg_r(T) + (Z+1)^2 Reg_c(T) + 4 log(2T)))."""
    denom = bounds.reward_bound(T) + (Z + 1.0) ** 2 * bounds.cost_bound(T) + 4.0 * math.log(2 * T)
    return math.sqrt(K * T / denom)


def lagrangian_scores(rhat: np.ndarray, chat: np.ndarray, lam: np.ndarray,
                      budget_rate: float) -> np.ndarray:
    """Score each arm by predicted reward plus priced budget slack."""
    return rhat + (budget_rate - chat) @ lam


def igw_distribution(scores: np.ndarray, gamma: float) -> np.ndarray:
    """Inverse-gap-weighted distribution over arms.

    The greedy arm (ties to the lowest index) receives the leftover mass
    1 - sum of 1/(K + gamma * gap) over the others, which is always >= 1/K.
    """
    K = scores.size
    best = int(np.argmax(scores))
    p = 1.0 / (K + gamma * (scores[best] - scores))
    p[best] = 0.0
    p[best] = 1.0 - p.sum()
    return p


def _sample_arm(p: np.ndarray, rng: np.random.Generator) -> int:
    r = rng.random()
    return int(min(np.searchsorted(np.cumsum(p), r), p.size - 1))


def run_squarecbwk(env: EnvironmentSpec, config: PolicyConfig,
                   rng: np.random.Generator, *,
                   reward_oracle=None, cost_oracle=None) -> RunTrace:
    """Run the IGW policy for up to T rounds or until a budget nearly runs out.

    Pre-built oracles may be injected (warm starts, instrumentation); by
    default fresh ones are created for the configured family.
    """
    started = time.perf_counter()
    inst = env.instance
    T, B, d, K = inst.T, inst.B, inst.d, inst.K
    feats = env.features()
    budget_rate = inst.budget_rate

    Z = config.z if config.z is not None else T / B
    m1 = feats.reward.shape[1]
    m2 = feats.cost.shape[1]
    bounds = bound_spec(config.oracle, m1, m2, d, config.bound_scale)
    gamma = config.gamma if config.gamma is not None else gamma_default(K, T, bounds, Z)

    if reward_oracle is None:
        reward_oracle = make_predictor(config.oracle, m1, link=env.link,
                                       eta_scale=config.eta_scale)
    if cost_oracle is None:
        cost_oracle = make_vector_predictor(config.oracle, d, m2, link=env.link,
                                            eta_scale=config.eta_scale)
    dual = dual_init(d, Z, T)

    arms = np.empty(T, dtype=np.int64)
    rewards = np.empty(T)
    costs = np.empty((T, d))
    probs = np.empty((T, K))
    rhat_log = np.empty((T, K))
    chat_log = np.empty((T, K, d))
    lam_log = np.empty((T, d))
    score_log = np.empty((T, K))

    cum_cost = np.zeros(d)
    total_reward = 0.0
    tau = T
    stopped_early = False
    exit_level = B - 1.0

    for t in range(T):
        rhat = reward_oracle.predict_matrix(feats.reward)
        chat = cost_oracle.predict_matrix(feats.cost)
        lam = dual_lambda(dual)
        scores = lagrangian_scores(rhat, chat, lam, budget_rate)
        p = igw_distribution(scores, gamma)
        arm = _sample_arm(p, rng)
        outcome = sample_outcome(env, feats, arm, rng)

        arms[t] = arm
        rewards[t] = outcome.reward
        costs[t] = outcome.cost
        probs[t] = p
        rhat_log[t] = rhat
        chat_log[t] = chat
        lam_log[t] = lam
        score_log[t] = scores

        total_reward += outcome.reward
        cum_cost += outcome.cost

        reward_oracle.update(feats.reward[arm], outcome.reward)
        cost_oracle.update(feats.cost[arm], outcome.cost)
        dual_update(dual, outcome.cost, budget_rate)

        if (cum_cost >= exit_level).any():
            tau = t + 1
            stopped_early = tau < T
            break

    return RunTrace(
        horizon=T,
        budget=B,
        arm_features=feats,
        arms=arms[:tau],
        rewards=rewards[:tau],
        costs=costs[:tau],
        probs=probs[:tau],
        rhat=rhat_log[:tau],
        chat=chat_log[:tau],
        lam=lam_log[:tau],
        scores=score_log[:tau],
        tau=tau,
        total_reward=total_reward,
        total_cost=cum_cost,
        duration_s=time.perf_counter() - started,
        stopped_early=stopped_early,
        gamma=gamma,
        dual_radius=Z,
    )
