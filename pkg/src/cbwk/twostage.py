"""Two-stage variant: uniform exploration, batch estimation, dual-radius fit.

Phase 1 pulls every arm T0 times, converts the collected samples into frozen
batch predictors, records T0 further context sets under arbitrary pulls, and
estimates the per-round optimum by a linear program over those contexts with a
slack-widened budget row.  The resulting radius estimate Z = (T/B) * (opt + M)
parameterizes a fresh IGW policy run on the remaining horizon and budget.
"""

import math
import time
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .core import EnvironmentSpec, RunTrace, sample_outcome
from .errors import ConfigurationError, InfeasibleError
from .lp import LpProblem, solve_lp
from .oracles import BatchPredictor, online_to_batch
from .policy import PolicyConfig, run_squarecbwk


@dataclass
class TwoStageConfig:
    t0: int | None = None  # per-arm exploration length; default from t0_default
    oracle: str = "glmtron"
    err_scale: float = 1.0  # leading constant of the estimation-error bounds
    eta_scale: float = 1.0
    arbitrary_pull: str = "auto"  # auto | null | uniform

    def __post_init__(self):
        if self.t0 is not None and self.t0 < 1:
            raise ConfigurationError(f"t0 must be >= 1 (got {self.t0})")
        if self.arbitrary_pull not in ("auto", "null", "uniform"):
            raise ConfigurationError(f"unknown arbitrary_pull {self.arbitrary_pull!r}")


def t0_default(family: str, m: int, d: int, K: int, T: int, p: float | None = None) -> int:
    """Exploration length per arm for the given function family."""
    if family == "linear":
        raw = (m * d) ** (1.0 / 3.0) * math.sqrt(T / K)
    elif family == "nonparametric":
        if p is None or p <= 0:
            raise ConfigurationError("nonparametric family needs a positive exponent p")
        raw = d ** ((2.0 + p) / (6.0 + 2.0 * p)) * K ** (-1.0 / (2.0 + p)) * T ** ((1.0 + p) / (2.0 + p))
    else:
        raise ConfigurationError(f"unknown family {family!r}")
    t0 = math.ceil(raw)
    if (K + 1) * t0 >= T:
        raise ConfigurationError(
            f"(K+1)*T0 = {(K + 1) * t0} >= T = {T}; reduce T0 or increase T"
        )
    return t0


def estimation_errors(oracle: str, m: int, d: int, t0: int, T: int,
                      scale: float = 1.0) -> tuple[float, float]:
    """Closed-form batch estimation-error bounds after T0 samples per arm.

    Online-to-batch conversion inherits the online regret bound divided by the
    sample count, times log T for the 1/T failure probability.
    """
    log_t = math.log(T)
    if oracle == "glmtron":
        reg_r = m * max(1.0, math.log(t0))
        reg_c = d * m * max(1.0, math.log(t0))
    elif oracle == "ogd":
        reg_r = math.sqrt(t0)
        reg_c = d * math.sqrt(t0)
    else:
        raise ConfigurationError(f"unknown oracle kind {oracle!r}")
    return scale * reg_r * log_t / t0, scale * reg_c * log_t / t0


def m_t0(t0: int, K: int, d: int, err_f: float, err_g: float, T: int) -> float:
    """Estimation-error radius entering the widened budget row and the Z fit."""
    return math.sqrt(K * (err_f + d * err_g) + 4.0 * math.log(T * d) / t0)


def z_estimate(opt_hat: float, m_val: float, T: int, B: float) -> float:
    """Dual radius (T/B) * (empirical optimum + estimation radius)."""
    return (T / B) * (opt_hat + m_val)


@dataclass
class ExplorationResult:
    t0: int
    reward_features: list  # per arm: (T0, m1)
    cost_features: list  # per arm: (T0, m2)
    rewards: list  # per arm: (T0,)
    costs: list  # per arm: (T0, d)
    context_sets_reward: np.ndarray  # (T0_ctx, K, m1) contexts of the arbitrary rounds
    context_sets_cost: np.ndarray  # (T0_ctx, K, m2)
    arms: np.ndarray  # all phase-1 pulls in order
    round_rewards: np.ndarray
    round_costs: np.ndarray
    consumed: np.ndarray  # (d,)
    aborted: bool


def explore(env: EnvironmentSpec, t0: int, rng: np.random.Generator,
            arbitrary_pull: str = "auto") -> ExplorationResult:
    """Pull each arm t0 times, then record t0 context sets under arbitrary pulls.

    Aborts early (with whatever was gathered) if some resource's cumulative
    consumption reaches B - 1 before the exploration block completes.
    """
    inst = env.instance
    K, d, B = inst.K, inst.d, inst.B
    if (K + 1) * t0 > inst.T:
        raise ConfigurationError(f"(K+1)*T0 = {(K + 1) * t0} exceeds T = {inst.T}")
    feats = env.features()
    exit_level = B - 1.0

    total_rounds = (K + 1) * t0
    arms = np.empty(total_rounds, dtype=np.int64)
    round_rewards = np.empty(total_rounds)
    round_costs = np.empty((total_rounds, d))
    consumed = np.zeros(d)
    aborted = False

    per_arm_rows = [[] for _ in range(K)]
    t = 0
    for arm in range(K):
        for _ in range(t0):
            outcome = sample_outcome(env, feats, arm, rng)
            arms[t] = arm
            round_rewards[t] = outcome.reward
            round_costs[t] = outcome.cost
            per_arm_rows[arm].append((outcome.reward, outcome.cost))
            consumed += outcome.cost
            t += 1
            if (consumed >= exit_level).any():
                aborted = True
                break
        if aborted:
            break

    n_ctx = 0
    if not aborted:
        use_null = env.null_arm and arbitrary_pull in ("auto", "null")
        if arbitrary_pull == "null" and not env.null_arm:
            raise ConfigurationError("arbitrary_pull='null' but the environment has no null arm")
        for _ in range(t0):
            arm = K - 1 if use_null else int(rng.integers(K))
            outcome = sample_outcome(env, feats, arm, rng)
            arms[t] = arm
            round_rewards[t] = outcome.reward
            round_costs[t] = outcome.cost
            consumed += outcome.cost
            n_ctx += 1
            t += 1
            if (consumed >= exit_level).any():
                aborted = True
                break

    reward_features, cost_features, rewards, costs = [], [], [], []
    for arm in range(K):
        n = len(per_arm_rows[arm])
        reward_features.append(np.tile(feats.reward[arm], (n, 1)))
        cost_features.append(np.tile(feats.cost[arm], (n, 1)))
        rewards.append(np.array([r for r, _ in per_arm_rows[arm]]))
        costs.append(np.array([c for _, c in per_arm_rows[arm]]) if n else np.empty((0, d)))

    return ExplorationResult(
        t0=t0,
        reward_features=reward_features,
        cost_features=cost_features,
        rewards=rewards,
        costs=costs,
        context_sets_reward=np.tile(feats.reward, (n_ctx, 1, 1)),
        context_sets_cost=np.tile(feats.cost, (n_ctx, 1, 1)),
        arms=arms[:t],
        round_rewards=round_rewards[:t],
        round_costs=round_costs[:t],
        consumed=consumed,
        aborted=aborted,
    )


def empirical_opt(reward_predictors: list, cost_predictors: list,
                  context_sets_reward: np.ndarray, context_sets_cost: np.ndarray,
                  budget_rate: float, m_val: float) -> float:
    """Optimal value of the empirical allocation program over the context sets.

    Variables are one distribution over arms per recorded context set; the
    budget rows are relaxed by twice the estimation radius.
    """
    n_ctx, K = context_sets_reward.shape[:2]
    if n_ctx < 1:
        raise ConfigurationError("need at least one recorded context set")
    d = len(cost_predictors[0])

    fhat = np.empty((n_ctx, K))
    ghat = np.empty((n_ctx, K, d))
    for a in range(K):
        fhat[:, a] = reward_predictors[a].predict_matrix(context_sets_reward[:, a, :])
        for j in range(d):
            ghat[:, a, j] = cost_predictors[a][j].predict_matrix(context_sets_cost[:, a, :])

    n_vars = n_ctx * K
    a_ub = ghat.reshape(n_vars, d).T / n_ctx
    b_ub = np.full(d, budget_rate + 2.0 * m_val)
    a_eq = np.zeros((n_ctx, n_vars))
    for t in range(n_ctx):
        a_eq[t, t * K : (t + 1) * K] = 1.0
    problem = LpProblem(c=fhat.ravel() / n_ctx, a_ub=a_ub, b_ub=b_ub,
                        a_eq=a_eq, b_eq=np.ones(n_ctx))
    sol = solve_lp(problem)
    if sol.status == "infeasible":
        raise InfeasibleError("empirical allocation program infeasible")
    if sol.status != "optimal":
        raise RuntimeError(f"LP solver returned status {sol.status}")
    return sol.value


@dataclass
class PhaseOneResult:
    t0: int
    exploration: ExplorationResult
    reward_predictors: list | None
    cost_predictors: list | None
    opt_hat: float | None
    err_f: float
    err_g: float
    m_val: float
    z: float | None
    aborted: bool


def phase_one(env: EnvironmentSpec, cfg: TwoStageConfig,
              rng: np.random.Generator) -> PhaseOneResult:
    """Exploration, batch fitting, and radius estimation (no policy rounds)."""
    inst = env.instance
    m1 = env.contexts.reward.shape[1]
    t0 = cfg.t0 if cfg.t0 is not None else t0_default("linear", m1, inst.d, inst.K, inst.T)
    if (K1 := (inst.K + 1) * t0) > inst.T:
        raise ConfigurationError(f"(K+1)*T0 = {K1} exceeds T = {inst.T}")

    err_f, err_g = estimation_errors(cfg.oracle, m1, inst.d, t0, inst.T, cfg.err_scale)
    m_val = m_t0(t0, inst.K, inst.d, err_f, err_g, inst.T)

    expl = explore(env, t0, rng, cfg.arbitrary_pull)
    if expl.aborted:
        return PhaseOneResult(t0=t0, exploration=expl, reward_predictors=None,
                              cost_predictors=None, opt_hat=None, err_f=err_f,
                              err_g=err_g, m_val=m_val, z=None, aborted=True)

    reward_predictors = []
    cost_predictors = []
    for a in range(inst.K):
        reward_predictors.append(
            online_to_batch(cfg.oracle, expl.reward_features[a], expl.rewards[a],
                            link=env.link, eta_scale=cfg.eta_scale)
        )
        cost_predictors.append([
            online_to_batch(cfg.oracle, expl.cost_features[a], expl.costs[a][:, j],
                            link=env.link, eta_scale=cfg.eta_scale)
            for j in range(inst.d)
        ])

    opt_hat = empirical_opt(reward_predictors, cost_predictors,
                            expl.context_sets_reward, expl.context_sets_cost,
                            inst.budget_rate, m_val)
    z = z_estimate(opt_hat, m_val, inst.T, inst.B)
    return PhaseOneResult(t0=t0, exploration=expl, reward_predictors=reward_predictors,
                          cost_predictors=cost_predictors, opt_hat=opt_hat, err_f=err_f,
                          err_g=err_g, m_val=m_val, z=z, aborted=False)


def run_twostage(env: EnvironmentSpec, cfg: TwoStageConfig,
                 rng: np.random.Generator,
                 policy_overrides: PolicyConfig | None = None) -> RunTrace:
    """Full two-stage run: phase-1 estimation, then the IGW policy on the rest."""
    started = time.perf_counter()
    inst = env.instance
    T, B, d, K = inst.T, inst.B, inst.d, inst.K
    feats = env.features()

    p1 = phase_one(env, cfg, rng)
    t0 = p1.t0
    phase1_rounds = (K + 1) * t0
    if B <= max((K + 2) * t0, T * p1.m_val):
        warnings.warn(
            "budget below the two-stage precondition "
            f"max((K+2)T0, T*M(T0)) = {max((K + 2) * t0, T * p1.m_val):.1f}; "
            "the run proceeds but the radius estimate may be unreliable",
            RuntimeWarning,
            stacklevel=2,
        )

    expl = p1.exploration
    n1 = expl.arms.size
    K_arms = K
    nan_r = np.full((n1, K_arms), np.nan)
    nan_c = np.full((n1, K_arms, d), np.nan)
    nan_l = np.full((n1, d), np.nan)
    probs1 = np.zeros((n1, K_arms))
    probs1[np.arange(n1), expl.arms] = 1.0

    if p1.aborted or phase1_rounds == T:
        total_reward = float(expl.round_rewards.sum())
        return RunTrace(
            horizon=T, budget=B, arm_features=feats,
            arms=expl.arms, rewards=expl.round_rewards, costs=expl.round_costs,
            probs=probs1, rhat=nan_r, chat=nan_c, lam=nan_l, scores=nan_r.copy(),
            tau=n1, total_reward=total_reward, total_cost=expl.consumed.copy(),
            duration_s=time.perf_counter() - started,
            stopped_early=p1.aborted, aborted_in_exploration=p1.aborted,
            dual_radius=p1.z if p1.z is not None else float("nan"),
        )

    t2 = T - phase1_rounds
    b2 = B - phase1_rounds
    if b2 < 1:
        raise ConfigurationError(
            f"remaining budget B' = B - (K+1)T0 = {b2} is below 1; phase 2 cannot run"
        )
    env2 = replace(env, instance=type(inst)(T=t2, B=b2, d=d, K=K))
    base = policy_overrides if policy_overrides is not None else PolicyConfig(oracle=cfg.oracle)
    pc = replace(base, z=base.z if base.z is not None else p1.z,
                 oracle=base.oracle if policy_overrides is not None else cfg.oracle)
    trace2 = run_squarecbwk(env2, pc, rng)

    return RunTrace(
        horizon=T, budget=B, arm_features=feats,
        arms=np.concatenate([expl.arms, trace2.arms]),
        rewards=np.concatenate([expl.round_rewards, trace2.rewards]),
        costs=np.vstack([expl.round_costs, trace2.costs]),
        probs=np.vstack([probs1, trace2.probs]),
        rhat=np.vstack([nan_r, trace2.rhat]),
        chat=np.concatenate([nan_c, trace2.chat], axis=0),
        lam=np.vstack([nan_l, trace2.lam]),
        scores=np.vstack([nan_r.copy(), trace2.scores]),
        tau=n1 + trace2.tau,
        total_reward=float(expl.round_rewards.sum()) + trace2.total_reward,
        total_cost=expl.consumed + trace2.total_cost,
        duration_s=time.perf_counter() - started,
        stopped_early=trace2.stopped_early,
        gamma=trace2.gamma,
        dual_radius=trace2.dual_radius,
    )
