"""Policy iteration driven by Riemannian descent on the Q-function parameters.

One trial = collect an on-policy dataset under the current greedy policy
(epsilon-greedy exploration, pure-greedy bootstrap action), fit the model by
minimizing the Bellman residual warm-started from the previous parameters,
then evaluate steps-to-goal from the resting start under the new greedy
policy.  No replay buffer exists anywhere: every trial's batch is collected
fresh and discarded.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import envs
from .envs import EnvSpec
from .manifold import MetricKind
from .model import GmmQFunction, TransitionBatch, WeightLayout, bound_objective, gauss_matrix
from .optim import ArmijoConfig, DescentTrace, descend


@dataclass(frozen=True)
class RolloutConfig:
    """Exploration-episode protocol.

    Episodes start from the task's resting configuration by default
    ("uniform" spreads them over the state box instead).  With
    ``truncate_at_goal`` an episode ends once the successor state enters the
    goal set; either way fresh episodes are started until exactly
    episodes*steps_per_episode rows exist.
    """

    episodes: int = 20
    steps_per_episode: int = 70
    start_mode: str = "resting"
    truncate_at_goal: bool = False

    def __post_init__(self):
        if self.episodes < 1 or self.steps_per_episode < 1:
            raise ValueError("rollout must have at least one episode and one step")
        if self.start_mode not in ("resting", "uniform"):
            raise ValueError("start_mode must be 'resting' or 'uniform'")

    @property
    def total(self) -> int:
        return self.episodes * self.steps_per_episode


@dataclass(frozen=True)
class EvalConfig:
    step_cap: int = 1000
    eval_episodes: int = 1

    def __post_init__(self):
        if self.step_cap < 1 or self.eval_episodes < 1:
            raise ValueError("step_cap and eval_episodes must be positive")


@dataclass(frozen=True)
class PiConfig:
    env: EnvSpec
    k: int
    layout: WeightLayout = WeightLayout.SHARED
    metric: MetricKind = MetricKind.AFFINE_INVARIANT
    discount: float = 0.97
    rollout: RolloutConfig = field(default_factory=RolloutConfig)
    exploration_eps: float = 0.4
    armijo: ArmijoConfig = field(default_factory=ArmijoConfig)
    trials: int = 150
    eval: EvalConfig = field(default_factory=EvalConfig)
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("need at least one Gaussian component")
        if not 0.0 <= self.discount < 1.0:
            raise ValueError("discount must lie in [0, 1)")
        if not 0.0 <= self.exploration_eps <= 1.0:
            raise ValueError("exploration_eps must lie in [0, 1]")
        if self.trials < 0:
            raise ValueError("trials must be nonnegative")

    @property
    def gauss_dim(self) -> int:
        """Input dimension of the Gaussians: embedded for shared weights, raw state otherwise."""
        if self.layout is WeightLayout.SHARED:
            return self.env.state_dim + 1
        return self.env.state_dim

    def with_seed(self, seed: int) -> "PiConfig":
        return replace(self, seed=seed)


@dataclass(frozen=True)
class TrialLog:
    trial: int
    steps_to_goal: float
    final_loss: float
    grad_norm: float
    wall_time_ms: float
    seed: int

    def __post_init__(self):
        if self.steps_to_goal < 1:
            raise ValueError("steps_to_goal starts at 1")


def greedy_action(model: GmmQFunction, spec: EnvSpec, state: np.ndarray) -> int:
    """Action index minimizing the Q value; ties break to the lowest index."""
    return int(np.argmin(_action_values(model, spec, state)))


def _action_values(model: GmmQFunction, spec: EnvSpec, state: np.ndarray) -> np.ndarray:
    state = np.asarray(state, dtype=float)
    if model.layout is WeightLayout.SHARED:
        embeds = np.empty((spec.n_actions, spec.state_dim + 1))
        embeds[:, :-1] = state
        embeds[:, -1] = envs.action_embeddings(spec)
        return gauss_matrix(embeds, model.means, model.cov_invs) @ model.weights
    g = gauss_matrix(state[None, :], model.means, model.cov_invs)[0]
    return model.weights @ g


@dataclass(frozen=True)
class GreedyPolicy:
    """Greedy rule over a fixed model; deterministic tie-break by action index."""

    model: GmmQFunction
    spec: EnvSpec

    def __call__(self, state: np.ndarray) -> int:
        return greedy_action(self.model, self.spec, state)


def collect_dataset(
    spec: EnvSpec,
    model: GmmQFunction,
    rollout: RolloutConfig,
    eps: float,
    rng: np.random.Generator,
) -> TransitionBatch:
    """Roll out exactly episodes*steps_per_episode transitions.

    Behavior actions are epsilon-greedy around the model's greedy policy; the
    recorded next action is always pure greedy (it feeds the bootstrap term).
    Fresh episodes are started until the row budget is met.
    """
    target = rollout.total
    shared = model.layout is WeightLayout.SHARED
    rows_z, rows_g, rows_zn = [], [], []
    rows_a, rows_an = [], []
    while len(rows_g) < target:
        state = envs.sample_initial_state(spec, rng, resting=rollout.start_mode == "resting")
        for _ in range(rollout.steps_per_episode):
            if len(rows_g) >= target:
                break
            if eps > 0.0 and rng.random() < eps:
                action = int(rng.integers(spec.n_actions))
            else:
                action = greedy_action(model, spec, state)
            loss = envs.one_step_loss(spec, state, action)
            nxt = envs.step(spec, state, action)
            next_action = greedy_action(model, spec, nxt)
            if shared:
                rows_z.append(envs.zeta(spec, state, action))
                rows_zn.append(envs.zeta(spec, nxt, next_action))
            else:
                rows_z.append(np.asarray(state, dtype=float))
                rows_zn.append(np.asarray(nxt, dtype=float))
                rows_a.append(action)
                rows_an.append(next_action)
            rows_g.append(loss)
            if rollout.truncate_at_goal and envs.is_goal(spec, nxt):
                break
            state = nxt
    return TransitionBatch(
        z=np.asarray(rows_z),
        g=np.asarray(rows_g),
        z_next=np.asarray(rows_zn),
        actions=np.asarray(rows_a) if not shared else None,
        next_actions=np.asarray(rows_an) if not shared else None,
    )


def init_model(cfg: PiConfig, rng: np.random.Generator) -> GmmQFunction:
    """Zero weights; means drawn from a random-policy rollout; isotropic covariances.

    The covariance scale is the median squared pairwise distance among the
    chosen means (median heuristic), so the kernels start at the data's scale.
    """
    spec = cfg.env
    samples = []
    while len(samples) < cfg.rollout.total:
        state = envs.sample_initial_state(spec, rng, resting=cfg.rollout.start_mode == "resting")
        for _ in range(cfg.rollout.steps_per_episode):
            action = int(rng.integers(spec.n_actions))
            if cfg.layout is WeightLayout.SHARED:
                samples.append(envs.zeta(spec, state, action))
            else:
                samples.append(np.asarray(state, dtype=float))
            nxt = envs.step(spec, state, action)
            if len(samples) >= cfg.rollout.total:
                break
            state = nxt
    samples = np.asarray(samples)
    idx = rng.choice(len(samples), size=cfg.k, replace=cfg.k > len(samples))
    means = samples[idx]
    diff = means[:, None, :] - means[None, :, :]
    sq = np.sum(diff * diff, axis=-1)
    upper = sq[np.triu_indices(cfg.k, k=1)]
    scale = float(np.median(upper)) if upper.size else 1.0
    if scale <= 1e-12:
        scale = 1.0
    covs = np.broadcast_to(scale * np.eye(cfg.gauss_dim), (cfg.k, cfg.gauss_dim, cfg.gauss_dim)).copy()
    if cfg.layout is WeightLayout.SHARED:
        weights = np.zeros(cfg.k)
    else:
        weights = np.zeros((spec.n_actions, cfg.k))
    return GmmQFunction(weights=weights, means=means, covs=covs)


def policy_evaluate(
    batch: TransitionBatch, warm_start: GmmQFunction, cfg: PiConfig
) -> tuple[GmmQFunction, DescentTrace]:
    """Fit the Bellman residual on this batch, starting from the previous model."""
    loss_fn, grad_fn = bound_objective(batch, cfg.discount, cfg.metric)
    return descend(warm_start, loss_fn, grad_fn, cfg.armijo, cfg.metric)


def evaluate_steps_to_goal(
    spec: EnvSpec, model: GmmQFunction, eval_cfg: EvalConfig, rng: np.random.Generator
) -> float:
    """Mean steps to reach the goal from the resting start, capped per episode."""
    totals = []
    for _ in range(eval_cfg.eval_episodes):
        state = envs.sample_initial_state(spec, rng, resting=True)
        steps_taken = eval_cfg.step_cap
        for t in range(1, eval_cfg.step_cap + 1):
            state = envs.step(spec, state, greedy_action(model, spec, state))
            if envs.is_goal(spec, state):
                steps_taken = t
                break
        totals.append(steps_taken)
    return float(np.mean(totals))


def run_with_model(cfg: PiConfig, batch_hook=None) -> tuple[GmmQFunction, list[TrialLog]]:
    """Full policy-iteration run; returns the trained model alongside the logs.

    Deterministic given cfg.seed (timings aside).  ``batch_hook(trial, batch)``,
    when given, observes each trial's freshly collected dataset (used by tests
    to assert the no-replay contract).
    """
    rng = np.random.default_rng(cfg.seed)
    model = init_model(cfg, rng)
    logs = []
    for trial in range(1, cfg.trials + 1):
        started = time.perf_counter()
        batch = collect_dataset(cfg.env, model, cfg.rollout, cfg.exploration_eps, rng)
        if batch_hook is not None:
            batch_hook(trial, batch)
        model, trace = policy_evaluate(batch, model, cfg)
        steps = evaluate_steps_to_goal(cfg.env, model, cfg.eval, rng)
        elapsed_ms = (time.perf_counter() - started) * 1e3
        final_loss = trace.losses[-1] if trace.losses else trace.initial_loss
        logs.append(
            TrialLog(
                trial=trial,
                steps_to_goal=steps,
                final_loss=final_loss,
                grad_norm=trace.final_grad_norm,
                wall_time_ms=elapsed_ms,
                seed=cfg.seed,
            )
        )
    return model, logs


def run(cfg: PiConfig, batch_hook=None) -> list[TrialLog]:
    """Full policy-iteration run returning the per-trial logs."""
    return run_with_model(cfg, batch_hook)[1]


def _run_for_seed(args) -> tuple[GmmQFunction, list[TrialLog]]:
    cfg, seed = args
    return run_with_model(cfg.with_seed(seed))


def run_seeds(cfg: PiConfig, seeds, max_workers: int | None = None) -> list[tuple[GmmQFunction, list[TrialLog]]]:
    """Run independent seeds, in a process pool when cores allow.

    Results come back in seed order regardless of scheduling, so downstream
    output is pool-independent.
    """
    seeds = list(seeds)
    workers = max_workers or min(len(seeds), os.cpu_count() or 1)
    if workers <= 1 or len(seeds) <= 1:
        return [run_with_model(cfg.with_seed(s)) for s in seeds]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_for_seed, [(cfg, s) for s in seeds]))


def param_count(cfg: PiConfig) -> int:
    """Number of learnable parameters implied by the configuration."""
    d = cfg.gauss_dim
    per_cov = d * (d + 1) // 2
    if cfg.layout is WeightLayout.SHARED:
        return cfg.k + cfg.k * d + cfg.k * per_cov
    return cfg.env.n_actions * cfg.k + cfg.k * d + cfg.k * per_cov


def moving_average(series, window: int = 10) -> np.ndarray:
    """Trailing mean; the first window-1 points average the available prefix.

    Each output is the plain left-to-right sum of its window divided by the
    window length, so independent implementations reproduce it bit-for-bit.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    series = np.asarray(series, dtype=float)
    out = np.empty_like(series)
    for i in range(series.size):
        lo = max(0, i - window + 1)
        acc = 0.0
        for j in range(lo, i + 1):
            acc += float(series[j])
        out[i] = acc / (i - lo + 1)
    return out
