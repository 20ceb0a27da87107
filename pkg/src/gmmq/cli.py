"""Command-line experiment runner.

Subcommands:

* ``run <config.json>`` — policy-iteration experiments across seeds (and an
  optional sweep over the number of Gaussians); writes ``results.csv``,
  ``config_resolved.json``, and one model JSON per (k, seed).
* ``gradcheck`` — finite-difference validation of every gradient block.
* ``oracle`` — tabular contraction / fixed-point / sampling checks plus a
  reduced pendulum-agreement diagnostic.
* ``eval <model.json> --env <name>`` — capped evaluation episodes of a saved
  model.

The config is one JSON object whose keys mirror the run configuration in
snake_case; every omitted key is filled with a default and echoed back in
``config_resolved.json``.  ``GMMQ_OUT`` overrides ``output_dir``.
Exit codes: 0 success, 2 configuration error, 1 runtime failure (with any
partial results already flushed).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import envs, tabular
from .envs import EnvSpec
from .gradcheck import run_gradcheck
from .manifold import MetricKind
from .model import GmmQFunction, WeightLayout, q_eval
from .optim import ArmijoConfig
from .policy_iter import (
    EvalConfig,
    PiConfig,
    RolloutConfig,
    evaluate_steps_to_goal,
    moving_average,
    run_seeds,
)

CSV_COLUMNS = (
    "env",
    "k",
    "metric",
    "seed",
    "trial",
    "steps_to_goal",
    "steps_to_goal_ma10",
    "final_loss",
    "wall_time_ms",
)


class ConfigError(Exception):
    """Invalid experiment configuration; the message names the offending key."""


@dataclass(frozen=True)
class RunConfig:
    """Experiment-level configuration: a PiConfig plus orchestration fields."""

    pi: PiConfig
    n_seeds: int = 1
    output_dir: str = "out"
    emit_csv: bool = True
    emit_json: bool = False
    sweep: tuple = ()

    def __post_init__(self):
        if self.n_seeds < 1:
            raise ConfigError("n_seeds must be >= 1")
        if any(int(k) < 1 for k in self.sweep):
            raise ConfigError("sweep entries must be positive integers")

    @property
    def k_values(self) -> tuple:
        return tuple(int(k) for k in self.sweep) or (self.pi.k,)


_ROLLOUT_DEFAULTS = {
    "episodes": 20,
    "steps_per_episode": 70,
    "start_mode": "resting",
    "truncate_at_goal": False,
}
_EVAL_DEFAULTS = {"step_cap": 1000, "eval_episodes": 1}
_ARMIJO_DEFAULTS = {
    "alpha_bar": 1.0,
    "beta": 0.5,
    "sigma": 1e-4,
    "max_backtracks": 40,
    "j_steps": 50,
    "grad_tol": 1e-10,
}


def _section(raw: dict, key: str, defaults: dict) -> dict:
    body = raw.get(key, {})
    if not isinstance(body, dict):
        raise ConfigError(f"config key '{key}' must be an object")
    unknown = set(body) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown keys under '{key}': {sorted(unknown)}")
    return {**defaults, **body}


def parse_run_config(raw: dict) -> RunConfig:
    """Validate a parsed JSON document and fill every default."""
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    known = {
        "env", "env_overrides", "k", "layout", "metric", "discount", "rollout",
        "exploration_eps", "armijo", "trials", "eval", "seed", "n_seeds",
        "output_dir", "emit", "sweep",
    }
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    env_value = raw.get("env")
    if isinstance(env_value, dict):
        spec = EnvSpec.from_dict(env_value)
    elif isinstance(env_value, str):
        spec = envs.make_spec(env_value, **raw.get("env_overrides", {}))
    else:
        raise ConfigError("config key 'env' must be an environment name or an EnvSpec object")
    if "k" not in raw:
        raise ConfigError("config key 'k' (number of Gaussians) is required")
    layout_default = "per_action" if spec.name == envs.ACROBOT else "shared"
    try:
        layout = WeightLayout(raw.get("layout", layout_default))
        metric = MetricKind(raw.get("metric", "affi"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    try:
        pi = PiConfig(
            env=spec,
            k=int(raw["k"]),
            layout=layout,
            metric=metric,
            discount=float(raw.get("discount", 0.97)),
            rollout=RolloutConfig(**_section(raw, "rollout", _ROLLOUT_DEFAULTS)),
            exploration_eps=float(raw.get("exploration_eps", 0.4)),
            armijo=ArmijoConfig(**_section(raw, "armijo", _ARMIJO_DEFAULTS)),
            trials=int(raw.get("trials", 150)),
            eval=EvalConfig(**_section(raw, "eval", _EVAL_DEFAULTS)),
            seed=int(raw.get("seed", 0)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    emit = _section(raw, "emit", {"csv": True, "json": False})
    output_dir = os.environ.get("GMMQ_OUT", raw.get("output_dir", "out"))
    return RunConfig(
        pi=pi,
        n_seeds=int(raw.get("n_seeds", 1)),
        output_dir=output_dir,
        emit_csv=bool(emit["csv"]),
        emit_json=bool(emit["json"]),
        sweep=tuple(raw.get("sweep") or ()),
    )


def resolved_config_dict(cfg: RunConfig) -> dict:
    """The fully-resolved configuration, defaults included."""
    pi = cfg.pi
    return {
        "env": pi.env.to_dict(),
        "k": pi.k,
        "layout": pi.layout.value,
        "metric": pi.metric.value,
        "discount": pi.discount,
        "rollout": {
            "episodes": pi.rollout.episodes,
            "steps_per_episode": pi.rollout.steps_per_episode,
            "start_mode": pi.rollout.start_mode,
            "truncate_at_goal": pi.rollout.truncate_at_goal,
        },
        "exploration_eps": pi.exploration_eps,
        "armijo": {
            "alpha_bar": pi.armijo.alpha_bar,
            "beta": pi.armijo.beta,
            "sigma": pi.armijo.sigma,
            "max_backtracks": pi.armijo.max_backtracks,
            "j_steps": pi.armijo.j_steps,
            "grad_tol": pi.armijo.grad_tol,
        },
        "trials": pi.trials,
        "eval": {"step_cap": pi.eval.step_cap, "eval_episodes": pi.eval.eval_episodes},
        "seed": pi.seed,
        "n_seeds": cfg.n_seeds,
        "output_dir": cfg.output_dir,
        "emit": {"csv": cfg.emit_csv, "json": cfg.emit_json},
        "sweep": list(cfg.sweep),
    }


# ---------------------------------------------------------------------------
# Model serialization (lossless: json floats round-trip via repr).
# ---------------------------------------------------------------------------


def model_to_dict(model: GmmQFunction) -> dict:
    doc = {
        "layout": model.layout.value,
        "k": model.k,
        "dim": model.dim,
        "weights": model.weights.tolist(),
        "means": model.means.tolist(),
        "covs": model.covs.tolist(),
    }
    if model.layout is WeightLayout.PER_ACTION:
        doc["n_actions"] = model.n_actions
    return doc


def model_from_dict(doc: dict) -> GmmQFunction:
    layout = WeightLayout(doc["layout"])
    weights = np.asarray(doc["weights"], dtype=float)
    if layout is WeightLayout.PER_ACTION and weights.ndim != 2:
        raise ValueError("per-action model file must carry a 2-D weight table")
    return GmmQFunction(
        weights=weights,
        means=np.asarray(doc["means"], dtype=float),
        covs=np.asarray(doc["covs"], dtype=float),
    )


def save_model(model: GmmQFunction, path: Path):
    path.write_text(json.dumps(model_to_dict(model)))


def load_model(path: Path) -> GmmQFunction:
    return model_from_dict(json.loads(path.read_text()))


# ---------------------------------------------------------------------------
# Subcommands.
# ---------------------------------------------------------------------------


def cmd_run(args) -> int:
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        print(f"config error: {args.config}:{exc.lineno}:{exc.colno}: {exc.msg}", file=sys.stderr)
        return 2
    try:
        cfg = parse_run_config(raw)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config_resolved.json").write_text(json.dumps(resolved_config_dict(cfg), indent=2))
    seeds = [cfg.pi.seed + i for i in range(cfg.n_seeds)]
    json_rows = []
    csv_file = None
    try:
        writer = None
        if cfg.emit_csv:
            csv_file = (out_dir / "results.csv").open("w", newline="")
            writer = csv.writer(csv_file)
            writer.writerow(CSV_COLUMNS)
            csv_file.flush()
        for k in cfg.k_values:
            pi = replace(cfg.pi, k=k)
            for seed, (model, logs) in zip(seeds, run_seeds(pi, seeds, max_workers=args.workers)):
                ma = moving_average([log.steps_to_goal for log in logs], 10)
                save_model(model, out_dir / f"model_k{k}_seed{seed}.json")
                for log, smoothed in zip(logs, ma):
                    row = {
                        "env": pi.env.name,
                        "k": k,
                        "metric": pi.metric.value,
                        "seed": seed,
                        "trial": log.trial,
                        "steps_to_goal": log.steps_to_goal,
                        "steps_to_goal_ma10": smoothed,
                        "final_loss": log.final_loss,
                        "wall_time_ms": log.wall_time_ms,
                    }
                    if writer is not None:
                        writer.writerow([row[col] for col in CSV_COLUMNS])
                        csv_file.flush()
                    json_rows.append(row)
        if cfg.emit_json:
            (out_dir / "results.json").write_text(json.dumps(json_rows))
    except Exception as exc:  # partial CSV is already flushed
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 1
    finally:
        if csv_file is not None:
            csv_file.close()
    print(f"wrote {len(json_rows)} result rows to {out_dir}")
    return 0


def cmd_gradcheck(args) -> int:
    started = time.perf_counter()
    report = run_gradcheck(seed=args.seed, trials=args.trials, corrupt_sign=args.corrupt_sign)
    for line in report.lines():
        print(line)
    elapsed = time.perf_counter() - started
    verdict = "PASS" if report.passed else "FAIL"
    print(f"gradcheck {verdict}: worst cell {report.max_error:.3e} over "
          f"{report.trials} trials/cell in {elapsed:.1f}s")
    return 0 if report.passed else 1


def cmd_oracle(args) -> int:
    rng = np.random.default_rng(args.seed)
    summary = {}
    ok = True

    # Contraction of both Bellman operators on random MDPs.
    worst = -np.inf
    for _ in range(100):
        mdp = _random_mdp(rng)
        q1 = rng.normal(size=(mdp.n_states, mdp.n_actions))
        q2 = rng.normal(size=(mdp.n_states, mdp.n_actions))
        policy = rng.integers(mdp.n_actions, size=mdp.n_states)
        for pol in (None, policy):
            ratio = tabular.contraction_check(mdp, q1, q2, pol)
            worst = max(worst, ratio - mdp.discount)
    summary["contraction_excess_max"] = float(worst)
    ok &= worst <= 1e-12

    # Geometric decay of the fixed-point iteration error.
    mdp = _random_mdp(rng)
    qstar = tabular.fixed_point(mdp)
    q = rng.normal(size=qstar.shape)
    initial_gap = np.max(np.abs(q - qstar))
    decay_ok = True
    for i in range(1, 21):
        q = tabular.bellman_apply(mdp, q)
        if i in (5, 10, 20):
            bound = mdp.discount**i * initial_gap + 1e-9
            decay_ok &= bool(np.max(np.abs(q - qstar)) <= bound)
    summary["banach_picard_decay_ok"] = bool(decay_ok)
    ok &= decay_ok

    # Monte-Carlo loss converging to the exact ensemble value.
    mdp3 = three_state_mdp()
    q = np.array([[0.5, 2.0], [1.5, 0.3], [0.2, 1.1]])
    policy = np.array([0, 1, 0])
    dist = np.array([0.5, 0.3, 0.2])
    exact = tabular.ensemble_br_loss(mdp3, q, policy, dist)
    errors = []
    for n in (10**3, 10**4, 10**5):
        est = tabular.empirical_br_loss(mdp3, q, policy, dist, n, np.random.default_rng(args.seed + n))
        errors.append(abs(est - exact))
    summary["slln_errors"] = [float(e) for e in errors]
    slln_ok = errors[0] > errors[1] > errors[2]
    summary["slln_monotone"] = bool(slln_ok)
    ok &= slln_ok

    # Reduced pendulum agreement diagnostic (full version lives in acceptance).
    if args.pi_trials > 0:
        from .policy_iter import run_with_model

        spec = envs.pendulum_spec()
        pi = PiConfig(env=spec, k=5, trials=args.pi_trials, seed=args.seed)
        model, _ = run_with_model(pi)
        grid = tabular.discretize(spec, args.grid, pi.discount)
        qstar = tabular.fixed_point(grid)
        agreement, gap = tabular.compare_policies(
            grid, qstar, lambda s, a: q_eval(model, envs.zeta(spec, s, a))
        )
        summary["pendulum_agreement"] = float(agreement)
        summary["pendulum_value_gap"] = float(gap)

    summary["ok"] = bool(ok)
    print(json.dumps(summary))
    return 0 if ok else 1


def _random_mdp(rng: np.random.Generator) -> tabular.FiniteMdp:
    n_states = int(rng.integers(2, 7))
    n_actions = int(rng.integers(2, 5))
    raw = rng.random((n_states, n_actions, n_states)) + 1e-3
    transitions = raw / raw.sum(axis=2, keepdims=True)
    losses = rng.normal(size=(n_states, n_actions))
    discount = float(rng.uniform(0.05, 0.95))
    return tabular.FiniteMdp(transitions, losses, discount)


def three_state_mdp() -> tabular.FiniteMdp:
    """The fixed stochastic 3-state MDP used by the sampling-convergence check."""
    transitions = np.array(
        [
            [[0.7, 0.2, 0.1], [0.1, 0.6, 0.3]],
            [[0.3, 0.3, 0.4], [0.25, 0.5, 0.25]],
            [[0.2, 0.1, 0.7], [0.4, 0.4, 0.2]],
        ]
    )
    losses = np.array([[1.0, 0.2], [0.5, 1.5], [0.0, 0.8]])
    return tabular.FiniteMdp(transitions, losses, discount=0.8)


def cmd_eval(args) -> int:
    try:
        model = load_model(Path(args.model))
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"config error: cannot load model: {exc}", file=sys.stderr)
        return 2
    spec = envs.make_spec(args.env)
    eval_cfg = EvalConfig(step_cap=args.step_cap, eval_episodes=1)
    rng = np.random.default_rng(args.seed)
    for episode in range(args.episodes):
        steps = evaluate_steps_to_goal(spec, model, eval_cfg, rng)
        print(f"episode {episode + 1}: {int(steps)} steps")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gmmq", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run policy-iteration experiments from a JSON config")
    p_run.add_argument("config", help="path to the experiment config (JSON)")
    p_run.add_argument("--workers", type=int, default=None, help="process-pool size for seeds")
    p_run.set_defaults(fn=cmd_run)

    p_grad = sub.add_parser("gradcheck", help="finite-difference gradient validation")
    p_grad.add_argument("--seed", type=int, default=0)
    p_grad.add_argument("--trials", type=int, default=50, help="random instances per cell")
    p_grad.add_argument("--corrupt-sign", action="store_true",
                        help="negative control: flip the weight gradient and expect failure")
    p_grad.set_defaults(fn=cmd_gradcheck)

    p_oracle = sub.add_parser("oracle", help="tabular Bellman-operator checks")
    p_oracle.add_argument("--seed", type=int, default=0)
    p_oracle.add_argument("--pi-trials", type=int, default=40,
                          help="policy-iteration trials for the agreement diagnostic (0 skips it)")
    p_oracle.add_argument("--grid", type=int, default=11)
    p_oracle.set_defaults(fn=cmd_oracle)

    p_eval = sub.add_parser("eval", help="evaluate a saved model")
    p_eval.add_argument("model", help="path to a model JSON file")
    p_eval.add_argument("--env", required=True, choices=[envs.PENDULUM, envs.MOUNTAIN_CAR, envs.ACROBOT])
    p_eval.add_argument("--episodes", type=int, default=1)
    p_eval.add_argument("--step-cap", type=int, default=1000)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.set_defaults(fn=cmd_eval)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
