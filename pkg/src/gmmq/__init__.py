"""Gaussian-mixture Q-functions trained by Riemannian descent, with policy
iteration, classic-control benchmarks, and a tabular ground-truth oracle."""

from .envs import EnvSpec, acrobot_spec, make_spec, mountain_car_spec, pendulum_spec
from .manifold import (
    MetricKind,
    ProductTangent,
    SpdMatrix,
    lyapunov_solve,
    product_inner,
    product_norm,
    retract,
    spd_exp,
    spd_inner,
    zero_tangent_like,
)
from .model import (
    GmmQFunction,
    TransitionBatch,
    WeightLayout,
    bound_objective,
    br_loss,
    build_workspace,
    full_gradient,
    gauss_eval,
    grad_covs,
    grad_means,
    grad_weights,
    q_eval,
)
from .optim import ArmijoConfig, DescentTrace, StopReason, armijo_search, descend
from .policy_iter import (
    EvalConfig,
    GreedyPolicy,
    PiConfig,
    RolloutConfig,
    TrialLog,
    collect_dataset,
    evaluate_steps_to_goal,
    greedy_action,
    init_model,
    moving_average,
    param_count,
    policy_evaluate,
    run,
    run_seeds,
    run_with_model,
)
from .tabular import (
    FiniteMdp,
    bellman_apply,
    compare_policies,
    contraction_check,
    discretize,
    empirical_br_loss,
    ensemble_br_loss,
    fixed_point,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
