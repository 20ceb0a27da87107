"""Riemannian steepest descent with Armijo backtracking line search.

The solver is generic: it sees a point, a loss oracle, a gradient oracle, and
two geometry callbacks (retraction and metric inner product).  Defaults wire
the callbacks to the product-manifold geometry so Q-function models work out
of the box, while tests can drive it on plain Euclidean toys.

Tried step sizes are exactly alpha_bar * beta, alpha_bar * beta^2, ... — the
backtracking exponent starts at 1, so the raw alpha_bar itself is never tried.
An accepted step satisfies
``loss(point) - loss(new) >= sigma * step * ||grad||^2``
in the metric at the current point.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import manifold
from .manifold import MetricKind, ProductTangent


@dataclass(frozen=True)
class ArmijoConfig:
    """Line-search and iteration-budget parameters.

    Paper-free defaults: textbook backtracking constants, a finite iteration
    budget (early stopping), and a cap on the line-search depth.
    """

    alpha_bar: float = 1.0
    beta: float = 0.5
    sigma: float = 1e-4
    max_backtracks: int = 40
    j_steps: int = 50
    grad_tol: float = 1e-10

    def __post_init__(self):
        if self.alpha_bar <= 0:
            raise ValueError("alpha_bar must be positive")
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        if not 0 < self.sigma < 1:
            raise ValueError("sigma must lie in (0, 1)")
        if self.max_backtracks < 1 or self.j_steps < 0:
            raise ValueError("max_backtracks must be >= 1 and j_steps >= 0")


class StopReason(enum.Enum):
    BUDGET_EXHAUSTED = "budget_exhausted"
    GRADIENT_BELOW_TOL = "gradient_below_tol"
    BACKTRACK_FAILED = "backtrack_failed"


@dataclass
class DescentTrace:
    """Per-iteration record of a descent run.

    ``losses[j]`` is the loss after accepting step j; ``initial_loss`` precedes
    it, so the concatenated sequence is non-increasing.  ``grad_norms`` are
    metric norms at the pre-step iterate.
    """

    initial_loss: float
    losses: list = field(default_factory=list)
    grad_norms: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    backtracks: list = field(default_factory=list)
    stop: StopReason = StopReason.BUDGET_EXHAUSTED

    @property
    def loss_sequence(self) -> np.ndarray:
        return np.asarray([self.initial_loss, *self.losses])

    @property
    def final_grad_norm(self) -> float:
        return self.grad_norms[-1] if self.grad_norms else float("nan")


def _default_retract(point, tangent, step, metric):
    return manifold.retract(point, tangent, step, metric)


def _default_inner(point, t1, t2, metric):
    return manifold.product_inner(point, t1, t2, metric)


def armijo_search(
    point,
    loss_at_point: float,
    grad,
    loss_fn,
    cfg: ArmijoConfig,
    metric: MetricKind = MetricKind.AFFINE_INVARIANT,
    retract_fn=_default_retract,
    inner_fn=_default_inner,
):
    """Find the smallest backtracking exponent satisfying the Armijo test.

    The search direction is -grad.  Returns ``(step, new_point, new_loss,
    backtracks)`` or None after ``max_backtracks`` failed trials (a bad
    gradient or an oversized alpha_bar; the caller terminates its loop).
    """
    grad_sq = inner_fn(point, grad, grad, metric)
    direction = -grad if isinstance(grad, ProductTangent) else -np.asarray(grad)
    for exponent in range(1, cfg.max_backtracks + 1):
        step = cfg.alpha_bar * cfg.beta**exponent
        candidate = retract_fn(point, direction, step, metric)
        candidate_loss = loss_fn(candidate)
        if loss_at_point - candidate_loss >= cfg.sigma * step * grad_sq:
            return step, candidate, candidate_loss, exponent
    return None


def descend(
    point,
    loss_fn,
    grad_fn,
    cfg: ArmijoConfig,
    metric: MetricKind = MetricKind.AFFINE_INVARIANT,
    retract_fn=_default_retract,
    inner_fn=_default_inner,
):
    """Run up to ``cfg.j_steps`` Armijo-accepted descent steps.

    Stops early when the gradient norm drops below ``cfg.grad_tol`` or the
    line search fails; in the failure case the best (lowest-loss) iterate seen
    is returned, which with monotone accepted steps is the current one.
    Returns ``(final_point, DescentTrace)``.
    """
    current = point
    current_loss = loss_fn(point)
    trace = DescentTrace(initial_loss=current_loss)
    for _ in range(cfg.j_steps):
        grad = grad_fn(current)
        grad_norm = float(np.sqrt(max(inner_fn(current, grad, grad, metric), 0.0)))
        if grad_norm < cfg.grad_tol:
            trace.stop = StopReason.GRADIENT_BELOW_TOL
            return current, trace
        result = armijo_search(
            current, current_loss, grad, loss_fn, cfg, metric, retract_fn, inner_fn
        )
        if result is None:
            trace.stop = StopReason.BACKTRACK_FAILED
            return current, trace
        step, current, current_loss, backtracks = result
        trace.losses.append(current_loss)
        trace.grad_norms.append(grad_norm)
        trace.steps.append(step)
        trace.backtracks.append(backtracks)
    trace.stop = StopReason.BUDGET_EXHAUSTED
    return current, trace
