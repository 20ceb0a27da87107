"""Shared test fixtures: constructed problem instances and small oracles."""

import numpy as np

from gmmq.manifold import ProductTangent
from gmmq.model import (
    GmmQFunction,
    TransitionBatch,
    br_loss,
    build_workspace,
    gauss_matrix,
    grad_weights,
)


def weights_only_instance(rng, k=2, d=2, t=40, discount=0.5):
    """A convex weights-only fitting problem with a well-conditioned Hessian.

    Data points cluster around the two separated means, so the two Gaussian
    feature columns stay near-orthogonal with comparable norms.  Returns
    (model, batch, discount, least-squares solution, Hessian).
    """
    means = np.array([[-2.0, 0.0], [2.0, 0.5]]) + 0.1 * rng.normal(size=(k, d))
    covs = np.stack([np.eye(d)] * k)
    model = GmmQFunction(weights=np.zeros(k), means=means, covs=covs)
    half = t // 2
    anchors = np.repeat(means, (half, t - half), axis=0)
    z = anchors + 0.6 * rng.normal(size=(t, d))
    z_next = anchors + 0.6 * rng.normal(size=(t, d))
    batch = TransitionBatch(z=z, g=rng.normal(size=t), z_next=z_next)
    g_cur = gauss_matrix(batch.z, model.means, model.cov_invs)
    g_next = gauss_matrix(batch.z_next, model.means, model.cov_invs)
    delta = discount * g_next - g_cur
    target, *_ = np.linalg.lstsq(delta, -batch.g, rcond=None)
    hessian = (2.0 / t) * delta.T @ delta
    return model, batch, discount, target, hessian


def weights_only_objective(batch, discount):
    """Loss plus a gradient restricted to the weight block (means/covs frozen)."""

    def loss_fn(model):
        return br_loss(model, batch, discount)

    def grad_fn(model):
        ws = build_workspace(model, batch, discount)
        return ProductTangent(
            grad_weights(ws, model), np.zeros_like(model.means), np.zeros_like(model.covs)
        )

    return loss_fn, grad_fn


def smooth_target_batch(seed=0, grid_points=12, span=2.0):
    """Supervised fit disguised as a zero-discount residual problem.

    With discount 0 the residual is g_t - Q(z_t), so minimizing the loss fits
    Q to the fixed smooth target sin(w . z) on a compact grid.
    """
    axis = np.linspace(-span, span, grid_points)
    grid = np.stack(np.meshgrid(axis, axis), -1).reshape(-1, 2)
    direction = np.array([1.3, -0.7])
    values = np.sin(grid @ direction)
    return TransitionBatch(z=grid, g=values, z_next=grid)
