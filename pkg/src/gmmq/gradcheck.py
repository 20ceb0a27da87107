"""Finite-difference validation of the analytic gradients.

Weight and mean blocks are checked coordinate-wise with central differences
of the loss.  Covariance blocks are checked through the directional-derivative
identity: for a random symmetric direction G at C_k, the derivative of
loss(retract(model, G, t)) at t = 0 must equal the Riemannian inner product
of the gradient with G — per component, under both metrics, in both weight
layouts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .manifold import MetricKind, ProductTangent, retract, spd_inner_batch, sym
from .model import (
    GmmQFunction,
    TransitionBatch,
    WeightLayout,
    br_loss,
    build_workspace,
    grad_covs,
    grad_means,
    grad_weights,
)

FD_EPS = 1e-5
REL_TOL = 1e-6
BLOCKS = ("weights", "means", "covs")


def random_instance(rng: np.random.Generator, layout: WeightLayout):
    """A small random (model, batch, discount) triple with O(1) gradient scale."""
    k = int(rng.integers(1, 4))
    d = int(rng.integers(2, 4))
    t = int(rng.integers(4, 11))
    n_actions = int(rng.integers(2, 4))
    means = rng.normal(size=(k, d))
    covs = np.empty((k, d, d))
    for i in range(k):
        a = rng.normal(size=(d, d))
        covs[i] = a @ a.T + (0.5 + rng.random()) * np.eye(d)
    if layout is WeightLayout.SHARED:
        weights = rng.normal(size=k)
        batch = TransitionBatch(
            z=rng.normal(size=(t, d)), g=rng.normal(size=t), z_next=rng.normal(size=(t, d))
        )
    else:
        weights = rng.normal(size=(n_actions, k))
        batch = TransitionBatch(
            z=rng.normal(size=(t, d)),
            g=rng.normal(size=t),
            z_next=rng.normal(size=(t, d)),
            actions=rng.integers(n_actions, size=t),
            next_actions=rng.integers(n_actions, size=t),
        )
    model = GmmQFunction(weights=weights, means=means, covs=covs)
    discount = float(rng.uniform(0.0, 0.95))
    return model, batch, discount


def _rel_err(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-10)


def check_euclidean_block(model, batch, discount, block: str, sign: float = 1.0) -> float:
    """Blockwise relative error of a central-difference check.

    The whole gradient block is compared as a vector,
    ||fd - analytic|| / max(||analytic||, ||fd||), which stays well posed even
    when individual coordinates cross zero.  ``sign`` multiplies the analytic
    gradient; -1 is the deliberate-corruption negative control.
    """
    ws = build_workspace(model, batch, discount)
    if block == "weights":
        analytic = grad_weights(ws, model)
        base = model.weights
        rebuild = lambda arr: model.with_params(weights=arr)
    else:
        analytic = grad_means(ws, model)
        base = model.means
        rebuild = lambda arr: model.with_params(means=arr)
    flat = base.ravel()
    fd = np.empty(flat.size)
    for i in range(flat.size):
        bumped = flat.copy()
        bumped[i] += FD_EPS
        hi = br_loss(rebuild(bumped.reshape(base.shape)), batch, discount)
        bumped[i] -= 2 * FD_EPS
        lo = br_loss(rebuild(bumped.reshape(base.shape)), batch, discount)
        fd[i] = (hi - lo) / (2 * FD_EPS)
    analytic_flat = sign * analytic.ravel()
    gap = float(np.linalg.norm(fd - analytic_flat))
    return gap / max(np.linalg.norm(analytic_flat), np.linalg.norm(fd), 1e-10)


def check_cov_block(
    model, batch, discount, metric: MetricKind, rng: np.random.Generator, directions: int = 3
) -> float:
    """Max relative error of the directional-derivative identity for covariances."""
    ws = build_workspace(model, batch, discount)
    analytic = grad_covs(ws, model, metric)
    worst = 0.0
    for _ in range(directions):
        gammas = sym(rng.normal(size=model.covs.shape))
        tangent = ProductTangent(
            np.zeros_like(model.weights), np.zeros_like(model.means), gammas
        )
        predicted = float(np.sum(spd_inner_batch(model.covs, analytic, gammas, metric)))
        hi = br_loss(retract(model, tangent, FD_EPS, metric), batch, discount)
        lo = br_loss(retract(model, tangent.scaled(-1.0), FD_EPS, metric), batch, discount)
        fd = (hi - lo) / (2 * FD_EPS)
        worst = max(worst, _rel_err(predicted, fd))
    return worst


@dataclass
class GradReport:
    """Worst relative FD error per (metric, layout, block) cell."""

    cells: dict
    trials: int

    @property
    def max_error(self) -> float:
        return max(self.cells.values())

    @property
    def passed(self) -> bool:
        return self.max_error < REL_TOL

    def lines(self):
        for (metric, layout, block), err in sorted(self.cells.items()):
            status = "ok" if err < REL_TOL else "FAIL"
            yield f"{metric:4s} {layout:10s} {block:7s} max rel err {err:.3e} [{status}]"


def run_gradcheck(seed: int = 0, trials: int = 50, corrupt_sign: bool = False) -> GradReport:
    """Cross-check all gradient blocks against finite differences.

    ``corrupt_sign`` deliberately flips the weight-block gradient before
    comparing — a negative control proving the harness can fail.
    """
    rng = np.random.default_rng(seed)
    weight_sign = -1.0 if corrupt_sign else 1.0
    cells = {}
    for metric in MetricKind:
        for layout in WeightLayout:
            worst = dict.fromkeys(BLOCKS, 0.0)
            for _ in range(trials):
                model, batch, discount = random_instance(rng, layout)
                worst["weights"] = max(
                    worst["weights"],
                    check_euclidean_block(model, batch, discount, "weights", weight_sign),
                )
                worst["means"] = max(worst["means"], check_euclidean_block(model, batch, discount, "means"))
                worst["covs"] = max(worst["covs"], check_cov_block(model, batch, discount, metric, rng))
            for block in BLOCKS:
                cells[(metric.value, layout.value, block)] = worst[block]
    return GradReport(cells=cells, trials=trials)
