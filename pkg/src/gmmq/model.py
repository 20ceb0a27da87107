"""Gaussian-mixture Q-function model, Bellman-residual loss, and its gradients.

The model is Q(z) = sum_k w_k * exp(-(z - m_k)^T C_k^{-1} (z - m_k)) with
unconstrained real weights, learnable means, and SPD covariances.  Two weight
layouts exist:

* shared  — one weight per Gaussian; inputs are state-action embeddings z.
* per_action — one weight row per discrete action; the Gaussians consume raw
  states and the weight row is selected by the action index.

Training minimizes the empirical Bellman residual
``(1/T) sum_t (g_t + discount * Q(z'_t) - Q(z_t))^2``.  The gradient formulas
(weights: least-squares normal form; means: 4 w_k C_k^{-1} dbar_k;
covariances: 2 w_k Bbar_k under the affine-invariant metric and
4 w_k (C_k^{-1} Bbar_k + Bbar_k C_k^{-1}) under Bures-Wasserstein) are
implemented in a vectorized form; the per-action layout moves the sample
weight inside the per-sample aggregates and drops the outer w_k factor.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .manifold import MetricKind, ProductTangent, SPD_REL_TOL, SpdMatrix, sym


class WeightLayout(enum.Enum):
    SHARED = "shared"
    PER_ACTION = "per_action"


@dataclass(frozen=True)
class GmmQFunction:
    """Parameter tuple of a Gaussian-mixture Q-function.

    ``weights`` has shape (K,) in the shared layout or (n_actions, K) in the
    per-action layout; ``means`` is (K, d); ``covs`` is (K, d, d) with every
    slice SPD.  Instances are immutable; ``cov_invs`` is validated and cached
    at construction because every loss/gradient evaluation needs it.
    """

    weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray
    cov_repaired: bool = field(default=False, compare=False)
    cov_invs: np.ndarray = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float)
        means = np.asarray(self.means, dtype=float)
        covs = np.asarray(self.covs, dtype=float)
        if weights.ndim not in (1, 2):
            raise ValueError("weights must be (K,) or (n_actions, K)")
        if means.ndim != 2:
            raise ValueError("means must be (K, d)")
        k, d = means.shape
        if weights.shape[-1] != k or covs.shape != (k, d, d):
            raise ValueError(
                f"inconsistent shapes: weights {weights.shape}, means {means.shape}, covs {covs.shape}"
            )
        if not (np.all(np.isfinite(weights)) and np.all(np.isfinite(means)) and np.all(np.isfinite(covs))):
            raise ValueError("model parameters must be finite")
        covs = sym(covs)
        w, u = np.linalg.eigh(covs)
        if np.any(w[:, 0] <= SPD_REL_TOL * np.maximum(w[:, -1], 0.0)):
            raise ValueError("every covariance must be positive definite")
        inv = (u * (1.0 / w)[:, None, :]) @ u.swapaxes(-1, -2)
        for arr in (weights, means, covs):
            arr.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "covs", covs)
        object.__setattr__(self, "cov_invs", sym(inv))

    @property
    def layout(self) -> WeightLayout:
        return WeightLayout.SHARED if self.weights.ndim == 1 else WeightLayout.PER_ACTION

    @property
    def k(self) -> int:
        return self.means.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def n_actions(self) -> int:
        if self.layout is not WeightLayout.PER_ACTION:
            raise ValueError("shared-weight model has no action axis")
        return self.weights.shape[0]

    def with_params(self, weights=None, means=None, covs=None, cov_repaired=False) -> "GmmQFunction":
        return GmmQFunction(
            weights=self.weights if weights is None else weights,
            means=self.means if means is None else means,
            covs=self.covs if covs is None else covs,
            cov_repaired=cov_repaired,
        )

    def param_count(self) -> int:
        d = self.dim
        per_cov = d * (d + 1) // 2
        return self.weights.size + self.k * d + self.k * per_cov


@dataclass(frozen=True)
class TransitionBatch:
    """On-policy dataset of (z_t, g_t, z'_t) rows.

    In the shared layout ``z``/``z_next`` hold state-action embeddings and the
    action columns are None.  In the per-action layout they hold raw states and
    ``actions``/``next_actions`` hold the chosen and bootstrap action indices.
    """

    z: np.ndarray
    g: np.ndarray
    z_next: np.ndarray
    actions: np.ndarray | None = None
    next_actions: np.ndarray | None = None

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        g = np.asarray(self.g, dtype=float)
        z_next = np.asarray(self.z_next, dtype=float)
        if z.ndim != 2 or z.shape[0] < 1:
            raise ValueError("batch must contain at least one row")
        if z_next.shape != z.shape or g.shape != (z.shape[0],):
            raise ValueError("batch field shapes are inconsistent")
        if not (np.all(np.isfinite(z)) and np.all(np.isfinite(g)) and np.all(np.isfinite(z_next))):
            raise ValueError("batch entries must be finite")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "z_next", z_next)
        if self.actions is not None:
            acts = np.asarray(self.actions, dtype=int)
            nexts = np.asarray(self.next_actions, dtype=int)
            if acts.shape != (z.shape[0],) or nexts.shape != (z.shape[0],):
                raise ValueError("action index arrays must be (T,)")
            if acts.min() < 0 or nexts.min() < 0:
                raise ValueError("action indices must be nonnegative")
            object.__setattr__(self, "actions", acts)
            object.__setattr__(self, "next_actions", nexts)

    @property
    def size(self) -> int:
        return self.z.shape[0]


# ---------------------------------------------------------------------------
# Gaussian kernel evaluation.
# ---------------------------------------------------------------------------


def gauss_eval(z: np.ndarray, m: np.ndarray, c: SpdMatrix | np.ndarray) -> float:
    """Unnormalized Gaussian exp(-(z-m)^T C^{-1} (z-m)); no 1/2, no constant."""
    cm = c.entries if isinstance(c, SpdMatrix) else np.asarray(c, dtype=float)
    diff = np.asarray(z, dtype=float) - np.asarray(m, dtype=float)
    if diff.shape[0] != cm.shape[0]:
        raise ValueError("dimension mismatch between input and kernel")
    return float(np.exp(-diff @ np.linalg.solve(cm, diff)))


def gauss_matrix(points: np.ndarray, means: np.ndarray, cov_invs: np.ndarray) -> np.ndarray:
    """All-pairs kernel values, shape (N, K).

    Uses the expansion (z-m)^T A (z-m) = z^T A z - 2 z^T A m + m^T A m so the
    heavy work is two batched matrix products.
    """
    za = np.matmul(points[None, :, :], cov_invs)          # (K, N, d)
    zaz = np.einsum("ktd,td->tk", za, points)
    am = np.einsum("kde,ke->kd", cov_invs, means)         # (K, d)
    zam = points @ am.T                                    # (N, K)
    mam = np.einsum("kd,kd->k", am, means)
    quad = zaz - 2.0 * zam + mam[None, :]
    return np.exp(-np.maximum(quad, 0.0))


def q_eval(model: GmmQFunction, x: np.ndarray, action: int | None = None) -> float:
    """Q value at one input.

    Shared layout: ``x`` is the state-action embedding z and ``action`` must be
    omitted.  Per-action layout: ``x`` is the raw state and ``action`` selects
    the weight row.
    """
    g = gauss_matrix(np.asarray(x, dtype=float)[None, :], model.means, model.cov_invs)[0]
    if model.layout is WeightLayout.SHARED:
        if action is not None:
            raise ValueError("shared-weight model takes the embedded input, not an action")
        return float(model.weights @ g)
    if action is None or not 0 <= int(action) < model.n_actions:
        raise ValueError(f"invalid action index {action!r}")
    return float(model.weights[int(action)] @ g)


def q_values(model: GmmQFunction, points: np.ndarray, actions: np.ndarray | None = None) -> np.ndarray:
    """Batched Q values; see :func:`q_eval` for the layout conventions."""
    g = gauss_matrix(points, model.means, model.cov_invs)
    if model.layout is WeightLayout.SHARED:
        return g @ model.weights
    if actions is None:
        raise ValueError("per-action model needs action indices")
    if actions.max() >= model.n_actions:
        raise ValueError("action index out of range")
    return np.einsum("tk,tk->t", model.weights[actions], g)


# ---------------------------------------------------------------------------
# Loss and gradients.
# ---------------------------------------------------------------------------


def br_loss(model: GmmQFunction, batch: TransitionBatch, discount: float) -> float:
    """Empirical Bellman-residual loss (mean squared residual)."""
    _check_discount(discount)
    q_cur = q_values(model, batch.z, batch.actions)
    q_next = q_values(model, batch.z_next, batch.next_actions)
    residual = batch.g + discount * q_next - q_cur
    return float(residual @ residual) / batch.size


def _check_discount(discount: float):
    if not 0.0 <= discount < 1.0:
        raise ValueError(f"discount must lie in [0, 1), got {discount}")


@dataclass(frozen=True)
class GradWorkspace:
    """Shared intermediates of the three gradient blocks.

    ``delta`` is the per-sample residual; ``gauss``/``gauss_next`` are the
    (T, K) kernel matrices at z and z'; ``dbar``/``bbar`` are the residual-
    weighted first/second moment aggregates (with the per-sample weight moved
    inside for the per-action layout).  ``d_tk()``/``b_tk()`` materialize the
    per-sample terms for small-scale verification.
    """

    batch: TransitionBatch
    discount: float
    layout: WeightLayout
    delta: np.ndarray
    gauss: np.ndarray
    gauss_next: np.ndarray
    dbar: np.ndarray
    bbar: np.ndarray

    def _sample_weights(self, model: GmmQFunction) -> tuple[np.ndarray, np.ndarray]:
        """Per-sample kernel coefficients entering d_tk / B_tk."""
        if self.layout is WeightLayout.SHARED:
            return self.gauss, self.gauss_next
        w_cur = model.weights[self.batch.actions] * self.gauss
        w_next = model.weights[self.batch.next_actions] * self.gauss_next
        return w_cur, w_next

    def d_tk(self, model: GmmQFunction) -> np.ndarray:
        w_cur, w_next = self._sample_weights(model)
        diff_cur = self.batch.z[:, None, :] - model.means[None, :, :]
        diff_next = self.batch.z_next[:, None, :] - model.means[None, :, :]
        return self.discount * w_next[:, :, None] * diff_next - w_cur[:, :, None] * diff_cur

    def b_tk(self, model: GmmQFunction) -> np.ndarray:
        w_cur, w_next = self._sample_weights(model)
        diff_cur = self.batch.z[:, None, :] - model.means[None, :, :]
        diff_next = self.batch.z_next[:, None, :] - model.means[None, :, :]
        outer_cur = diff_cur[:, :, :, None] * diff_cur[:, :, None, :]
        outer_next = diff_next[:, :, :, None] * diff_next[:, :, None, :]
        return self.discount * w_next[:, :, None, None] * outer_next - w_cur[:, :, None, None] * outer_cur


def _weighted_moments(coeff: np.ndarray, points: np.ndarray, means: np.ndarray):
    """sum_t coeff_tk (z_t - m_k) and sum_t coeff_tk (z_t - m_k)(z_t - m_k)^T.

    Expanded around the means so the work is plain matrix products:
    first moment  S1_k - s0_k m_k, second moment
    S2_k - S1_k m_k^T - m_k S1_k^T + s0_k m_k m_k^T.
    """
    s0 = coeff.sum(axis=0)                                   # (K,)
    s1 = coeff.T @ points                                    # (K, d)
    t = points.shape[0]
    d = points.shape[1]
    outer_flat = (points[:, :, None] * points[:, None, :]).reshape(t, d * d)
    s2 = (coeff.T @ outer_flat).reshape(-1, d, d)            # (K, d, d)
    first = s1 - s0[:, None] * means
    second = (
        s2
        - s1[:, :, None] * means[:, None, :]
        - means[:, :, None] * s1[:, None, :]
        + s0[:, None, None] * (means[:, :, None] * means[:, None, :])
    )
    return first, second


def build_workspace(model: GmmQFunction, batch: TransitionBatch, discount: float) -> GradWorkspace:
    """Evaluate residuals and the aggregates shared by all gradient blocks."""
    _check_discount(discount)
    if (batch.actions is not None) != (model.layout is WeightLayout.PER_ACTION):
        raise ValueError("batch layout does not match the model layout")
    gauss = gauss_matrix(batch.z, model.means, model.cov_invs)
    gauss_next = gauss_matrix(batch.z_next, model.means, model.cov_invs)
    if model.layout is WeightLayout.SHARED:
        q_cur = gauss @ model.weights
        q_next = gauss_next @ model.weights
        w_cur, w_next = gauss, gauss_next
    else:
        q_cur = np.einsum("tk,tk->t", model.weights[batch.actions], gauss)
        q_next = np.einsum("tk,tk->t", model.weights[batch.next_actions], gauss_next)
        w_cur = model.weights[batch.actions] * gauss
        w_next = model.weights[batch.next_actions] * gauss_next
    delta = batch.g + discount * q_next - q_cur
    t = batch.size
    first_next, second_next = _weighted_moments(delta[:, None] * w_next, batch.z_next, model.means)
    first_cur, second_cur = _weighted_moments(delta[:, None] * w_cur, batch.z, model.means)
    dbar = (discount * first_next - first_cur) / t
    bbar = sym(discount * second_next - second_cur) / t
    return GradWorkspace(
        batch=batch,
        discount=discount,
        layout=model.layout,
        delta=delta,
        gauss=gauss,
        gauss_next=gauss_next,
        dbar=dbar,
        bbar=bbar,
    )


def grad_weights(ws: GradWorkspace, model: GmmQFunction) -> np.ndarray:
    """Euclidean gradient of the loss w.r.t. the mixing weights."""
    t = ws.batch.size
    if ws.layout is WeightLayout.SHARED:
        delta_matrix = ws.discount * ws.gauss_next - ws.gauss
        return (2.0 / t) * (delta_matrix.T @ ws.delta)
    out = np.zeros_like(model.weights)
    np.add.at(out, ws.batch.next_actions, (ws.discount * ws.delta)[:, None] * ws.gauss_next)
    np.add.at(out, ws.batch.actions, -ws.delta[:, None] * ws.gauss)
    return (2.0 / t) * out


def grad_means(ws: GradWorkspace, model: GmmQFunction) -> np.ndarray:
    """Euclidean gradient w.r.t. each mean, shape (K, d)."""
    scaled = np.einsum("kde,ke->kd", model.cov_invs, ws.dbar)
    if ws.layout is WeightLayout.SHARED:
        return 4.0 * model.weights[:, None] * scaled
    return 4.0 * scaled


def grad_covs(ws: GradWorkspace, model: GmmQFunction, metric: MetricKind) -> np.ndarray:
    """Riemannian gradient w.r.t. each covariance, shape (K, d, d)."""
    if metric is MetricKind.AFFINE_INVARIANT:
        grads = 2.0 * ws.bbar
    else:
        mixed = np.matmul(model.cov_invs, ws.bbar)
        grads = 4.0 * (mixed + mixed.swapaxes(-1, -2))
    if ws.layout is WeightLayout.SHARED:
        grads = model.weights[:, None, None] * grads
    return sym(grads)


def full_gradient(
    model: GmmQFunction, batch: TransitionBatch, discount: float, metric: MetricKind
) -> ProductTangent:
    """Bundle the three gradient blocks into one product-manifold tangent."""
    ws = build_workspace(model, batch, discount)
    return ProductTangent(
        weight_dir=grad_weights(ws, model),
        mean_dirs=grad_means(ws, model),
        cov_dirs=grad_covs(ws, model, metric),
    )


def bound_objective(batch: TransitionBatch, discount: float, metric: MetricKind):
    """Close the loss and gradient over a fixed batch for the optimizer."""

    def loss_fn(model: GmmQFunction) -> float:
        return br_loss(model, batch, discount)

    def grad_fn(model: GmmQFunction) -> ProductTangent:
        return full_gradient(model, batch, discount, metric)

    return loss_fn, grad_fn
