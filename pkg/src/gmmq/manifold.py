"""SPD-matrix geometry and the product-manifold operations used for training.

Points are symmetric positive-definite (SPD) matrices, tangents are symmetric
matrices.  Two Riemannian metrics are supported: the affine-invariant one,
``tr(C^-1 G1 C^-1 G2)``, and the Bures-Wasserstein one, ``tr(L_C(G1) G2) / 2``,
where ``L_C`` is the Lyapunov operator solving ``C X + X C = G``.

The model parameters (weights, means, covariances) live on the product of
Euclidean spaces and SPD manifolds; :func:`product_inner` and :func:`retract`
implement the product metric and retraction.  All matrix functions go through
symmetric eigendecompositions; dimensions are tiny (d <= 5) so robustness wins
over speed, and everything is vectorized over the leading "bundle" axis.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

# Eigenvalue floor applied when a retraction output loses definiteness.
EIG_FLOOR = 1e-10
# Constructor guard: smallest eigenvalue must exceed this fraction of the largest.
SPD_REL_TOL = 1e-12


def sym(a: np.ndarray) -> np.ndarray:
    """Symmetric part (A + A^T)/2, batched over leading axes."""
    return 0.5 * (a + a.swapaxes(-1, -2))


class MetricKind(enum.Enum):
    """Riemannian metric on the SPD factor of the parameter manifold."""

    AFFINE_INVARIANT = "affi"
    BURES_WASSERSTEIN = "bw"


@dataclass(frozen=True)
class SpdMatrix:
    """A validated symmetric positive-definite matrix.

    The constructor symmetrizes its input and rejects matrices whose smallest
    eigenvalue does not exceed ``SPD_REL_TOL`` times the largest.  ``repaired``
    records whether an eigenvalue clamp was applied on the way here (see
    :func:`spd_exp`); it is metadata, not part of the value.
    """

    entries: np.ndarray
    repaired: bool = field(default=False, compare=False)

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("matrix entries must be finite")
        a = sym(a)
        w = np.linalg.eigvalsh(a)
        if w[0] <= SPD_REL_TOL * max(w[-1], 0.0):
            raise ValueError(
                f"matrix is not positive definite (eigenvalues in [{w[0]:.3e}, {w[-1]:.3e}])"
            )
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class ProductTangent:
    """A tangent vector (or search direction) on the product parameter manifold.

    Shapes mirror the paired model exactly: ``weight_dir`` is (K,) for the
    shared-weights layout or (n_actions, K) for per-action weights;
    ``mean_dirs`` is (K, d); ``cov_dirs`` is (K, d, d) with symmetric slices.
    """

    weight_dir: np.ndarray
    mean_dirs: np.ndarray
    cov_dirs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "weight_dir", np.asarray(self.weight_dir, dtype=float))
        object.__setattr__(self, "mean_dirs", np.asarray(self.mean_dirs, dtype=float))
        object.__setattr__(self, "cov_dirs", sym(np.asarray(self.cov_dirs, dtype=float)))

    def scaled(self, factor: float) -> "ProductTangent":
        return ProductTangent(
            factor * self.weight_dir, factor * self.mean_dirs, factor * self.cov_dirs
        )

    def __neg__(self) -> "ProductTangent":
        return self.scaled(-1.0)


def _as_matrix(c) -> np.ndarray:
    return c.entries if isinstance(c, SpdMatrix) else np.asarray(c, dtype=float)


def _check_dims(c: np.ndarray, *tangents: np.ndarray):
    for g in tangents:
        if g.shape[-2:] != c.shape[-2:]:
            raise ValueError(f"dimension mismatch: point {c.shape} vs tangent {g.shape}")


# ---------------------------------------------------------------------------
# Batched kernels.  ``c`` has shape (..., d, d); everything broadcasts over
# the leading axes.  Summation orders are fixed, so results are reproducible.
# ---------------------------------------------------------------------------


def lyapunov_solve_batch(c: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Solve C L + L C = G for symmetric G via the eigendecomposition of C.

    With C = U diag(w) U^T the solution is U ((U^T G U) / (w_i + w_j)) U^T.
    """
    w, u = np.linalg.eigh(c)
    g_tilde = u.swapaxes(-1, -2) @ g @ u
    denom = w[..., :, None] + w[..., None, :]
    return sym(u @ (g_tilde / denom) @ u.swapaxes(-1, -2))


def spd_inner_batch(c: np.ndarray, g1: np.ndarray, g2: np.ndarray, metric: MetricKind) -> np.ndarray:
    """Riemannian inner products, batched; returns shape (...,)."""
    if metric is MetricKind.AFFINE_INVARIANT:
        cinv = np.linalg.inv(c)
        return np.einsum("...ij,...jk,...kl,...li->...", cinv, g1, cinv, g2)
    lyap = lyapunov_solve_batch(c, g1)
    return 0.5 * np.einsum("...ij,...ji->...", lyap, g2)


def spd_exp_batch(c: np.ndarray, g: np.ndarray, metric: MetricKind) -> tuple[np.ndarray, np.ndarray]:
    """Exponential-map retractions, batched.

    Affine-invariant: C^{1/2} exp(C^{-1/2} G C^{-1/2}) C^{1/2}.
    Bures-Wasserstein: (L_C(G) + I) C (L_C(G) + I).

    Returns ``(points, repaired)`` where ``repaired`` flags the bundle entries
    whose eigenvalues had to be clamped back above the floor (the BW map can
    lose definiteness in floating point; the clamp is applied uniformly).
    """
    if metric is MetricKind.AFFINE_INVARIANT:
        w, u = np.linalg.eigh(c)
        sqrt_w = np.sqrt(w)
        c_sqrt = (u * sqrt_w[..., None, :]) @ u.swapaxes(-1, -2)
        c_isqrt = (u * (1.0 / sqrt_w)[..., None, :]) @ u.swapaxes(-1, -2)
        inner = sym(c_isqrt @ g @ c_isqrt)
        wi, ui = np.linalg.eigh(inner)
        exp_inner = (ui * np.exp(wi)[..., None, :]) @ ui.swapaxes(-1, -2)
        out = c_sqrt @ exp_inner @ c_sqrt
    else:
        lyap = lyapunov_solve_batch(c, g)
        bracket = lyap + np.eye(c.shape[-1])
        out = bracket @ c @ bracket.swapaxes(-1, -2)
    return _repair_spd(sym(out))


def _repair_spd(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Clamp eigenvalues to stay safely positive; report which entries changed.

    The floor is max(EIG_FLOOR, 1e-11 * lambda_max) so repaired matrices always
    pass the SpdMatrix constructor guard.
    """
    w, u = np.linalg.eigh(a)
    lam_max = np.maximum(w[..., -1], 0.0)
    floor = np.maximum(EIG_FLOOR, 1e-11 * lam_max)[..., None]
    repaired = w < floor
    if not repaired.any():
        return a, repaired.any(axis=-1)
    w_clamped = np.maximum(w, floor)
    fixed = (u * w_clamped[..., None, :]) @ u.swapaxes(-1, -2)
    return sym(fixed), repaired.any(axis=-1)


# ---------------------------------------------------------------------------
# Single-matrix interface.
# ---------------------------------------------------------------------------


def lyapunov_solve(c: SpdMatrix | np.ndarray, g: np.ndarray) -> np.ndarray:
    """Solve C L + L C = G; returns the symmetric solution."""
    cm = _as_matrix(c)
    g = sym(np.asarray(g, dtype=float))
    _check_dims(cm, g)
    return lyapunov_solve_batch(cm, g)


def spd_inner(c: SpdMatrix | np.ndarray, g1: np.ndarray, g2: np.ndarray, metric: MetricKind) -> float:
    """Inner product of two tangents at c under the chosen metric."""
    cm = _as_matrix(c)
    g1 = sym(np.asarray(g1, dtype=float))
    g2 = sym(np.asarray(g2, dtype=float))
    _check_dims(cm, g1, g2)
    return float(spd_inner_batch(cm, g1, g2, metric))


def spd_exp(c: SpdMatrix | np.ndarray, g: np.ndarray, metric: MetricKind) -> SpdMatrix:
    """Move from c along tangent g via the metric's exponential map."""
    cm = _as_matrix(c)
    g = sym(np.asarray(g, dtype=float))
    _check_dims(cm, g)
    out, repaired = spd_exp_batch(cm, g, metric)
    return SpdMatrix(out, repaired=bool(repaired))


# ---------------------------------------------------------------------------
# Product manifold.  ``point`` is anything exposing weights (K,) or (A, K),
# means (K, d) and covs (K, d, d) plus a ``with_params`` constructor — in
# practice the Q-function model.
# ---------------------------------------------------------------------------


def zero_tangent_like(point) -> ProductTangent:
    return ProductTangent(
        np.zeros_like(point.weights), np.zeros_like(point.means), np.zeros_like(point.covs)
    )


def product_inner(point, t1: ProductTangent, t2: ProductTangent, metric: MetricKind) -> float:
    """Product metric: weight dot + mean dots + per-component SPD inners."""
    if t1.weight_dir.shape != point.weights.shape or t2.weight_dir.shape != point.weights.shape:
        raise ValueError("tangent weight blocks do not match the point")
    if t1.mean_dirs.shape != point.means.shape or t1.cov_dirs.shape != point.covs.shape:
        raise ValueError("tangent mean/cov blocks do not match the point")
    total = float(np.dot(t1.weight_dir.ravel(), t2.weight_dir.ravel()))
    total += float(np.sum(t1.mean_dirs * t2.mean_dirs))
    total += float(np.sum(spd_inner_batch(point.covs, t1.cov_dirs, t2.cov_dirs, metric)))
    return total


def product_norm(point, t: ProductTangent, metric: MetricKind) -> float:
    return float(np.sqrt(max(product_inner(point, t, t, metric), 0.0)))


def retract(point, t: ProductTangent, step: float, metric: MetricKind):
    """Step along a tangent: weights/means additively, covariances via spd_exp.

    Returns a new point of the same type; its ``cov_repaired`` flag records
    whether any covariance needed an eigenvalue clamp.
    """
    if step < 0:
        raise ValueError("step must be nonnegative")
    new_covs, repaired = spd_exp_batch(point.covs, step * t.cov_dirs, metric)
    return point.with_params(
        weights=point.weights + step * t.weight_dir,
        means=point.means + step * t.mean_dirs,
        covs=new_covs,
        cov_repaired=bool(repaired.any()),
    )
