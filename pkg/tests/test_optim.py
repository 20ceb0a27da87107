"""Line-search and descent-loop tests, on Euclidean toys and on real models."""

import numpy as np
import pytest

from gmmq.gradcheck import random_instance
from gmmq.manifold import MetricKind
from gmmq.model import WeightLayout, bound_objective
from gmmq.optim import ArmijoConfig, StopReason, armijo_search, descend
from helpers import weights_only_instance, weights_only_objective


def euclidean_callbacks():
    retract_fn = lambda x, d, t, metric: x + t * d
    inner_fn = lambda x, a, b, metric: float(np.dot(np.atleast_1d(a), np.atleast_1d(b)))
    return retract_fn, inner_fn


class TestArmijoSearch:
    def test_scalar_quadratic_hand_computation(self):
        # f(x) = x^2 at x=1: first tried step 0.5 moves to 0; decrease 1 >= 0.1*0.5*4
        retract_fn, inner_fn = euclidean_callbacks()
        cfg = ArmijoConfig(alpha_bar=1.0, beta=0.5, sigma=0.1)
        loss = lambda x: float(x**2)
        out = armijo_search(
            np.array(1.0), 1.0, np.array(2.0), loss, cfg,
            retract_fn=retract_fn, inner_fn=inner_fn,
        )
        assert out is not None
        step, new_point, new_loss, backtracks = out
        assert step == 0.5
        assert backtracks == 1
        assert float(new_point) == 0.0
        assert new_loss == 0.0

    def test_tried_steps_are_geometric(self):
        # force several rejections and record every candidate step
        retract_fn, inner_fn = euclidean_callbacks()
        cfg = ArmijoConfig(alpha_bar=1.0, beta=0.5, sigma=0.9)
        seen = []

        def loss(x):
            x = float(x)
            seen.append(x)
            return x * x

        out = armijo_search(
            np.array(1.0), 1.0, np.array(2.0), loss, cfg,
            retract_fn=retract_fn, inner_fn=inner_fn,
        )
        assert out is not None
        tried_steps = [(1.0 - x) / 2.0 for x in seen]
        expected = [0.5**m for m in range(1, len(tried_steps) + 1)]
        np.testing.assert_allclose(tried_steps, expected, rtol=1e-12)

    def test_failure_after_cap(self):
        retract_fn, inner_fn = euclidean_callbacks()
        cfg = ArmijoConfig(alpha_bar=1.0, beta=0.5, sigma=0.5, max_backtracks=5)
        # claimed gradient has the wrong sign, so no step can decrease the loss
        out = armijo_search(
            np.array(1.0), 1.0, np.array(-2.0), lambda x: float(x**2), cfg,
            retract_fn=retract_fn, inner_fn=inner_fn,
        )
        assert out is None

    def test_accepted_steps_satisfy_inequality_on_models(self):
        rng = np.random.default_rng(0)
        for layout in WeightLayout:
            for metric in MetricKind:
                model, batch, discount = random_instance(rng, layout)
                loss_fn, grad_fn = bound_objective(batch, discount, metric)
                final, trace = descend(model, loss_fn, grad_fn, ArmijoConfig(j_steps=10), metric)
                seq = trace.loss_sequence
                for j, (step, gnorm) in enumerate(zip(trace.steps, trace.grad_norms)):
                    decrease = seq[j] - seq[j + 1]
                    assert decrease >= 1e-4 * step * gnorm**2 - 1e-15


class TestDescend:
    def test_zero_budget_returns_initial_point(self):
        rng = np.random.default_rng(1)
        model, batch, discount = random_instance(rng, WeightLayout.SHARED)
        loss_fn, grad_fn = bound_objective(batch, discount, MetricKind.AFFINE_INVARIANT)
        out, trace = descend(model, loss_fn, grad_fn, ArmijoConfig(j_steps=0))
        assert out is model
        assert trace.stop is StopReason.BUDGET_EXHAUSTED
        assert trace.losses == []

    def test_gradient_below_tol_short_circuits(self):
        retract_fn, inner_fn = euclidean_callbacks()
        cfg = ArmijoConfig(j_steps=10, grad_tol=1e-3)
        out, trace = descend(
            np.array(0.0), lambda x: float(x**2), lambda x: 2.0 * x, cfg,
            retract_fn=retract_fn, inner_fn=inner_fn,
        )
        assert float(out) == 0.0
        assert trace.stop is StopReason.GRADIENT_BELOW_TOL

    def test_backtrack_failure_returns_best_iterate(self):
        retract_fn, inner_fn = euclidean_callbacks()
        cfg = ArmijoConfig(j_steps=10, max_backtracks=3)
        # wrong-sign "gradient": the very first line search fails
        out, trace = descend(
            np.array(1.0), lambda x: float(x**2), lambda x: -2.0 * x, cfg,
            retract_fn=retract_fn, inner_fn=inner_fn,
        )
        assert float(out) == 1.0
        assert trace.stop is StopReason.BACKTRACK_FAILED

    def test_loss_sequence_non_increasing(self):
        rng = np.random.default_rng(2)
        model, batch, discount = random_instance(rng, WeightLayout.SHARED)
        loss_fn, grad_fn = bound_objective(batch, discount, MetricKind.BURES_WASSERSTEIN)
        _, trace = descend(model, loss_fn, grad_fn, ArmijoConfig(j_steps=25), MetricKind.BURES_WASSERSTEIN)
        seq = trace.loss_sequence
        assert np.all(np.diff(seq) <= 0.0)

    def test_converges_on_euclidean_quadratic(self):
        retract_fn, inner_fn = euclidean_callbacks()
        cfg = ArmijoConfig(alpha_bar=1.0, j_steps=80, grad_tol=1e-12)
        target = np.array([2.0, -1.0, 0.5])
        loss = lambda x: float(np.sum((x - target) ** 2))
        grad = lambda x: 2.0 * (x - target)
        out, trace = descend(np.zeros(3), loss, grad, cfg, retract_fn=retract_fn, inner_fn=inner_fn)
        np.testing.assert_allclose(out, target, atol=1e-6)

    def test_weights_only_subproblem_reaches_least_squares_solution(self):
        # freeze means/covs: the loss is a convex quadratic in the weights with
        # closed-form minimizer -(Delta^T Delta)^{-1} Delta^T g
        rng = np.random.default_rng(3)
        for trial in range(3):
            model, batch, discount, target, hessian = weights_only_instance(rng)
            loss_fn, grad_fn = weights_only_objective(batch, discount)
            evals = np.linalg.eigvalsh(hessian)
            assert evals[-1] / evals[0] < 15.0  # instance stays well conditioned
            cfg = ArmijoConfig(alpha_bar=4.0 / evals[-1], j_steps=200, grad_tol=1e-14)
            out, trace = descend(model, loss_fn, grad_fn, cfg)
            assert len(trace.steps) <= 200
            assert np.max(np.abs(out.weights - target)) < 1e-6
            assert np.all(np.diff(trace.loss_sequence) <= 0.0)


class TestArmijoConfigValidation:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"alpha_bar": 0.0},
            {"beta": 1.0},
            {"beta": 0.0},
            {"sigma": 0.0},
            {"sigma": 1.0},
            {"max_backtracks": 0},
            {"j_steps": -1},
        ],
    )
    def test_bad_values_rejected(self, kwargs):
        with pytest.raises(ValueError):
            ArmijoConfig(**kwargs)
