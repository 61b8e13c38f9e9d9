import math
from types import SimpleNamespace

import numpy as np
import pytest

from fdnet.model import Batch
from fdnet.optim import (
    AdamConfig,
    CgResult,
    NumericalFailure,
    OptResult,
    StepReport,
    TrustRegionConfig,
    TrustRegionState,
    adam_step,
    run_optimizer,
    steihaug_cg,
    tr_iteration,
)


class QuadOracles:
    """loss(x) = 0.5 x'Hx + b'x + c; the batch argument is ignored."""

    def __init__(self, H, b, c=0.0):
        self.H = np.asarray(H, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.c = c

    def loss(self, theta, batch):
        return float(0.5 * theta @ self.H @ theta + self.b @ theta + self.c)

    def model(self, theta, batch):
        return SimpleNamespace(
            loss=self.loss(theta, batch),
            grad=self.H @ theta + self.b,
            hvp=lambda v: self.H @ v,
        )


class DummyTuples:
    """Minimal stand-in for TrainTuples; batches carry no information."""

    def __init__(self, n=1000, m=2):
        self.n = n
        self.m = m

    def __len__(self):
        return self.n

    def batch(self, indices):
        z = np.zeros((len(indices), self.m))
        return Batch(z, z)


def spd_matrix(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n))
    return a @ a.T + 0.5 * np.eye(n)


class TestAdamStep:
    def test_zero_gradient_is_identity(self):
        cfg = AdamConfig()
        theta = np.array([1.0, -2.0])
        out, m, v = adam_step(theta, np.zeros(2), np.zeros(2), np.zeros(2), 1, cfg)
        assert np.array_equal(out, theta)

    def test_first_step_is_signed_learning_rate(self):
        cfg = AdamConfig(lr=1e-3)
        g = np.array([3.0, -0.25])
        out, _, _ = adam_step(np.zeros(2), g, np.zeros(2), np.zeros(2), 1, cfg)
        assert np.allclose(out, -cfg.lr * np.sign(g), rtol=1e-6)

    def test_tiny_lr_freezes_parameters(self):
        cfg = AdamConfig(lr=1e-300)
        theta = np.array([0.5, 0.5])
        g = np.array([1.0, 1.0])
        out, _, _ = adam_step(theta, g, np.zeros(2), np.zeros(2), 1, cfg)
        assert np.allclose(out, theta, atol=1e-250)

    def test_converges_on_quadratic(self):
        oracles = QuadOracles(np.diag([2.0, 0.5]), np.array([-2.0, 1.0]))
        target = np.linalg.solve(np.diag([2.0, 0.5]), [2.0, -1.0])
        theta = np.zeros(2)
        m = np.zeros(2)
        v = np.zeros(2)
        cfg = AdamConfig(lr=0.05)
        for t in range(1, 2001):
            g = oracles.model(theta, None).grad
            theta, m, v = adam_step(theta, g, m, v, t, cfg)
        assert np.linalg.norm(theta - target) < 1e-3

    def test_config_validation(self):
        with pytest.raises(ValueError):
            AdamConfig(lr=0.0)
        with pytest.raises(ValueError):
            AdamConfig(beta1=1.0)


class TestSteihaugCg:
    def test_interior_newton_point(self):
        g = np.array([1.0, 0.0])
        res = steihaug_cg(g, lambda v: v, radius=10.0, tol=1e-12, max_iters=10)
        assert np.allclose(res.step, [-1.0, 0.0], atol=1e-14)
        assert res.iters == 1
        assert not res.boundary_hit
        assert res.decrease == pytest.approx(0.5, rel=1e-14)

    def test_boundary_truncation(self):
        g = np.array([1.0, 0.0])
        res = steihaug_cg(g, lambda v: v, radius=0.5, tol=1e-12, max_iters=10)
        assert np.allclose(res.step, [-0.5, 0.0], atol=1e-14)
        assert res.boundary_hit
        assert res.decrease == pytest.approx(0.375, rel=1e-12)

    def test_negative_curvature_reaches_boundary(self):
        g = np.array([1.0, 0.0])
        radius = 2.0
        res = steihaug_cg(g, lambda v: -v, radius=radius, tol=1e-12, max_iters=10)
        assert res.negative_curvature and res.boundary_hit
        assert np.linalg.norm(res.step) == pytest.approx(radius, rel=1e-12)
        assert res.decrease == pytest.approx(radius + radius**2 / 2.0, rel=1e-12)

    def test_decrease_matches_model_value(self):
        rng = np.random.default_rng(0)
        for trial in range(20):
            n = 6
            H = spd_matrix(n, trial)
            if trial % 3 == 0:
                H = H - 2.0 * np.eye(n)  # some indefinite instances
            g = rng.standard_normal(n)
            radius = float(rng.uniform(0.1, 5.0))
            res = steihaug_cg(g, lambda v: H @ v, radius, tol=1e-10, max_iters=50)
            m_val = float(g @ res.step + 0.5 * res.step @ H @ res.step)
            assert res.decrease == pytest.approx(-m_val, rel=1e-9, abs=1e-12)
            assert np.linalg.norm(res.step) <= radius * (1.0 + 1e-12)

    def test_dominates_cauchy_point(self):
        rng = np.random.default_rng(1)
        for trial in range(20):
            n = 5
            H = spd_matrix(n, 100 + trial)
            g = rng.standard_normal(n)
            radius = float(rng.uniform(0.05, 2.0))
            res = steihaug_cg(g, lambda v: H @ v, radius, tol=1e-10, max_iters=50)
            gng = float(g @ H @ g)
            gg = float(g @ g)
            t_cauchy = min(gg / gng, radius / math.sqrt(gg))
            m_cauchy = -t_cauchy * gg + 0.5 * t_cauchy**2 * gng
            assert res.decrease >= -m_cauchy - 1e-10

    def test_residual_tolerance_honored_on_interior_exit(self):
        H = spd_matrix(8, 5)
        g = np.random.default_rng(6).standard_normal(8)
        tol = 1e-6
        res = steihaug_cg(g, lambda v: H @ v, radius=1e6, tol=tol, max_iters=100)
        assert not res.boundary_hit
        assert np.linalg.norm(g + H @ res.step) <= tol * (1.0 + 1e-9)

    def test_zero_gradient_returns_zero_step(self):
        res = steihaug_cg(np.zeros(4), lambda v: v, radius=1.0, tol=0.0, max_iters=10)
        assert np.array_equal(res.step, np.zeros(4))
        assert res.iters == 0 and res.decrease == 0.0

    def test_nonfinite_curvature_raises(self):
        with pytest.raises(NumericalFailure):
            steihaug_cg(
                np.ones(3), lambda v: np.full(3, np.nan), radius=1.0, tol=1e-12, max_iters=5
            )


class TestTrIteration:
    def test_quadratic_rho_is_one(self):
        oracles = QuadOracles(spd_matrix(4, 7), np.random.default_rng(8).standard_normal(4))
        cfg = TrustRegionConfig()
        state = TrustRegionState(radius=cfg.radius0)
        theta = np.random.default_rng(9).standard_normal(4)
        theta, state, rep = tr_iteration(theta, None, state, cfg, oracles, iteration=1)
        # on an exactly quadratic loss the model prediction is exact
        assert rep.rho == pytest.approx(1.0, abs=1e-9)
        assert rep.accepted

    def test_converges_to_minimizer(self):
        H = spd_matrix(6, 10)
        b = np.random.default_rng(11).standard_normal(6)
        oracles = QuadOracles(H, b)
        target = np.linalg.solve(H, -b)
        cfg = TrustRegionConfig()
        state = TrustRegionState(radius=cfg.radius0)
        theta = np.zeros(6)
        for it in range(1, 31):
            theta, state, rep = tr_iteration(theta, None, state, cfg, oracles, it)
        assert np.linalg.norm(theta - target) <= 1e-6 * max(1.0, np.linalg.norm(target))

    def test_rejection_shrinks_and_keeps_theta(self):
        class LyingOracles(QuadOracles):
            # model promises descent; the actual loss refuses to drop
            def loss(self, theta, batch):
                return 1.0 if np.linalg.norm(theta) > 0 else 0.0

            def model(self, theta, batch):
                return SimpleNamespace(
                    loss=0.0, grad=np.array([1.0, 0.0]), hvp=lambda v: v
                )

        cfg = TrustRegionConfig()
        state = TrustRegionState(radius=1.0)
        theta0 = np.zeros(2)
        theta, state, rep = tr_iteration(theta0, None, state, cfg, LyingOracles(np.eye(2), np.zeros(2)), 1)
        assert not rep.accepted
        assert np.array_equal(theta, theta0)
        assert state.radius == pytest.approx(0.25)
        assert rep.rho < cfg.accept_threshold

    def test_expansion_requires_boundary_hit(self):
        H = np.eye(2)
        b = np.array([-10.0, 0.0])  # minimizer at (10, 0), far outside radius
        oracles = QuadOracles(H, b)
        cfg = TrustRegionConfig(radius0=1.0)
        state = TrustRegionState(radius=1.0)
        theta, state, rep = tr_iteration(np.zeros(2), None, state, cfg, oracles, 1)
        assert rep.accepted and rep.rho == pytest.approx(1.0, abs=1e-9)
        assert state.radius == pytest.approx(2.0)
        # interior solve: high rho but no boundary contact, radius must stay
        oracles2 = QuadOracles(np.eye(2), np.array([-0.1, 0.0]))
        state2 = TrustRegionState(radius=1.0)
        _, state2, rep2 = tr_iteration(np.zeros(2), None, state2, cfg, oracles2, 1)
        assert rep2.accepted and state2.radius == 1.0

    def test_radius_cap(self):
        oracles = QuadOracles(np.eye(2), np.array([-1000.0, 0.0]))
        cfg = TrustRegionConfig(radius0=80.0, radius_max=100.0)
        state = TrustRegionState(radius=80.0)
        _, state, _ = tr_iteration(np.zeros(2), None, state, cfg, oracles, 1)
        assert state.radius == pytest.approx(100.0)

    def test_zero_gradient_is_a_no_op(self):
        oracles = QuadOracles(np.eye(3), np.zeros(3))
        cfg = TrustRegionConfig()
        state = TrustRegionState(radius=1.0)
        theta, state, rep = tr_iteration(np.zeros(3), None, state, cfg, oracles, 1)
        assert np.array_equal(theta, np.zeros(3))
        assert state.radius == 1.0
        assert rep.rho is None and not rep.accepted

    def test_oracle_accounting(self):
        H = spd_matrix(5, 12)
        oracles = QuadOracles(H, np.ones(5))
        cfg = TrustRegionConfig(cg_max_iters=3)
        state = TrustRegionState(radius=1.0)
        theta = np.zeros(5)
        reports = []
        for it in range(1, 5):
            theta, state, rep = tr_iteration(theta, None, state, cfg, oracles, it)
            reports.append(rep)
            assert rep.grad_calls == it
            assert rep.cg_iters <= 3
        assert state.grad_calls == 4
        assert state.hvp_calls == sum(r.cg_iters for r in reports)
        assert reports[-1].hvp_calls == state.hvp_calls


class TestRunOptimizer:
    def test_zero_budget(self):
        oracles = QuadOracles(np.eye(2), np.zeros(2))
        res = run_optimizer(
            AdamConfig(max_iters=0), oracles, np.ones(2), DummyTuples(), seed=0
        )
        assert res.trace == []
        assert np.array_equal(res.theta, np.ones(2))
        assert res.grad_calls == 0 and res.hvp_calls == 0

    def test_deterministic_across_reruns(self):
        H = spd_matrix(3, 13)
        oracles = QuadOracles(H, np.ones(3))
        cfg = TrustRegionConfig(max_iters=10, batch_size=4)
        a = run_optimizer(cfg, oracles, np.zeros(3), DummyTuples(), seed=5)
        b = run_optimizer(cfg, oracles, np.zeros(3), DummyTuples(), seed=5)
        assert np.array_equal(a.theta, b.theta)
        assert a.trace == b.trace

    def test_tr_trace_length_and_counts(self):
        oracles = QuadOracles(spd_matrix(4, 14), np.ones(4))
        cfg = TrustRegionConfig(max_iters=7, batch_size=2)
        res = run_optimizer(cfg, oracles, np.zeros(4), DummyTuples(), seed=1)
        assert len(res.trace) == 7
        assert res.grad_calls == 7
        assert res.hvp_calls == sum(r.cg_iters for r in res.trace)

    def test_adam_counts(self):
        oracles = QuadOracles(np.eye(3), np.ones(3))
        cfg = AdamConfig(max_iters=9, batch_size=2)
        res = run_optimizer(cfg, oracles, np.zeros(3), DummyTuples(), seed=1)
        assert len(res.trace) == 9
        assert res.grad_calls == 9 and res.hvp_calls == 0

    def test_best_tracking(self):
        oracles = QuadOracles(np.eye(2), np.array([-1.0, 0.0]))
        scores = []

        def evaluate(it, theta):
            s = float(np.linalg.norm(theta - np.array([1.0, 0.0])))
            scores.append((it, s))
            return s

        cfg = TrustRegionConfig(max_iters=6)
        res = run_optimizer(
            cfg, oracles, np.zeros(2), DummyTuples(), seed=2, evaluate=evaluate, eval_every=2
        )
        assert res.best_iteration is not None
        assert res.best_score == min(s for _, s in scores)
        assert np.linalg.norm(res.best_theta - np.array([1.0, 0.0])) == pytest.approx(
            res.best_score, abs=1e-12
        )

    def test_abort_preserves_partial_trace(self):
        class ExplodingOracles(QuadOracles):
            def __init__(self):
                super().__init__(np.eye(2), np.ones(2))
                self.calls = 0

            def model(self, theta, batch):
                self.calls += 1
                if self.calls >= 4:
                    return SimpleNamespace(
                        loss=math.nan, grad=np.ones(2), hvp=lambda v: v
                    )
                return super().model(theta, batch)

        res = run_optimizer(
            TrustRegionConfig(max_iters=10), ExplodingOracles(), np.zeros(2), DummyTuples(), seed=3
        )
        assert res.aborted
        assert len(res.trace) == 3
        assert "non-finite" in res.abort_message

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrustRegionConfig(radius0=0.0)
        with pytest.raises(ValueError):
            TrustRegionConfig(accept_threshold=0.5, shrink_threshold=0.25)
