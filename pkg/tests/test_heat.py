import math

import numpy as np
import pytest

from fdnet.heat import (
    EulerConfig,
    Grid,
    HeatProblem,
    apply_noise,
    euler_rollout,
    euler_step,
    exact_solution,
)

BETA = 2e-4
L = math.pi


def single_mode(mode: int, n_modes: int = 10, coeff: float = 1.0) -> HeatProblem:
    c = np.zeros(n_modes)
    c[mode - 1] = coeff
    return HeatProblem(beta=BETA, length=L, ic_coeffs=c)


class TestGrid:
    def test_standard_grid_truncates_below_length(self):
        g = Grid.from_length(L, 0.1)
        assert g.point_count == 32
        assert g.points[0] == 0.0
        assert g.points[-1] == pytest.approx(3.1, abs=1e-12)
        assert g.points[-1] <= L < g.points[-1] + g.spacing

    def test_exact_cover(self):
        g = Grid.from_length(1.0, 0.25)
        assert g.point_count == 5
        assert g.points[-1] == pytest.approx(1.0)

    def test_inconsistent_point_count_rejected(self):
        with pytest.raises(ValueError):
            Grid(length=L, spacing=0.1, point_count=33)

    def test_bad_inputs_rejected(self):
        with pytest.raises(ValueError):
            Grid.from_length(-1.0, 0.1)
        with pytest.raises(ValueError):
            Grid(length=1.0, spacing=0.0, point_count=3)


class TestExactSolution:
    def test_initial_condition_matches_sine_series(self):
        rng = np.random.default_rng(0)
        c = rng.standard_normal(10)
        prob = HeatProblem(beta=BETA, length=L, ic_coeffs=c)
        x = Grid.from_length(L, 0.1).points
        direct = sum(
            c[i - 1] * np.sin(i * math.pi * x / L) for i in range(1, 11)
        )
        assert np.allclose(exact_solution(prob, x, 0.0), direct, atol=1e-12)

    def test_boundary_is_exactly_zero(self):
        prob = single_mode(3)
        assert exact_solution(prob, 0.0, 123.0) == 0.0

    def test_single_mode_decay_factor(self):
        # mode 1 at x = pi/2, t = 1000: exp(-beta * t) with beta = 2e-4
        prob = single_mode(1)
        got = exact_solution(prob, math.pi / 2.0, 1000.0)
        assert got == pytest.approx(0.8187307530779818, rel=1e-14)

    def test_mode_decay_rate_scales_with_mode_squared(self):
        t = 500.0
        for i in (2, 5, 10):
            prob = single_mode(i)
            x = 1.1
            expected = math.sin(i * x) * math.exp(-BETA * i * i * t)
            assert exact_solution(prob, x, t) == pytest.approx(expected, rel=1e-13)

    def test_superposition(self):
        rng = np.random.default_rng(1)
        c = rng.standard_normal(6)
        prob = HeatProblem(beta=0.03, length=2.0, ic_coeffs=c)
        x = np.linspace(0.0, 2.0, 17)
        t = 7.5
        parts = np.zeros_like(x)
        for i in range(1, 7):
            ci = np.zeros(6)
            ci[i - 1] = c[i - 1]
            parts += exact_solution(HeatProblem(0.03, 2.0, ci), x, t)
        assert np.allclose(exact_solution(prob, x, t), parts, atol=1e-13)

    def test_forced_steady_state(self):
        # All transients decayed: u -> sum_i D_i / (beta * i^2) * sin(i x) at L = pi.
        rng = np.random.default_rng(2)
        c = rng.standard_normal(4)
        d = rng.standard_normal(4)
        prob = HeatProblem(beta=0.05, length=L, ic_coeffs=c, forcing_coeffs=d)
        x = np.linspace(0.1, 3.0, 9)
        steady = sum(
            d[i - 1] / (0.05 * i * i) * np.sin(i * x) for i in range(1, 5)
        )
        got = exact_solution(prob, x, 1e5)
        assert np.max(np.abs(got - steady)) <= 1e-8 * np.max(np.abs(steady))

    def test_forced_solution_at_time_zero_recovers_ic(self):
        rng = np.random.default_rng(3)
        c = rng.standard_normal(5)
        d = rng.standard_normal(5)
        prob = HeatProblem(beta=BETA, length=L, ic_coeffs=c, forcing_coeffs=d)
        x = np.linspace(0.0, 3.1, 32)
        direct = sum(c[i - 1] * np.sin(i * x) for i in range(1, 6))
        assert np.allclose(exact_solution(prob, x, 0.0), direct, atol=1e-11)

    def test_discrete_residual_second_order(self):
        # (u(x,t+ht) - u(x,t))/ht - beta*(u(x+h,t) - 2u + u(x-h,t))/h^2 -> 0
        # at second order in h when ht = h^2.
        rng = np.random.default_rng(4)
        prob = HeatProblem(beta=0.05, length=L, ic_coeffs=rng.standard_normal(5))
        x0, t0 = 1.234, 3.0
        hs = [0.2 / 2**j for j in range(5)]
        resid = []
        for h in hs:
            ht = h * h
            du_dt = (exact_solution(prob, x0, t0 + ht) - exact_solution(prob, x0, t0)) / ht
            lap = (
                exact_solution(prob, x0 + h, t0)
                - 2.0 * exact_solution(prob, x0, t0)
                + exact_solution(prob, x0 - h, t0)
            ) / (h * h)
            resid.append(abs(du_dt - prob.beta * lap))
        rate = np.polyfit(np.log(hs), np.log(resid), 1)[0]
        assert 1.7 <= rate <= 2.3

    def test_mismatched_forcing_length_rejected(self):
        with pytest.raises(ValueError):
            HeatProblem(beta=BETA, length=L, ic_coeffs=np.ones(3), forcing_coeffs=np.ones(4))


class TestNoise:
    def test_zero_gamma_is_identity(self):
        u = np.random.default_rng(5).standard_normal((4, 7))
        eps = np.random.default_rng(6).standard_normal((4, 7))
        assert np.array_equal(apply_noise(u, 0.0, eps), u)

    def test_scalar_example(self):
        assert apply_noise(np.array(2.0), 0.5, np.array(1.0)) == pytest.approx(3.0)

    def test_zeros_stay_zero(self):
        u = np.zeros(5)
        eps = np.ones(5)
        assert np.array_equal(apply_noise(u, 1e-2, eps), u)

    def test_small_gamma_preserves_sign(self):
        rng = np.random.default_rng(7)
        u = rng.standard_normal(1000) + np.sign(rng.standard_normal(1000)) * 0.5
        eps = rng.standard_normal(1000)
        noisy = apply_noise(u, 1e-4, eps)
        assert np.all(np.sign(noisy) == np.sign(u))

    def test_negative_gamma_rejected(self):
        with pytest.raises(ValueError):
            apply_noise(np.ones(3), -1.0, np.ones(3))


class TestEulerStep:
    def test_delta_values_for_standard_cases(self):
        stable = EulerConfig.from_discretization(BETA, 1.0, 0.1)
        unstable = EulerConfig.from_discretization(BETA, 200.0, 0.1)
        assert stable.delta == pytest.approx(0.02, rel=1e-12)
        assert unstable.delta == pytest.approx(4.0, rel=1e-12)
        assert stable.stable and not unstable.stable

    def test_zeros_are_a_fixed_point(self):
        cfg = EulerConfig(delta=0.02, dt=1.0)
        u = np.zeros(32)
        assert np.array_equal(euler_step(u, cfg), u)

    def test_boundaries_held_fixed(self):
        cfg = EulerConfig(delta=0.3, dt=1.0)
        u = np.random.default_rng(8).standard_normal(16)
        out = euler_step(u, cfg)
        assert out[0] == u[0] and out[-1] == u[-1]

    def test_interior_matches_stencil(self):
        cfg = EulerConfig(delta=0.02, dt=1.0)
        u = np.random.default_rng(9).standard_normal(32)
        out = euler_step(u, cfg)
        for m in range(1, 31):
            want = u[m] + 0.02 * (u[m + 1] - 2.0 * u[m] + u[m - 1])
            assert out[m] == pytest.approx(want, abs=1e-15)

    def test_sine_is_near_eigenvector(self):
        # On u_m = sin(x_m) the stencil contracts interior values by
        # 1 + delta * (2 cos(dx) - 2) up to boundary effects.
        g = Grid.from_length(L, 0.1)
        cfg = EulerConfig.from_discretization(BETA, 1.0, 0.1)
        u = np.sin(g.points)
        out = euler_step(u, cfg)
        factor = 1.0 + cfg.delta * (2.0 * math.cos(0.1) - 2.0)
        assert np.allclose(out[1:-1], factor * u[1:-1], atol=1e-14)

    def test_linearity(self):
        cfg = EulerConfig(delta=0.4, dt=1.0)
        rng = np.random.default_rng(10)
        u, v = rng.standard_normal((2, 24))
        a, b = 1.7, -0.3
        lhs = euler_step(a * u + b * v, cfg)
        rhs = a * euler_step(u, cfg) + b * euler_step(v, cfg)
        assert np.allclose(lhs, rhs, atol=1e-13)

    def test_batched_step_matches_loop(self):
        cfg = EulerConfig(delta=0.02, dt=1.0)
        batch = np.random.default_rng(11).standard_normal((5, 32))
        out = euler_step(batch, cfg)
        for row_in, row_out in zip(batch, out):
            assert np.array_equal(euler_step(row_in, cfg), row_out)

    def test_too_few_points_rejected(self):
        with pytest.raises(ValueError):
            euler_step(np.ones(2), EulerConfig(delta=0.02, dt=1.0))


class TestEulerRollout:
    def test_single_step_matches_euler_step(self):
        cfg = EulerConfig(delta=0.02, dt=1.0)
        u = np.random.default_rng(12).standard_normal(32)
        out = euler_rollout(u, cfg, 1)
        assert out.shape == (1, 32)
        assert np.array_equal(out[0], euler_step(u, cfg))

    def test_stable_rollout_stays_bounded(self):
        g = Grid.from_length(L, 0.1)
        prob = single_mode(1)
        u0 = exact_solution(prob, g.points, 0.0)
        cfg = EulerConfig.from_discretization(BETA, 1.0, 0.1)
        out = euler_rollout(u0, cfg, 1000)
        assert np.max(np.abs(out)) <= np.max(np.abs(u0)) + 1e-12

    def test_unstable_rollout_amplifies(self):
        g = Grid.from_length(L, 0.1)
        rng = np.random.default_rng(13)
        prob = HeatProblem(beta=BETA, length=L, ic_coeffs=rng.standard_normal(10))
        u0 = exact_solution(prob, g.points, 0.0)
        cfg = EulerConfig.from_discretization(BETA, 200.0, 0.1)
        out = euler_rollout(u0, cfg, 5)
        sup = np.max(np.abs(out), axis=1)
        assert np.all(np.diff(sup) > 0)
        assert sup[-1] > 1e2 * np.max(np.abs(u0))

    def test_zero_steps_rejected(self):
        with pytest.raises(ValueError):
            euler_rollout(np.ones(8), EulerConfig(delta=0.02, dt=1.0), 0)
