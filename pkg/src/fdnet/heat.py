"""Exact solutions of the 1-D heat equation and the forward Euler reference scheme.

The continuous problem is u_t = beta * u_xx on the bar [0, L] with homogeneous
Dirichlet boundaries and a sine-series initial condition

    u(x, 0) = sum_i C_i * sin(i * pi * x / L),

optionally driven by a time-independent sine-series source term
f(x) = sum_i D_i * sin(i * pi * x / L).  Both cases admit closed-form
solutions, which this module evaluates directly; they serve as the ground
truth for dataset generation and for error measurement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Grid",
    "HeatProblem",
    "EulerConfig",
    "exact_solution",
    "apply_noise",
    "euler_step",
    "euler_rollout",
]


@dataclass(frozen=True)
class Grid:
    """Uniform spatial grid x_m = m * spacing for m = 0 .. point_count - 1.

    The last grid point is the largest multiple of the spacing that does not
    exceed the bar length, so the grid may stop short of the right endpoint
    (with length pi and spacing 0.1 it ends at 3.1).
    """

    length: float
    spacing: float
    point_count: int

    def __post_init__(self) -> None:
        if self.length <= 0 or self.spacing <= 0:
            raise ValueError("grid length and spacing must be positive")
        if self.point_count < 2:
            raise ValueError("grid needs at least two points")
        m = self.point_count - 1
        if not (m * self.spacing <= self.length < (m + 1) * self.spacing):
            raise ValueError("point_count inconsistent with length and spacing")

    @classmethod
    def from_length(cls, length: float, spacing: float) -> "Grid":
        """Build the grid covering [0, length] with the given spacing."""
        m = int(math.floor(length / spacing))
        # Guard against floating-point edge cases of the floor above.
        while (m + 1) * spacing <= length:
            m += 1
        while m * spacing > length:
            m -= 1
        return cls(length=length, spacing=spacing, point_count=m + 1)

    @property
    def points(self) -> np.ndarray:
        return np.arange(self.point_count) * self.spacing


@dataclass(frozen=True)
class HeatProblem:
    """Problem data: diffusivity, bar length, and sine-series coefficients.

    ``ic_coeffs[i - 1]`` is the coefficient C_i of mode i >= 1 in the initial
    condition; ``forcing_coeffs`` holds the source-term coefficients D_i and
    is None for the unforced problem.
    """

    beta: float
    length: float
    ic_coeffs: np.ndarray
    forcing_coeffs: np.ndarray | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "ic_coeffs", np.asarray(self.ic_coeffs, dtype=float))
        if self.forcing_coeffs is not None:
            fc = np.asarray(self.forcing_coeffs, dtype=float)
            if fc.shape != self.ic_coeffs.shape:
                raise ValueError("forcing_coeffs must match ic_coeffs in length")
            object.__setattr__(self, "forcing_coeffs", fc)
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.length <= 0:
            raise ValueError("length must be positive")
        if self.ic_coeffs.ndim != 1 or self.ic_coeffs.size == 0:
            raise ValueError("ic_coeffs must be a non-empty vector")


def exact_solution(problem: HeatProblem, x, t):
    """Evaluate the closed-form solution at positions ``x`` and times ``t``.

    Without forcing each mode decays as exp(-beta * (i*pi/L)^2 * t); with a
    sine-series source the solution relaxes toward the steady state
    sum_i D_i / (beta * (i*pi/L)^2) * sin(i*pi*x/L).  ``x`` and ``t`` may be
    scalars or broadcastable arrays; scalars in, float out.
    """
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    out = np.zeros(np.broadcast_shapes(x.shape, t.shape))
    for i in range(1, problem.ic_coeffs.size + 1):
        wave = i * math.pi / problem.length
        lam = problem.beta * wave * wave
        mode = np.sin(wave * x)
        c = problem.ic_coeffs[i - 1]
        if problem.forcing_coeffs is None:
            out += c * mode * np.exp(-lam * t)
        else:
            steady = problem.forcing_coeffs[i - 1] / lam
            out += (c - steady) * mode * np.exp(-lam * t) + steady * mode
    if out.ndim == 0:
        return float(out)
    return out


def apply_noise(values: np.ndarray, gamma: float, eps: np.ndarray) -> np.ndarray:
    """Multiplicative perturbation values * (1 + gamma * eps).

    ``eps`` must broadcast against ``values``; exact zeros stay exact zeros.
    """
    if gamma < 0:
        raise ValueError("noise level must be non-negative")
    return values * (1.0 + gamma * np.asarray(eps, dtype=float))


@dataclass(frozen=True)
class EulerConfig:
    """Forward Euler step parameters.

    ``delta`` is the dimensionless diffusion number beta * dt / dx^2; the
    scheme is stable exactly when delta <= 0.5.
    """

    delta: float
    dt: float

    def __post_init__(self) -> None:
        if self.delta <= 0 or self.dt <= 0:
            raise ValueError("delta and dt must be positive")

    @classmethod
    def from_discretization(cls, beta: float, dt: float, spacing: float) -> "EulerConfig":
        return cls(delta=beta * dt / (spacing * spacing), dt=dt)

    @property
    def stable(self) -> bool:
        return self.delta <= 0.5


def euler_step(u: np.ndarray, config: EulerConfig) -> np.ndarray:
    """One explicit Euler update of the discrete heat equation.

    Interior points receive u_m + delta * (u_{m+1} - 2 u_m + u_{m-1});
    the two boundary points are returned unchanged.  ``u`` may carry leading
    batch dimensions; the last axis is space.
    """
    u = np.asarray(u, dtype=float)
    if u.shape[-1] < 3:
        raise ValueError("need at least three grid points for the stencil")
    out = u.copy()
    out[..., 1:-1] = u[..., 1:-1] + config.delta * (
        u[..., 2:] - 2.0 * u[..., 1:-1] + u[..., :-2]
    )
    return out


def euler_rollout(u0: np.ndarray, config: EulerConfig, steps: int) -> np.ndarray:
    """Iterate ``euler_step`` and stack the state after each step.

    Returns an array of shape ``(steps,) + u0.shape``; the initial state is
    not included.  No divergence guard is applied here; unstable runs simply
    produce large (eventually non-finite) values.
    """
    if steps < 1:
        raise ValueError("steps must be at least 1")
    u = np.asarray(u0, dtype=float)
    out = np.empty((steps,) + u.shape)
    with np.errstate(over="ignore", invalid="ignore"):
        for j in range(steps):
            u = euler_step(u, config)
            out[j] = u
    return out
