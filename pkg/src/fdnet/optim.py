"""Stochastic optimizers over mini-batch loss oracles.

Two methods share one driver: ADAM, and a trust-region Newton method whose
subproblem is solved by Steihaug-truncated conjugate gradients using exact
Hessian-vector products.  The trust-region method resamples a mini-batch
every outer iteration and evaluates the acceptance ratio on that same batch.

Oracle accounting follows one convention throughout: a trust-region
iteration spends one gradient evaluation plus one Hessian-vector product per
CG iteration; an ADAM iteration spends one gradient evaluation.  Loss-only
evaluations (the acceptance test) are not counted.  Cumulative counts are
carried in the per-iteration reports so runs by different methods can be
compared at equal oracle cost.

The driver is generic over an ``oracles`` adapter with two methods:
``model(theta, batch)`` returning an object exposing ``loss`` (float),
``grad`` (vector), and ``hvp(v)``; and ``loss(theta, batch)`` returning the
plain loss.  Any quadratic, not just the network objective, can be plugged
in for testing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple

import numpy as np

from fdnet.data import sample_minibatch

__all__ = [
    "AdamConfig",
    "TrustRegionConfig",
    "TrustRegionState",
    "StepReport",
    "OptResult",
    "NumericalFailure",
    "adam_step",
    "steihaug_cg",
    "tr_iteration",
    "run_optimizer",
]


class NumericalFailure(RuntimeError):
    """Raised when an oracle returns non-finite values mid-solve."""


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    max_iters: int = 12000
    batch_size: int = 64

    def __post_init__(self) -> None:
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in [0, 1)")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.max_iters < 0 or self.batch_size < 1:
            raise ValueError("max_iters must be >= 0 and batch_size >= 1")


@dataclass(frozen=True)
class TrustRegionConfig:
    """Trust-region Newton-CG hyperparameters.

    ``shrink_threshold`` plays two roles: steps with ratio below it shrink
    the radius, and the shrink multiplies the radius by the same constant.
    Expansion doubles the radius (capped) when the ratio exceeds
    ``expand_threshold`` and the CG step reached the boundary.
    """

    radius0: float = 1.0
    radius_max: float = 100.0
    accept_threshold: float = 1e-4
    shrink_threshold: float = 0.25
    expand_threshold: float = 0.75
    cg_max_iters: int | None = None  # defaults to the parameter dimension
    max_iters: int = 100
    batch_size: int = 64

    def __post_init__(self) -> None:
        if not 0 < self.radius0 <= self.radius_max:
            raise ValueError("need 0 < radius0 <= radius_max")
        if not 0 < self.accept_threshold < self.shrink_threshold < self.expand_threshold < 1:
            raise ValueError("need 0 < accept < shrink < expand < 1")
        if self.cg_max_iters is not None and self.cg_max_iters < 1:
            raise ValueError("cg_max_iters must be positive when given")
        if self.max_iters < 0 or self.batch_size < 1:
            raise ValueError("max_iters must be >= 0 and batch_size >= 1")


@dataclass(frozen=True)
class TrustRegionState:
    radius: float
    grad_calls: int = 0
    hvp_calls: int = 0


@dataclass(frozen=True)
class StepReport:
    """Outcome of one optimizer iteration; counters are cumulative."""

    iteration: int
    minibatch_loss: float
    grad_calls: int
    hvp_calls: int
    accepted: bool
    radius: float | None = None  # radius the step was computed in (TR only)
    rho: float | None = None
    cg_iters: int | None = None


@dataclass
class OptResult:
    trace: list[StepReport]
    theta: np.ndarray
    best_theta: np.ndarray | None
    best_iteration: int | None
    best_score: float
    grad_calls: int
    hvp_calls: int
    aborted: bool = False
    abort_message: str | None = None


def adam_step(
    theta: np.ndarray,
    g: np.ndarray,
    m: np.ndarray,
    v: np.ndarray,
    t: int,
    cfg: AdamConfig,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One bias-corrected ADAM update; ``t`` is the 1-based iteration."""
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * (g * g)
    m_hat = m / (1.0 - cfg.beta1**t)
    v_hat = v / (1.0 - cfg.beta2**t)
    theta = theta - cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.epsilon)
    return theta, m, v


class CgResult(NamedTuple):
    step: np.ndarray
    iters: int
    boundary_hit: bool
    decrease: float  # predicted decrease of the quadratic model, >= 0
    negative_curvature: bool


def _boundary_tau(z: np.ndarray, d: np.ndarray, radius: float) -> float:
    # positive root of ||z + tau d|| = radius
    a = float(d @ d)
    b = 2.0 * float(z @ d)
    c = float(z @ z) - radius * radius
    disc = max(b * b - 4.0 * a * c, 0.0)
    return (-b + math.sqrt(disc)) / (2.0 * a)


def steihaug_cg(
    g: np.ndarray,
    hvp_fn: Callable[[np.ndarray], np.ndarray],
    radius: float,
    tol: float,
    max_iters: int,
) -> CgResult:
    """Approximately minimize g's + 0.5 s'Hs inside the ball ||s|| <= radius.

    Conjugate gradients from s = 0, with the three Steihaug exits: residual
    below ``tol``, negative curvature (step extended to the boundary), or the
    iterate crossing the boundary (step truncated onto it).  The predicted
    model decrease is tracked incrementally, so no extra Hessian products
    are spent on it.
    """
    z = np.zeros_like(g)
    r = np.array(g, dtype=float, copy=True)
    d = -r
    rr = float(r @ r)
    if math.sqrt(rr) <= tol or max_iters < 1:
        return CgResult(z, 0, False, 0.0, False)
    m_val = 0.0
    boundary = False
    negcurv = False
    iters = 0
    for _ in range(max_iters):
        hd = hvp_fn(d)
        iters += 1
        if not np.all(np.isfinite(hd)):
            raise NumericalFailure("non-finite Hessian-vector product in CG")
        dhd = float(d @ hd)
        if dhd <= 0.0:
            tau = _boundary_tau(z, d, radius)
            m_val += tau * float(r @ d) + 0.5 * tau * tau * dhd
            z = z + tau * d
            boundary = True
            negcurv = True
            break
        alpha = rr / dhd
        z_next = z + alpha * d
        if float(z_next @ z_next) >= radius * radius:
            tau = _boundary_tau(z, d, radius)
            m_val += tau * float(r @ d) + 0.5 * tau * tau * dhd
            z = z + tau * d
            boundary = True
            break
        # interior CG step decreases the model by exactly alpha * rr / 2
        m_val -= 0.5 * alpha * rr
        z = z_next
        r = r + alpha * hd
        rr_next = float(r @ r)
        if math.sqrt(rr_next) <= tol:
            rr = rr_next
            break
        d = -r + (rr_next / rr) * d
        rr = rr_next
    return CgResult(z, iters, boundary, -m_val, negcurv)


def _cg_tolerance(g_norm: float) -> float:
    # inexact-Newton forcing term: ||r|| <= min(0.5, sqrt(||g||)) * ||g||
    return min(0.5, math.sqrt(g_norm)) * g_norm


def tr_iteration(
    theta: np.ndarray,
    batch,
    state: TrustRegionState,
    cfg: TrustRegionConfig,
    oracles,
    iteration: int = 0,
) -> tuple[np.ndarray, TrustRegionState, StepReport]:
    """One resampled trust-region iteration: solve, test the ratio, adapt.

    The acceptance ratio compares actual to predicted decrease on the same
    mini-batch the subproblem was built from.  Non-finite trial losses are
    treated as failed steps (rejected, radius shrunk), not as errors.
    """
    mdl = oracles.model(theta, batch)
    loss0 = float(mdl.loss)
    if not math.isfinite(loss0):
        raise NumericalFailure("non-finite mini-batch loss")
    g = mdl.grad
    g_norm = float(np.linalg.norm(g))
    max_cg = cfg.cg_max_iters if cfg.cg_max_iters is not None else g.size
    cg = steihaug_cg(g, mdl.hvp, state.radius, _cg_tolerance(g_norm), max_cg)
    state = replace(
        state, grad_calls=state.grad_calls + 1, hvp_calls=state.hvp_calls + cg.iters
    )
    if not cg.decrease > 0.0:
        # zero gradient on this batch: nothing to test, nothing to move
        report = StepReport(
            iteration=iteration,
            minibatch_loss=loss0,
            grad_calls=state.grad_calls,
            hvp_calls=state.hvp_calls,
            accepted=False,
            radius=state.radius,
            rho=None,
            cg_iters=cg.iters,
        )
        return theta, state, report
    trial = theta + cg.step
    loss1 = float(oracles.loss(trial, batch))
    rho = (loss0 - loss1) / cg.decrease if math.isfinite(loss1) else -math.inf
    accepted = rho >= cfg.accept_threshold
    radius = state.radius
    if rho < cfg.shrink_threshold:
        radius = cfg.shrink_threshold * radius
    elif rho > cfg.expand_threshold and cg.boundary_hit:
        radius = min(2.0 * radius, cfg.radius_max)
    report = StepReport(
        iteration=iteration,
        minibatch_loss=loss0,
        grad_calls=state.grad_calls,
        hvp_calls=state.hvp_calls,
        accepted=accepted,
        radius=state.radius,
        rho=rho,
        cg_iters=cg.iters,
    )
    return (trial if accepted else theta), replace(state, radius=radius), report


def run_optimizer(
    cfg: AdamConfig | TrustRegionConfig,
    oracles,
    theta0: np.ndarray,
    tuples,
    seed: int,
    evaluate: Callable[[int, np.ndarray], float | None] | None = None,
    eval_every: int | None = None,
) -> OptResult:
    """Drive either method for ``cfg.max_iters`` resampled mini-batches.

    Mini-batches come from a dedicated generator derived from ``seed`` (the
    same seed that initialized the parameters elsewhere), so reruns are
    bit-reproducible.  ``evaluate(iteration, theta)`` is called every
    ``eval_every`` iterations (and on the last); its smallest return value
    determines the best-tracked parameters.  Oracle failures abort the run
    but preserve the trace gathered so far.
    """
    is_tr = isinstance(cfg, TrustRegionConfig)
    if eval_every is None:
        eval_every = 1 if is_tr else 100
    if eval_every < 1:
        raise ValueError("eval_every must be positive")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    theta = np.array(theta0, dtype=float, copy=True)
    state = TrustRegionState(radius=cfg.radius0) if is_tr else None
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    trace: list[StepReport] = []
    best_theta: np.ndarray | None = None
    best_iteration: int | None = None
    best_score = math.inf
    aborted = False
    abort_message: str | None = None
    for it in range(1, cfg.max_iters + 1):
        batch = sample_minibatch(tuples, cfg.batch_size, rng)
        try:
            if is_tr:
                theta, state, report = tr_iteration(theta, batch, state, cfg, oracles, it)
            else:
                mdl = oracles.model(theta, batch)
                loss0 = float(mdl.loss)
                if not math.isfinite(loss0):
                    raise NumericalFailure("non-finite mini-batch loss")
                theta, m, v = adam_step(theta, mdl.grad, m, v, it, cfg)
                report = StepReport(
                    iteration=it,
                    minibatch_loss=loss0,
                    grad_calls=it,
                    hvp_calls=0,
                    accepted=True,
                )
        except NumericalFailure as exc:
            aborted = True
            abort_message = str(exc)
            break
        trace.append(report)
        if evaluate is not None and (it % eval_every == 0 or it == cfg.max_iters):
            score = evaluate(it, theta)
            if score is not None and score < best_score:
                best_score = float(score)
                best_theta = theta.copy()
                best_iteration = it
    grad_calls = trace[-1].grad_calls if trace else 0
    hvp_calls = trace[-1].hvp_calls if trace else 0
    return OptResult(
        trace=trace,
        theta=theta,
        best_theta=best_theta,
        best_iteration=best_iteration,
        best_score=best_score,
        grad_calls=grad_calls,
        hvp_calls=hvp_calls,
        aborted=aborted,
        abort_message=abort_message,
    )
