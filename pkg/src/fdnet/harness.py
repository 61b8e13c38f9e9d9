"""Experiment orchestration: rollouts, test errors, baselines, run artifacts.

A run trains one network on one dataset with one optimizer and records, per
iteration, the mini-batch loss and cumulative oracle spend, plus test errors
at the evaluation cadence.  Test errors follow one convention everywhere:
the tau-step prediction feeds the network its own output tau times (never
ground truth), starts from every admissible time index of every test
trajectory, and averages squared error over all scalar entries.  Rollouts
that leave [-guard, guard] or go non-finite yield an ``inf`` sentinel rather
than an exception so a diverging configuration still produces a readable
metrics row.
"""

from __future__ import annotations

import json
import math
import os
import time
from dataclasses import dataclass

import numpy as np

from fdnet.data import TrajectorySet, dataset_fingerprint, train_tuples
from fdnet.heat import EulerConfig, euler_step
from fdnet.model import (
    FdNetParams,
    LossModel,
    NetConfig,
    init_params,
    loss as net_loss,
    net_forward,
    param_count,
    save_checkpoint,
)
from fdnet.optim import AdamConfig, OptResult, TrustRegionConfig, run_optimizer

__all__ = [
    "DEFAULT_GUARD",
    "DivergenceError",
    "EvalResult",
    "NetOracles",
    "RunConfig",
    "RunOutcome",
    "predict_rollout",
    "test_error",
    "default_taus",
    "euler_config_for",
    "euler_test_error",
    "euler_baseline_error",
    "euler_eval",
    "run_experiment",
    "write_metrics_csv",
    "METRICS_COLUMNS",
]

DEFAULT_GUARD = 1e12

METRICS_COLUMNS = (
    "iteration",
    "grad_calls",
    "hvp_calls",
    "minibatch_mse",
    "radius",
    "accepted",
    "test_mse_1",
    "test_mse_multi",
    "test_mse_full",
)


class DivergenceError(RuntimeError):
    """A rollout left the numerical guard; ``step`` is where it happened."""

    def __init__(self, step: int):
        super().__init__(f"rollout diverged at step {step}")
        self.step = step


class NetOracles:
    """Adapter exposing the network loss to the optimizer driver."""

    def __init__(self, cfg: NetConfig):
        self.cfg = cfg

    def model(self, theta: np.ndarray, batch) -> LossModel:
        return LossModel(FdNetParams(self.cfg, theta), batch)

    def loss(self, theta: np.ndarray, batch) -> float:
        return net_loss(FdNetParams(self.cfg, theta), batch)


def predict_rollout(
    params: FdNetParams,
    u0: np.ndarray,
    n_steps: int,
    guard: float = DEFAULT_GUARD,
    return_all: bool = False,
) -> np.ndarray:
    """Apply the network ``n_steps`` times, feeding predictions back in.

    Raises ``DivergenceError`` the first time the state goes non-finite or
    exceeds ``guard`` in sup-norm.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    x = np.asarray(u0, dtype=float)
    outs = []
    for j in range(1, n_steps + 1):
        x = net_forward(x, params)
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > guard:
            raise DivergenceError(j)
        if return_all:
            outs.append(x)
    return np.stack(outs) if return_all else x


def _multi_step_mse(step_fn, ts: TrajectorySet, tau: int, guard: float) -> float:
    tc = ts.times.size
    if not 1 <= tau <= tc - 1:
        raise ValueError(f"tau must lie in [1, {tc - 1}], got {tau}")
    m = ts.grid.point_count
    test_values = ts.values[ts.test_idx]
    n_start = tc - tau
    pred = test_values[:, :n_start, :].reshape(-1, m)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(tau):
            pred = step_fn(pred)
            if not np.all(np.isfinite(pred)) or np.max(np.abs(pred)) > guard:
                return math.inf
    targets = test_values[:, tau:, :].reshape(-1, m)
    return float(np.mean((pred - targets) ** 2))


def test_error(
    params: FdNetParams, ts: TrajectorySet, tau: int, guard: float = DEFAULT_GUARD
) -> float:
    """Mean squared tau-step prediction error over the test split.

    Every admissible start index of every test trajectory contributes; the
    full horizon corresponds to tau = time_count - 1 (one start at t = 0).
    Divergent rollouts return ``inf``.
    """
    return _multi_step_mse(lambda u: net_forward(u, params), ts, tau, guard)


def default_taus(ts: TrajectorySet) -> tuple[int, int, int]:
    """Evaluation horizons (one-step, multi-step, full) for a dataset."""
    full = ts.times.size - 1
    multi = 3 if ts.spec.case == "unstable" else 10
    return (1, min(multi, full), full)


def euler_config_for(ts: TrajectorySet) -> EulerConfig:
    return EulerConfig.from_discretization(ts.spec.beta, ts.spec.dt, ts.spec.spacing)


def euler_test_error(ts: TrajectorySet, tau: int, guard: float = DEFAULT_GUARD) -> float:
    """``test_error`` with the forward Euler step in place of the network."""
    ec = euler_config_for(ts)
    return _multi_step_mse(lambda u: euler_step(u, ec), ts, tau, guard)


def euler_baseline_error(ts: TrajectorySet, guard: float = DEFAULT_GUARD) -> float:
    """Full-horizon Euler error on the test split, from the stored u(x, 0)."""
    return euler_test_error(ts, ts.times.size - 1, guard)


@dataclass(frozen=True)
class EvalResult:
    """One test-error measurement; ``iteration`` is None for baselines."""

    tau_prime: int
    mse: float
    iteration: int | None = None


def euler_eval(ts: TrajectorySet, guard: float = DEFAULT_GUARD) -> tuple[EvalResult, ...]:
    """Euler baseline at the standard horizons (one, multi, full)."""
    return tuple(
        EvalResult(tau_prime=tau, mse=euler_test_error(ts, tau, guard))
        for tau in default_taus(ts)
    )


# -- experiment runner --------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    """One training run: architecture, optimizer choice, seed, budgets.

    ``budget`` and ``eval_every`` default per method (and per case for the
    trust region): TR trains 100 iterations (300 unstable) evaluating every
    iteration; ADAM trains 12000 evaluating every 100.
    """

    n_filters: int
    n_blocks: int
    optimizer: str  # "tr" or "adam"
    seed: int
    lr: float = 1e-3
    budget: int | None = None
    batch_size: int = 64
    eval_every: int | None = None
    out_dir: str | None = None
    guard: float = DEFAULT_GUARD

    def __post_init__(self) -> None:
        if self.optimizer not in ("tr", "adam"):
            raise ValueError("optimizer must be 'tr' or 'adam'")
        if self.budget is not None and self.budget < 0:
            raise ValueError("budget must be non-negative")
        if self.eval_every is not None and self.eval_every < 1:
            raise ValueError("eval_every must be positive")


@dataclass
class RunOutcome:
    summary: dict
    result: OptResult
    evals: dict[int, tuple[float, float, float]]
    run_dir: str | None


def _default_budget(cfg: RunConfig, ts: TrajectorySet) -> int:
    if cfg.budget is not None:
        return cfg.budget
    if cfg.optimizer == "adam":
        return 12000
    return 300 if ts.spec.case == "unstable" else 100


def _fmt(x) -> str:
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _json_safe(x):
    if isinstance(x, float) and not math.isfinite(x):
        return "inf" if x > 0 else ("-inf" if x < 0 else "nan")
    if isinstance(x, dict):
        return {k: _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    return x


def _write_atomic(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_metrics_csv(path: str, trace, evals: dict[int, tuple]) -> None:
    """Serialize the per-iteration trace with eval columns on cadence rows.

    Formatting is deterministic (shortest round-trip float repr, ``inf``
    sentinel for divergence), so identically configured runs produce
    byte-identical files.
    """
    lines = [",".join(METRICS_COLUMNS)]
    for rep in trace:
        ev = evals.get(rep.iteration)
        lines.append(
            ",".join(
                [
                    str(rep.iteration),
                    str(rep.grad_calls),
                    str(rep.hvp_calls),
                    _fmt(rep.minibatch_loss),
                    _fmt(rep.radius),
                    "1" if rep.accepted else "0",
                    _fmt(ev[0]) if ev else "",
                    _fmt(ev[1]) if ev else "",
                    _fmt(ev[2]) if ev else "",
                ]
            )
        )
    _write_atomic(path, "\n".join(lines) + "\n")


def run_experiment(cfg: RunConfig, ts: TrajectorySet) -> RunOutcome:
    """Train one network as configured and collect metrics and checkpoints.

    The network carries a source term exactly when the dataset does.  The
    best checkpoint is the evaluated iterate with the smallest full-horizon
    test error.  When ``cfg.out_dir`` is set, writes metrics.csv,
    summary.json, and best/ and final/ checkpoints there.
    """
    net_cfg = NetConfig(
        n_filters=cfg.n_filters,
        n_blocks=cfg.n_blocks,
        with_forcing=ts.spec.case == "forcing",
        grid_points=ts.grid.point_count,
        n_basis=ts.spec.n_modes,
    )
    budget = _default_budget(cfg, ts)
    eval_every = cfg.eval_every if cfg.eval_every is not None else (
        1 if cfg.optimizer == "tr" else 100
    )
    if cfg.optimizer == "tr":
        opt_cfg = TrustRegionConfig(max_iters=budget, batch_size=cfg.batch_size)
    else:
        opt_cfg = AdamConfig(lr=cfg.lr, max_iters=budget, batch_size=cfg.batch_size)
    taus = default_taus(ts)
    oracles = NetOracles(net_cfg)
    tuples = train_tuples(ts)
    theta0 = init_params(net_cfg, cfg.seed).theta
    evals: dict[int, tuple[float, float, float]] = {}

    def evaluate(iteration: int, theta: np.ndarray) -> float:
        p = FdNetParams(net_cfg, theta)
        errs = tuple(test_error(p, ts, tau, cfg.guard) for tau in taus)
        evals[iteration] = errs
        return errs[-1]

    started = time.perf_counter()
    result = run_optimizer(
        opt_cfg, oracles, theta0, tuples, cfg.seed, evaluate=evaluate, eval_every=eval_every
    )
    wall_seconds = time.perf_counter() - started

    fingerprint = dataset_fingerprint(ts)
    last_eval = evals.get(result.trace[-1].iteration) if result.trace else None
    min_eval = [
        min((e[i] for e in evals.values()), default=math.inf) for i in range(3)
    ]
    summary = {
        "case": ts.spec.case,
        "optimizer": cfg.optimizer,
        "lr": cfg.lr if cfg.optimizer == "adam" else None,
        "n_filters": cfg.n_filters,
        "n_blocks": cfg.n_blocks,
        "param_count": param_count(net_cfg),
        "budget": budget,
        "batch_size": cfg.batch_size,
        "eval_every": eval_every,
        "seed": cfg.seed,
        "dataset_fingerprint": fingerprint,
        "taus": {"one": taus[0], "multi": taus[1], "full": taus[2]},
        "iterations_run": len(result.trace),
        "grad_calls": result.grad_calls,
        "hvp_calls": result.hvp_calls,
        "aborted": result.aborted,
        "abort_message": result.abort_message,
        "final_minibatch_mse": result.trace[-1].minibatch_loss if result.trace else None,
        "final_test_mse": {
            "one": last_eval[0] if last_eval else None,
            "multi": last_eval[1] if last_eval else None,
            "full": last_eval[2] if last_eval else None,
        },
        "min_test_mse": {
            "one": min_eval[0],
            "multi": min_eval[1],
            "full": min_eval[2],
        },
        "best_iteration": result.best_iteration,
        "best_test_mse_full": result.best_score,
        "wall_seconds": wall_seconds,
    }

    run_dir = cfg.out_dir
    if run_dir is not None:
        os.makedirs(run_dir, exist_ok=True)
        write_metrics_csv(os.path.join(run_dir, "metrics.csv"), result.trace, evals)
        _write_atomic(
            os.path.join(run_dir, "summary.json"),
            json.dumps(_json_safe(summary), indent=1) + "\n",
        )
        save_checkpoint(
            os.path.join(run_dir, "final"),
            FdNetParams(net_cfg, result.theta),
            seed=cfg.seed,
            iteration=len(result.trace),
            dataset_fingerprint=fingerprint,
        )
        if result.best_theta is not None:
            save_checkpoint(
                os.path.join(run_dir, "best"),
                FdNetParams(net_cfg, result.best_theta),
                seed=cfg.seed,
                iteration=result.best_iteration,
                dataset_fingerprint=fingerprint,
            )
    return RunOutcome(summary=summary, result=result, evals=evals, run_dir=run_dir)
