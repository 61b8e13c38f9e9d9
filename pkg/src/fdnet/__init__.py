"""Finite-difference residual networks for learning 1-D heat-equation dynamics."""

from fdnet.heat import (
    EulerConfig,
    Grid,
    HeatProblem,
    apply_noise,
    euler_rollout,
    euler_step,
    exact_solution,
)
from fdnet.model import (
    Batch,
    FdNetParams,
    NetConfig,
    block_forward,
    conv_group,
    euler_embedding_params,
    grad,
    hvp,
    init_params,
    load_checkpoint,
    loss,
    net_forward,
    param_count,
    save_checkpoint,
)
from fdnet.data import (
    CASES,
    CaseSpec,
    TrajectorySet,
    dataset_fingerprint,
    generate,
    load_dataset,
    sample_minibatch,
    save_dataset,
    train_tuples,
)
from fdnet.optim import (
    AdamConfig,
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
from fdnet.harness import (
    DivergenceError,
    EvalResult,
    RunConfig,
    RunOutcome,
    default_taus,
    euler_baseline_error,
    euler_eval,
    euler_test_error,
    predict_rollout,
    run_experiment,
    test_error,
)

__all__ = [
    "AdamConfig",
    "Batch",
    "CASES",
    "CaseSpec",
    "DivergenceError",
    "EulerConfig",
    "EvalResult",
    "FdNetParams",
    "Grid",
    "HeatProblem",
    "NetConfig",
    "NumericalFailure",
    "OptResult",
    "RunConfig",
    "RunOutcome",
    "StepReport",
    "TrajectorySet",
    "TrustRegionConfig",
    "TrustRegionState",
    "adam_step",
    "apply_noise",
    "block_forward",
    "conv_group",
    "dataset_fingerprint",
    "default_taus",
    "euler_baseline_error",
    "euler_embedding_params",
    "euler_eval",
    "euler_rollout",
    "euler_step",
    "euler_test_error",
    "exact_solution",
    "generate",
    "grad",
    "hvp",
    "init_params",
    "load_checkpoint",
    "load_dataset",
    "loss",
    "net_forward",
    "param_count",
    "predict_rollout",
    "run_experiment",
    "run_optimizer",
    "sample_minibatch",
    "save_checkpoint",
    "save_dataset",
    "steihaug_cg",
    "test_error",
    "tr_iteration",
    "train_tuples",
]

__version__ = "0.1.0"
