"""From-scratch backprop engine and the multi-stream forecaster."""

from .network import (
    DIVERGENCE_LIMIT,
    GradCheckReport,
    HEAD_UNITS,
    HEADS,
    Hyperparams,
    LayerGradCheck,
    Network,
    NetworkConfig,
    T_MAX,
    backward_and_step,
    build_network,
    compute_loss,
    eligible_samples,
    forward,
    frame_features,
    grad_check,
    load_network,
    param_shapes,
    parameter_count,
    predict_batch,
    save_network,
    stack_windows,
    targets_for,
    train,
)

__all__ = [
    "DIVERGENCE_LIMIT",
    "GradCheckReport",
    "HEAD_UNITS",
    "HEADS",
    "Hyperparams",
    "LayerGradCheck",
    "Network",
    "NetworkConfig",
    "T_MAX",
    "backward_and_step",
    "build_network",
    "compute_loss",
    "eligible_samples",
    "forward",
    "frame_features",
    "grad_check",
    "load_network",
    "param_shapes",
    "parameter_count",
    "predict_batch",
    "save_network",
    "stack_windows",
    "targets_for",
    "train",
]
