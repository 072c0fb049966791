"""Y-shaped generative flows: branch-friendly neural-ODE transport maps.

Thin wrapper over the C++ core. Main operations:

- metrics: ``exact_wasserstein``, ``sinkhorn_divergence``, ``sinkhorn_ot``,
  ``rbf_mmd``, ``minibatch_ot_coupling``, ``cost_matrix``, ``auto_epsilon``
- runs: ``train`` (from config text), ``checkpoint_info``, ``velocity``,
  ``sample``, ``trajectories``

All randomness is seed-addressed: the same inputs give bitwise-identical
results across runs and thread counts.
"""

from ._core import (
    ConfigError,
    NumericError,
    auto_epsilon,
    checkpoint_info,
    cost_matrix,
    exact_wasserstein,
    minibatch_ot_coupling,
    rbf_mmd,
    sample,
    sinkhorn_divergence,
    sinkhorn_ot,
    train,
    trajectories,
    velocity,
)

__all__ = [
    "ConfigError",
    "NumericError",
    "auto_epsilon",
    "checkpoint_info",
    "cost_matrix",
    "exact_wasserstein",
    "minibatch_ot_coupling",
    "rbf_mmd",
    "sample",
    "sinkhorn_divergence",
    "sinkhorn_ot",
    "train",
    "trajectories",
    "velocity",
]
