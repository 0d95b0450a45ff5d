"""Bayesian model evaluation: cross validation, information criteria, free energy.

Thin wrapper over the C++ core.  The main entry points:

- ``evaluate(config)``        -> report dict (T_n, W_n, C_n, DIC, F_n, ...)
- ``sample(config)``          -> posterior draws + diagnostics
- ``run_experiment(config)``  -> summary + per-trial records for the
  predefined studies (example1, example2, example3, variance)
- ``experiment_defaults(name)``
- ``rlct_regular(d)``, ``rlct_reduced_rank(M, N, H, r)``,
  ``rlct_volume_estimate(excess_loss, dim, eps_grid, ...)``

Errors raise ``DomainError`` (data/runtime problems) or its subclass
``ConfigError`` (bad configuration), mirroring the CLI exit codes 1 and 2.
"""

from bayeseval._core import (
    ConfigError,
    DomainError,
    evaluate,
    experiment_defaults,
    rlct_reduced_rank,
    rlct_regular,
    rlct_volume_estimate,
    run_experiment,
    sample,
)

__all__ = [
    "ConfigError",
    "DomainError",
    "evaluate",
    "experiment_defaults",
    "rlct_reduced_rank",
    "rlct_regular",
    "rlct_volume_estimate",
    "run_experiment",
    "sample",
]

__version__ = "0.1.0"
