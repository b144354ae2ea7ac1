"""Phase thermometry of the 2D Ising lattice."""

import json

from ._core import (
    BondCounts,
    ConfigError,
    DomainError,
    ThermoParams,
    __version__,
    bond_counts,
    cw_qfi,
    exact_decoherence,
    onsager_beta_c,
    qfi_from_r,
    reparametrize,
    run_sampler,
)
from ._core import run_command as _run_command


def run(config):
    """Run a scan from a config dict (same keys as the CLI config file)."""
    return json.loads(_run_command(json.dumps(config)))


__all__ = [
    "BondCounts",
    "ConfigError",
    "DomainError",
    "ThermoParams",
    "__version__",
    "bond_counts",
    "cw_qfi",
    "exact_decoherence",
    "onsager_beta_c",
    "qfi_from_r",
    "reparametrize",
    "run",
    "run_sampler",
]
