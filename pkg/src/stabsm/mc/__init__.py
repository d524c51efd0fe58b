"""Monte Carlo layer: samplers, crossing estimators, free energies and disorder averages."""

from .disorder import DisorderScan, disorder_scan
from .free_energy import ThermodynamicIntegration
from .observables import (
    measure_dipole,
    measure_fukinuke,
    measure_wilson,
    model_family,
)
from .sampler import MCConfig, MCError, MeasurementRecord, MetropolisSampler, SpinState, metropolis_sweep
from .threshold import BinderCrossingEstimator, SpecificHeatPeakEstimator, estimate_beta_c

__all__ = [
    "BinderCrossingEstimator",
    "DisorderScan",
    "MCConfig",
    "MCError",
    "MeasurementRecord",
    "MetropolisSampler",
    "SpecificHeatPeakEstimator",
    "SpinState",
    "ThermodynamicIntegration",
    "disorder_scan",
    "estimate_beta_c",
    "measure_dipole",
    "measure_fukinuke",
    "measure_wilson",
    "metropolis_sweep",
    "model_family",
]
