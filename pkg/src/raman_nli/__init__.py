"""Nonlinear interference in optical fiber with the complex Raman response.

Submodules
----------
fiber
    Fiber parameters, channel plans and signal spectra.
raman
    Complex Raman spectrum and the nonlinear transfer function.
profile
    Signal power evolution under loss and inter-channel Raman scattering.
gn
    Gaussian-noise model integral and closed-form scaling factors.
ssfm
    Split-step simulation with transmitter, receiver and back-propagation.
scenario
    Scenario files, gain tables, orchestration and output writers.
"""

from .errors import (
    ConfigError,
    ConvergenceError,
    CoverageError,
    DegenerateInputError,
    DivergenceError,
    IncompleteInputError,
    InconsistentMeasurementError,
    InvalidArgumentError,
    InvalidGridError,
    InvalidPlanError,
    InvalidStateError,
    ProtocolError,
    RamanNliError,
    StiffnessError,
)
from .fiber import Channel, ChannelPlan, FiberSpec, SignalPsd, build_psd, sample_network_occupancy
from .gn import NliConfig, closed_form_report, delta_eta, nli_psd, nli_report, scaling_factors
from .profile import PowerProfile, raman_ode_profile, triangular_profile, uniform_loss_profile
from .raman import NonlinearTransfer, RamanFitParams, RamanSpectrum, nonlinear_transfer
from .scenario import ResultRow, ScenarioConfig, load_raman_gain_csv, load_scenario, run_scenario
from .ssfm import SsfmConfig, measure_delta_eta, propagate_gme, tx_generate

__version__ = "0.1.0"
