"""Engineered atomic reservoirs that stabilize cat states in a cavity mode, and their two-mode extension."""

__version__ = "0.1.0"

from .errors import (
    CavresError,
    ConfigError,
    DimensionMismatch,
    DivergentNormalization,
    IntegrationFailure,
    NoBracket,
    NotConverged,
    TimingConstraintViolated,
    TrappingState,
    TruncationLoss,
)
from .fock import FockSpace, cat_state, coherent, displacement, fock, kerr_propagator, ket2dm, mean_photon
from .config import ScenarioConfig, load_config
from .propagators import CompositeSetup, CouplingProfile, DetuningProfile, calibrate_velocity, exact_propagator
from .reservoir import KrausPair, composite_pointer_state, iterate_to_steady, kraus_from_propagator, pointer_state
from .open_systems import DampingChannel, ThermalBath, lindblad_generator, mcwf_trajectory, steady_state
from .phase_space import fidelity, optimize_cat_fidelity, wigner
from .two_mode import TwoModeConfig, TwoModeSpace, bell_signal, maximize_bell

__all__ = [name for name in dir() if not name.startswith("_")]
