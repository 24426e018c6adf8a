"""Continuously measured quantum systems via restricted path integrals."""

__version__ = "0.1.0"

from .hilbert import (
    Constants,
    anticommutator,
    build_oscillator,
    build_qubit,
    coherent_state,
    commutator,
    matrix_exponential,
)
from .monitoring import (
    CorridorSpec,
    MonitoringChannel,
    ReadoutCurve,
    effective_hamiltonian,
    kappa_from_corridor,
    weight_gaussian,
    weight_nonminimal,
)
from .selective import (
    ConditionedTrajectory,
    generalized_unitarity_check,
    propagate_conditioned,
    sample_readout,
)
from .nonselective import (
    Form,
    IntegrationError,
    MasterEquationSpec,
    TruncationError,
    build_brownian_oscillator,
    ensemble_average,
    integrate,
    rhs_lindblad_canonical,
    rhs_nonminimal,
    rhs_simple,
    sample_ensemble,
)
from .lattice import (
    LatticeSpec,
    effective_propagator,
    rpi_propagator,
    short_time_kernel,
)
