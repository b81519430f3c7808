"""Gaussian-beam wave propagation with sparse-grid stochastic collocation."""

from .beam_propagator import (
    BeamState,
    PropagationConfig,
    beam_rhs,
    hamiltonian,
    init_beam,
    propagate,
    rk4_step,
)
from .errors import (
    BeamUQError,
    ConfigurationError,
    DataError,
    DegenerateSlownessError,
    DomainError,
    IndexSetStructureError,
    IntegrationFailureError,
    PhaseSingularityError,
)
from .models import (
    GaussianPulse,
    InitialWaveData,
    ParamRef,
    build_initial_data,
    build_phase,
    build_speed,
)
from .montecarlo import McStudy, mc_estimate, regression_rate
from .qoi import QoIConfig, TestFunction, derivative_probe, qoi_eval, test_function_eval
from .sparse_grid import (
    IndexSet,
    NodeFamily,
    SparseRule,
    assemble_rule,
    combination_coeffs,
    growth,
    index_set,
    integrate,
    interpolate,
    univariate_nodes,
    univariate_weights,
)
from .stochastic_space import RandomSpace, make_generator
from .wavefield import (
    BeamEnsemble,
    WaveConfig,
    beam_value,
    exact_dalembert,
    field_on_grid,
    launch_ensemble,
    superpose,
)

__version__ = "0.1.0"
