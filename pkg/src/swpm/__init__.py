"""Stochastic weighted particle solver for the homogeneous Boltzmann equation with moment-preserving reduction."""

from .collisions import (
    CollisionEngine,
    CollisionEvent,
    CollisionKernelSpec,
    ReductionController,
    advance_one_collision,
    apply_collision,
    majorant_frequency,
    post_collision_velocities,
    run_until,
    weight_transfer,
)
from .clustering import ParticleGroup, bisect_group, cluster_system, principal_direction
from .errors import (
    ConfigError,
    ContractViolation,
    DegenerateInputError,
    ImpossibleMomentError,
    ParameterError,
    SWPMError,
)
from .moments import MomentSet, aggregate_group_moments, compute_moments, relative_moment_error
from .particles import MixtureSpec, Particle, RandomSource, SystemState, sample_initial_state, sample_maxwellian
from .reduction import (
    ReductionReport,
    ReductionScheme,
    reduce_group_energy,
    reduce_group_energy_hf,
    reduce_group_pthf,
    reduce_system,
)
from .reference import ReferenceMoments, equilibrium_moments, hierarchy_moments, mixture_moments
from .config import ExperimentConfig, load_config, parse_config
from .ensemble import EnsembleSeries, reference_for, run_experiment, run_oracle, table_errors

__version__ = "0.1.0"
