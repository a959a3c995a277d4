"""Continuous-time heat kernels on weighted graphs with certified bounds."""

from .estimates import (
    BoundReport,
    GrowthProfile,
    PreconditionError,
    annulus_tail_bound,
    davies_upper_bound,
    distance_upper_bound,
    distance_upper_report,
    fit_growth_profile,
    legendre_fhat,
    log_tail_decay,
    lower_bound_thresholds,
    ondiagonal_lower_check,
    tail_mass,
)
from .families import FamilySpec, generate_family
from .graph import (
    GraphError,
    VertexFunction,
    WeightedGraph,
    ball,
    build_graph,
    gamma_form,
    graph_distance,
    laplacian_apply,
    load_graph,
)
from .scenario import ConfigError, ScenarioConfig, run_scenario
from .semigroup import (
    DirichletDomain,
    ExhaustionSchedule,
    HeatKernelField,
    dense_kernel_oracle,
    dirichlet_heat_kernel,
    heat_evolve,
    heat_kernel,
)
from .spectral import lambda_bottom

__all__ = [name for name in dir() if not name.startswith("_")]
