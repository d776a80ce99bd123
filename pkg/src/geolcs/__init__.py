"""geolcs: stretching fields and Lagrangian coherent structures on
Riemannian, Finsler and hypercomplex charts."""

from .deformation import (CauchyGreenTensor, EigenDecomposition,
                          cauchy_green_finsler, cauchy_green_hypercomplex,
                          cauchy_green_riemannian, ftle,
                          generalized_eigendecomp, metric_adjoint)
from .errors import (BudgetError, ConfigError, DimensionError, DomainError,
                     DomainExitError, EmptyFieldError, EmptyInputError,
                     GeolcsError, MetricError, NumericsError, SingularityError)
from .flow import (FIELDS, FlowMapResult, IntegratorConfig, VectorFieldSpec,
                   advect, flow_jacobian_fd, flow_jacobian_variational,
                   make_field)
from .geometry import (MANIFOLDS, ChartDomain, FinslerNorm,
                       HypercomplexStructure, Manifold, RiemannianMetric,
                       fundamental_tensor, hypercomplex_check, metric_at,
                       randers_norm, standard_quaternion_structure)
from .lcs import (AlignmentReport, FieldGrid, InvarianceReport, Polyline,
                  RidgeSet, compute_field, extract_level_set, extract_ridges,
                  verify_alignment, verify_invariance)
from .config import (AnalysisConfig, build_scenario, config_hash,
                     parse_config, parse_config_file, serialize_config)
from .fileio import read_field, read_ridges, write_field, write_ridges

__version__ = "0.1.0"

__all__ = [
    "AlignmentReport", "AnalysisConfig", "BudgetError", "CauchyGreenTensor",
    "ChartDomain", "ConfigError", "DimensionError", "DomainError",
    "DomainExitError", "EigenDecomposition", "EmptyFieldError",
    "EmptyInputError", "FIELDS", "FieldGrid", "FinslerNorm", "FlowMapResult",
    "GeolcsError", "HypercomplexStructure", "IntegratorConfig",
    "InvarianceReport", "MANIFOLDS", "Manifold", "MetricError",
    "NumericsError", "Polyline", "RidgeSet", "RiemannianMetric",
    "SingularityError", "VectorFieldSpec", "advect", "build_scenario",
    "cauchy_green_finsler", "cauchy_green_hypercomplex",
    "cauchy_green_riemannian", "compute_field", "config_hash",
    "extract_level_set", "extract_ridges", "flow_jacobian_fd",
    "flow_jacobian_variational", "ftle", "fundamental_tensor",
    "generalized_eigendecomp", "hypercomplex_check", "make_field",
    "metric_adjoint", "metric_at", "parse_config", "parse_config_file",
    "randers_norm", "read_field", "read_ridges", "serialize_config",
    "standard_quaternion_structure", "verify_alignment", "verify_invariance",
    "write_field", "write_ridges",
]
