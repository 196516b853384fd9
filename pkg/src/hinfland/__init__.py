"""Direct policy optimization tools for output-feedback H-infinity control."""
from .certificate import (Certificate, Failure, assemble_N, certify, certify_floor, certify_lmi,
                          certify_riccati, check_certificate, is_nondegenerate)
from .errors import DimensionError, DomainError, HinflandError, NumericalError
from .lifting import (CertifiedTriple, LiftedPoint, LiftedVars, assemble_M, certified_triple,
                      congruence_check, descent_curve, descent_direction, in_F, phi, psi)
from .lti import (ClosedLoop, Controller, Plant, assemble_closed_loop, eval_transfer,
                  frechet_remainder, is_stabilizing, sigma_max_at)
from .norm import INF_FREQ, J, NormResult, directional_derivative_fd, hinf_gradient, hinf_norm
from .scan import ScanConfig, ScanRecord, fit_degenerate_line, run_scan
from .search import SearchTrace, random_stabilizing, search, stationarity_measure
from .synthesis import SynthesisResult, feasibility_F, min_gamma
from .systems import example_plant

__version__ = "0.1.0"
