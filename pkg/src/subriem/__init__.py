"""Numerical sub-Riemannian geometry with polynomial generating families.

Normal extremals and their variational equations, conjugate times and orders,
Hilbert invariant integrals, and searchable witnesses for non-injectivity of
the exponential map, cut times and synthetic conjugacy.
"""

from .conjugate import (INFINITE, ConjugateRecord, abnormal_segments, check_regular, delta_map,
                        energy_grid, estimate_order, find_conjugate_times, locus_slice)
from .errors import (BranchLost, DomainError, InconclusiveOrder, InputError, IntegrationError,
                     NoConvergence, NotFound, NotStronglyNormal, NumericalError,
                     SingularJacobian, SubRiemError, Unresolved)
from .flow import (degeneracy, det_exp, det_exp_along_ray, endpoint_batch, exp_batch, exp_map,
                   integrate_extremal, integrate_variational)
from .hilbert import (BASE, STAR, AugmentedCurve, FieldInverse, eval_eta_star, gauss_defect,
                      graph_curve, hilbert_base, hilbert_star, invert_field, ray_curve, star_loop)
from .structures import (PhasePoint, Structure, builtin, check_bracket_generating, eval_fields,
                         euclidean, grushin, hamiltonian, hamiltonian_hessian, hamiltonian_rhs, heisenberg,
                         load_structure, martinet)
from .witness import (ONE_SIDED, SENTINEL_INF, SYMMETRIC, CutRecord, WitnessPair, cut1_pairs,
                      cut_time, geo_distance, injectivity_witness, sampled_geodesic,
                      synthetic_witness)

__version__ = "0.1.0"
