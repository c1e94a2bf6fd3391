"""Haar and conditional Haar measures on classical groups as products of reflections."""
from .analytics import (beta_mellin, conditional_density_unitary, expected_sq_modulus_zp,
                        jacobi_density, mf_cospower, mf_one_plus_sphere_coord,
                        mf_theorem_a1_target, mf_tilted_one_minus, so_usp_density,
                        weyl_density_unitary)
from .charpoly import (AlphaSchedule, DerivativePair, alpha_schedule_general,
                       alpha_schedule_group, det_id_minus_product, log_z,
                       sample_jacobi_det_pair, sample_jacobi_n1, sample_z_product_unitary,
                       so_usp_derivative_pair, z_derivative)
from .distributions import (RngStream, TiltedLaw, sample_beta, sample_complex_sphere,
                            sample_cospower_angle, sample_fst, sample_real_sphere,
                            sample_tilted_coord)
from .errors import (ConditioningError, ContractViolation, DegenerateReflectionError,
                     DomainError, InsufficientDataError, RejectionLimitError, SingularityError)
from .harness import ExperimentReport, run_experiment
from .measures import (eigenangles, sample_conditional_haar, sample_conditional_orthogonal,
                       sample_conditional_slipped, sample_conditioned_on_abs_z,
                       sample_generalized_slip, sample_haar_unitary, sample_rotated_conditional)
from .reflections import (Reflection, nontrivial_eigenvalue, reflection_from_column,
                          sample_nu, sample_nu_delta, sample_nu_real)
from .stats import corr, ks_two_sample, mc_moment, normality_check, tail_slope

__version__ = "0.1.0"
