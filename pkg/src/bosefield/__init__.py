"""Truncated bosonic Fock spaces, field isometries and Dyson-series intertwiners."""

from .fock import (BasisMismatchError, BlockOperator, CapacityError, FockBasis, GridSpace,
                   SectorMatrix, UnsafeSectorError, annihilator, block_diagonal, creator, identity,
                   lct_seminorm, number_operator, operator_norm)
from .fields import (build_W, field_phi, gauge_mean, gauge_transform, harmonic_component,
                     harmonic_decomposition, mode_number, mode_number_function, projection_E,
                     resolvent, tensor_factorize)
from .observables import (SECOND_QUANTIZED, SYMMETRIZED, CoherentSequence, GeneratorSum,
                          SpectatorFrame, coherent_sequence_from, function_of_Nf, kappa,
                          lift_one_body, lift_two_body)
from .dynamics import (DysonConfig, HamiltonianConfig, PotentialSpec, beta, build_hamiltonian,
                       dyson_gamma, evolve, free_evolve_single, free_hamiltonian, gamma_direct,
                       generator_difference, interaction_picture_expand, localized_potentials,
                       sigma_f, time_ordered_integral)
from .covariance import (build_Y, coherence_mechanism_check, equivalence_isometry,
                         free_covariance_check, intertwiner_verify, lift_morphism,
                         localization_check, make_morphism, morphism_apply,
                         trivial_character_check)
from .config import RunConfig, parse_config
from .report import VerificationReport
from .suites import emit_convergence_table, run_suites

__version__ = "0.1.0"
