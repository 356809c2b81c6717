"""Semiclassical radial Dirac operator on Schwarzschild-AdS and its quasimodes."""
from ._jit import HAVE_NUMBA, use_numba
from .errors import ConfigurationError, NumericalError, PhysicsCheckError
from .geometry import (HorizonData, SpacetimeParams, horizon_radius, metric_F, metric_F_prime,
                       radius_from_tortoise, tortoise_from_radius)
from .potentials import (PotentialProfile, inner_cutoff_x_plus, potential_A, potential_B,
                         potential_derivatives, turning_point_xA)
from .dirac import (EigenPair, GammaSet, HermitianOperator, RadialGrid, SpinorField, apply,
                    assemble_H, assemble_P, boundary_behavior_check, eigen_solve, gamma_set)
from .model_spectrum import (KBasis, ModelLevels, assemble_model_P_tilde, channel_residual,
                             eigenvalue_bracket, k_basis, model_eigenfunction, model_levels)
from .quasimodes import (Quasimode, ResidualRecord, assemble_restricted, build_quasimode,
                         find_E_plus, residual_norm, residual_sweep)
from .agmon import (AgmonConfig, agmon_config, agmon_sweep, check_weighted_inequality,
                    forbidden_region_mass, lemma_margin, weighted_norm)
from .evolution import (CompactWindow, EvolutionState, decay_experiment, evolve, local_energy,
                        log_bound_certificate)

__version__ = "0.1.0"
