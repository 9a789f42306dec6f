"""Large-deviation rate function for the maximal eigenvalue of inhomogeneous random graphs."""

__version__ = "0.1.0"

from .entropy import (ReferenceConstants, bernoulli_relent, rate_I, reference_constants,
                      reflect, relent, relent_derivative)
from .errors import *  # noqa: F401,F403
from .expansion import (ExpansionConfig, ExpansionResult, finiterank_norm_fixedpoint,
                        rank1_norm_fixedpoint)
from .graphon import (GridGraphon, ReferenceGraphon, block_average, cut_norm_distance,
                      l1_distance, l2_distance, load_grid, refine, save_grid, validate_reference)
from .montecarlo import SampleStats, max_eigenvalue, sample_graph, spectral_sample_stats
from .optimizer import (AugmentedLagrangian, OptimizationResult, OptimizerOptions,
                        feasible_witness, minimize_rate_at_norm, psi_curve)
from .scaling import (PerturbationField, ScalingReport, optimal_perturbation,
                      permutation_gram_gap, scaling_probe, unbalanced_penalty_check)
from .spectral import SpectralResult, leading_eigenpair, operator_norm
