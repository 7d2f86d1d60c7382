"""Circular symbolic systems and real-analytic conjugation-scheme
approximants on the 2-torus: exact word combinatorics, block-slide
realizations, and their trigonometric approximations, cross-verified
against a modular orbit-coding oracle.
"""

from .params import StageParams, advance, initial_stage, j_table
from .words import (Alphabet, ConstructionSequence, Membership, WordFamily,
                    canonical_factor, circular_word,
                    empirical_cylinder_frequency, subshift_member,
                    uniformity_check, unique_readability_check)
from .towers import (AbcStage, Grid, GridPermutation, PeriodicProcess,
                     drive_from_construction_sequence,
                     epsilon_approximation_check, h_from_words,
                     requirements_check, tower_names)
from .orbit_coding import TransectTrace, simulate_transect, transect_name
from .blockslide import (BlockSlideMap, Slide, StepFunction,
                         column_interchange, double_two_cycle,
                         permutation_to_blockslide, transposition)
from .analytic import (AnalyticMap, TrigPolynomial, approx_blockslide,
                       approx_permutation, approximate_step, build_stage,
                       complex_eval, find_l_star, strip_distance)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
