"""Local approximation toolkit for max-min linear programs.

Instances live on port-numbered bipartite communication graphs; the solver
computes per-agent outputs that depend only on a constant-radius
neighborhood, and the verify module checks feasibility, every invariant and
the approximation ratio against an exact oracle on desk-scale instances.
"""

from .instance import (AGENT, CONSTRAINT, OBJECTIVE, DegeneracyReport,
                       DegenerateInstanceError, Edge, Instance, MMLPError,
                       ParseError, Solution, check_feasible, generate_random,
                       generate_random_tree, parse, parse_solution,
                       preprocess_degenerate, serialize, serialize_solution,
                       utility, validate)
from .unfold import (AlternatingTree, LocalView, NormalizationError,
                     alternating_tree_to_instance, build_alternating_tree,
                     canonical_form, unfold_to_depth, view_isomorphic,
                     view_to_instance)
from .transform import (BackMap, NormalizeResult, normalize,
                        t1_augment_singleton_constraints,
                        t2_reduce_constraint_degree,
                        t3_unique_objective_per_agent,
                        t4_augment_singleton_objectives,
                        t5_normalize_objective_coefficients)
from .core import (Envelopes, LayerAssignment, Params, assign_layers,
                   certify_normalized, compute_envelopes, output_solution,
                   shift_solution, smooth_bounds, solve_local, tree_bound,
                   tree_feasible, tree_tables)
from .verify import (Report, check_locality, compare, lp_feasible,
                     property_suite, ratio_bound, safe_baseline, solve_exact,
                     solve_pipeline)

__version__ = "0.1.0"
