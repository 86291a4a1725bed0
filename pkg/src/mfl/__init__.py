"""Multi-level facility location: VND solvers, generator, benchmark harness."""

from .errors import (ConstructionFailed, InadmissibleMove, IncompleteMatrix,
                     IneligibleMove, InvalidInstance, InvalidParams,
                     LengthMismatch, MflError, UnsupportedLevelCount)
from .generator import GeneratorParams, generate, max_local_for
from .model import (Instance, Solution, Violation, check_feasible,
                    evaluate_full, rebuild_counters)
from .neighborhoods import (Move, NeighborhoodType, SequenceSet, apply_move,
                            delta_cost, fresh_sequences, structures_for)
from .stats import (ResultMatrix, StatReport, analyze, average_ranks,
                    bonferroni_adjust, friedman, nemenyi,
                    pairwise_wilcoxon_bonferroni, studentized_range_crit,
                    studentized_range_sf, wilcoxon_signed_rank)
from .vnd import (VARIANTS, SearchTrace, VndConfig, bvnd, construct_initial,
                  cvnd, kflip_descent, kflip_step, multi_start, pvnd, solve,
                  solve_all, uvnd)

__version__ = "0.1.0"
