"""Conflict-based search over ranked task sequences for multi-agent path finding."""
from .adaptations import (AdaptationConfig, choose_destinations, solve_mg_a, solve_mg_b, solve_mg_c,
                          solve_sequential, solve_variant)
from .harness import BenchConfig, RunRecord, compute_sqr, jtsp_lower_bound, run_benchmark
from .oracle import brute_force_oracle
from .pathing import Constraint, ConstraintSet, TimedPath, low_level_search, path_cost
from .search import (CTSCBS, Conflict, SolveResult, SolverConfig, detect_first_conflict, solve)
from .sequencing import (CostMatrix, EdgeConstraintSet, JointKBestStream, SingleAgentKBest,
                         TaskSequence, build_cost_matrix, joint_stream, single_agent_kbest,
                         solve_rtsp)
from .validation import Violation, validate_solution
from .world import (CTS, MG, AgentSpec, GridMap, Instance, ParseError, TaskSpec, Vertex,
                    adapt_dataset, parse_map, parse_scenario, serialize_map, serialize_scenario)

__version__ = "0.1.0"
