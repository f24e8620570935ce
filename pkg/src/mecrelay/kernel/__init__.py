"""Reusable numerical routines."""
from .lse import LseProgram, LseResult, log_sum_exp, solve_lse_program
from .polyblock import MonotoneProblem, PolyblockResult, polyblock_maximize
from .scalar import (ScalarProblem, bisect_increasing, bracket_increasing, golden_iteration_bound,
                     golden_search)

__all__ = [
    "LseProgram", "LseResult", "log_sum_exp", "solve_lse_program",
    "MonotoneProblem", "PolyblockResult", "polyblock_maximize",
    "ScalarProblem", "bisect_increasing", "bracket_increasing", "golden_iteration_bound",
    "golden_search",
]
