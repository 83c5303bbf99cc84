"""Benchmark harness: synthetic problem suite, outer trust-region loop,
performance profiles and the discretized control problem."""

from .outer import BenchRecord, OuterConfig, outer_loop
from .problems import NlpProblem, control_problem, suite
from .profile import performance_profile

__all__ = [
    "BenchRecord",
    "NlpProblem",
    "OuterConfig",
    "control_problem",
    "outer_loop",
    "performance_profile",
    "suite",
]
