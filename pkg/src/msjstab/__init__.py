"""Stability analysis of two-class FCFS multiserver-job systems."""

import logging

from .errors import ConsistencyError, EnumerationTooLarge, ParameterError, ReducibleChainError
from .model import MsjParams, SaturatedState, Verdict, enumerate_states, s1, s2, validate
from .phases import RmParams, rm_is_stable, rm_throughput_dp, rm_throughput_enumerate
from .saturated import (
    ctmc_steady_state,
    embedded_steady_state,
    saturated_wastage,
    solve_dtmc_oracle,
    transition_matrix,
    verify_balance,
)
from .simulator import SimConfig, SimStats, simulate
from .stability import classify, lambda_naive, lambda_star, report, sweep_mix, sweep_ratio

__version__ = "0.1.0"

logging.getLogger(__name__).addHandler(logging.NullHandler())

__all__ = [
    "ConsistencyError", "EnumerationTooLarge", "ParameterError", "ReducibleChainError",
    "MsjParams", "SaturatedState", "Verdict", "enumerate_states", "s1", "s2", "validate",
    "RmParams", "rm_is_stable", "rm_throughput_dp", "rm_throughput_enumerate",
    "ctmc_steady_state", "embedded_steady_state", "saturated_wastage", "solve_dtmc_oracle",
    "transition_matrix", "verify_balance",
    "SimConfig", "SimStats", "simulate",
    "classify", "lambda_naive", "lambda_star", "report", "sweep_mix", "sweep_ratio",
]
