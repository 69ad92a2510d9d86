"""Potential-function verifier, reference oracle and ratio reporting."""
from .bounds import YoungResult, ratio, young_check
from .oracle import OracleGrid, OracleResult, SingleJobOpt, default_grid, oracle_opt, single_job_opt
from .potential import (
    EventJump,
    PotentialParams,
    RunningSample,
    VerifierReport,
    check_events,
    check_running,
    potential,
    verify,
)

__all__ = [
    "EventJump",
    "OracleGrid",
    "OracleResult",
    "PotentialParams",
    "RunningSample",
    "SingleJobOpt",
    "VerifierReport",
    "YoungResult",
    "check_events",
    "check_running",
    "default_grid",
    "oracle_opt",
    "potential",
    "ratio",
    "single_job_opt",
    "verify",
    "young_check",
]
