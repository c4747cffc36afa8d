"""Concrete score matching for discrete data."""

from ._csm import (
    Disconnected,
    EnumerationLimit,
    Error,
    InvalidState,
    NumericError,
    ParseError,
    Structure,
    check,
    check_suites,
    concrete_score,
    config_keys,
    evaluate,
    gen_1d_toy,
    gen_2d_toy,
    kl_and_tv,
    posterior_weights,
    reconstruct,
    recover_stein_score,
    run_chain,
    sample,
    train,
    triangular_pdf,
)

__all__ = [
    "Disconnected",
    "EnumerationLimit",
    "Error",
    "InvalidState",
    "NumericError",
    "ParseError",
    "Structure",
    "check",
    "check_suites",
    "concrete_score",
    "config_keys",
    "evaluate",
    "gen_1d_toy",
    "gen_2d_toy",
    "kl_and_tv",
    "posterior_weights",
    "reconstruct",
    "recover_stein_score",
    "run_chain",
    "sample",
    "train",
    "triangular_pdf",
]
