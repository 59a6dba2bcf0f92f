"""Exact steady-state analysis of episodic decision processes.

Policies and logits are numpy arrays of shape (num_states, num_actions); omitted
policies default to uniform and omitted logits to zeros.
"""

from ._core import (
    AnalysisError,
    Mdp,
    ParseError,
    classic_pg_exact,
    fd_gradient,
    is_episodic,
    load_model,
    parse_model,
    performance,
    perturb,
    q_values,
    softmax,
    sspg_exact,
    sspg_mc_estimate,
    state_sweeping_env,
    stationary_distribution,
    terminal_set,
    three_ael_experiment,
    toy_branch,
    toy_loop2,
    write_model,
)

__all__ = [
    "AnalysisError",
    "Mdp",
    "ParseError",
    "classic_pg_exact",
    "fd_gradient",
    "is_episodic",
    "load_model",
    "parse_model",
    "performance",
    "perturb",
    "q_values",
    "softmax",
    "sspg_exact",
    "sspg_mc_estimate",
    "state_sweeping_env",
    "stationary_distribution",
    "terminal_set",
    "three_ael_experiment",
    "toy_branch",
    "toy_loop2",
    "write_model",
]
