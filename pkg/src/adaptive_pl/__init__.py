"""Adaptive partial linearization for composite problems on product sets."""
from .blockcore import (
    BlockPartition,
    BlockProposal,
    BlockTerm,
    BlockVector,
    CompositeProblem,
    FunctionOracle,
    SmoothOracle,
    all_proposals,
    apply_block_step,
    block_proposal,
    mu_value,
    total_gap,
)
from .solver import (
    IterationRecord,
    RunTrace,
    SolverConfig,
    armijo_search,
    basic_cycle,
    convex_rule_search,
    lipschitz_step,
    solve_adaptive,
    solve_classic_cg,
)
from .subsolvers import BoxBlock, CappedSimplexBlock, ElasticDemandBlock, SimplexBlock

__version__ = "0.1.0"
