"""Exact log-probability of an observed network given block structure.

``log_prob_sequential`` is the fully collapsed form: the block urn, the
per-block node urns and the receiver-block urns are all marginalized,
leaving a product of Dirichlet-multinomial factors and one Pitman-Yor
EPPF per block.  ``log_prob_conditional`` instead conditions on an
explicit block-frequency vector and mixing matrix.  Both are pure
functions of the count statistics, hence invariant to interaction
order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    BlockAssignment,
    InteractionNetwork,
    ModelParams,
    SufficientStats,
    compute_stats,
    log_ascending_factorial,
)
from .errors import UsageError

__all__ = [
    "LogProb",
    "ConditionalLogProb",
    "log_prob_sequential",
    "log_prob_conditional",
    "marginal_log_likelihood",
    "block_eppf",
]


@dataclass(frozen=True)
class LogProb:
    """Total log-probability and its three-addend decomposition.

    term_block covers the sender-block urn, term_nodes the per-block
    node urns (EPPFs), term_prop the receiver-block urns.
    """

    value: float
    term_block: float
    term_nodes: float
    term_prop: float


@dataclass(frozen=True)
class ConditionalLogProb:
    """Log-probability given explicit block frequencies and mixing matrix.

    When a zero-probability factor carries a positive count the value is
    -inf and the offending coordinates are listed so downstream
    averaging can reject loudly instead of propagating a sentinel.
    """

    value: float
    zero_blocks: tuple[int, ...] = ()
    zero_pairs: tuple[tuple[int, int], ...] = ()

    @property
    def is_neg_inf(self) -> bool:
        return bool(self.zero_blocks) or bool(self.zero_pairs)


def block_eppf(
    n_nodes: int, total_deg: int, deg_hist, alpha: float, theta: float
) -> float:
    """Log Pitman-Yor EPPF of one block.

    ``deg_hist`` maps degree -> node count; empty blocks contribute 0.
    """
    if n_nodes == 0:
        return 0.0
    out = log_ascending_factorial(theta + alpha, alpha, n_nodes - 1)
    out -= log_ascending_factorial(theta + 1.0, 1.0, total_deg - 1)
    for d, c in deg_hist.items():
        if d > 1:
            out += c * log_ascending_factorial(1.0 - alpha, 1.0, d - 1)
    return out


def _validate_params(k: int, alpha, theta, block_conc: float, recv_conc: float) -> None:
    alpha = np.asarray(alpha, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if alpha.shape != (k,) or theta.shape != (k,):
        raise UsageError(f"alpha/theta must have one entry per block ({k})")
    # Reuse the ModelParams domain checks.
    ModelParams(alpha=alpha, theta=theta, block_conc=block_conc, recv_conc=recv_conc)


def log_prob_from_stats(
    stats: SufficientStats,
    k: int,
    block_conc: float,
    recv_conc: float,
    alpha: Sequence[float],
    theta: Sequence[float],
) -> LogProb:
    la = log_ascending_factorial
    term_block = -la(k * block_conc, 1.0, stats.m)
    for b in range(k):
        term_block += la(block_conc, 1.0, int(stats.initiations[b]))

    term_nodes = 0.0
    for b in range(k):
        term_nodes += block_eppf(
            int(stats.block_sizes[b]),
            int(stats.block_deg[b]),
            stats.deg_hist_by_block[b],
            float(alpha[b]),
            float(theta[b]),
        )

    term_prop = 0.0
    for b in range(k):
        r_b = int(stats.pair[b].sum())
        if r_b == 0:
            continue
        term_prop -= la(k * recv_conc, 1.0, r_b)
        for b2 in range(k):
            term_prop += la(recv_conc, 1.0, int(stats.pair[b, b2]))

    return LogProb(
        value=term_block + term_nodes + term_prop,
        term_block=term_block,
        term_nodes=term_nodes,
        term_prop=term_prop,
    )


def log_prob_sequential(
    network: InteractionNetwork,
    assignment: BlockAssignment,
    block_conc: float,
    recv_conc: float,
    alpha: Sequence[float],
    theta: Sequence[float],
) -> LogProb:
    """Collapsed log P(network, assignment) under the urn scheme."""
    _validate_params(assignment.k, alpha, theta, block_conc, recv_conc)
    stats = compute_stats(network, assignment)
    return log_prob_from_stats(
        stats, assignment.k, block_conc, recv_conc, alpha, theta
    )


def log_prob_conditional(
    network: InteractionNetwork,
    assignment: BlockAssignment,
    block_probs: Sequence[float],
    propensity,
    alpha: Sequence[float],
    theta: Sequence[float],
) -> ConditionalLogProb:
    """Log-probability conditional on explicit (frequencies, mixing matrix)."""
    k = assignment.k
    pi = np.asarray(block_probs, dtype=float)
    prop = np.asarray(propensity, dtype=float)
    if pi.shape != (k,) or abs(pi.sum() - 1.0) > 1e-9 or np.any(pi < 0):
        raise UsageError("block_probs must lie on the k-simplex")
    if prop.shape != (k, k) or np.any(np.abs(prop.sum(axis=1) - 1.0) > 1e-9):
        raise UsageError("propensity rows must lie on the k-simplex")
    stats = compute_stats(network, assignment)

    zero_blocks = []
    zero_pairs = []
    value = 0.0
    for b in range(k):
        l_b = int(stats.initiations[b])
        if l_b:
            if pi[b] <= 0.0:
                zero_blocks.append(b)
            else:
                value += l_b * np.log(pi[b])
        value += block_eppf(
            int(stats.block_sizes[b]),
            int(stats.block_deg[b]),
            stats.deg_hist_by_block[b],
            float(alpha[b]),
            float(theta[b]),
        )
        for b2 in range(k):
            c = int(stats.pair[b, b2])
            if not c:
                continue
            if prop[b, b2] <= 0.0:
                zero_pairs.append((b, b2))
            else:
                value += c * np.log(prop[b, b2])
    if zero_blocks or zero_pairs:
        return ConditionalLogProb(
            float("-inf"), tuple(zero_blocks), tuple(zero_pairs)
        )
    return ConditionalLogProb(float(value))


def marginal_log_likelihood(network: InteractionNetwork, chain) -> float:
    """Posterior-mean collapsed log-probability over post-burn-in samples.

    The score used for choosing the number of blocks: the mean of
    log_prob_sequential evaluated at each sampled (assignment, alpha,
    theta) with the chain's fixed urn concentrations.  Chains produced
    by run_gibbs carry these values per iteration already; they are
    reused when present.
    """
    post = range(chain.burn_in, len(chain.alphas))
    if len(post) == 0:
        raise UsageError("chain has no post-burn-in samples")
    if getattr(chain, "log_probs", None) is not None:
        return float(np.mean(chain.log_probs[chain.burn_in:]))
    vals = []
    for s in post:
        lp = log_prob_sequential(
            network,
            BlockAssignment(chain.assignments[s], chain.k),
            chain.block_conc,
            chain.recv_conc,
            chain.alphas[s],
            chain.thetas[s],
        )
        vals.append(lp.value)
    return float(np.mean(vals))
