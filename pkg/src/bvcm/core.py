"""Domain types and count statistics for block-structured interaction data.

An interaction is one post: a sender plus a non-empty multiset of
receivers.  A network is an ordered sequence of interactions over an
opaque string identifier space; identifiers are mapped to dense integer
indices on ingestion and the mapping is kept so outputs can use the
original names.  Block labels are 0-based integers in code and 1-based
in all file formats.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DataError, NumericalError

__all__ = [
    "Interaction",
    "InteractionNetwork",
    "BlockAssignment",
    "ModelParams",
    "SufficientStats",
    "log_ascending_factorial",
    "log_normalize",
    "compute_stats",
    "restrict_to_block",
    "degree_distribution",
    "block_degree_distribution",
]

# Direct product is exact and cheap for short factorials; above this the
# log-gamma form avoids O(n) work.
_DIRECT_PRODUCT_LIMIT = 64


def log_ascending_factorial(x: float, step: float, n: int) -> float:
    """log of x(x+step)(x+2*step)...(x+(n-1)*step); 0.0 when n == 0.

    All factors must be strictly positive, otherwise a NumericalError
    names the first offending factor index.
    """
    if n < 0:
        raise NumericalError(f"ascending factorial needs n >= 0, got {n}")
    if n == 0:
        return 0.0
    if n <= _DIRECT_PRODUCT_LIMIT or step <= 0:
        total = 0.0
        for k in range(n):
            f = x + k * step
            if f <= 0.0:
                raise NumericalError(
                    f"ascending factorial factor x + k*step = {f} <= 0 at k={k} "
                    f"(x={x}, step={step}, n={n})"
                )
            total += math.log(f)
        return total
    if x <= 0.0:
        raise NumericalError(
            f"ascending factorial factor x + k*step = {x} <= 0 at k=0 "
            f"(x={x}, step={step}, n={n})"
        )
    # step > 0: [x]_step^n = step^n * Gamma(x/step + n) / Gamma(x/step)
    r = x / step
    return n * math.log(step) + math.lgamma(r + n) - math.lgamma(r)


def log_normalize(log_weights: Sequence[float]) -> list[float]:
    """Probabilities from unnormalized log weights via a stable log-sum-exp."""
    m = max(log_weights)
    ws = [math.exp(w - m) for w in log_weights]
    t = sum(ws)
    return [w / t for w in ws]


@dataclass(frozen=True)
class Interaction:
    """One post: sender index plus receiver indices (multiset, ordered as drawn).

    ``sender`` is None only in block-restricted views where the sender
    was dropped; full networks always carry a sender and at least one
    receiver.
    """

    sender: Optional[int]
    receivers: tuple[int, ...]

    def arity(self) -> int:
        return (self.sender is not None) + len(self.receivers)


class InteractionNetwork:
    """Ordered sequence of interactions over a dense node index space."""

    def __init__(
        self,
        interactions: list[Interaction],
        node_ids: list[str],
        kept_labels: Optional[list[int]] = None,
    ):
        self.interactions = interactions
        self.node_ids = node_ids
        # 1-based positions in the parent network, set on restricted views.
        self.kept_labels = kept_labels
        self._index = {name: i for i, name in enumerate(node_ids)}

    @classmethod
    def from_records(
        cls, records: Iterable[tuple[str, Sequence[str]]]
    ) -> "InteractionNetwork":
        node_ids: list[str] = []
        index: dict[str, int] = {}

        def idx(name: str) -> int:
            i = index.get(name)
            if i is None:
                i = len(node_ids)
                index[name] = i
                node_ids.append(name)
            return i

        interactions = []
        for pos, (sender, receivers) in enumerate(records, start=1):
            if sender is None or sender == "":
                raise DataError(f"interaction {pos}: missing sender")
            if not receivers:
                raise DataError(f"interaction {pos}: empty receiver list")
            s = idx(str(sender))
            rs = tuple(idx(str(r)) for r in receivers)
            interactions.append(Interaction(s, rs))
        return cls(interactions, node_ids)

    @property
    def m(self) -> int:
        return len(self.interactions)

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    def node_index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise DataError(f"unknown node identifier {name!r}") from None

    def records(self) -> Iterable[tuple[str, list[str]]]:
        for it in self.interactions:
            sender = self.node_ids[it.sender] if it.sender is not None else ""
            yield sender, [self.node_ids[r] for r in it.receivers]

    def prefix(self, m: int) -> "InteractionNetwork":
        """Network of the first m interactions, node table compacted."""
        records = (
            (self.node_ids[it.sender], [self.node_ids[r] for r in it.receivers])
            for it in self.interactions[:m]
        )
        return InteractionNetwork.from_records(records)

    def __len__(self) -> int:
        return len(self.interactions)

    def __repr__(self) -> str:
        return f"InteractionNetwork(m={self.m}, n_nodes={self.n_nodes})"


@dataclass
class BlockAssignment:
    """Block label per node index; labels are 0-based, k is the label count."""

    labels: np.ndarray
    k: int

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.k <= 0:
            raise DataError(f"number of blocks must be positive, got {self.k}")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.k):
            bad = int(np.argmax((self.labels < 0) | (self.labels >= self.k)))
            raise DataError(
                f"label {self.labels[bad]} at node index {bad} outside [0, {self.k})"
            )

    @classmethod
    def from_mapping(
        cls, network: InteractionNetwork, mapping: dict[str, int], k: int
    ) -> "BlockAssignment":
        """Build from a node-id -> 1-based block mapping."""
        labels = np.empty(network.n_nodes, dtype=np.int64)
        for i, name in enumerate(network.node_ids):
            if name not in mapping:
                raise DataError(f"node {name!r} has no block assignment")
            labels[i] = mapping[name] - 1
        return cls(labels, k)

    def to_mapping(self, network: InteractionNetwork) -> dict[str, int]:
        """Node-id -> 1-based block mapping, using the original identifiers."""
        return {
            name: int(self.labels[i]) + 1 for i, name in enumerate(network.node_ids)
        }


@dataclass
class ModelParams:
    """Model parameters.

    alpha/theta are the per-block Pitman-Yor discount and strength;
    block_conc is the concentration of the sender-block urn and
    recv_conc the concentration of each receiver-block urn.  block_probs
    and propensity, when set, fix the block-frequency vector and the
    row-stochastic mixing matrix used by the conditional-iid generator
    (otherwise they are drawn from the matching symmetric Dirichlets).
    """

    alpha: np.ndarray
    theta: np.ndarray
    block_conc: float
    recv_conc: float
    block_probs: Optional[np.ndarray] = None
    propensity: Optional[np.ndarray] = None

    _SIMPLEX_TOL = 1e-12

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=float)
        self.theta = np.asarray(self.theta, dtype=float)
        if self.alpha.shape != self.theta.shape or self.alpha.ndim != 1:
            raise DataError("alpha and theta must be 1-d arrays of equal length")
        if np.any(self.alpha <= 0) or np.any(self.alpha >= 1):
            raise DataError(f"alpha entries must lie in (0,1), got {self.alpha}")
        if np.any(self.theta <= -self.alpha):
            raise DataError("theta entries must exceed -alpha")
        if self.block_conc <= 0 or self.recv_conc <= 0:
            raise DataError("concentrations must be positive")
        if self.block_probs is not None:
            self.block_probs = np.asarray(self.block_probs, dtype=float)
            if self.block_probs.shape != (self.k,):
                raise DataError("block_probs must have one entry per block")
            if abs(self.block_probs.sum() - 1.0) > 1e-9 or np.any(self.block_probs < 0):
                raise DataError("block_probs must lie on the simplex")
            self.block_probs = self.block_probs / self.block_probs.sum()
        if self.propensity is not None:
            self.propensity = np.asarray(self.propensity, dtype=float)
            if self.propensity.shape != (self.k, self.k):
                raise DataError("propensity must be a k x k matrix")
            rows = self.propensity.sum(axis=1)
            if np.any(np.abs(rows - 1.0) > 1e-9) or np.any(self.propensity < 0):
                raise DataError("propensity rows must lie on the simplex")
            self.propensity = self.propensity / rows[:, None]

    @property
    def k(self) -> int:
        return len(self.alpha)


@dataclass
class SufficientStats:
    """All count statistics of a (network, assignment) pair.

    deg counts every appearance of a node (sender or receiver) with
    multiplicity.  initiations[b] is the number of interactions whose
    sender lies in block b.  pair[b, b'] counts (sender-block b,
    receiver-block b') slots.  nbr_block[i, b'] counts i's
    sender<->receiver counterparties that lie in block b' (a self pair
    contributes two events to its node).  block_sizes and block_deg are
    the non-isolated node count and total degree per block, and
    deg_hist_by_block[b][d] is the number of block-b nodes of degree d.
    """

    m: int
    deg: np.ndarray
    initiations: np.ndarray
    pair: np.ndarray
    nbr_block: np.ndarray
    block_sizes: np.ndarray
    block_deg: np.ndarray
    deg_hist_by_block: list[Counter] = field(default_factory=list)

    @property
    def total_receivers(self) -> int:
        return int(self.pair.sum())


def _check_assignment(network: InteractionNetwork, assignment: BlockAssignment) -> None:
    if len(assignment.labels) != network.n_nodes:
        if len(assignment.labels) < network.n_nodes:
            missing = network.node_ids[len(assignment.labels)]
            raise DataError(f"node {missing!r} has no block assignment")
        raise DataError(
            f"assignment covers {len(assignment.labels)} nodes but the network "
            f"has {network.n_nodes}"
        )


def compute_stats(
    network: InteractionNetwork, assignment: BlockAssignment
) -> SufficientStats:
    """Aggregate every count the likelihood and sampler need.

    Pure function of its inputs; interaction order does not affect any
    field.
    """
    _check_assignment(network, assignment)
    k = assignment.k
    labels = assignment.labels
    n = network.n_nodes
    deg = np.zeros(n, dtype=np.int64)
    initiations = np.zeros(k, dtype=np.int64)
    pair = np.zeros((k, k), dtype=np.int64)
    nbr_block = np.zeros((n, k), dtype=np.int64)

    for it in network.interactions:
        s = it.sender
        if s is not None:
            deg[s] += 1
            bs = labels[s]
            initiations[bs] += 1
        for r in it.receivers:
            deg[r] += 1
            br = labels[r]
            if s is not None:
                pair[labels[s], br] += 1
                nbr_block[s, br] += 1
                nbr_block[r, labels[s]] += 1

    block_sizes = np.zeros(k, dtype=np.int64)
    block_deg = np.zeros(k, dtype=np.int64)
    hists = [Counter() for _ in range(k)]
    for i in range(n):
        d = int(deg[i])
        if d == 0:
            continue
        b = labels[i]
        block_sizes[b] += 1
        block_deg[b] += d
        hists[b][d] += 1

    return SufficientStats(
        m=network.m,
        deg=deg,
        initiations=initiations,
        pair=pair,
        nbr_block=nbr_block,
        block_sizes=block_sizes,
        block_deg=block_deg,
        deg_hist_by_block=hists,
    )


def restrict_to_block(
    network: InteractionNetwork, assignment: BlockAssignment, block: int
) -> InteractionNetwork:
    """Keep only the constituents of one block, dropping emptied interactions.

    The surviving interactions remember their original 1-based position
    through ``kept_labels``.
    """
    _check_assignment(network, assignment)
    if not 0 <= block < assignment.k:
        raise DataError(f"block {block} outside [0, {assignment.k})")
    labels = assignment.labels
    kept: list[Interaction] = []
    kept_pos: list[int] = []
    for pos, it in enumerate(network.interactions, start=1):
        sender = it.sender if it.sender is not None and labels[it.sender] == block else None
        receivers = tuple(r for r in it.receivers if labels[r] == block)
        if sender is None and not receivers:
            continue
        kept.append(Interaction(sender, receivers))
        kept_pos.append(pos)
    return InteractionNetwork(kept, network.node_ids, kept_labels=kept_pos)


def degree_distribution(network: InteractionNetwork) -> Counter:
    """Map degree -> number of nodes with that degree (non-isolated only)."""
    deg = Counter()
    for it in network.interactions:
        if it.sender is not None:
            deg[it.sender] += 1
        for r in it.receivers:
            deg[r] += 1
    hist = Counter()
    for d in deg.values():
        hist[d] += 1
    return hist


def block_degree_distribution(
    network: InteractionNetwork, assignment: BlockAssignment, block: int
) -> Counter:
    """Degree histogram of the block-restricted network."""
    return degree_distribution(restrict_to_block(network, assignment, block))
