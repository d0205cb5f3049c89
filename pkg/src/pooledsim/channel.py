"""Noisy additive queries: every edge reads its agent's bit through the channel."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .designs import PoolingGraph
from .model import ChannelMatrix, GroundTruth

__all__ = ["QueryOutcomes", "read_bit", "run_queries", "effective_p"]


@dataclass(frozen=True, eq=False)
class QueryOutcomes:
    """Per-query noisy sums of the incident agents' read bits."""

    results: np.ndarray

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, QueryOutcomes):
            return NotImplemented
        return np.array_equal(self.results, other.results)


def read_bit(bit: int, channel: ChannelMatrix, rng: np.random.Generator) -> int:
    """One read of a single bit through the channel; independent across calls."""
    prob = channel.s11 if bit else channel.s01
    return int(rng.random() < prob)


def run_queries(
    graph: PoolingGraph,
    truth: GroundTruth,
    channel: ChannelMatrix,
    rng: np.random.Generator,
) -> QueryOutcomes:
    """Simulate all queries: each edge is one independent read of its agent's bit.

    Every copy of a multi-edge is read independently, so a query's result can
    count the same agent several times.  Reads consume the random stream in the
    sorted-edge-list order, which makes outcomes a deterministic function of
    (graph, truth, channel, seed).
    """
    if truth.n != graph.n_agents:
        raise ValueError(f"truth has {truth.n} agents but graph has {graph.n_agents}")
    agents, queries = graph.expanded()
    read_prob = np.where(truth.bits[agents] == 1, channel.s11, channel.s01)
    reads = rng.random(agents.size) < read_prob
    results = np.bincount(queries, weights=reads, minlength=graph.n_queries).astype(np.int64)
    results.setflags(write=False)
    return QueryOutcomes(results=results)


def effective_p(p: float, channel: ChannelMatrix) -> float:
    """Probability that a random read comes back one under prior p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    return p * (channel.s11 - channel.s01) + channel.s01
