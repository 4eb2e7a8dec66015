"""Synthetic learner that stands in for a language model.

The oracle remembers every edge its context has revealed and represents
each token by the energy minimizers of the graph observed so far. Its
representations therefore minimize Dirichlet energy on what it has seen,
and its next-token distribution is uniform over a node's observed
neighbours.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from ..dgp import ContextSequence
from ..errors import ArgumentError
from ..graphs import Graph, connected_components
from ..reprtable import ReprTable
from ..spectral import energy_minimizers

DEFAULT_EMBED_DIM = 3
DEFAULT_NOISE = 0.05


@dataclass(frozen=True)
class OracleState:
    n: int
    edges: frozenset = field(default_factory=frozenset)
    embed_dim: int = DEFAULT_EMBED_DIM
    noise_scale: float = DEFAULT_NOISE
    seed: int = 0

    @cached_property
    def observed_graph(self) -> Graph:
        return Graph(self.n, tuple(sorted(self.edges)), "custom")

    def with_edges(self, pairs) -> "OracleState":
        new = {(min(a, b), max(a, b)) for a, b in pairs if a != b}
        if new <= self.edges:
            return self
        return replace(self, edges=self.edges | new)


def oracle_update(state: OracleState, context: ContextSequence) -> OracleState:
    return state.with_edges(context.observed_edges())


def singular_weights(embed_dim: int) -> np.ndarray:
    return np.arange(embed_dim, 0, -1, dtype=np.float64)


def oracle_reprs(state: OracleState, n: int | None = None) -> ReprTable:
    """Token representations for the current state.

    Nodes in observed components of size >= 2 get ``w_k * z^(k+1)`` of the
    observed subgraph on those nodes, with weights ``embed_dim, ..., 1``.
    Every row then gets seeded Gaussian noise of scale ``noise_scale``, so an
    isolated or unseen token's row is pure noise. The result is a pure
    function of the state.
    """
    n = state.n if n is None else n
    if state.embed_dim < 2:
        raise ArgumentError("embed_dim must be >= 2")
    g = state.observed_graph
    D = state.embed_dim
    H = np.zeros((n, D))
    seen = [v for comp in connected_components(g).components if len(comp) > 1 for v in comp]
    if seen:
        sub, keep = g.subgraph(seen)
        k = min(D + 1, sub.n)
        Z = energy_minimizers(sub, k).vectors[:, 1:]
        H[keep, : k - 1] = Z * singular_weights(D)[: k - 1]
    if state.noise_scale > 0:
        codes = [u * state.n + v for u, v in sorted(state.edges)]
        rng = np.random.default_rng([int(state.seed), len(codes), *codes])
        H += state.noise_scale * rng.standard_normal((n, D))
    return ReprTable.full(H)


def oracle_predict(state: OracleState, current: int, n: int | None = None) -> np.ndarray:
    """Uniform over the observed neighbours of ``current``; uniform over all nodes if none."""
    n = state.n if n is None else n
    if not 0 <= current < n:
        raise IndexError(f"node {current} out of range for n={n}")
    probs = np.zeros(n)
    nbrs = [b if a == current else a for a, b in state.edges if current in (a, b)]
    if nbrs:
        probs[nbrs] = 1.0 / len(nbrs)
    else:
        probs[:] = 1.0 / n
    return probs
