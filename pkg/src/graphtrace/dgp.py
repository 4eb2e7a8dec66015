"""Context generators: random walks and i.i.d. neighbour pairs over a graph.

Every sampler is a pure function of ``(graph, params, seed)``. Randomness
comes from numpy's counter-based Philox generator; sequence ``k`` of a batch
draws from a seed derived from ``(master_seed, k)`` alone, so batches can be
generated in any order or in parallel.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, InvalidSizeError, NoEdgeError, NoNeighborError
from .graphs import Graph


class DGPKind(str, Enum):
    WALK = "walk"
    PAIRS = "pairs"


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def derive_seed(master_seed: int, index: int) -> int:
    """Child seed for stream ``index``; depends only on the two integers."""
    return int(np.random.SeedSequence([int(master_seed), int(index)]).generate_state(1, np.uint64)[0] >> 1)


@dataclass(frozen=True)
class Vocabulary:
    labels: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.labels)) != len(self.labels):
            raise DataError("vocabulary labels must be distinct")

    def label(self, node: int) -> str:
        return self.labels[node]

    def to_dict(self) -> dict:
        return {"labels": list(self.labels)}


@dataclass(frozen=True)
class ContextSequence:
    tokens: tuple[int, ...]
    kind: DGPKind
    seed: int
    graph: str = ""
    labels: tuple[str, ...] | None = None

    def __len__(self):
        return len(self.tokens)

    def prefix(self, length: int) -> "ContextSequence":
        labels = None if self.labels is None else self.labels[:length]
        return ContextSequence(self.tokens[:length], self.kind, self.seed, self.graph, labels)

    def observed_edges(self) -> list[tuple[int, int]]:
        """Edges revealed by the context: consecutive tokens or within-pair tokens."""
        t = self.tokens
        if self.kind is DGPKind.WALK:
            pairs = zip(t[:-1], t[1:])
        else:
            pairs = zip(t[0:-1:2], t[1::2])
        return [(a, b) for a, b in pairs if a != b]

    def to_dict(self) -> dict:
        obj = {"seed": self.seed, "kind": self.kind.value, "graph": self.graph, "tokens": list(self.tokens)}
        if self.labels is not None:
            obj["labels"] = list(self.labels)
        return obj

    @classmethod
    def from_dict(cls, obj: dict) -> "ContextSequence":
        try:
            labels = obj.get("labels")
            return cls(
                tuple(int(x) for x in obj["tokens"]),
                DGPKind(obj["kind"]),
                int(obj["seed"]),
                str(obj.get("graph", "")),
                None if labels is None else tuple(str(x) for x in labels),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed context record: {exc}") from exc


@dataclass(frozen=True)
class PromptBatch:
    sequences: tuple[ContextSequence, ...]

    def __len__(self):
        return len(self.sequences)

    def __iter__(self):
        return iter(self.sequences)

    def prefix(self, length: int) -> "PromptBatch":
        return PromptBatch(tuple(s.prefix(length) for s in self.sequences))


def sample_walk(g: Graph, length: int, start: int, seed: int) -> ContextSequence:
    """Simple random walk of ``length`` tokens beginning at ``start``."""
    if length < 1:
        raise InvalidSizeError(f"walk length must be >= 1, got {length}")
    if not 0 <= start < g.n:
        raise IndexError(f"start node {start} out of range for n={g.n}")
    nbrs = g.adjacency_lists
    if length > 1 and not nbrs[start]:
        raise NoNeighborError(f"start node {start} is isolated")
    u = make_rng(seed).random(length - 1)
    tokens = [start]
    cur = start
    for x in u:
        options = nbrs[cur]
        # reachable from start, so never empty once start has a neighbour
        cur = options[int(x * len(options))]
        tokens.append(cur)
    return ContextSequence(tuple(tokens), DGPKind.WALK, seed, g.graph_id)


def _oriented_edges(rng: np.random.Generator, edges: np.ndarray, count: int) -> np.ndarray:
    idx = rng.integers(0, len(edges), size=count)
    flip = rng.integers(0, 2, size=count).astype(bool)
    chosen = edges[idx]
    chosen[flip] = chosen[flip][:, ::-1]
    return chosen


def sample_pairs(g: Graph, num_pairs: int, seed: int) -> ContextSequence:
    """``num_pairs`` i.i.d. uniformly chosen edges, each in a random orientation."""
    if num_pairs < 1:
        raise InvalidSizeError(f"num_pairs must be >= 1, got {num_pairs}")
    if g.num_edges == 0:
        raise NoEdgeError("cannot sample neighbour pairs from an edgeless graph")
    pairs = _oriented_edges(make_rng(seed), g.edge_array(), num_pairs)
    return ContextSequence(tuple(int(x) for x in pairs.ravel()), DGPKind.PAIRS, seed, g.graph_id)


def _pairs_from(g: Graph, length: int, start: int, seed: int) -> ContextSequence:
    # first pair is an edge incident to `start`, written start-first
    nbrs = g.adjacency_lists[start]
    if not nbrs:
        raise NoNeighborError(f"start node {start} is isolated")
    rng = make_rng(seed)
    first = nbrs[int(rng.integers(0, len(nbrs)))]
    num_pairs = (length + 1) // 2
    rest = _oriented_edges(rng, g.edge_array(), num_pairs - 1).ravel()
    tokens = (start, first, *(int(x) for x in rest))
    return ContextSequence(tokens[:length], DGPKind.PAIRS, seed, g.graph_id)


def make_batch(g: Graph, length: int, kind: DGPKind | str, seed: int) -> PromptBatch:
    """One context of ``length`` tokens per start node.

    Pair contexts hold ``ceil(length / 2)`` pairs truncated to ``length``
    tokens, so an odd length ends on the first half of a pair.
    """
    kind = DGPKind(kind)
    if length < 1:
        raise InvalidSizeError(f"context length must be >= 1, got {length}")
    if kind is DGPKind.PAIRS and g.num_edges == 0:
        raise NoEdgeError("cannot sample neighbour pairs from an edgeless graph")
    seqs = []
    for k in range(g.n):
        s = derive_seed(seed, k)
        if kind is DGPKind.WALK:
            seqs.append(sample_walk(g, length, k, s))
        else:
            seqs.append(_pairs_from(g, length, k, s))
    return PromptBatch(tuple(seqs))


def assign_labels(g: Graph, label_pool: Sequence[str], seed: int) -> Vocabulary:
    """Place ``n`` labels drawn from ``label_pool`` on the nodes in random order."""
    if len(set(label_pool)) != len(label_pool):
        raise DataError("label pool contains duplicates")
    if len(label_pool) < g.n:
        raise InvalidSizeError(f"label pool has {len(label_pool)} entries, graph needs {g.n}")
    picks = make_rng(seed).permutation(len(label_pool))[: g.n]
    return Vocabulary(tuple(label_pool[i] for i in picks))


def attach_labels(batch: PromptBatch, vocab: Vocabulary) -> PromptBatch:
    return PromptBatch(
        tuple(
            ContextSequence(s.tokens, s.kind, s.seed, s.graph, tuple(vocab.labels[t] for t in s.tokens))
            for s in batch
        )
    )


def dumps_jsonl(seqs: Iterable[ContextSequence]) -> str:
    return "".join(json.dumps(s.to_dict(), separators=(",", ":")) + "\n" for s in seqs)


def loads_jsonl(text: str) -> PromptBatch:
    seqs = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"contexts line {lineno}: invalid JSON ({exc})") from exc
        seqs.append(ContextSequence.from_dict(obj))
    return PromptBatch(tuple(seqs))


# Short, common English nouns with no obvious semantic links between them.
DEFAULT_LABEL_POOL = (
    "apple", "sand", "math", "bird", "car", "water", "lamp", "river", "cloud", "pencil",
    "garden", "window", "coffee", "tiger", "violin", "rocket", "forest", "candle", "mirror", "bottle",
    "island", "ladder", "pepper", "jacket", "planet", "basket", "monkey", "button", "silver", "pillow",
    "hammer", "orange", "desert", "castle", "bridge", "feather", "wallet", "marble", "engine", "carpet",
    "tunnel", "glove", "cactus", "anchor", "helmet", "puzzle", "kettle", "saddle", "magnet", "lemon",
    "wagon", "piano", "spider", "shovel", "blanket", "turtle", "compass", "needle", "onion", "statue",
    "trumpet", "canyon", "parrot", "zipper", "cookie", "falcon", "harbor", "igloo", "jungle", "koala",
)
