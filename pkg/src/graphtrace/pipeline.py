"""End-to-end oracle runs: prompt batch -> oracle states -> energies and accuracy.

For context length ``l`` each sequence of the batch is summarised by the
oracle state built from its first ``l`` tokens. That state's table gives the
energies; energies are computed per context and averaged over the batch,
because tables of different contexts live in unrelated eigenvector frames
(signs and rotations within repeated eigenvalues) and pooling them would mix
those frames. The prediction scored at length ``l`` is made at the final
token ``c_(l-1)`` from the edges revealed strictly before it, so the
incoming edge of the token being continued is not yet known.

``trace_oracle`` additionally renders the oracle as per-position
activations, the form an external model dump takes.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dgp import DGPKind, PromptBatch, make_batch
from .errors import ArgumentError
from .graphs import Graph
from .metrics import AccuracyCurve, rule_following_accuracy
from .representations.aggregate import pool_tables
from .representations.dump import ActivationDump
from .representations.oracle import DEFAULT_EMBED_DIM, DEFAULT_NOISE, OracleState, oracle_predict, oracle_reprs
from .reprtable import ReprTable
from .spectral import Convention, dirichlet_energy, standardized_energy

ENERGY_METRICS = ("energy_laplacian_quadratic", "energy_ordered_pair_sum", "energy_standardized")


def _revealed_edge(tokens, i: int, kind: DGPKind):
    """Edge that becomes known once token ``i - 1`` has been read."""
    if i < 2:
        return None
    if kind is DGPKind.PAIRS and (i - 1) % 2 == 0:
        return None
    return tokens[i - 2], tokens[i - 1]


def table_energies(g: Graph, table) -> dict[str, float]:
    return {
        "energy_laplacian_quadratic": dirichlet_energy(g, table, Convention.LAPLACIAN_QUADRATIC).value,
        "energy_ordered_pair_sum": dirichlet_energy(g, table, Convention.ORDERED_PAIR_SUM).value,
        "energy_standardized": standardized_energy(g, table).value,
    }


@dataclass
class OracleSnapshot:
    """Batch view of the oracle at one context length."""

    length: int
    tables: list[ReprTable]
    coverage: list[np.ndarray]
    accuracy: float

    def energies(self, g: Graph) -> dict[str, float]:
        per = [table_energies(g, t) for t in self.tables]
        return {name: float(np.mean([p[name] for p in per])) for name in ENERGY_METRICS}

    def pooled(self) -> ReprTable:
        """Coverage-weighted merge over the batch (used for PCA views)."""
        tabs = [ReprTable(t.matrix, c, t.layer, self.length) for t, c in zip(self.tables, self.coverage)]
        return pool_tables(tabs)


def oracle_snapshots(
    g: Graph,
    batch: PromptBatch,
    lengths: Sequence[int],
    embed_dim: int = DEFAULT_EMBED_DIM,
    noise_scale: float = DEFAULT_NOISE,
    seed: int = 0,
) -> list[OracleSnapshot]:
    """One snapshot per requested length; lengths must not exceed the sequences."""
    lengths = sorted(set(int(l) for l in lengths))
    if lengths and lengths[0] < 1:
        raise ArgumentError("context lengths must be >= 1")
    tables = {l: [] for l in lengths}
    cover = {l: [] for l in lengths}
    acc = {l: [] for l in lengths}
    for seq in batch:
        tokens, kind = seq.tokens, seq.kind
        if lengths and lengths[-1] > len(tokens):
            raise ArgumentError(f"sequence of length {len(tokens)} is shorter than context length {lengths[-1]}")
        state = OracleState(g.n, frozenset(), embed_dim, noise_scale, seed)
        counts = np.zeros(g.n, dtype=np.int64)
        j = 0
        for i, tok in enumerate(tokens[: lengths[-1]] if lengths else ()):
            edge = _revealed_edge(tokens, i, kind)
            if edge is not None:
                state = state.with_edges([edge])
            counts[tok] += 1
            if i + 1 == lengths[j]:
                acc[lengths[j]].append(rule_following_accuracy(g, tok, oracle_predict(state, tok)))
                full = state
                closing = _revealed_edge(tokens, i + 1, kind)
                if closing is not None:
                    full = state.with_edges([closing])
                tables[lengths[j]].append(oracle_reprs(full))
                cover[lengths[j]].append(counts.copy())
                j += 1
                if j == len(lengths):
                    break
    return [OracleSnapshot(l, tables[l], cover[l], float(np.mean(acc[l]))) for l in lengths]


@dataclass
class OracleTrace:
    dump: ActivationDump
    accuracy: dict[int, float] = field(default_factory=dict)


def trace_oracle(
    g: Graph,
    batch: PromptBatch,
    lengths: Sequence[int] = (),
    embed_dim: int = DEFAULT_EMBED_DIM,
    noise_scale: float = DEFAULT_NOISE,
    layer: int = 0,
    seed: int = 0,
) -> OracleTrace:
    """Per-position oracle activations: token ``c_i`` is embedded with the state before ``i``."""
    wanted = set(int(l) for l in lengths)
    per_length: dict[int, list[float]] = {l: [] for l in wanted}
    parts = []
    for k, seq in enumerate(batch):
        tokens = seq.tokens
        state = OracleState(g.n, frozenset(), embed_dim, noise_scale, seed)
        table = oracle_reprs(state).matrix
        vecs = np.empty((len(tokens), embed_dim), dtype=np.float32)
        for i, tok in enumerate(tokens):
            edge = _revealed_edge(tokens, i, seq.kind)
            if edge is not None:
                nxt = state.with_edges([edge])
                if nxt is not state:
                    state = nxt
                    table = oracle_reprs(state).matrix
            vecs[i] = table[tok]
            if i + 1 in wanted:
                per_length[i + 1].append(rule_following_accuracy(g, tok, oracle_predict(state, tok)))
        m = len(tokens)
        parts.append(
            ActivationDump(embed_dim, np.full(m, k), np.arange(m), np.asarray(tokens), np.full(m, layer), vecs)
        )
    accuracy = {l: float(np.mean(v)) for l, v in per_length.items() if v}
    return OracleTrace(ActivationDump.concat(parts), accuracy)


def run_oracle_seed(
    g: Graph,
    kind,
    lengths: Sequence[int],
    seed: int,
    embed_dim: int = DEFAULT_EMBED_DIM,
    noise_scale: float = DEFAULT_NOISE,
) -> dict[str, np.ndarray]:
    """Energy and accuracy series for one master seed, aligned with sorted ``lengths``."""
    lengths = sorted(set(int(l) for l in lengths))
    batch = make_batch(g, lengths[-1], kind, seed)
    snaps = oracle_snapshots(g, batch, lengths, embed_dim, noise_scale, seed)
    out = {name: np.empty(len(lengths)) for name in ENERGY_METRICS}
    out["accuracy"] = np.array([s.accuracy for s in snaps])
    for j, s in enumerate(snaps):
        for name, value in s.energies(g).items():
            out[name][j] = value
    return out


def _run_star(args):
    return run_oracle_seed(*args)


@dataclass
class CurveSet:
    lengths: tuple[int, ...]
    seeds: tuple[int, ...]
    series: dict[str, np.ndarray]  # metric -> (seeds x lengths)

    def median(self, metric: str) -> np.ndarray:
        return np.median(self.series[metric], axis=0)

    def accuracy_curve(self) -> AccuracyCurve:
        return AccuracyCurve(self.lengths, tuple(float(x) for x in self.median("accuracy")), "rule_following")


def oracle_curves(
    g: Graph,
    kind,
    lengths: Sequence[int],
    seeds: Sequence[int],
    embed_dim: int = DEFAULT_EMBED_DIM,
    noise_scale: float = DEFAULT_NOISE,
    jobs: int = 1,
) -> CurveSet:
    """Oracle curves over several seeds; results are ordered by seed regardless of ``jobs``."""
    lengths = tuple(sorted(set(int(l) for l in lengths)))
    seeds = tuple(int(s) for s in seeds)
    if not seeds:
        raise ArgumentError("need at least one seed")
    args = [(g, DGPKind(kind), lengths, s, embed_dim, noise_scale) for s in seeds]
    if jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            runs = list(pool.map(_run_star, args))
    else:
        runs = [_run_star(a) for a in args]
    series = {name: np.vstack([r[name] for r in runs]) for name in runs[0]}
    return CurveSet(lengths, seeds, series)


def log_lengths(lo: float, hi: float, count: int) -> tuple[int, ...]:
    """Distinct integers approximately log-uniform on ``[lo, hi]``."""
    vals = np.unique(np.round(np.geomspace(lo, hi, count)).astype(int))
    return tuple(int(v) for v in vals if v >= 1)
