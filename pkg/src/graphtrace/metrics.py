"""Behavioural metrics and analytic memorization baselines."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ArgumentError, DataError
from .graphs import Graph


@dataclass(frozen=True)
class PredictionDistribution:
    probs: np.ndarray
    source: str = "oracle"

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.ndim != 1 or not np.all(np.isfinite(p)):
            raise DataError("prediction distribution must be a finite 1-D vector")
        if np.any(p < 0):
            raise DataError("prediction distribution has negative entries")
        if abs(p.sum() - 1.0) > 1e-9:
            raise DataError(f"prediction distribution sums to {p.sum()!r}, not 1")
        object.__setattr__(self, "probs", p)


@dataclass(frozen=True)
class AccuracyCurve:
    lengths: tuple[int, ...]
    values: tuple[float, ...]
    metric: str = "rule_following"

    def __post_init__(self):
        if len(self.lengths) != len(self.values):
            raise ArgumentError("curve needs one value per context length")
        if any(b <= a for a, b in zip(self.lengths, self.lengths[1:])):
            raise ArgumentError("curve context lengths must be strictly increasing")

    @property
    def x(self) -> np.ndarray:
        return np.asarray(self.lengths, dtype=np.float64)

    @property
    def y(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)


def _probs(dist) -> np.ndarray:
    if isinstance(dist, PredictionDistribution):
        return dist.probs
    return PredictionDistribution(dist).probs


def prob_mass_on_neighbors(g: Graph, target: int, dist) -> float:
    """Probability assigned to the graph neighbours of ``target``."""
    p = _probs(dist)
    nbrs = list(g.neighbors(target))
    return float(p[nbrs].sum()) if nbrs else 0.0


def rule_following_accuracy(g: Graph, current: int, dist) -> float:
    """Mass the prediction puts on valid successors of ``current``."""
    return prob_mass_on_neighbors(g, current, dist)


def hit_at_k(g: Graph, target: int, dist, k: int) -> int:
    """1 if any of the ``k`` most probable nodes neighbours ``target``.

    Equal probabilities rank the lower node index first.
    """
    if k < 1:
        raise ArgumentError(f"k must be >= 1, got {k}")
    p = _probs(dist)
    top = np.argsort(-p, kind="stable")[:k]
    nbrs = g.neighbors(target)
    return int(any(int(v) in nbrs for v in top))


def p_seen1(n: int, l: int) -> float:
    """Chance a given node appears in ``l`` uniform draws with replacement."""
    if n < 1 or l < 0:
        raise ArgumentError("need n >= 1 and l >= 0")
    return 1.0 - ((n - 1) / n) ** l


def p_seen2(n: int, l: int) -> float:
    """Chance a given node appears at least twice in ``l`` uniform draws."""
    if l == 0:
        return 0.0
    return p_seen1(n, l) - (l / n) * ((n - 1) / n) ** (l - 1)


def memorization_curves(n: int, lengths: Sequence[int]) -> tuple[AccuracyCurve, AccuracyCurve]:
    lengths = tuple(int(x) for x in lengths)
    one = AccuracyCurve(lengths, tuple(p_seen1(n, l) for l in lengths), "memorization_1shot")
    two = AccuracyCurve(lengths, tuple(p_seen2(n, l) for l in lengths), "memorization_2shot")
    return one, two


def rescale_pc_intervention(h, target_mean, basis, tol: float = 1e-8) -> np.ndarray:
    """Replace the coordinates of ``h`` along ``basis`` with those of ``target_mean``.

    ``basis`` is ``d x k`` with orthonormal columns (typically the top
    principal directions); the part of ``h`` orthogonal to it is kept.
    """
    h = np.asarray(h, dtype=np.float64)
    t = np.asarray(target_mean, dtype=np.float64)
    B = np.asarray(basis, dtype=np.float64)
    if B.ndim == 1:
        B = B[:, None]
    if B.shape[0] != h.shape[0] or t.shape != h.shape:
        raise ArgumentError("h, target_mean and basis must share the activation dimension")
    if np.max(np.abs(B.T @ B - np.eye(B.shape[1]))) > tol:
        raise ArgumentError("intervention basis columns are not orthonormal")
    return h + B @ (B.T @ t - B.T @ h)


def load_predictions_jsonl(text: str) -> list[tuple[int, int, PredictionDistribution]]:
    """Parse ``{"step", "current", "probs"}`` lines into ``(step, current, dist)``."""
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            out.append((int(obj["step"]), int(obj["current"]), PredictionDistribution(obj["probs"], "ingested")))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError, DataError) as exc:
            raise DataError(f"predictions line {lineno}: {exc}") from exc
    return out


def accuracy_curve_from_predictions(g: Graph, records: Iterable[tuple[int, int, PredictionDistribution]]) -> AccuracyCurve:
    """Mean rule-following accuracy per step over ingested predictions."""
    by_step: dict[int, list[float]] = {}
    for step, current, dist in records:
        if len(dist.probs) != g.n:
            raise DataError(f"prediction at step {step} has {len(dist.probs)} entries, graph has {g.n} nodes")
        by_step.setdefault(step, []).append(rule_following_accuracy(g, current, dist))
    steps = tuple(sorted(by_step))
    return AccuracyCurve(steps, tuple(float(np.mean(by_step[s])) for s in steps), "rule_following")
