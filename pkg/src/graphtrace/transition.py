"""Transition points: hinge fits on accuracy curves, power laws and edge coverage.

Knots and power laws are fitted in log-log space. Coverage transitions are
measured with the batch protocol (one context per start node, all contexts
read in lockstep), so the natural clock is the total number of batch
tokens ``n * l``; the per-context length ``l`` is reported as well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .dgp import DGPKind, make_batch
from .errors import CoverageTimeout, DomainError, FitError, PreconditionError
from .graphs import Graph, UnionFind, build, is_connected
from .metrics import AccuracyCurve
from .pipeline import log_lengths, oracle_curves

CLIP_EPS = 1e-6
GRID_POINTS = 50
KNOT_TOL = 1e-3

# exponents quoted for language-model behaviour; never produced here
REFERENCE_EXPONENTS = {"square_grid": 0.490, "hex": 0.65, "percolation": 0.5}


@dataclass(frozen=True)
class BreakpointFit:
    knot: float
    slopes: tuple[float, float]
    sse_two_piece: float
    sse_single_line: float
    r2: float
    intercept: float = 0.0
    degenerate: bool = False
    clipped: int = 0

    @property
    def log_knot(self) -> float:
        return math.log(self.knot)

    def predict(self, x) -> np.ndarray:
        """Fitted curve evaluated at ``x`` (original units)."""
        u = np.log(np.asarray(x, dtype=np.float64)) - self.log_knot
        v = self.intercept + self.slopes[0] * np.minimum(u, 0) + self.slopes[1] * np.maximum(u, 0)
        return np.exp(v)


@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    prefactor: float
    r2: float
    points: tuple[tuple[float, float], ...]

    def predict(self, n) -> np.ndarray:
        return self.prefactor * np.asarray(n, dtype=np.float64) ** self.exponent


def _hinge(u: np.ndarray, v: np.ndarray, k: float):
    X = np.column_stack([np.ones_like(u), np.minimum(u - k, 0.0), np.maximum(u - k, 0.0)])
    coef, *_ = np.linalg.lstsq(X, v, rcond=None)
    r = v - X @ coef
    return float(r @ r), coef


def _line_sse(u: np.ndarray, v: np.ndarray) -> float:
    X = np.column_stack([np.ones_like(u), u])
    coef, *_ = np.linalg.lstsq(X, v, rcond=None)
    r = v - X @ coef
    return float(r @ r)


def _xy(curve, y=None):
    if isinstance(curve, AccuracyCurve):
        return curve.x, curve.y
    return np.asarray(curve, dtype=np.float64), np.asarray(y, dtype=np.float64)


def fit_breakpoint(curve, y=None, clip: bool = False) -> BreakpointFit:
    """Continuous two-segment least-squares fit of ``log y`` against ``log x``.

    ``curve`` is an ``AccuracyCurve`` or an x array (with ``y`` given).
    Candidate knots are the interior observed x values plus 50 log-uniform
    points; the best candidate is refined by bounded golden-section search
    to 1e-3 in log x. With ``clip=True`` non-positive y values are raised to
    1e-6 and counted in ``clipped``.
    """
    x, y = _xy(curve, y)
    if x.shape != y.shape or x.ndim != 1:
        raise FitError("x and y must be 1-D arrays of equal length")
    if len(x) < 8:
        raise FitError(f"breakpoint fit needs at least 8 points, got {len(x)}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DomainError("breakpoint fit needs finite values")
    if np.any(x <= 0):
        raise DomainError("breakpoint fit needs strictly positive x")
    clipped = int(np.sum(y <= 0))
    if clipped and not clip:
        raise DomainError(f"{clipped} non-positive y values; pass clip=True to clip them at {CLIP_EPS}")
    y = np.where(y <= 0, CLIP_EPS, y)
    order = np.argsort(x, kind="stable")
    u, v = np.log(x[order]), np.log(y[order])
    lo, hi = u[0], u[-1]
    if hi <= lo:
        raise FitError("breakpoint fit needs at least two distinct x values")

    interior = u[(u > lo) & (u < hi)]
    extra = np.linspace(lo, hi, GRID_POINTS + 2)[1:-1]
    grid = np.unique(np.concatenate([interior, extra]))
    sse = np.array([_hinge(u, v, k)[0] for k in grid])
    best = int(np.argmin(sse))
    a = grid[best - 1] if best > 0 else lo
    b = grid[best + 1] if best + 1 < len(grid) else hi
    k, k_sse = float(grid[best]), float(sse[best])
    if b - a > KNOT_TOL:
        res = minimize_scalar(
            lambda t: _hinge(u, v, t)[0], bounds=(a, b), method="bounded", options={"xatol": KNOT_TOL}
        )
        if res.fun < k_sse and lo < res.x < hi:
            k, k_sse = float(res.x), float(res.fun)
    k_sse, coef = _hinge(u, v, k)

    single = _line_sse(u, v)
    two = min(k_sse, single)
    sst = float(np.sum((v - v.mean()) ** 2))
    r2 = 1.0 - two / sst if sst > 0 else 1.0
    scale = max(sst, float(np.sum(v**2)), 1e-300)
    degenerate = (single - two) <= 1e-9 * scale or abs(coef[1] - coef[2]) <= 1e-9
    return BreakpointFit(
        knot=math.exp(k),
        slopes=(float(coef[1]), float(coef[2])),
        sse_two_piece=two,
        sse_single_line=single,
        r2=r2,
        intercept=float(coef[0]),
        degenerate=bool(degenerate),
        clipped=clipped,
    )


def fit_power_law(points: Sequence[tuple[float, float]]) -> PowerLawFit:
    """OLS of ``log T_c`` on ``log n``; the slope is the exponent."""
    pts = tuple((float(a), float(b)) for a, b in points)
    if len(pts) < 3:
        raise FitError(f"power-law fit needs at least 3 points, got {len(pts)}")
    arr = np.asarray(pts)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError("power-law fit needs finite positive sizes and transition points")
    u, v = np.log(arr[:, 0]), np.log(arr[:, 1])
    if np.ptp(u) == 0:
        raise FitError("power-law fit needs at least two distinct sizes")
    X = np.column_stack([np.ones_like(u), u])
    coef, *_ = np.linalg.lstsq(X, v, rcond=None)
    r = v - X @ coef
    sst = float(np.sum((v - v.mean()) ** 2))
    r2 = 1.0 - float(r @ r) / sst if sst > 0 else 1.0
    return PowerLawFit(float(coef[1]), float(math.exp(coef[0])), r2, pts)


@dataclass(frozen=True)
class CoverageResult:
    """Coverage transition; ``tc`` is the median total batch length."""

    tc: float
    tc_per_context: float
    total_tokens: tuple[int, ...]
    per_context: tuple[int, ...]
    threshold: float
    criterion: str

    def __float__(self):
        return float(self.tc)


def _first_covering_length(g: Graph, tokens: np.ndarray, kind: DGPKind, threshold: float, criterion: str):
    need_nodes = max(1, math.ceil(threshold * g.n - 1e-9))
    need_edges = max(1, math.ceil(threshold * g.num_edges - 1e-9))
    uf = UnionFind(g.n)
    seen: set[tuple[int, int]] = set()
    if criterion == "largest_component" and uf.max_size >= need_nodes:
        return 1
    for l in range(2, tokens.shape[1] + 1):
        if kind is DGPKind.PAIRS and l % 2:
            continue
        for a, b in zip(tokens[:, l - 2].tolist(), tokens[:, l - 1].tolist()):
            uf.union(a, b)
            seen.add((min(a, b), max(a, b)))
        if criterion == "largest_component":
            if uf.max_size >= need_nodes:
                return l
        elif len(seen) >= need_edges:
            return l
    return None


def coverage_transition(
    g: Graph,
    kind: DGPKind | str = DGPKind.WALK,
    threshold: float = 1.0,
    seeds: int | Sequence[int] = 50,
    max_length: int = 10**6,
    criterion: str = "largest_component",
) -> CoverageResult:
    """Smallest batch length whose observed edges reach the coverage threshold.

    Per seed a batch (one context per start node) is read in lockstep; the
    transition is the first context length ``l`` at which the largest
    observed component holds at least ``threshold * n`` nodes (or, with
    ``criterion="all_edges"``, at least that fraction of edges has been
    seen). ``max_length`` bounds the total batch tokens ``n * l``.
    """
    kind = DGPKind(kind)
    if not 0 < threshold <= 1:
        raise PreconditionError(f"threshold must lie in (0, 1], got {threshold}")
    if criterion not in ("largest_component", "all_edges"):
        raise PreconditionError(f"unknown coverage criterion {criterion!r}")
    if not is_connected(g):
        raise PreconditionError("coverage transition needs a connected graph")
    seed_list = list(range(seeds)) if isinstance(seeds, int) else [int(s) for s in seeds]
    if not seed_list:
        raise PreconditionError("need at least one seed")
    cap = max(1, max_length // g.n)
    per_context = []
    for s in seed_list:
        L = min(64, cap)
        while True:
            batch = make_batch(g, L, kind, s)
            tokens = np.array([seq.tokens for seq in batch], dtype=np.int64)
            l = _first_covering_length(g, tokens, kind, threshold, criterion)
            if l is not None:
                per_context.append(l)
                break
            if L >= cap:
                raise CoverageTimeout(
                    f"seed {s}: coverage threshold {threshold} not reached within {cap * g.n} batch tokens"
                )
            L = min(2 * L, cap)
    totals = tuple(g.n * l for l in per_context)
    return CoverageResult(
        tc=float(np.median(totals)),
        tc_per_context=float(np.median(per_context)),
        total_tokens=totals,
        per_context=tuple(per_context),
        threshold=threshold,
        criterion=criterion,
    )


def family_graph(family: str, size: int) -> Graph:
    """Graph of the given family; grids and hex lattices are ``size x size``."""
    if family in ("square_grid", "grid", "hex"):
        return build(family, size, size) if family == "hex" else build("square_grid", size)
    return build(family, size)


@dataclass
class ScalingReport:
    family: str
    kind: str
    metric: str
    source: str
    fit: PowerLawFit
    per_size: list[dict] = field(default_factory=list)
    reference: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "kind": self.kind,
            "metric": self.metric,
            "source": self.source,
            "exponent": self.fit.exponent,
            "prefactor": self.fit.prefactor,
            "r2": self.fit.r2,
            "size_unit": "nodes",
            "per_size": self.per_size,
            "reference_exponents": self.reference,
        }


def scaling_experiment(
    family: str,
    sizes: Sequence[int],
    kind: DGPKind | str = DGPKind.WALK,
    metric: str = "accuracy_knot",
    seeds: int | Sequence[int] = 20,
    threshold: float = 1.0,
    lengths_per_size: int = 20,
    jobs: int = 1,
) -> ScalingReport:
    """Transition point per graph size, then a power law in the node count."""
    sizes = [int(s) for s in sizes]
    if len(sizes) < 3:
        raise FitError(f"scaling needs at least 3 sizes, got {len(sizes)}")
    if metric not in ("accuracy_knot", "coverage"):
        raise PreconditionError(f"unknown scaling metric {metric!r}")
    kind = DGPKind(kind)
    seed_list = list(range(seeds)) if isinstance(seeds, int) else [int(s) for s in seeds]
    per_size, points = [], []
    for size in sizes:
        g = family_graph(family, size)
        if metric == "coverage":
            res = coverage_transition(g, kind, threshold, seed_list)
            tc = res.tc
            per_size.append(
                {
                    "size": size,
                    "n": g.n,
                    "tc": tc,
                    "tc_per_context": res.tc_per_context,
                    "total_tokens": list(res.total_tokens),
                }
            )
        else:
            lengths = log_lengths(max(2, g.n / 2), 50 * g.n, lengths_per_size)
            curves = oracle_curves(g, kind, lengths, seed_list, jobs=jobs)
            acc = curves.accuracy_curve()
            bp = fit_breakpoint(acc, clip=True)
            tc = bp.knot
            per_size.append(
                {
                    "size": size,
                    "n": g.n,
                    "tc": tc,
                    "slopes": list(bp.slopes),
                    "sse_two_piece": bp.sse_two_piece,
                    "sse_single_line": bp.sse_single_line,
                    "degenerate": bp.degenerate,
                    "clipped": bp.clipped,
                    "lengths": list(acc.lengths),
                    "accuracy": list(acc.values),
                }
            )
        points.append((g.n, tc))
    fit = fit_power_law(points)
    source = "oracle" if metric == "accuracy_knot" else "coverage-simulation"
    ref = {k: v for k, v in REFERENCE_EXPONENTS.items() if k in (family, "percolation")}
    return ScalingReport(family, kind.value, metric, source, fit, per_size, ref)
