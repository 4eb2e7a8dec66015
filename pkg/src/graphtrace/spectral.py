"""Dirichlet energy, Laplacian energy minimizers, PCA and their relationship.

Energies come in two conventions. ``ORDERED_PAIR_SUM`` sums
``A_ij * ||h_i - h_j||^2`` over all ordered pairs, so each edge counts twice.
``LAPLACIAN_QUADRATIC`` is ``sum_k h_k^T L h_k`` and is the default, because
it makes ``E(z) = lambda`` hold exactly for a unit Laplacian eigenvector ``z``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Iterable

import numpy as np
import scipy.linalg

from .errors import ArgumentError, ConvergenceError, PreconditionError, ShapeError
from .graphs import Graph, connected_components, laplacian
from .reprtable import ReprTable


class Convention(str, Enum):
    ORDERED_PAIR_SUM = "ordered_pair_sum"
    LAPLACIAN_QUADRATIC = "laplacian_quadratic"


DEFAULT_CONVENTION = Convention.LAPLACIAN_QUADRATIC


@dataclass(frozen=True)
class EnergyValue:
    value: float
    convention: Convention

    @property
    def infinite(self) -> bool:
        return bool(np.isinf(self.value))

    def __float__(self):
        return float(self.value)

    def to(self, convention: Convention) -> "EnergyValue":
        convention = Convention(convention)
        if convention is self.convention:
            return self
        factor = 2.0 if convention is Convention.ORDERED_PAIR_SUM else 0.5
        return EnergyValue(self.value * factor, convention)


@dataclass(frozen=True)
class SpectralBasis:
    vectors: np.ndarray  # n x k, column j is the (j+1)-th minimizer
    eigenvalues: np.ndarray

    def __getitem__(self, k: int) -> np.ndarray:
        """One-based access: ``basis[2]`` is the Fiedler vector."""
        return self.vectors[:, k - 1]


@dataclass(frozen=True)
class PcaResult:
    scores: np.ndarray  # n x k, left singular vectors scaled by singular values
    singular_values: np.ndarray
    directions: np.ndarray  # d x k
    left_vectors: np.ndarray  # n x k, unit-norm score directions

    @property
    def k(self) -> int:
        return self.scores.shape[1]


@dataclass(frozen=True)
class ZeroEnergyBasis:
    paper_alpha: np.ndarray
    alphas: np.ndarray
    gram: np.ndarray
    gram_schmidt: np.ndarray


class DegenerateEmbeddingWarning(UserWarning):
    pass


def _prepare(g: Graph, H) -> tuple[Graph, np.ndarray]:
    """Resolve ``H`` to a dense matrix and the graph it lives on.

    Uncovered rows of a ReprTable are dropped together with their nodes.
    """
    if isinstance(H, ReprTable):
        if H.n != g.n:
            raise ShapeError(f"table has {H.n} rows but graph has {g.n} nodes")
        if not H.valid.all():
            sub, keep = g.subgraph(H.valid_nodes())
            return sub, H.matrix[keep]
        return g, H.matrix
    X = np.asarray(H, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] != g.n:
        raise ShapeError(f"expected {g.n} rows, got array of shape {X.shape}")
    return g, X


def _energy(g: Graph, X: np.ndarray, convention: Convention) -> EnergyValue:
    if g.num_edges == 0 or X.shape[1] == 0:
        return EnergyValue(0.0, convention)
    e = g.edge_array()
    diff = X[e[:, 0]] - X[e[:, 1]]
    value = float(np.sum(diff * diff))
    if convention is Convention.ORDERED_PAIR_SUM:
        value *= 2.0
    return EnergyValue(value, convention)


def dirichlet_energy(g: Graph, H, convention=DEFAULT_CONVENTION) -> EnergyValue:
    g, X = _prepare(g, H)
    return _energy(g, X, Convention(convention))


def standardize(X: np.ndarray) -> np.ndarray | None:
    """Column-wise z-scores (population std); ``None`` if a column is constant."""
    X = np.asarray(X, dtype=np.float64)
    centered = X - X.mean(axis=0)
    std = np.sqrt(np.mean(centered**2, axis=0))
    scale = np.maximum(np.max(np.abs(X), axis=0), 1.0)
    if np.any(std <= 1e-12 * scale):
        return None
    return centered / std


def standardized_energy(g: Graph, H, convention=DEFAULT_CONVENTION) -> EnergyValue:
    """Energy after z-scoring each column.

    A constant column cannot be standardized; the result is then ``inf``,
    which is how the constant (trivial) minimizer is ruled out.
    """
    convention = Convention(convention)
    g, X = _prepare(g, H)
    Z = standardize(X)
    if Z is None:
        return EnergyValue(float("inf"), convention)
    return _energy(g, Z, convention)


def _sign_index(col: np.ndarray) -> int:
    mags = np.abs(col)
    top = mags.max()
    return int(np.flatnonzero(mags >= top - 1e-12 * max(top, 1.0))[0])


def fix_signs(M: np.ndarray, *others: np.ndarray) -> tuple[np.ndarray, ...]:
    """Flip columns so each one's largest-magnitude entry is positive.

    Ties go to the lowest index. Columns of every array in ``others`` are
    flipped alongside, which keeps SVD factor pairs consistent.
    """
    M = np.array(M, dtype=np.float64)
    others = tuple(np.array(o, dtype=np.float64) for o in others)
    for j in range(M.shape[1]):
        col = M[:, j]
        if not np.any(col):
            continue
        if col[_sign_index(col)] < 0:
            M[:, j] = -col
            for o in others:
                o[:, j] = -o[:, j]
    return (M, *others)


def jacobi_eigh(a: np.ndarray, tol: float = 1e-12, max_sweeps: int = 60) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Sweeps until the off-diagonal Frobenius norm drops below ``tol * ||a||_F``.
    Returns ascending eigenvalues and matching orthonormal eigenvectors.
    """
    a = np.array(a, dtype=np.float64)
    n = a.shape[0]
    if a.shape != (n, n) or not np.allclose(a, a.T):
        raise ShapeError("jacobi_eigh needs a square symmetric matrix")
    v = np.eye(n)
    scale = np.linalg.norm(a) or 1.0
    for sweep in range(max_sweeps + 1):
        off = np.sqrt(2.0 * np.sum(np.triu(a, 1) ** 2))
        if off < tol * scale:
            w = np.diag(a).copy()
            order = np.argsort(w, kind="stable")
            return w[order], v[:, order]
        if sweep == max_sweeps:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = 1.0 if theta == 0 else np.sign(theta) / (abs(theta) + np.hypot(theta, 1.0))
                c = 1.0 / np.hypot(t, 1.0)
                s = t * c
                ap, aq = a[:, p].copy(), a[:, q].copy()
                a[:, p], a[:, q] = c * ap - s * aq, s * ap + c * aq
                ap, aq = a[p, :].copy(), a[q, :].copy()
                a[p, :], a[q, :] = c * ap - s * aq, s * ap + c * aq
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p], v[:, q] = c * vp - s * vq, s * vp + c * vq
    raise ConvergenceError("Jacobi eigensolver did not converge", max_sweeps)


def _null_basis(g: Graph) -> np.ndarray:
    """Orthonormal basis of the Laplacian null space, starting with 1/sqrt(n).

    Gram-Schmidt over ``[1, 1_U1, ..., 1_U(q-1)]``; the result is the same
    as the ``gram_schmidt`` member of :func:`zero_energy_basis`.
    """
    comps = connected_components(g)
    raw = [np.ones(g.n)]
    for comp in comps.components[:-1]:
        ind = np.zeros(g.n)
        ind[sorted(comp)] = 1.0
        raw.append(ind)
    return _modified_gram_schmidt(np.column_stack(raw))


def _modified_gram_schmidt(M: np.ndarray) -> np.ndarray:
    Q = np.array(M, dtype=np.float64)
    for j in range(Q.shape[1]):
        for i in range(j):
            Q[:, j] -= (Q[:, i] @ Q[:, j]) * Q[:, i]
        norm = np.linalg.norm(Q[:, j])
        if norm < 1e-12:
            raise ArgumentError("Gram-Schmidt input columns are linearly dependent")
        Q[:, j] /= norm
    return Q


def energy_minimizers(g: Graph, k: int, method: str = "lapack") -> SpectralBasis:
    """First ``k`` Dirichlet-energy minimizers (Laplacian eigenvectors).

    The zero eigenspace is given a canonical basis: ``z1 = 1/sqrt(n)``
    followed by orthonormalized component contrasts, so ``z1`` is constant
    even on a disconnected graph. ``method`` is ``"lapack"`` (numpy ``eigh``)
    or ``"jacobi"`` (:func:`jacobi_eigh`).
    """
    if not 1 <= k <= g.n:
        raise ArgumentError(f"need 1 <= k <= n={g.n}, got k={k}")
    L = laplacian(g).astype(np.float64)
    if method == "lapack":
        try:
            w, v = np.linalg.eigh(L)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(f"LAPACK eigh failed: {exc}", 0) from exc
    elif method == "jacobi":
        w, v = jacobi_eigh(L)
    else:
        raise ArgumentError(f"unknown eigensolver {method!r}")
    null = _null_basis(g)
    q = null.shape[1]
    v = v.copy()
    v[:, :q] = null
    w = np.maximum(w, 0.0)
    w[:q] = 0.0
    (v,) = fix_signs(v[:, :k])
    return SpectralBasis(v, w[:k].copy())


def spectral_embedding(g: Graph) -> np.ndarray:
    """Node coordinates ``(z2_i, z3_i)``."""
    if g.n < 3:
        raise ArgumentError("spectral embedding needs at least 3 nodes")
    if connected_components(g).count > 1:
        warnings.warn(
            "graph is disconnected; leading minimizers only separate components",
            DegenerateEmbeddingWarning,
            stacklevel=2,
        )
    return energy_minimizers(g, 3).vectors[:, 1:3].copy()


def as_matrix(H) -> np.ndarray:
    if isinstance(H, ReprTable):
        return H.matrix[H.valid]
    return np.asarray(H, dtype=np.float64)


def pca(H, k: int) -> PcaResult:
    """PCA of the row-centered matrix via a thin SVD."""
    X = as_matrix(H)
    n, d = X.shape
    if not 1 <= k <= min(n - 1, d):
        raise ShapeError(f"k={k} components requested but at most min(n-1, d)={min(n - 1, d)} exist")
    centered = X - X.mean(axis=0)
    U, S, Vt = np.linalg.svd(centered, full_matrices=False)
    U, V = fix_signs(U[:, :k], Vt[:k].T)
    S = S[:k]
    return PcaResult(U * S, S.copy(), V, U)


def energy_on_components(g: Graph, H, dims: Iterable[int], convention=DEFAULT_CONVENTION) -> EnergyValue:
    """Energy of the PCA scores restricted to one-based component indices ``dims``."""
    convention = Convention(convention)
    dims = sorted(set(int(x) for x in dims))
    g, X = _prepare(g, H)
    if not dims:
        return EnergyValue(0.0, convention)
    limit = min(X.shape[0] - 1, X.shape[1])
    if dims[0] < 1 or dims[-1] > limit:
        raise IndexError(f"PC indices must lie in 1..{limit}, got {dims}")
    res = pca(X, dims[-1])
    return _energy(g, res.scores[:, [m - 1 for m in dims]], convention)


def random_orthonormal(d: int, s: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((d, s)))
    return q * np.sign(np.diag(r))


def construct_min_energy_matrix(g: Graph, epsilons, d: int, seed: int = 0, basis=None) -> np.ndarray:
    """Energy-minimizing ``H = sum_k eps_k z^(k) v_k^T`` with singular values ``eps``.

    ``eps_1`` multiplies the constant minimizer, which centering removes, so
    the PCA of the result yields ``z^(2), ..., z^(s)``. ``basis`` (d x s,
    orthonormal columns) defaults to a seeded random frame.
    """
    eps = np.asarray(epsilons, dtype=np.float64)
    s = len(eps)
    if s < 1 or np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
        raise ArgumentError("epsilons must be positive and strictly decreasing")
    if s > min(g.n, d) - 1:
        raise ArgumentError(f"at most min(n, d) - 1 = {min(g.n, d) - 1} epsilons allowed, got {s}")
    if basis is None:
        V = random_orthonormal(d, s, seed)
    else:
        V = np.asarray(basis, dtype=np.float64)
        if V.shape != (d, s) or not np.allclose(V.T @ V, np.eye(s), atol=1e-10):
            raise ArgumentError(f"basis must be a {d}x{s} matrix with orthonormal columns")
    Z = energy_minimizers(g, s).vectors
    return (Z * eps) @ V.T


def zero_energy_basis(g: Graph, literal: bool = False) -> ZeroEnergyBasis:
    """Two bases of the Laplacian null space of a disconnected graph.

    ``paper_alpha`` is the piecewise-constant construction ``z^(i) = -alpha_i``
    on ``U_1 .. U_(i-1)`` and ``1`` elsewhere. By default ``alpha_i`` is the
    ratio ``|U_i u .. u U_q| / |U_1 u .. u U_(i-1)|``, which makes every
    vector sum to zero. ``literal=True`` instead weights the sums by
    ``z^(i-1)``; for ``q >= 3`` that gives ``alpha_3 = -1`` and so
    ``z^(3) = 1``. Columns of ``paper_alpha`` are unnormalized and, in
    general, not mutually orthogonal; ``gram`` holds their inner products.
    ``gram_schmidt`` is orthonormal.
    """
    comps = connected_components(g)
    q = comps.count
    if q < 2:
        raise PreconditionError("graph is connected; zero-energy basis needs q >= 2 components")
    members = [np.array(sorted(c)) for c in comps.components]
    Z = np.ones((g.n, q))
    alphas = np.ones(q)
    for i in range(1, q):
        weight = Z[:, i - 1] if literal else np.ones(g.n)
        before = np.concatenate(members[:i])
        after = np.concatenate(members[i:])
        denom = weight[before].sum()
        if denom == 0:
            raise ArgumentError(f"alpha recursion divides by zero at i={i + 1}")
        alphas[i] = weight[after].sum() / denom
        Z[before, i] = -alphas[i]
    return ZeroEnergyBasis(Z, alphas, Z.T @ Z, _null_basis(g))


def principal_angles(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Principal angles (radians) between the column spans of ``A`` and ``B``."""
    return scipy.linalg.subspace_angles(np.atleast_2d(A), np.atleast_2d(B))


def _abs_cos(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(abs(a @ b) / (na * nb))


def cosine_to_spectral(H, g: Graph) -> tuple[float, float]:
    """``(|cos(PC1, z2)|, |cos(PC2, z3)|)`` for representations on a connected graph."""
    g, X = _prepare(g, H)
    if connected_components(g).count != 1:
        raise PreconditionError("cosine_to_spectral needs a connected graph")
    if min(X.shape[0] - 1, X.shape[1]) < 2:
        raise ShapeError("need at least two principal components")
    p = pca(X, 2).left_vectors
    z = energy_minimizers(g, 3).vectors
    return _abs_cos(p[:, 0], z[:, 1]), _abs_cos(p[:, 1], z[:, 2])


def subspace_alignment(H, g: Graph, k: int = 2) -> np.ndarray:
    """Principal angles between span(PC1..PCk) and span(z2..z(k+1))."""
    g, X = _prepare(g, H)
    p = pca(X, k).left_vectors
    z = energy_minimizers(g, k + 1).vectors[:, 1:]
    return principal_angles(p, z)
