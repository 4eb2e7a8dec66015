from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError


@dataclass(frozen=True)
class ReprTable:
    """Per-token mean representations ``H`` (one row per graph node).

    Rows with zero coverage hold zeros and are excluded from every energy
    and PCA computation; use :meth:`valid_nodes` to see which rows count.
    """

    matrix: np.ndarray
    coverage: np.ndarray
    layer: int | None = None
    context_length: int | None = None

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.ndim != 2:
            raise ShapeError("representation matrix must be 2-D")
        if not np.all(np.isfinite(m)):
            raise ShapeError("representation matrix has non-finite entries")
        cov = np.asarray(self.coverage, dtype=np.int64)
        if cov.shape != (m.shape[0],):
            raise ShapeError("coverage length must equal the number of rows")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "coverage", cov)

    @classmethod
    def full(cls, matrix, layer=None, context_length=None) -> "ReprTable":
        m = np.asarray(matrix, dtype=np.float64)
        return cls(m, np.ones(m.shape[0], dtype=np.int64), layer, context_length)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def d(self) -> int:
        return self.matrix.shape[1]

    @property
    def valid(self) -> np.ndarray:
        return self.coverage > 0

    def valid_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.valid)
