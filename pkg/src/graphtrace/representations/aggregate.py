from __future__ import annotations

import numpy as np

from ..errors import ArgumentError, MissingLayerError, ShapeError
from ..reprtable import ReprTable
from .dump import ActivationDump

DEFAULT_WINDOW = 200


def _window_mask(dump: ActivationDump, layer: int, position: int, window: int) -> np.ndarray:
    pos = dump.position.astype(np.int64)
    lo = max(0, position - window)
    return (dump.layer == layer) & (pos >= lo) & (pos < position)


def _table(dump, mask, n, layer, position) -> ReprTable:
    tokens = dump.token_id[mask].astype(np.int64)
    vecs = dump.vectors[mask].astype(np.float64)
    sums = np.zeros((n, dump.d))
    np.add.at(sums, tokens, vecs)
    counts = np.bincount(tokens, minlength=n)
    means = np.divide(sums, counts[:, None], out=np.zeros_like(sums), where=counts[:, None] > 0)
    return ReprTable(means, counts, layer, position)


def mean_token_reprs(
    dump: ActivationDump,
    layer: int,
    position: int | None = None,
    window: int = DEFAULT_WINDOW,
    n: int | None = None,
    per_sequence: bool = False,
):
    """Mean activation per token over the ``window`` positions before ``position``.

    Uses positions ``[max(0, position - window), position)`` of every
    sequence and pools them across sequences, so a token's row is the
    coverage-weighted mean of its per-sequence means. ``position=None``
    means the end of the longest sequence. With ``per_sequence=True`` a dict
    ``sequence_id -> ReprTable`` is returned instead.
    """
    if window < 1:
        raise ArgumentError(f"window must be >= 1, got {window}")
    if layer not in dump.layers:
        raise MissingLayerError(layer, dump.layers)
    end = int(dump.position.max()) + 1 if len(dump) else 0
    if position is None:
        position = end
    if not 0 <= position <= end:
        raise IndexError(f"position {position} outside 0..{end}")
    top = int(dump.token_id.max()) + 1 if len(dump) else 0
    if n is None:
        n = top
    elif top > n:
        raise ShapeError(f"dump references token {top - 1} but the graph has only {n} nodes")
    mask = _window_mask(dump, layer, position, window)
    if not per_sequence:
        return _table(dump, mask, n, layer, position)
    return {
        int(s): _table(dump, mask & (dump.sequence_id == s), n, layer, position)
        for s in np.unique(dump.sequence_id)
    }


def pool_tables(tables) -> ReprTable:
    """Coverage-weighted merge of per-sequence tables; order-independent."""
    tables = list(tables)
    cov = sum(t.coverage for t in tables)
    sums = sum(t.matrix * t.coverage[:, None] for t in tables)
    means = np.divide(sums, cov[:, None], out=np.zeros_like(sums), where=cov[:, None] > 0)
    return ReprTable(means, cov, tables[0].layer, tables[0].context_length)
