"""Mean-token representation tables from activation dumps or the oracle learner."""

from ..reprtable import ReprTable
from .aggregate import DEFAULT_WINDOW, mean_token_reprs, pool_tables
from .dump import ActivationDump, decode_dump, encode_dump, ingest_dump, write_dump
from .oracle import OracleState, oracle_predict, oracle_reprs, oracle_update

__all__ = [
    "ActivationDump",
    "DEFAULT_WINDOW",
    "OracleState",
    "ReprTable",
    "decode_dump",
    "encode_dump",
    "ingest_dump",
    "mean_token_reprs",
    "oracle_predict",
    "oracle_reprs",
    "oracle_update",
    "pool_tables",
    "write_dump",
]
