"""Repository layer for data access."""

from pim_olap_sim.repositories.base import StoreRepository
from pim_olap_sim.repositories.binary_store import (
    FileStoreRepository,
    decode_store,
    encode_store,
    open_store,
    save_store,
)
from pim_olap_sim.repositories.fixtures import load_query, load_schema, load_workload

__all__ = [
    "StoreRepository",
    "FileStoreRepository",
    "encode_store",
    "decode_store",
    "save_store",
    "open_store",
    "load_schema",
    "load_query",
    "load_workload",
]
