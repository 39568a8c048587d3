"""Binary store format and the file-backed store repository.

Layout (little-endian, every section padded to 8 bytes)::

    magic "PIMOLAP\\0" | u32 version | u32 table count | u64 schema length | schema JSON
    per table, in schema order:
        u64 row count
        per column, in definition order:
            u32 width | u32 flags | u64 length | u64 word count | words
            [dictionary: u64 size | int64 values]                      (integer)
            [dictionary: u64 size | u64 blob length | u32 offsets | blob]  (string)
"""

import logging
import struct
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
from pydantic import ValidationError

from pim_olap_sim.config.logging import LoggingService
from pim_olap_sim.models.errors import StoreFormatError
from pim_olap_sim.models.kernel import PackedColumn
from pim_olap_sim.models.schema import Schema
from pim_olap_sim.models.store import Database, Dictionary, EncodedColumn, StoreManifest, Table
from pim_olap_sim.repositories.base import StoreRepository
from pim_olap_sim.services.columnar_store import raw_bytes

logger = logging.getLogger(__name__)
logging_service = LoggingService(__name__)

MAGIC = b"PIMOLAP\x00"
FORMAT_VERSION = 1
STORE_SUFFIX = ".pimdb"
MANIFEST_SUFFIX = ".manifest.json"

FLAG_DICTIONARY = 1
FLAG_STRING = 2
FLAG_KEY = 4


def _pad(size: int) -> int:
    return -size % 8


class _Writer:
    def __init__(self) -> None:
        self._chunks: List[bytes] = []

    def section(self, data: bytes) -> None:
        self._chunks.append(data)
        self._chunks.append(b"\x00" * _pad(len(data)))

    def fields(self, fmt: str, *values: int) -> None:
        self.section(struct.pack("<" + fmt, *values))

    def getvalue(self) -> bytes:
        return b"".join(self._chunks)


class _Reader:
    def __init__(self, data: bytes) -> None:
        self._data = memoryview(data)
        self._offset = 0

    def section(self, size: int) -> memoryview:
        end = self._offset + size
        if size < 0 or end > len(self._data):
            raise StoreFormatError(
                "store is truncated",
                {"offset": self._offset, "wanted": size, "size": len(self._data)},
            )
        chunk = self._data[self._offset:end]
        self._offset = end + _pad(size)
        return chunk

    def fields(self, fmt: str) -> tuple:
        return struct.unpack("<" + fmt, self.section(struct.calcsize("<" + fmt)))

    def array(self, dtype: str, count: int) -> np.ndarray:
        itemsize = np.dtype(dtype).itemsize
        return np.frombuffer(self.section(count * itemsize), dtype=dtype).copy()

    @property
    def exhausted(self) -> bool:
        return self._offset >= len(self._data)


def _write_dictionary(writer: _Writer, dictionary: Dictionary) -> None:
    if dictionary.is_string:
        encoded = [str(v).encode("utf-8") for v in dictionary.values.tolist()]
        offsets = np.zeros(len(encoded) + 1, dtype="<u4")
        offsets[1:] = np.cumsum([len(b) for b in encoded], dtype=np.int64)
        blob = b"".join(encoded)
        writer.fields("QQ", len(encoded), len(blob))
        writer.section(offsets.tobytes())
        writer.section(blob)
    else:
        writer.fields("Q", dictionary.size)
        writer.section(np.asarray(dictionary.values, dtype="<i8").tobytes())


def _read_dictionary(reader: _Reader, is_string: bool) -> Dictionary:
    if not is_string:
        (size,) = reader.fields("Q")
        return Dictionary(values=reader.array("<i8", size).astype(np.int64))
    size, blob_length = reader.fields("QQ")
    offsets = reader.array("<u4", size + 1).astype(np.int64)
    blob = bytes(reader.section(blob_length))
    if offsets[0] != 0 or offsets[-1] != blob_length or np.any(np.diff(offsets) < 0):
        raise StoreFormatError("string dictionary offsets are inconsistent", {"size": size, "blob": blob_length})
    try:
        values = [blob[offsets[i]:offsets[i + 1]].decode("utf-8") for i in range(size)]
    except UnicodeDecodeError as e:
        raise StoreFormatError(f"string dictionary is not valid UTF-8: {e}") from e
    return Dictionary(values=np.asarray(values, dtype=str) if values else np.asarray([], dtype=np.int64))


def encode_store(db: Database) -> bytes:
    """Serialize a database into the binary store format."""
    writer = _Writer()
    schema_json = db.catalog.model_dump_json().encode("utf-8")
    writer.fields("8sII", MAGIC, FORMAT_VERSION, len(db.catalog.tables))
    writer.fields("Q", len(schema_json))
    writer.section(schema_json)

    for definition in db.catalog.tables:
        table = db.table(definition.name)
        writer.fields("Q", table.row_count)
        for coldef in definition.columns:
            column = table.columns[coldef.name]
            flags = 0
            if column.dictionary is not None:
                flags |= FLAG_DICTIONARY
                if column.dictionary.is_string:
                    flags |= FLAG_STRING
            if column.is_key:
                flags |= FLAG_KEY
            packed = column.packed
            writer.fields("IIQQ", packed.width, flags, packed.length, int(packed.words.size))
            writer.section(packed.words.astype("<u8").tobytes())
            if column.dictionary is not None:
                _write_dictionary(writer, column.dictionary)
    return writer.getvalue()


def decode_store(data: bytes) -> Database:
    """Inverse of ``encode_store``.

    Raises:
        StoreFormatError: bad magic, unknown version, truncated or inconsistent payload
    """
    reader = _Reader(data)
    magic, version, table_count = reader.fields("8sII")
    if magic != MAGIC:
        raise StoreFormatError("not a pim_olap_sim store (bad magic)")
    if version != FORMAT_VERSION:
        raise StoreFormatError(f"unsupported store version {version}", {"version": version})

    (schema_length,) = reader.fields("Q")
    try:
        schema = Schema.model_validate_json(bytes(reader.section(schema_length)))
    except ValidationError as e:
        raise StoreFormatError(f"store schema is invalid: {e}") from e
    if len(schema.tables) != table_count:
        raise StoreFormatError("table count does not match the stored schema")

    tables = {}
    try:
        for definition in schema.tables:
            (row_count,) = reader.fields("Q")
            columns = {}
            for coldef in definition.columns:
                width, flags, length, word_count = reader.fields("IIQQ")
                words = reader.array("<u8", word_count).astype(np.uint64)
                dictionary = None
                if flags & FLAG_DICTIONARY:
                    dictionary = _read_dictionary(reader, bool(flags & FLAG_STRING))
                columns[coldef.name] = EncodedColumn(
                    definition=coldef,
                    packed=PackedColumn(width=width, length=length, words=words),
                    dictionary=dictionary,
                    is_key=bool(flags & FLAG_KEY),
                )
            tables[definition.name] = Table(name=definition.name, row_count=row_count, columns=columns)
    except StoreFormatError:
        raise
    except (ValidationError, ValueError, struct.error, OverflowError) as e:
        raise StoreFormatError(f"store payload is inconsistent: {e}") from e

    if not reader.exhausted:
        raise StoreFormatError("trailing bytes after the last table")
    try:
        return Database(catalog=schema, tables=tables)
    except ValidationError as e:
        raise StoreFormatError(f"store tables do not match the schema: {e}") from e


def save_store(db: Database, path: Union[str, Path]) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_bytes(encode_store(db))
    return target


def open_store(path: Union[str, Path]) -> Database:
    source = Path(path)
    if not source.is_file():
        raise StoreFormatError(f"store not found: {source}", {"path": str(source)})
    return decode_store(source.read_bytes())


class FileStoreRepository(StoreRepository):
    """Stores as ``<root>/<name>.pimdb`` with a ``<name>.manifest.json`` sidecar."""

    def __init__(self, root: Union[str, Path]):
        self._root = Path(root)

    def _store_path(self, name: str) -> Path:
        return self._root / f"{name}{STORE_SUFFIX}"

    def _manifest_path(self, name: str) -> Path:
        return self._root / f"{name}{MANIFEST_SUFFIX}"

    def save(
        self,
        name: str,
        db: Database,
        scale_factor: Optional[float] = None,
        seed: Optional[int] = None,
        denorm_level: Optional[str] = None,
    ) -> Path:
        """Write the store and its manifest."""
        try:
            path = save_store(db, self._store_path(name))
            manifest = StoreManifest(
                name=name,
                schema_name=db.catalog.name,
                format_version=FORMAT_VERSION,
                row_counts=db.row_counts(),
                encoded_bytes=db.encoded_bytes(),
                raw_bytes=raw_bytes(db),
                scale_factor=scale_factor,
                seed=seed,
                denorm_level=denorm_level,
            )
            self._manifest_path(name).write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")
            logging_service.log_step("save_store", True, store=name, path=str(path), bytes=path.stat().st_size)
            return path
        except OSError as e:
            logging_service.log_error("Failed to write store", e, operation="save_store", store=name)
            raise

    def open(self, name: str) -> Database:
        try:
            db = open_store(self._store_path(name))
            logger.debug("Store opened", extra={"store": name, "operation": "open_store"})
            return db
        except StoreFormatError as e:
            logging_service.log_error("Failed to open store", e, operation="open_store", store=name)
            raise

    def manifest(self, name: str) -> Optional[StoreManifest]:
        path = self._manifest_path(name)
        if not path.is_file():
            return None
        try:
            return StoreManifest.model_validate_json(path.read_text(encoding="utf-8"))
        except ValidationError as e:
            raise StoreFormatError(f"manifest {path.name} is invalid: {e}") from e

    def exists(self, name: str) -> bool:
        return self._store_path(name).is_file()

    def delete(self, name: str) -> bool:
        if not self.exists(name):
            logger.debug("Store not found", extra={"store": name, "operation": "delete_store"})
            return False
        self._store_path(name).unlink()
        self._manifest_path(name).unlink(missing_ok=True)
        logging_service.log_step("delete_store", True, store=name)
        return True

    def list_stores(self) -> List[str]:
        if not self._root.is_dir():
            return []
        return sorted(p.name[: -len(STORE_SUFFIX)] for p in self._root.glob(f"*{STORE_SUFFIX}"))
