"""
Columnar Dataset Files

Layout of a ``.oids`` file:

    4 bytes   magic b"OIDS"
    uint16    format version (little-endian)
    uint32    header length in bytes (little-endian)
    header    UTF-8 JSON: {"columns": [{"name", "dtype", "shape"}...],
                           "vocabulary": [...]}
    payload   raw column bytes, in header order

Column dtypes are little-endian fixed width, ``<f8`` or ``<i4``. Labels
are stored as ``<i4`` codes into the sorted vocabulary.
"""

import logging
import struct
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np
import orjson

from ..core.errors import ArtifactError

logger = logging.getLogger(__name__)

MAGIC = b"OIDS"
VERSION = 1
_PREAMBLE = struct.Struct("<4sHI")
ALLOWED_DTYPES = ("<f8", "<i4")


def write_columns(path: Path, columns: Dict[str, np.ndarray], vocabulary: Sequence[str] = ()) -> Path:
    """Write named arrays and a string vocabulary to ``path``."""
    specs = []
    payload = []
    for name, array in columns.items():
        dtype = "<f8" if np.issubdtype(array.dtype, np.floating) else "<i4"
        data = np.ascontiguousarray(array, dtype=dtype)
        specs.append({"name": name, "dtype": dtype, "shape": list(data.shape)})
        payload.append(data.tobytes())
    header = orjson.dumps({"columns": specs, "vocabulary": list(vocabulary)}, option=orjson.OPT_SORT_KEYS)

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(_PREAMBLE.pack(MAGIC, VERSION, len(header)))
        f.write(header)
        for chunk in payload:
            f.write(chunk)
    logger.debug("wrote %s (%d columns)", path, len(specs))
    return path


def read_columns(path: Path) -> Tuple[Dict[str, np.ndarray], List[str]]:
    """Read a ``.oids`` file back into (columns, vocabulary)."""
    path = Path(path)
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < _PREAMBLE.size:
        raise ArtifactError(f"{path}: truncated dataset file")
    magic, version, header_len = _PREAMBLE.unpack_from(blob)
    if magic != MAGIC:
        raise ArtifactError(f"{path}: not a dataset file (bad magic)")
    if version != VERSION:
        raise ArtifactError(f"{path}: unsupported dataset version {version}")
    start = _PREAMBLE.size
    try:
        header = orjson.loads(blob[start:start + header_len])
    except orjson.JSONDecodeError as e:
        raise ArtifactError(f"{path}: corrupt header") from e

    offset = start + header_len
    columns: Dict[str, np.ndarray] = {}
    for spec in header["columns"]:
        if spec["dtype"] not in ALLOWED_DTYPES:
            raise ArtifactError(f"{path}: unsupported dtype {spec['dtype']}")
        dtype = np.dtype(spec["dtype"])
        shape = tuple(spec["shape"])
        nbytes = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
        if offset + nbytes > len(blob):
            raise ArtifactError(f"{path}: column {spec['name']} is truncated")
        columns[spec["name"]] = np.frombuffer(blob, dtype=dtype, count=nbytes // dtype.itemsize, offset=offset).reshape(shape).copy()
        offset += nbytes
    if offset != len(blob):
        raise ArtifactError(f"{path}: {len(blob) - offset} trailing bytes")
    return columns, list(header["vocabulary"])


def save_split(path: Path, X: np.ndarray, labels: Sequence[str]) -> Path:
    """Store scaled vectors and their labels."""
    vocabulary, codes = np.unique(np.asarray(labels, dtype=str), return_inverse=True)
    return write_columns(path, {"X": np.asarray(X, dtype=np.float64), "label": codes.astype(np.int32)}, vocabulary.tolist())


def load_split(path: Path) -> Tuple[np.ndarray, np.ndarray]:
    """Inverse of ``save_split``: (X, labels as a str array)."""
    columns, vocabulary = read_columns(path)
    if "X" not in columns or "label" not in columns:
        raise ArtifactError(f"{path}: missing X or label column")
    labels = np.asarray(vocabulary, dtype=str)[columns["label"]] if vocabulary else np.empty(0, dtype=str)
    return columns["X"], labels
