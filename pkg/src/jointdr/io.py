"""Matrix and sample-set interchange.

CSV: one matrix row per line, comma separated, ``.`` decimal point, no
header. Values are written with 17 significant digits so they round-trip.

Binary blob (little endian)::

    bytes 0-3    magic b"JDRM"
    bytes 4-7    uint32 format version (1)
    bytes 8-15   uint64 rows
    bytes 16-23  uint64 cols
    bytes 24-    rows*cols float64 values in column-major order

A sample set directory holds ``a.csv``, ``b.csv``, ``y.csv`` and a
``samples.json`` sidecar recording seed, model tags and dimensions.
"""

import json
import struct
from pathlib import Path

import numpy as np

from .errors import InputError
from .estimator import SampleSet

MAGIC = b"JDRM"
BLOB_VERSION = 1
_HEADER = struct.Struct("<4sIQQ")


def write_matrix_csv(path, x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    np.savetxt(path, x, delimiter=",", fmt="%.17g")


def read_matrix_csv(path):
    """Read a CSV matrix; always returns a 2-D array."""
    try:
        x = np.loadtxt(path, delimiter=",", dtype=float, ndmin=2)
    except ValueError as exc:
        raise InputError(f"{path}: not a numeric CSV matrix ({exc})") from exc
    except OSError as exc:
        raise InputError(f"{path}: cannot read ({exc})") from exc
    return x


def read_vector_csv(path):
    """Read a vector stored as one column or one row."""
    x = read_matrix_csv(path)
    if 1 not in x.shape:
        raise InputError(f"{path}: expected a single row or column, got shape {x.shape}")
    return x.ravel()


def write_matrix_bin(path, x):
    x = np.asarray(x, dtype="<f8")
    if x.ndim != 2:
        raise InputError(f"binary blobs hold 2-D matrices, got shape {x.shape}")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, BLOB_VERSION, x.shape[0], x.shape[1]))
        fh.write(x.tobytes(order="F"))


def read_matrix_bin(path):
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise InputError(f"{path}: truncated header")
    magic, version, rows, cols = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise InputError(f"{path}: bad magic {magic!r}")
    if version != BLOB_VERSION:
        raise InputError(f"{path}: unsupported blob version {version}")
    expected = _HEADER.size + 8 * rows * cols
    if len(data) != expected:
        raise InputError(f"{path}: expected {expected} bytes for a {rows}x{cols} matrix, found {len(data)}")
    flat = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    return flat.reshape((rows, cols), order="F").astype(float)


def save_samples(samples, directory, metadata=None):
    """Write ``samples`` as CSV files plus a ``samples.json`` sidecar."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_matrix_csv(directory / "a.csv", samples.a)
    write_matrix_csv(directory / "b.csv", samples.b)
    write_matrix_csv(directory / "y.csv", samples.y)
    meta = {"m": samples.m, "n1": samples.n1, "n2": samples.n2}
    meta.update(metadata or {})
    (directory / "samples.json").write_text(json.dumps(meta, indent=2, sort_keys=True))


def load_samples(directory):
    """Inverse of :func:`save_samples`; returns ``(SampleSet, metadata)``."""
    directory = Path(directory)
    meta_path = directory / "samples.json"
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    samples = SampleSet(
        read_matrix_csv(directory / "a.csv"),
        read_matrix_csv(directory / "b.csv"),
        read_vector_csv(directory / "y.csv"),
    )
    for key in ("m", "n1", "n2"):
        if key in meta and meta[key] != getattr(samples, key):
            raise InputError(f"sidecar says {key}={meta[key]} but the CSV files give {getattr(samples, key)}")
    return samples, meta
