"""Binary cache for assembled kernel matrices.

Layout (little endian)::

    8 bytes   magic  b"BKUQKRN1"
    uint32    format version
    uint64    grid-descriptor hash
    uint64    model-descriptor hash (includes z and derivative order)
    uint64    node count N
    N*N f8    kernel matrix, row major
"""
from __future__ import annotations

import logging
from pathlib import Path
import struct

import numpy as np

MAGIC = b"BKUQKRN1"
VERSION = 1
_HEADER = struct.Struct("<8sIQQQ")

log = logging.getLogger(__name__)


class CacheCorrupt(RuntimeError):
    pass


def entry_name(grid_hash, model_hash):
    return f"kernel_{grid_hash:016x}_{model_hash:016x}.bin"


def write_matrix(path, grid_hash, model_hash, K):
    K = np.ascontiguousarray(K, dtype="<f8")
    N = K.shape[0]
    if K.shape != (N, N):
        raise ValueError("kernel matrix must be square")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    with open(tmp, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, grid_hash, model_hash, N))
        fh.write(K.tobytes())
    tmp.replace(path)


def read_header(path):
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
    if len(raw) < _HEADER.size:
        raise CacheCorrupt(f"{path}: truncated header")
    magic, version, gh, mh, N = _HEADER.unpack(raw)
    if magic != MAGIC:
        raise CacheCorrupt(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise CacheCorrupt(f"{path}: unsupported format version {version}")
    return gh, mh, N


def read_matrix(path, grid_hash=None, model_hash=None):
    """Load a cached matrix; returns None on a hash mismatch (cache miss)."""
    path = Path(path)
    gh, mh, N = read_header(path)
    expected = _HEADER.size + 8 * N * N
    size = path.stat().st_size
    if size != expected:
        raise CacheCorrupt(f"{path}: length {size} bytes, expected {expected}")
    if (grid_hash is not None and gh != grid_hash) or (model_hash is not None and mh != model_hash):
        log.warning("cache entry %s has mismatching hashes; rebuilding", path)
        return None
    data = np.fromfile(path, dtype="<f8", offset=_HEADER.size)
    return data.reshape(N, N).astype(float)


class KernelCache:
    def __init__(self, directory):
        self.dir = Path(directory)

    def path(self, grid_hash, model_hash):
        return self.dir / entry_name(grid_hash, model_hash)

    def load(self, grid_hash, model_hash):
        p = self.path(grid_hash, model_hash)
        if not p.exists():
            return None
        return read_matrix(p, grid_hash, model_hash)

    def store(self, grid_hash, model_hash, K):
        write_matrix(self.path(grid_hash, model_hash), grid_hash, model_hash, K)

    def entries(self):
        return sorted(self.dir.glob("kernel_*.bin")) if self.dir.exists() else []

    def purge(self):
        n = 0
        for p in self.entries():
            p.unlink()
            n += 1
        return n
