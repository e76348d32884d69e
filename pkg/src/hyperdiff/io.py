"""On-disk formats for distance matrices and embeddings.

Distance matrices are written as CSV (one row per node, full matrix, 17
significant digits so values round-trip) or as binary: the 8-byte magic
``HDDDIST1``, ``n`` as little-endian uint64, then ``n*n`` little-endian
float64 values in row-major order.

Embeddings are written as binary: the magic ``HDDEMB01``, little-endian
uint64 ``n`` and ``K``, then ``K+1`` blocks of ``n x (n+1)`` float64 values
(scale 0 first). A JSON sidecar records ``n``, ``K``, ``alpha``, the heights
and the block layout.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from hyperdiff.errors import DataError
from hyperdiff.hde import HdeEmbedding
from hyperdiff.ingest import check_distance_matrix

DIST_MAGIC = b"HDDDIST1"
EMB_MAGIC = b"HDDEMB01"


def write_distance_matrix(d: np.ndarray, path: str | Path, fmt: str = "csv") -> None:
    d = np.asarray(d, dtype=float)
    if fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for row in d:
                fh.write(",".join(f"{v:.17g}" for v in row))
                fh.write("\n")
    elif fmt == "bin":
        with open(path, "wb") as fh:
            fh.write(DIST_MAGIC)
            fh.write(struct.pack("<Q", d.shape[0]))
            fh.write(np.ascontiguousarray(d, dtype="<f8").tobytes())
    else:
        raise ValueError(f"unknown distance format {fmt!r}")


def read_distance_matrix(path: str | Path) -> np.ndarray:
    """Read either format (detected from the magic bytes) and validate it."""
    with open(path, "rb") as fh:
        head = fh.read(len(DIST_MAGIC))
    if head == DIST_MAGIC:
        raw = Path(path).read_bytes()
        (n,) = struct.unpack("<Q", raw[8:16])
        data = np.frombuffer(raw[16:], dtype="<f8")
        if data.size != n * n:
            raise DataError(f"{path}: expected {n * n} values, found {data.size}")
        d = data.astype(float).reshape(n, n)
    else:
        rows = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                try:
                    rows.append([float(v) for v in line.split(",")])
                except ValueError:
                    raise DataError(f"{path}:{lineno}: non-numeric entry") from None
        if not rows or any(len(r) != len(rows) for r in rows):
            raise DataError(f"{path}: distance matrix is not square")
        d = np.array(rows)
    return check_distance_matrix(d, name=str(path))


def write_embedding(e: HdeEmbedding, path: str | Path) -> Path:
    """Write the embedding blocks and return the path of the JSON sidecar."""
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(EMB_MAGIC)
        fh.write(struct.pack("<QQ", e.n, e.max_scale))
        for k in range(e.max_scale + 1):
            fh.write(np.ascontiguousarray(e.scale_block(k), dtype="<f8").tobytes())
    sidecar = path.with_name(path.name + ".json")
    meta = {
        "n": e.n,
        "K": e.max_scale,
        "alpha": e.alpha,
        "heights": [float(h) for h in e.heights],
        "block_shape": [e.n, e.n + 1],
        "layout": "K+1 row-major float64 blocks, scale 0 first; last column is the height",
    }
    sidecar.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return sidecar


def read_embedding(path: str | Path) -> HdeEmbedding:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:8] != EMB_MAGIC:
        raise DataError(f"{path}: not an embedding file")
    n, k = struct.unpack("<QQ", raw[8:24])
    data = np.frombuffer(raw[24:], dtype="<f8")
    if data.size != (k + 1) * n * (n + 1):
        raise DataError(f"{path}: truncated embedding")
    blocks = data.astype(float).reshape(k + 1, n, n + 1)
    meta = json.loads(path.with_name(path.name + ".json").read_text(encoding="utf-8"))
    return HdeEmbedding(blocks[:, :, :n].copy(), float(meta["alpha"]), blocks[:, 0, n].copy())
