"""Readers for edge lists, feature tables and label files, plus ambient distances."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.distance import pdist, squareform

from hyperdiff.errors import DataError

__all__ = [
    "WeightedGraph",
    "FeatureMatrix",
    "check_distance_matrix",
    "read_edge_list",
    "write_edge_list",
    "read_feature_matrix",
    "read_labels",
    "pairwise_distances",
]


@dataclass(frozen=True)
class WeightedGraph:
    """Undirected graph with positive edge weights.

    Nodes are the integers ``0..n_nodes-1``. ``node_names`` optionally maps
    each index back to the token it was read from.
    """

    n_nodes: int
    edges: tuple[tuple[int, int, float], ...]
    node_names: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if self.n_nodes < 1:
            raise DataError(f"graph needs at least one node, got {self.n_nodes}")
        object.__setattr__(self, "edges", tuple((int(u), int(v), float(w)) for u, v, w in self.edges))
        if self.node_names is not None:
            object.__setattr__(self, "node_names", tuple(str(s) for s in self.node_names))
            if len(self.node_names) != self.n_nodes:
                raise DataError("node_names length does not match n_nodes")
        seen: set[tuple[int, int]] = set()
        for u, v, w in self.edges:
            if not (0 <= u < self.n_nodes and 0 <= v < self.n_nodes):
                raise DataError(f"edge ({u}, {v}) has a node index outside [0, {self.n_nodes})")
            if u == v:
                raise DataError(f"self-loop on node {u}")
            if not (w > 0 and np.isfinite(w)):
                raise DataError(f"edge ({u}, {v}) has non-positive or non-finite weight {w}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise DataError(f"duplicate edge ({u}, {v})")
            seen.add(key)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def weight_matrix(self) -> np.ndarray:
        w = np.zeros((self.n_nodes, self.n_nodes))
        for u, v, wt in self.edges:
            w[u, v] = wt
            w[v, u] = wt
        return w

    def degrees(self) -> np.ndarray:
        """Number of incident edges per node (unweighted)."""
        deg = np.zeros(self.n_nodes, dtype=int)
        for u, v, _ in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    def neighbors(self) -> list[np.ndarray]:
        adj: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for u, v, _ in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        return [np.array(sorted(a), dtype=int) for a in adj]

    def names(self) -> list[str]:
        if self.node_names is None:
            return [str(i) for i in range(self.n_nodes)]
        return list(self.node_names)


@dataclass(frozen=True)
class FeatureMatrix:
    """Dense ``n_points x n_features`` matrix of finite observations."""

    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise DataError(f"feature matrix must be 2-D, got shape {values.shape}")
        if values.shape[0] < 2:
            raise DataError("feature matrix needs at least 2 points")
        if values.shape[1] < 1:
            raise DataError("feature matrix needs at least 1 feature")
        if not np.all(np.isfinite(values)):
            raise DataError("feature matrix contains non-finite entries")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n_points(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]


def check_distance_matrix(d: np.ndarray, name: str = "distance matrix") -> np.ndarray:
    """Validate a square, symmetric, finite, nonnegative matrix with zero diagonal.

    Returns the input as a float array. Symmetry and the zero diagonal are
    checked exactly, not within a tolerance.
    """
    d = np.asarray(d, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] < 1:
        raise DataError(f"{name} must be square and non-empty, got shape {d.shape}")
    if not np.all(np.isfinite(d)):
        raise DataError(f"{name} contains non-finite entries")
    if np.any(np.diag(d) != 0):
        raise DataError(f"{name} has a nonzero diagonal")
    if np.any(d < 0):
        raise DataError(f"{name} has negative entries")
    if not np.array_equal(d, d.T):
        raise DataError(f"{name} is not symmetric")
    return d


def read_edge_list(path: str | Path, weighted: bool = True) -> WeightedGraph:
    """Read a whitespace-separated edge list.

    Each non-blank line not starting with ``#`` holds ``u v`` or ``u v w``.
    Node tokens are arbitrary strings, numbered densely in the order they
    are first seen. With ``weighted=False`` any third column is ignored and
    every edge gets weight 1.
    """
    index: dict[str, int] = {}
    edges: list[tuple[int, int, float]] = []
    seen: dict[tuple[int, int], int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.split()
            if len(tokens) < 2 or (weighted and len(tokens) > 3):
                raise DataError(f"{path}:{lineno}: expected 'u v' or 'u v w', got {line!r}")
            a, b = tokens[0], tokens[1]
            weight = 1.0
            if weighted and len(tokens) == 3:
                try:
                    weight = float(tokens[2])
                except ValueError:
                    raise DataError(f"{path}:{lineno}: weight {tokens[2]!r} is not a number") from None
                if not (weight > 0 and np.isfinite(weight)):
                    raise DataError(f"{path}:{lineno}: non-positive weight {weight}")
            if a == b:
                raise DataError(f"{path}:{lineno}: self-loop on node {a!r}")
            u = index.setdefault(a, len(index))
            v = index.setdefault(b, len(index))
            key = (min(u, v), max(u, v))
            if key in seen:
                raise DataError(f"{path}:{lineno}: duplicate edge {a!r} {b!r} (first on line {seen[key]})")
            seen[key] = lineno
            edges.append((u, v, weight))
    if not index:
        raise DataError(f"{path}: no edges found")
    names = [None] * len(index)
    for name, i in index.items():
        names[i] = name
    return WeightedGraph(len(index), tuple(edges), tuple(names))


def write_edge_list(graph: WeightedGraph, path: str | Path, weighted: bool = False) -> None:
    """Write ``graph`` using its node names; weights are written when ``weighted``."""
    names = graph.names()
    with open(path, "w", encoding="utf-8") as fh:
        for u, v, w in graph.edges:
            if weighted:
                fh.write(f"{names[u]} {names[v]} {w!r}\n")
            else:
                fh.write(f"{names[u]} {names[v]}\n")


def read_feature_matrix(path: str | Path, has_header: bool = False) -> FeatureMatrix:
    """Read a comma-separated numeric table, one point per row."""
    rows: list[list[float]] = []
    width = None
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for rowno, row in enumerate(reader, start=1):
            if has_header and rowno == 1:
                continue
            if not row or all(not c.strip() for c in row):
                continue
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise DataError(f"{path}: row {rowno} has {len(row)} columns, expected {width}")
            parsed = []
            for colno, cell in enumerate(row, start=1):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise DataError(
                        f"{path}: row {rowno}, column {colno}: {cell!r} is not numeric"
                    ) from None
            rows.append(parsed)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return FeatureMatrix(np.array(rows))


def read_labels(path: str | Path, has_header: bool = False) -> list[str]:
    """Read a single-column CSV of class labels (kept as strings)."""
    labels: list[str] = []
    with open(path, newline="", encoding="utf-8") as fh:
        for rowno, row in enumerate(csv.reader(fh), start=1):
            if has_header and rowno == 1:
                continue
            if not row or not row[0].strip():
                continue
            if len(row) != 1:
                raise DataError(f"{path}: row {rowno} has {len(row)} columns, expected 1")
            labels.append(row[0].strip())
    if not labels:
        raise DataError(f"{path}: no labels")
    return labels


def pairwise_distances(
    fm: FeatureMatrix | np.ndarray,
    metric: str = "cosine",
    cosine_form: str = "one_minus",
) -> np.ndarray:
    """Pairwise distances between the rows of a feature matrix.

    ``metric`` is ``"cosine"`` or ``"euclidean"``. For cosine, ``cosine_form``
    selects ``1 - cos`` (default) or the angle ``arccos(cos)``.
    """
    x = fm.values if isinstance(fm, FeatureMatrix) else np.asarray(fm, dtype=float)
    if metric == "euclidean":
        d = squareform(pdist(x, "euclidean"))
    elif metric == "cosine":
        norms = np.linalg.norm(x, axis=1)
        zero = np.flatnonzero(norms == 0)
        if zero.size:
            raise DataError(f"cosine distance undefined for zero-norm row {int(zero[0])}")
        u = x / norms[:, None]
        cos = np.clip(u @ u.T, -1.0, 1.0)
        if cosine_form == "one_minus":
            d = 1.0 - cos
        elif cosine_form == "arccos":
            d = np.arccos(cos)
        else:
            raise ValueError(f"unknown cosine_form {cosine_form!r}")
        d = np.clip(d, 0.0, None)
    else:
        raise ValueError(f"unknown metric {metric!r}")
    # symmetrize from the upper triangle so the result is bit-exact symmetric
    d = np.triu(d, 1)
    d = d + d.T
    return d
