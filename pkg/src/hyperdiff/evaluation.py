"""Embedding-quality measures, downstream classification and tree generators."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra, shortest_path

from hyperdiff.errors import DataError
from hyperdiff.ingest import WeightedGraph, check_distance_matrix
from hyperdiff.kernel import _require_connected

__all__ = [
    "EvalReport",
    "SplitSpec",
    "shortest_paths",
    "mean_average_precision",
    "average_distortion",
    "gromov_delta",
    "medoid_classify",
    "balanced_tree",
    "random_tree",
]

GROMOV_MAX_N = 500
MAX_TREE_NODES = 10_000_000


@dataclass
class EvalReport:
    map_score: float
    avg_distortion: float
    gromov_delta: float | None = None
    accuracy_mean: float | None = None
    accuracy_std: float | None = None
    parameters: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not (0.0 <= self.map_score <= 1.0):
            raise ValueError(f"MAP must lie in [0, 1], got {self.map_score}")
        for name in ("avg_distortion", "gromov_delta", "accuracy_mean", "accuracy_std"):
            value = getattr(self, name)
            if value is not None and not np.isfinite(value):
                raise ValueError(f"{name} is not finite")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    repetitions: int = 10
    seed: int = 1234

    def __post_init__(self) -> None:
        if not (0 < self.train_fraction < 1):
            raise ValueError(f"train_fraction must lie in (0, 1), got {self.train_fraction}")
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")


def shortest_paths(g: WeightedGraph) -> np.ndarray:
    """All-pairs shortest-path distances of a connected graph.

    Unit-weight graphs use breadth-first search, others Dijkstra.
    """
    w = g.weight_matrix()
    _require_connected(w)
    graph = csr_matrix(w)
    if all(wt == 1.0 for _, _, wt in g.edges):
        d = shortest_path(graph, method="D", directed=False, unweighted=True)
    else:
        d = dijkstra(graph, directed=False)
    d = np.triu(d, 1)
    return d + d.T


def _check_pair(d_emb: np.ndarray, n: int) -> np.ndarray:
    d_emb = np.asarray(d_emb, dtype=float)
    if d_emb.shape != (n, n):
        raise DataError(f"distance matrix has shape {d_emb.shape}, expected ({n}, {n})")
    return d_emb


def mean_average_precision(g: WeightedGraph, d_emb: np.ndarray) -> float:
    """MAP of an embedding distance against graph adjacency.

    For node ``i`` and each graph neighbor ``j`` the ball ``B`` holds every
    other node ``y`` with ``d(i, y) <= d(i, j)``; ties count as members and
    ``i`` itself never does. The precision ``|N(i) & B| / |B|`` is averaged
    over neighbors, then over nodes.
    """
    d_emb = _check_pair(d_emb, g.n_nodes)
    nbrs = g.neighbors()
    total = 0.0
    for i, nb in enumerate(nbrs):
        if nb.size == 0:
            raise DataError(f"node {i} is isolated; MAP undefined")
        row = np.delete(d_emb[i], i)
        nb_d = d_emb[i, nb]
        ball = np.sum(row[None, :] <= nb_d[:, None], axis=1)
        hits = np.sum(nb_d[None, :] <= nb_d[:, None], axis=1)
        total += float(np.mean(hits / ball))
    return total / g.n_nodes


def average_distortion(d_emb: np.ndarray, d_true: np.ndarray) -> float:
    """Mean of ``|d_emb - d_true| / d_true`` over unordered pairs."""
    d_true = np.asarray(d_true, dtype=float)
    d_emb = _check_pair(d_emb, d_true.shape[0])
    iu = np.triu_indices(d_true.shape[0], k=1)
    truth = d_true[iu]
    if truth.size == 0:
        return 0.0
    if np.any(truth <= 0):
        raise DataError("true distance is zero between distinct points")
    return float(np.mean(np.abs(d_emb[iu] - truth) / truth))


def gromov_delta(d: np.ndarray, allow_large: bool = False) -> float:
    """Smallest delta for which the four-point condition holds on every quadruple.

    For each quadruple the three pair-sums ``S1 >= S2 >= S3`` are formed and
    ``delta = max (S1 - S2) / 2``. Cost is O(n^4); inputs above 500 points
    need ``allow_large=True``.
    """
    d = np.asarray(d, dtype=float)
    n = d.shape[0]
    if n > GROMOV_MAX_N and not allow_large:
        raise DataError(f"gromov_delta is O(n^4); n={n} exceeds {GROMOV_MAX_N} without allow_large")
    if n < 4:
        return 0.0
    best = 0.0
    for w in range(n):
        for x in range(w + 1, n):
            # sums over (y, z) for the fixed pair (w, x)
            s1 = d[w, x] + d
            s2 = d[w][:, None] + d[x][None, :]
            s3 = d[x][:, None] + d[w][None, :]
            hi = np.maximum(np.maximum(s1, s2), s3)
            lo = np.minimum(np.minimum(s1, s2), s3)
            mid = s1 + s2 + s3 - hi - lo
            best = max(best, float(np.max(hi - mid)))
    return best / 2.0


def medoid_classify(
    d: np.ndarray,
    labels: Sequence,
    split: SplitSpec = SplitSpec(),
    max_retries: int = 10,
) -> tuple[float, float]:
    """Nearest-medoid classification accuracy over repeated random splits.

    Each class is represented by its training medoid: the training point of
    that class with the smallest summed distance to the other training points
    of the class (lowest index on ties). Test points take the class of the
    closest medoid, with ties going to the class that sorts first. Returns
    the mean and (population) standard deviation of accuracy.
    """
    d = np.asarray(d, dtype=float)
    n = d.shape[0]
    if len(labels) != n:
        raise DataError(f"{len(labels)} labels for a {n}-point distance matrix")
    classes, y = np.unique(np.asarray(labels), return_inverse=True)
    if classes.size < 2:
        raise DataError("classification needs at least 2 classes")
    n_train = int(round(split.train_fraction * n))
    if not (1 <= n_train < n):
        raise DataError(f"train fraction {split.train_fraction} leaves an empty split for n={n}")
    rng = np.random.default_rng(split.seed)
    scores = []
    for rep in range(split.repetitions):
        for _ in range(max_retries):
            perm = rng.permutation(n)
            train, test = perm[:n_train], perm[n_train:]
            if np.unique(y[train]).size == classes.size:
                break
        else:
            raise DataError(f"repetition {rep}: some class missing from training after {max_retries} draws")
        train = np.sort(train)
        medoids = []
        for c in range(classes.size):
            members = train[y[train] == c]
            cost = d[np.ix_(members, members)].sum(axis=1)
            medoids.append(members[int(np.argmin(cost))])
        pred = np.argmin(d[np.ix_(test, np.array(medoids))], axis=1)
        scores.append(float(np.mean(pred == y[test])))
    return float(np.mean(scores)), float(np.std(scores))


def balanced_tree(branching: int, depth: int) -> WeightedGraph:
    """Complete ``branching``-ary tree of the given depth, unit weights, root 0.

    Children of node ``p`` are ``b*p + 1 .. b*p + b`` (breadth-first order).
    """
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    if depth == 0:
        return WeightedGraph(1, ())
    if branching < 2:
        raise ValueError("branching must be at least 2")
    if depth * np.log(branching) > np.log(MAX_TREE_NODES):
        raise ValueError(f"tree with branching {branching} and depth {depth} is too large")
    n = (branching ** (depth + 1) - 1) // (branching - 1)
    if n > MAX_TREE_NODES:
        raise ValueError(f"tree would have {n} nodes (limit {MAX_TREE_NODES})")
    edges = tuple(((c - 1) // branching, c, 1.0) for c in range(1, n))
    return WeightedGraph(n, edges)


def random_tree(
    n: int,
    rng: np.random.Generator | int | None = None,
    branching: tuple[int, int] = (2, 4),
) -> WeightedGraph:
    """Random tree grown breadth-first with a random branching factor per node.

    Nodes are expanded in first-in-first-out order; each gets a number of
    children drawn uniformly from ``branching`` (inclusive) until ``n``
    nodes exist.
    """
    if n < 1:
        raise ValueError("n must be positive")
    lo, hi = branching
    if not (1 <= lo <= hi):
        raise ValueError(f"invalid branching range {branching}")
    rng = np.random.default_rng(rng)
    edges = []
    queue = deque([0])
    nxt = 1
    while nxt < n:
        parent = queue.popleft()
        for _ in range(int(rng.integers(lo, hi + 1))):
            if nxt >= n:
                break
            edges.append((parent, nxt, 1.0))
            queue.append(nxt)
            nxt += 1
    return WeightedGraph(n, tuple(edges))
