"""Diffusion operators from distances (Gaussian kernel) or graphs (heat kernel)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components

from hyperdiff.errors import DataError, NumericalError
from hyperdiff.ingest import WeightedGraph

__all__ = [
    "DiffusionOperator",
    "epsilon_median",
    "gaussian_affinity",
    "normalize_twice",
    "graph_laplacian",
    "heat_kernel_operator",
]

ROW_SUM_TOL = 1e-8
SYMMETRY_TOL = 1e-10


@dataclass(frozen=True)
class DiffusionOperator:
    """Row-stochastic Markov matrix similar to a symmetric matrix.

    ``D^{1/2} P D^{-1/2}`` is symmetric for ``D = diag(stationary_weights)``.

    ``spectrum`` is an optional exact eigendecomposition ``(eigenvalues, basis)``
    of that symmetric conjugate, supplied when the operator was itself built
    from one (the heat-kernel path). It avoids re-decomposing ``P`` and losing
    the tiny eigenvalues ``exp(-mu)`` to roundoff.
    """

    p: np.ndarray = field(repr=False)
    stationary_weights: np.ndarray = field(repr=False)
    spectrum: tuple[np.ndarray, np.ndarray] | None = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        p = np.asarray(self.p, dtype=float)
        weights = np.asarray(self.stationary_weights, dtype=float)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise DataError(f"diffusion operator must be square, got shape {p.shape}")
        if weights.shape != (p.shape[0],) or np.any(weights <= 0):
            raise DataError("stationary weights must be a positive vector of length n")
        p.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "stationary_weights", weights)

    @property
    def n(self) -> int:
        return self.p.shape[0]

    def symmetric_conjugate(self) -> np.ndarray:
        """``D^{1/2} P D^{-1/2}``."""
        h = np.sqrt(self.stationary_weights)
        return h[:, None] * self.p / h[None, :]

    def check(self) -> None:
        """Raise ``NumericalError`` if the operator invariants are violated."""
        dev = np.max(np.abs(self.p.sum(axis=1) - 1.0))
        if dev >= ROW_SUM_TOL:
            raise NumericalError(f"operator rows deviate from 1 by {dev:.3g}")
        if self.p.min() < -1e-12:
            raise NumericalError(f"operator has negative entry {self.p.min():.3g}")
        a = self.symmetric_conjugate()
        asym = np.max(np.abs(a - a.T))
        if asym >= SYMMETRY_TOL:
            raise NumericalError(f"operator is not symmetrizable (residual {asym:.3g})")


def _off_diagonal(d: np.ndarray) -> np.ndarray:
    return d[np.triu_indices(d.shape[0], k=1)]


def epsilon_median(d: np.ndarray, c: float = 1.0) -> float:
    """Kernel scale ``c * median(d(i,j)**2)`` over pairs ``i < j``."""
    d = np.asarray(d, dtype=float)
    if d.shape[0] < 2:
        raise DataError("epsilon_median needs at least 2 points")
    if c <= 0:
        raise ValueError(f"median multiplier must be positive, got {c}")
    sq = _off_diagonal(d) ** 2
    if not np.any(sq > 0):
        raise DataError("all off-diagonal distances are zero; kernel scale undefined")
    return float(c * np.median(sq))


def gaussian_affinity(d: np.ndarray, epsilon: float) -> np.ndarray:
    """Gaussian affinities ``exp(-d**2 / epsilon)`` with unit diagonal."""
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    d = np.asarray(d, dtype=float)
    w = np.exp(-(d**2) / epsilon)
    np.fill_diagonal(w, 1.0)
    return w


def normalize_twice(w: np.ndarray) -> DiffusionOperator:
    """Density-normalize ``W`` by its row sums on both sides, then row-normalize.

    ``W~ = S^-1 W S^-1`` and ``P = D^-1 W~``, where ``S`` and ``D`` are the
    diagonal row-sum matrices of ``W`` and ``W~``. ``diag(D)`` becomes the
    stationary weights of the returned operator.
    """
    w = np.asarray(w, dtype=float)
    s = w.sum(axis=1)
    if np.any(s <= 0):
        raise DataError(f"affinity row {int(np.argmin(s))} has zero sum (isolated point)")
    wt = w / s[:, None] / s[None, :]
    wt = 0.5 * (wt + wt.T)
    dd = wt.sum(axis=1)
    p = wt / dd[:, None]
    return DiffusionOperator(p, dd)


def _require_connected(w: np.ndarray) -> None:
    n_comp, labels = connected_components(w != 0, directed=False)
    if n_comp > 1:
        a = int(np.flatnonzero(labels == labels[0])[0])
        b = int(np.flatnonzero(labels != labels[0])[0])
        raise DataError(f"graph is disconnected ({n_comp} components; nodes {a} and {b} are not joined)")


def graph_laplacian(g: WeightedGraph, kind: str = "unnormalized") -> np.ndarray:
    """Dense graph Laplacian of a connected graph.

    ``kind="unnormalized"`` gives ``Deg - W``; ``"symmetric"`` gives
    ``I - Deg^-1/2 W Deg^-1/2``.
    """
    w = g.weight_matrix()
    deg = w.sum(axis=1)
    if g.n_nodes > 1 and np.any(deg == 0):
        raise DataError(f"node {int(np.flatnonzero(deg == 0)[0])} is isolated")
    _require_connected(w)
    if kind == "unnormalized":
        lap = np.diag(deg) - w
    elif kind in ("symmetric", "symmetric-normalized"):
        if g.n_nodes == 1:
            return np.zeros((1, 1))
        inv = 1.0 / np.sqrt(deg)
        lap = np.eye(g.n_nodes) - inv[:, None] * w * inv[None, :]
    else:
        raise ValueError(f"unknown Laplacian kind {kind!r}")
    return np.triu(lap) + np.triu(lap, 1).T


def heat_kernel_operator(lap: np.ndarray, degrees: np.ndarray | None = None) -> DiffusionOperator:
    """Heat kernel ``exp(-L)`` of a graph Laplacian as a diffusion operator.

    ``exp(-L)`` is formed from the symmetric eigendecomposition ``L = Q M Q^T``.
    For the unnormalized Laplacian the result is already row-stochastic and
    the stationary weights are all ones. For the symmetric-normalized
    Laplacian pass the node ``degrees``: the operator is then
    ``Deg^-1/2 exp(-L) Deg^1/2``, which is row-stochastic with stationary
    weights ``degrees``.
    """
    lap = np.asarray(lap, dtype=float)
    if lap.ndim != 2 or lap.shape[0] != lap.shape[1]:
        raise DataError(f"Laplacian must be square, got shape {lap.shape}")
    asym = np.max(np.abs(lap - lap.T)) if lap.size else 0.0
    if asym > SYMMETRY_TOL:
        raise NumericalError(f"Laplacian is not symmetric (residual {asym:.3g})")
    lap = 0.5 * (lap + lap.T)
    try:
        mu, q = np.linalg.eigh(lap)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"Laplacian eigendecomposition failed: {exc}") from exc
    if mu.min() < -1e-8 * max(1.0, np.abs(mu).max()):
        raise NumericalError(f"Laplacian has negative eigenvalue {mu.min():.3g}")
    mu = np.clip(mu, 0.0, None)
    lam = np.exp(-mu)
    a = (q * lam) @ q.T
    a = 0.5 * (a + a.T)
    if degrees is None:
        weights = np.ones(lap.shape[0])
        p = a
    else:
        weights = np.asarray(degrees, dtype=float)
        h = np.sqrt(weights)
        p = a / h[:, None] * h[None, :]
    order = np.argsort(-lam, kind="stable")
    return DiffusionOperator(p, weights, spectrum=(lam[order], q[:, order]))
