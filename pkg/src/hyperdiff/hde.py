"""Hyperbolic diffusion embedding (HDE) and the hyperbolic diffusion distance (HDD).

Point ``i`` at scale ``k`` is mapped into the Poincare half-space
``H^{n+1}`` as ``[psi_i^k ; 2**(k*alpha - 2)]``, where ``psi_i^k`` is the
square root of its density diffused for time ``2**-k``. HDD is the l1
product distance over the ``K+1`` factors. Every factor shares one height
per scale, so the factor distance reduces to
``2 * asinh(2**(1 - k*alpha) * ||psi_i^k - psi_j^k||)``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.spatial.distance import pdist, squareform

from hyperdiff.diffusion import MultiScaleDensities, SpectralForm, fractional_power

__all__ = [
    "HalfSpacePoint",
    "HdeEmbedding",
    "embed",
    "half_space_distance",
    "hdd_pair",
    "hellinger_distances",
    "scale_distances",
    "hdd_matrix",
    "variant_distance",
    "default_max_scale",
    "auto_max_scale",
    "VARIANTS",
]

DEFAULT_ALPHA = 0.5
VARIANTS = ("hdd", "l2_product", "single_scale", "euclidean")


@dataclass(frozen=True)
class HalfSpacePoint:
    horizontal: np.ndarray
    height: float

    def __post_init__(self) -> None:
        if not self.height > 0:
            raise ValueError(f"half-space height must be positive, got {self.height}")

    def coordinates(self) -> np.ndarray:
        return np.append(self.horizontal, self.height)


@dataclass(frozen=True)
class HdeEmbedding:
    """Multi-scale embedding of ``n`` points into a product of ``K+1`` half-spaces.

    ``psi[k, i]`` is the horizontal part of point ``i`` at scale ``k`` and
    ``heights[k] = 2**(k*alpha - 2)`` the shared vertical coordinate.
    """

    psi: np.ndarray = field(repr=False)
    alpha: float
    heights: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.psi.shape[1]

    @property
    def max_scale(self) -> int:
        return self.psi.shape[0] - 1

    @property
    def dimension(self) -> int:
        """Flattened dimension ``(n+1)(K+1)``."""
        return (self.n + 1) * (self.max_scale + 1)

    def point(self, i: int, k: int) -> HalfSpacePoint:
        return HalfSpacePoint(self.psi[k, i], float(self.heights[k]))

    def scale_block(self, k: int) -> np.ndarray:
        """``n x (n+1)`` coordinates of all points at scale ``k``."""
        return np.hstack([self.psi[k], np.full((self.n, 1), self.heights[k])])

    def flatten(self) -> np.ndarray:
        """Rows are the concatenated coordinates ``zeta_K(x_i)``, scale 0 first."""
        return np.hstack([self.scale_block(k) for k in range(self.max_scale + 1)])


def _check_alpha(alpha: float) -> None:
    if not (0 < alpha < 1):
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")


def embed(ms: MultiScaleDensities, alpha: float = DEFAULT_ALPHA) -> HdeEmbedding:
    _check_alpha(alpha)
    ks = np.arange(ms.max_scale + 1)
    heights = 2.0 ** (ks * alpha - 2.0)
    return HdeEmbedding(ms.psi, float(alpha), heights)


def half_space_distance(a: HalfSpacePoint, b: HalfSpacePoint) -> float:
    """Geodesic distance in the Poincare half-space of curvature -1."""
    if a.horizontal.shape != b.horizontal.shape:
        raise ValueError("points live in half-spaces of different dimension")
    gap = np.linalg.norm(a.coordinates() - b.coordinates())
    return float(2.0 * np.arcsinh(gap / (2.0 * np.sqrt(a.height * b.height))))


def _prefactors(alpha: float, max_scale: int) -> np.ndarray:
    return 2.0 ** (1.0 - np.arange(max_scale + 1) * alpha)


def hdd_pair(e: HdeEmbedding, i: int, j: int) -> float:
    for idx in (i, j):
        if not (0 <= idx < e.n):
            raise IndexError(f"point index {idx} out of range for n={e.n}")
    hell = np.linalg.norm(e.psi[:, i, :] - e.psi[:, j, :], axis=1)
    terms = 2.0 * np.arcsinh(_prefactors(e.alpha, e.max_scale) * hell)
    total = 0.0
    for term in terms:
        total += float(term)
    return total


def _hellinger_one(psi_k: np.ndarray) -> np.ndarray:
    if psi_k.shape[0] == 1:
        return np.zeros((1, 1))
    # pdist works from coordinate differences, so near-identical rows keep full precision
    return squareform(pdist(psi_k, "euclidean"))


def hellinger_distances(e: HdeEmbedding | MultiScaleDensities, workers: int = 1) -> np.ndarray:
    """``(K+1, n, n)`` array of ``||psi_i^k - psi_j^k||_2``."""
    psi = e.psi
    if workers > 1 and psi.shape[0] > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return np.stack(list(pool.map(_hellinger_one, psi)))
    return np.stack([_hellinger_one(p) for p in psi])


def scale_distances(e: HdeEmbedding, workers: int = 1) -> np.ndarray:
    """Per-scale factor distances ``(K+1, n, n)``; HDD is their sum over scales."""
    hell = hellinger_distances(e, workers)
    pre = _prefactors(e.alpha, e.max_scale)
    return 2.0 * np.arcsinh(pre[:, None, None] * hell)


def _accumulate(e: HdeEmbedding, term: Callable[[np.ndarray, int], np.ndarray], workers: int) -> np.ndarray:
    """Sum ``term(condensed Hellinger distances, k)`` over scales in increasing ``k``.

    Works on condensed (upper-triangle) vectors and holds at most ``workers``
    of them at a time, so scratch memory stays near ``workers * n**2 / 2``
    floats regardless of ``K``.
    """
    if e.n == 1:
        return np.zeros((1, 1))

    def one(k: int) -> np.ndarray:
        return term(pdist(e.psi[k], "euclidean"), k)

    acc = np.zeros(e.n * (e.n - 1) // 2)
    scales = range(e.max_scale + 1)
    if workers > 1 and e.max_scale > 0:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for start in range(0, len(scales), workers):
                for part in pool.map(one, scales[start : start + workers]):
                    acc += part
    else:
        for k in scales:
            acc += one(k)
    return squareform(acc)


def _factor_term(alpha: float) -> Callable[[np.ndarray, int], np.ndarray]:
    def term(hell: np.ndarray, k: int) -> np.ndarray:
        hell *= 2.0 ** (1.0 - k * alpha)
        np.arcsinh(hell, out=hell)
        hell *= 2.0
        return hell

    return term


def hdd_matrix(e: HdeEmbedding, workers: int = 1) -> np.ndarray:
    """Pairwise HDD, summed over scales in increasing ``k``."""
    return _accumulate(e, _factor_term(e.alpha), workers)


def variant_distance(
    e: HdeEmbedding,
    kind: str,
    scale: int | None = None,
    workers: int = 1,
) -> np.ndarray:
    """HDD or one of its ablations.

    ``"hdd"``: l1 sum of factor distances. ``"l2_product"``: sum of squared
    factor distances. ``"single_scale"``: the factor distance at ``scale``
    alone. ``"euclidean"``: Euclidean distance between flattened embeddings.
    """
    if kind == "hdd":
        return hdd_matrix(e, workers)
    if kind == "l2_product":
        factor = _factor_term(e.alpha)
        return _accumulate(e, lambda h, k: np.square(factor(h, k)), workers)
    if kind == "single_scale":
        if scale is None or not (0 <= scale <= e.max_scale):
            raise ValueError(f"single_scale needs 0 <= scale <= {e.max_scale}, got {scale}")
        sub = HdeEmbedding(e.psi[scale : scale + 1], e.alpha, e.heights[scale : scale + 1])
        hell = hellinger_distances(sub)[0]
        return 2.0 * np.arcsinh(2.0 ** (1.0 - scale * e.alpha) * hell)
    if kind == "euclidean":
        # heights coincide within a scale, so only the horizontal parts differ
        return np.sqrt(_accumulate(e, lambda h, k: np.square(h), workers))
    raise ValueError(f"unknown variant {kind!r}; expected one of {VARIANTS}")


def default_max_scale(n: int) -> int:
    """K = 3 up to 600 points, K = 10 beyond."""
    return 3 if n <= 600 else 10


def auto_max_scale(
    s: SpectralForm,
    alpha: float = DEFAULT_ALPHA,
    tol: float = 1e-6,
    cap: int = 19,
    negative_policy: str = "error",
) -> int:
    """Smallest ``K <= cap`` whose largest factor distance falls below ``tol``.

    Returns ``cap`` when the tail never gets that small; with the usual
    ``alpha`` near 1/2 this is the common outcome, because the factor distance
    decays only like ``2**(-k*alpha)``.
    """
    _check_alpha(alpha)
    for k in range(cap + 1):
        psi = np.sqrt(fractional_power(s, 2.0**-k, negative_policy))
        term = 2.0 * np.arcsinh(2.0 ** (1.0 - k * alpha) * _hellinger_one(psi))
        if term.max() < tol:
            return k
    return cap
