"""Fractional powers of a diffusion operator on the dyadic grid ``t = 2**-k``."""

from __future__ import annotations

import struct
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from hyperdiff.errors import DataError, NumericalError
from hyperdiff.kernel import DiffusionOperator

__all__ = [
    "SpectralForm",
    "MultiScaleDensities",
    "spectral_decompose",
    "fractional_power",
    "multiscale_densities",
    "write_densities",
    "read_densities",
]

NEGATIVE_TOL = 1e-10
RENORMALIZE_TOL = 1e-12
DENSITIES_MAGIC = b"HDDPHI01"


@dataclass(frozen=True)
class SpectralForm:
    """Eigendecomposition of the symmetric conjugate of a diffusion operator.

    ``P = diag(d_half_inv) @ basis @ diag(eigenvalues) @ basis.T @ diag(d_half)``
    with ``basis`` orthonormal and eigenvalues sorted in descending order.
    """

    eigenvalues: np.ndarray = field(repr=False)
    basis: np.ndarray = field(repr=False)
    d_half: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def d_half_inv(self) -> np.ndarray:
        return 1.0 / self.d_half

    def reconstruct(self, eigenvalues: np.ndarray | None = None) -> np.ndarray:
        lam = self.eigenvalues if eigenvalues is None else eigenvalues
        a = (self.basis * lam) @ self.basis.T
        return self.d_half_inv[:, None] * a * self.d_half[None, :]


@dataclass(frozen=True)
class MultiScaleDensities:
    """Propagated densities ``phi[k] = P**(2**-k)`` for ``k = 0..K``.

    Row ``i`` of ``phi[k]`` is the density obtained by diffusing the indicator
    of point ``i`` for time ``2**-k``. Only the entrywise square roots ``psi``
    are stored, as one ``(K+1, n, n)`` array; ``phi`` is recomputed on access.
    """

    psi: np.ndarray = field(repr=False)

    @property
    def phi(self) -> np.ndarray:
        return np.square(self.psi)

    @property
    def n(self) -> int:
        return self.psi.shape[1]

    @property
    def max_scale(self) -> int:
        return self.psi.shape[0] - 1


def spectral_decompose(op: DiffusionOperator) -> SpectralForm:
    """Diagonalize ``A = D^{1/2} P D^{-1/2}`` with a symmetric eigensolver."""
    d_half = np.sqrt(op.stationary_weights)
    if op.spectrum is not None:
        lam, basis = op.spectrum
        return SpectralForm(np.asarray(lam, dtype=float), np.asarray(basis, dtype=float), d_half)
    a = op.symmetric_conjugate()
    asym = np.max(np.abs(a - a.T))
    if asym > 1e-8:
        raise NumericalError(f"operator is not symmetrizable (residual {asym:.3g})")
    a = 0.5 * (a + a.T)
    try:
        lam, basis = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver failed: {exc}") from exc
    order = np.argsort(-lam, kind="stable")
    return SpectralForm(lam[order], basis[:, order], d_half)


ROW_BLOCK = 128


def _power_into(s: SpectralForm, t: float, negative_policy: str, out: np.ndarray) -> None:
    lam = np.clip(s.eigenvalues, 0.0, None) ** t
    # row blocks keep the scratch space at ROW_BLOCK x n instead of n x n
    for start in range(0, s.n, ROW_BLOCK):
        rows = slice(start, start + ROW_BLOCK)
        np.matmul(s.basis[rows] * lam, s.basis.T, out=out[rows])
    out *= s.d_half_inv[:, None]
    out *= s.d_half[None, :]
    low = out.min()
    if low < -NEGATIVE_TOL and negative_policy == "error":
        raise NumericalError(f"fractional power t={t:g} has negative entry {low:.3g}")
    np.clip(out, 0.0, None, out=out)
    sums = out.sum(axis=1)
    if np.any(sums <= 0):
        raise NumericalError(f"fractional power t={t:g} has an all-zero row")
    if np.max(np.abs(sums - 1.0)) > RENORMALIZE_TOL:
        out /= sums[:, None]


def _check_power_args(t: float, negative_policy: str) -> None:
    if not (0 < t <= 1):
        raise ValueError(f"diffusion time must lie in (0, 1], got {t}")
    if negative_policy not in ("error", "clip"):
        raise ValueError(f"unknown negative_policy {negative_policy!r}")


def fractional_power(s: SpectralForm, t: float, negative_policy: str = "error") -> np.ndarray:
    """Return ``P**t`` for ``t`` in ``(0, 1]``.

    Negative eigenvalues are set to zero before taking the power. Entries in
    ``[-1e-10, 0)`` are roundoff and are zeroed. More negative entries raise
    ``NumericalError`` under ``negative_policy="error"``; ``"clip"`` zeroes
    them too. Fractional powers of a Gaussian-kernel operator are generally not
    entrywise nonnegative, so that path needs ``"clip"``. Rows are rescaled to
    sum to one whenever clamping moved a row sum by more than ``1e-12``.
    """
    _check_power_args(t, negative_policy)
    out = np.empty((s.n, s.n))
    _power_into(s, t, negative_policy, out)
    return out


def multiscale_densities(
    s: SpectralForm,
    max_scale: int,
    negative_policy: str = "error",
    workers: int = 1,
) -> MultiScaleDensities:
    """Densities ``P**(2**-k)`` (stored as square roots) for ``k = 0..max_scale``.

    Each scale is written straight into one preallocated ``(K+1, n, n)``
    array. Scales are independent, so ``workers > 1`` fills them on a thread
    pool; the result does not depend on the number of workers.
    """
    if max_scale < 0:
        raise ValueError(f"max_scale must be nonnegative, got {max_scale}")
    _check_power_args(1.0, negative_policy)
    psi = np.empty((max_scale + 1, s.n, s.n))

    def one(k: int) -> None:
        _power_into(s, 2.0**-k, negative_policy, psi[k])
        np.sqrt(psi[k], out=psi[k])

    if workers > 1 and max_scale > 0:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(one, range(max_scale + 1)))
    else:
        for k in range(max_scale + 1):
            one(k)
    psi.setflags(write=False)
    return MultiScaleDensities(psi)


def write_densities(ms: MultiScaleDensities, path: str | Path) -> None:
    """Binary dump: magic, n, K, endianness tag, then K+1 row-major float64 matrices."""
    tag = b"<" if sys.byteorder == "little" else b">"
    with open(path, "wb") as fh:
        fh.write(DENSITIES_MAGIC)
        fh.write(struct.pack(tag.decode() + "QQ", ms.n, ms.max_scale))
        fh.write(tag)
        for k in range(ms.max_scale + 1):
            fh.write(np.square(ms.psi[k]).tobytes(order="C"))


def read_densities(path: str | Path) -> MultiScaleDensities:
    with open(path, "rb") as fh:
        magic = fh.read(len(DENSITIES_MAGIC))
        if magic != DENSITIES_MAGIC:
            raise DataError(f"{path}: not a densities file")
        raw = fh.read(16)
        tag = fh.read(1)
        if tag not in (b"<", b">") or len(raw) != 16:
            raise DataError(f"{path}: corrupt header")
        n, k = struct.unpack(tag.decode() + "QQ", raw)
        data = np.frombuffer(fh.read(), dtype=np.dtype(tag.decode() + "f8"))
    if data.size != (k + 1) * n * n:
        raise DataError(f"{path}: expected {(k + 1) * n * n} values, found {data.size}")
    psi = np.sqrt(data.astype(np.float64).reshape(k + 1, n, n))
    psi.setflags(write=False)
    return MultiScaleDensities(psi)
