"""Dense complex-matrix helpers: Hermitian checks, spectra, partial traces."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, HermiticityError

HERMITIAN_ATOL = 1e-10
RANK_RTOL = 1e-9
PSD_ATOL = 1e-10


def as_matrix(m) -> np.ndarray:
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {m.shape}")
    return m


def is_hermitian(m, atol: float = 1e-12) -> bool:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    return bool(np.max(np.abs(m - m.conj().T), initial=0.0) <= atol)


def _require_hermitian(h, atol: float = HERMITIAN_ATOL) -> np.ndarray:
    h = as_matrix(h)
    if h.shape[0] != h.shape[1]:
        raise DimensionError(f"matrix is not square: {h.shape}")
    if not is_hermitian(h, atol):
        raise HermiticityError("matrix is not Hermitian within %g" % atol)
    return h


def trace_inner(a, b) -> complex:
    """Return Tr(a @ b) without forming the product."""
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[0] != a.shape[1] or a.shape != b.shape:
        raise DimensionError(f"incompatible shapes {a.shape} and {b.shape}")
    return complex(np.einsum("ij,ji->", a, b))


def numerical_rank(eigenvalues: Sequence[float], rtol: float = RANK_RTOL) -> int:
    """Count eigenvalues above ``rtol * max(1, lambda_max)``."""
    ev = np.asarray(eigenvalues, dtype=float)
    if ev.size == 0:
        return 0
    return int(np.sum(ev > rtol * max(1.0, float(ev.max()))))


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues in descending order; ``eigenvectors[:, i]`` pairs with ``eigenvalues[i]``."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def rank(self) -> int:
        return numerical_rank(self.eigenvalues)

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def spectral(h) -> SpectralDecomposition:
    h = _require_hermitian(h)
    w, v = np.linalg.eigh(0.5 * (h + h.conj().T))
    order = np.argsort(w)[::-1]
    return SpectralDecomposition(w[order], v[:, order])


def min_eigenvalue(h) -> float:
    h = _require_hermitian(h)
    return float(np.linalg.eigvalsh(0.5 * (h + h.conj().T))[0])


def is_psd(h, atol: float = PSD_ATOL) -> bool:
    return min_eigenvalue(h) >= -atol


def projector(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=np.complex128)
    return np.outer(psi, psi.conj())


def partial_trace(m, local_dims: Sequence[int], traced_sites: Iterable[int]) -> np.ndarray:
    """Trace out ``traced_sites`` of an operator on a tensor product space.

    Site 0 is the leftmost tensor factor, so for qubits bit ``n-1-i`` of the
    row index belongs to site ``i``.
    """
    m = as_matrix(m)
    dims = [int(x) for x in local_dims]
    if any(x < 1 for x in dims):
        raise DimensionError("local dimensions must be positive")
    total = int(np.prod(dims))
    if m.shape != (total, total):
        raise DimensionError(f"matrix shape {m.shape} does not match local dims {dims}")
    traced = sorted(set(int(s) for s in traced_sites))
    if not traced:
        raise IndexError("no sites to trace out")
    n = len(dims)
    for s in traced:
        if not 0 <= s < n:
            raise IndexError(f"site {s} out of range for {n} sites")
    kept = [s for s in range(n) if s not in traced]
    t = m.reshape(dims + dims)
    # move traced row/col axes to the end, pair them up and contract
    perm = kept + [n + s for s in kept] + traced + [n + s for s in traced]
    t = t.transpose(perm)
    dk = int(np.prod([dims[s] for s in kept])) if kept else 1
    dt = int(np.prod([dims[s] for s in traced]))
    t = t.reshape(dk, dk, dt, dt)
    return np.trace(t, axis1=2, axis2=3)
