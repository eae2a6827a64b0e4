"""Rank budgets for the UDA search and the constructive rank reduction that
backs them."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InvalidDensityError
from .frameworks import MeasurementFramework
from .linalg import RANK_RTOL, as_matrix, is_hermitian

NULLSPACE_RTOL = 1e-10
SYMMETRIC_FRAMEWORK_SIZE = 35


class RankSource(enum.Enum):
    MEASUREMENT_BOUND = "measurement-bound"  # rank < sqrt(m + 2)
    UDA_BOUND = "uda-bound"  # rank < sqrt(m + 3)
    SYMMETRIC5 = "symmetric5"
    PURE1 = "pure1"
    USER = "user"


@dataclass(frozen=True)
class RankBudget:
    max_rank: int
    source: RankSource

    def __post_init__(self):
        if self.max_rank < 1:
            raise ValueError("max_rank must be at least 1")


def largest_int_below_sqrt(x: int) -> int:
    """Largest integer k with k < sqrt(x), computed exactly."""
    if x < 1:
        raise ValueError("x must be positive")
    k = math.isqrt(x)
    return k - 1 if k * k == x else k


def qst_rank_bound(m: int) -> RankBudget:
    """Any measurement vector of an m-observable framework is reproduced by a
    density matrix of rank < sqrt(m + 2)."""
    if m < 1:
        raise ValueError("m must be at least 1")
    return RankBudget(largest_int_below_sqrt(m + 2), RankSource.MEASUREMENT_BOUND)


def uda_rank_bound(m: int) -> RankBudget:
    """Same as :func:`qst_rank_bound` with the target projector added as an
    extra observable, i.e. rank < sqrt(m + 3)."""
    if m < 1:
        raise ValueError("m must be at least 1")
    return RankBudget(largest_int_below_sqrt(m + 3), RankSource.UDA_BOUND)


def symmetric_uda_rank() -> RankBudget:
    # |C| = 35 observables (identity and target projector included): rank < sqrt(36)
    return RankBudget(largest_int_below_sqrt(SYMMETRIC_FRAMEWORK_SIZE + 1), RankSource.SYMMETRIC5)


def pure_rank() -> RankBudget:
    return RankBudget(1, RankSource.PURE1)


def hermitian_basis(r: int) -> np.ndarray:
    """Orthonormal (Hilbert-Schmidt) basis of r x r Hermitian matrices, shape (r*r, r, r)."""
    out = []
    for k in range(r):
        e = np.zeros((r, r), dtype=np.complex128)
        e[k, k] = 1
        out.append(e)
    s = 1 / math.sqrt(2)
    for k in range(r):
        for l in range(k + 1, r):
            e = np.zeros((r, r), dtype=np.complex128)
            e[k, l] = e[l, k] = s
            out.append(e)
            e = np.zeros((r, r), dtype=np.complex128)
            e[k, l] = -1j * s
            e[l, k] = 1j * s
            out.append(e)
    return np.array(out)


def _validate_density(rho, atol=1e-10):
    rho = as_matrix(rho)
    if rho.shape[0] != rho.shape[1] or not is_hermitian(rho, atol):
        raise InvalidDensityError("input is not a Hermitian square matrix")
    if abs(np.trace(rho).real - 1) > atol:
        raise InvalidDensityError(f"trace {np.trace(rho).real!r} differs from 1")
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0] < -atol:
        raise InvalidDensityError("input is not positive semidefinite")
    return 0.5 * (rho + rho.conj().T)


def rank_reduction_step(rho: np.ndarray, functionals: np.ndarray):
    """One step of the reduction. Returns the new matrix, or None when the
    constraint system has only the trivial solution on supp(rho).

    ``functionals`` has shape (k, d, d); each F gives the linear constraint
    Tr(F H) = 0 on the perturbation H.
    """
    w, v = np.linalg.eigh(rho)
    keep = w > RANK_RTOL * max(1.0, float(w.max()))
    lam, U = w[keep], v[:, keep]
    r = lam.size
    basis = hermitian_basis(r)
    # Tr(F U B U^dag) = Tr((U^dag F U) B)
    compressed = np.einsum("ai,kab,bj->kij", U.conj(), functionals, U)
    L = np.einsum("kij,nji->kn", compressed, basis)
    system = np.concatenate([L.real, L.imag], axis=0)
    _, sv, vt = np.linalg.svd(system)
    tol = NULLSPACE_RTOL * (sv[0] if sv.size else 1.0)
    null_rank = int(np.sum(sv > tol))
    if null_rank >= r * r:
        return None
    x = vt[null_rank]
    H = np.tensordot(x, basis, axes=1)
    H = 0.5 * (H + H.conj().T)
    # smallest eps > 0 at which diag(lam) + eps H becomes singular:
    # eps = 1 / lambda_max(-Lam^{-1/2} H Lam^{-1/2})
    s = 1 / np.sqrt(lam)
    kmat = -(s[:, None] * H * s[None, :])
    top = np.linalg.eigvalsh(0.5 * (kmat + kmat.conj().T))[-1]
    if top <= 0:
        H = -H
        kmat = -kmat
        top = np.linalg.eigvalsh(0.5 * (kmat + kmat.conj().T))[-1]
    eps = 1 / top
    small = np.diag(lam) + eps * H
    # drop the annihilated direction exactly
    ws, vs = np.linalg.eigh(0.5 * (small + small.conj().T))
    ws = np.clip(ws, 0, None)
    ws[np.argmin(ws)] = 0.0
    small = (vs * ws) @ vs.conj().T
    sigma = U @ small @ U.conj().T
    return 0.5 * (sigma + sigma.conj().T)


def rank_reduce(rho, fw: MeasurementFramework, extra=None, max_steps: int | None = None) -> np.ndarray:
    """Lower the rank of ``rho`` while keeping its trace, its measurement
    vector under ``fw`` and, if ``extra`` is given, its overlap with that
    pure state.

    Each step adds eps * H for a Hermitian H on supp(rho) annihilated by
    every observable and by the identity, with eps chosen so that exactly one
    eigenvalue reaches zero. Steps repeat until no such H exists, which
    happens at the latest once rank^2 <= m' + 1 (m' = number of
    observables, counting ``extra``).
    """
    rho = _validate_density(rho)
    if fw.dimension != rho.shape[0]:
        raise DimensionError("framework dimension does not match the density matrix")
    funcs = [fw.observables, np.eye(rho.shape[0], dtype=np.complex128)[None]]
    if extra is not None:
        psi = np.asarray(extra, dtype=np.complex128)
        if psi.shape != (rho.shape[0],):
            raise DimensionError("extra state has the wrong dimension")
        funcs.append(np.outer(psi, psi.conj())[None])
    functionals = np.concatenate(funcs, axis=0)
    steps = rho.shape[0] if max_steps is None else max_steps
    for _ in range(steps):
        nxt = rank_reduction_step(rho, functionals)
        if nxt is None:
            break
        rho = nxt
    return rho
