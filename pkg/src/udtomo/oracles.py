"""Closed-form ground truth used to check the optimizer.

Everything here is computed from the linear-algebra primitives only; nothing
imports the solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidDensityError, NormError
from .frameworks import GELL_MANN_VARIANTS, MeasurementFramework, gell_mann_matrices, measurement_vector
from .linalg import as_matrix, is_hermitian, projector, trace_inner
from .states import symmetric_state

ZERO_ATOL = 1e-12
WITNESS_GAP_TOL = 1e-6


def qutrit_udp_oracle(a0: float, a1: float, a2: float, variant: str = "A6") -> bool:
    """Is the real qutrit state a0|0> + a1|1> + a2|2> UDP under A7 or A6?

    Under A7 every real state is UDP. Under A6 the sign of a2 relative to a0
    is invisible when a1 = 0, so the state fails to be UDP exactly when
    a1 = 0 while a0 and a2 are both nonzero: a0|0> + a2|2> and a0|0> - a2|2>
    then give identical outcomes. A wording of the condition as "a0 = 0 with
    a1, a2 != 0" also circulates; it contradicts that pair and is not used.
    Zero tests use an absolute 1e-12.
    """
    if abs(a0 * a0 + a1 * a1 + a2 * a2 - 1) > 1e-10:
        raise NormError("qutrit coefficients are not normalized")
    key = variant.upper()
    if key == "A7":
        return True
    if key != "A6":
        raise ValueError(f"oracle covers A7 and A6 only, got {variant!r}")
    if abs(a1) > ZERO_ATOL:
        return True
    return abs(a0) <= ZERO_ATOL or abs(a2) <= ZERO_ATOL


def _max_step(rho0: np.ndarray, dirs: np.ndarray, hi: float = 4.0, iters: int = 52) -> np.ndarray:
    """Largest t in [0, hi] with rho0 + t * D PSD, for each D in ``dirs``."""
    lo = np.zeros(len(dirs))
    up = np.full(len(dirs), hi)
    for _ in range(iters):
        mid = 0.5 * (lo + up)
        ok = np.linalg.eigvalsh(rho0 + mid[:, None, None] * dirs)[:, 0] >= 0
        lo = np.where(ok, mid, lo)
        up = np.where(ok, up, mid)
    return lo


def qutrit_uda_min_fidelity(a, variant: str = "A6", n_angles: int = 512) -> float:
    """Lowest fidelity with the pure qutrit target ``a`` over all density
    matrices sharing its Gell-Mann measurement vector.

    States with the same outcomes differ from the target projector only
    along the unmeasured Gell-Mann directions (none for A8, one for A7, two
    for A6), so the feasible set is a convex slice of the PSD cone of
    dimension at most two and the fidelity is linear on it. The minimum sits
    on the slice boundary, found by bisection along each direction (an
    angular grid refined around its best point in the two-direction case).
    """
    psi = np.asarray(a, dtype=np.complex128)
    if psi.shape != (3,):
        raise ValueError("need three qutrit amplitudes")
    if abs(np.vdot(psi, psi).real - 1) > 1e-10:
        raise NormError("qutrit amplitudes are not normalized")
    key = variant.upper()
    if key not in GELL_MANN_VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    missing = [k for k in range(1, 9) if k not in GELL_MANN_VARIANTS[key]]
    if not missing:
        return 1.0
    gm = gell_mann_matrices()
    E = gm[[k - 1 for k in missing]]
    rho0 = np.outer(psi, psi.conj())
    slope = np.einsum("i,kij,j->k", psi.conj(), E, psi).real

    def best(angles):
        u = np.stack([np.cos(angles), np.sin(angles)], axis=1)[:, : len(missing)]
        dirs = np.einsum("nk,kij->nij", u, E)
        vals = 1 + _max_step(rho0, dirs) * (u @ slope)
        i = int(np.argmin(vals))
        return float(vals[i]), float(angles[i])

    if len(missing) == 1:
        return best(np.array([0.0, np.pi]))[0]
    step = 2 * np.pi / n_angles
    val, phi = best(np.arange(n_angles) * step)
    for _ in range(4):
        v2, p2 = best(phi + np.linspace(-step, step, 65))
        if v2 < val:
            val, phi = v2, p2
        step /= 32
    return val


def ghz_optimum(theta: float) -> tuple[np.ndarray, float]:
    """Global optimum of the UDP problem for sin(t)|w0> + cos(t)|w4> under
    2-RDM measurements: the phase-flipped state and fidelity cos^2(2t)."""
    phi = symmetric_state([math.sin(theta), 0, 0, 0, -math.cos(theta)])
    return phi, math.cos(2 * theta) ** 2


def _rdm_constraint_lhs(b) -> np.ndarray:
    b0, b1, b2, b3, b4 = np.asarray(b, dtype=np.complex128)
    s6 = math.sqrt(6)
    cj = np.conj
    return np.array(
        [
            abs(b0) ** 2 + abs(b1) ** 2 / 2 + abs(b2) ** 2 / 6,
            abs(b4) ** 2 + abs(b3) ** 2 / 2 + abs(b2) ** 2 / 6,
            abs(b1) ** 2 / 4 + abs(b3) ** 2 / 4 + abs(b2) ** 2 / 3,
            cj(b1) * b0 / 2 + cj(b2) * b1 / s6 + cj(b3) * b2 / (2 * s6),
            cj(b4) * b3 / 2 + cj(b3) * b2 / s6 + cj(b2) * b1 / (2 * s6),
            cj(b2) * b0 / s6 + cj(b3) * b1 / 2 + cj(b4) * b2 / s6,
        ]
    )


def shared_rdm_residual(b, c) -> np.ndarray:
    """Residuals of the conditions for two symmetric 4-qubit states (given by
    symmetric-basis coefficients) to share their 2-RDMs.

    Entries 0-5 are |lhs(b) - lhs(c)| for the six independent 2-RDM entries
    (<00|.|00>, <11|.|11>, <01|.|01>, <00|.|01>, <01|.|11>, <00|.|11>);
    entries 6 and 7 are the normalization defects of b and c.
    """
    b = np.asarray(b, dtype=np.complex128)
    c = np.asarray(c, dtype=np.complex128)
    diff = np.abs(_rdm_constraint_lhs(b) - _rdm_constraint_lhs(c))
    norms = [abs(np.sum(np.abs(b) ** 2) - 1), abs(np.sum(np.abs(c) ** 2) - 1)]
    return np.concatenate([diff, norms])


@dataclass(frozen=True)
class WitnessReport:
    measurement_gap: float
    fidelity: float
    valid: bool


def verify_witness(target, witness, fw: MeasurementFramework, delta: float = 0.01) -> WitnessReport:
    """Check independently that ``witness`` reproduces the target's
    measurement vector (sup-norm gap below 1e-6) while having fidelity at
    most 1 - delta with it."""
    rho = as_matrix(witness)
    if not is_hermitian(rho, 1e-9):
        raise InvalidDensityError("witness is not Hermitian")
    if abs(np.trace(rho).real - 1) > 1e-9:
        raise InvalidDensityError("witness trace differs from 1")
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0] < -1e-9:
        raise InvalidDensityError("witness is not positive semidefinite")
    proj = projector(target)
    gap = float(np.max(np.abs(measurement_vector(fw, rho) - measurement_vector(fw, proj))))
    fid = float(trace_inner(proj, rho).real)
    return WitnessReport(gap, fid, gap < WITNESS_GAP_TOL and fid <= 1 - delta)
