"""Pure states, the (V, q) ensemble parameterization of low-rank density
matrices, and the four-qubit symmetric family used in the experiments."""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateParamsError, DimensionError, FormError, NormError
from .frameworks import MeasurementFramework

NORM_ATOL = 1e-10
DEGENERATE_NORM = 1e-12


def normalize(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=np.complex128)
    nrm = np.linalg.norm(psi)
    if nrm == 0:
        raise NormError("cannot normalize the zero vector")
    return psi / nrm


@dataclass
class EnsembleParams:
    """``V`` is d x r complex with unnormalized pure states as columns; the
    mixing weights are ``q_i**2 / sum(q**2)``."""

    V: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        self.V = np.asarray(self.V, dtype=np.complex128)
        self.q = np.asarray(self.q, dtype=float).reshape(-1)
        if self.V.ndim == 1:
            self.V = self.V[:, None]
        if self.V.ndim != 2 or self.V.shape[1] != self.q.shape[0]:
            raise DimensionError(f"V shape {self.V.shape} incompatible with q length {self.q.shape[0]}")

    @property
    def dimension(self) -> int:
        return self.V.shape[0]

    @property
    def rank(self) -> int:
        return self.V.shape[1]

    @property
    def probabilities(self) -> np.ndarray:
        qq = self.q**2
        return qq / qq.sum()

    def check(self) -> None:
        if np.linalg.norm(self.q) < DEGENERATE_NORM:
            raise DegenerateParamsError("weight vector q vanishes")
        norms = np.linalg.norm(self.V, axis=0)
        if np.any(norms < DEGENERATE_NORM):
            raise DegenerateParamsError(f"column(s) {np.flatnonzero(norms < DEGENERATE_NORM).tolist()} of V vanish")

    @classmethod
    def from_state(cls, psi) -> "EnsembleParams":
        return cls(np.asarray(psi, dtype=np.complex128)[:, None], np.ones(1))


def ensemble_density(params: EnsembleParams) -> np.ndarray:
    """rho = sum_i p_i |phi_i><phi_i| with the columns of V normalized."""
    params.check()
    V = params.V
    w = params.probabilities / np.sum(np.abs(V) ** 2, axis=0)
    rho = (V * w) @ V.conj().T
    return 0.5 * (rho + rho.conj().T)


@dataclass
class ObjectiveEval:
    """Fidelity, constraint residuals and their exact derivatives.

    ``grad_V`` packs d/dRe(V) + i d/dIm(V). Jacobian columns are ordered as
    Re(V) row-major, then Im(V) row-major, then q.
    """

    fidelity: float
    constraint: np.ndarray
    grad_V: np.ndarray
    grad_q: np.ndarray
    constraint_jacobian: np.ndarray


def evaluate(params: EnsembleParams, target, fw: MeasurementFramework) -> ObjectiveEval:
    params.check()
    psi = np.asarray(target, dtype=np.complex128)
    V, q = params.V, params.q
    d, r = V.shape
    if psi.shape != (d,) or fw.dimension != d:
        raise DimensionError("target, parameters and framework dimensions disagree")
    A = fw.observables
    n = np.sum(np.abs(V) ** 2, axis=0)  # (r,)
    Q = float(q @ q)
    p = q**2 / Q

    ov = psi.conj() @ V  # <psi|v_i>
    hf = np.abs(ov) ** 2 / n
    fid = float(p @ hf)
    pv = ov[None, :] * psi[:, None]  # P v_i = |psi><psi|v_i>
    grad_V = 2 * (p / n) * (pv - hf * V)
    grad_q = 2 * q / Q * (hf - fid)

    AV = np.einsum("jab,bi->jai", A, V)  # (m, d, r)
    h = np.einsum("ai,jai->ji", V.conj(), AV).real / n  # (m, r)
    target_vals = np.einsum("a,jab,b->j", psi.conj(), A, psi).real
    gvals = h @ p
    constraint = gvals - target_vals

    dg_dV = 2 * (p / n) * (AV - h[:, None, :] * V)  # (m, d, r)
    dg_dq = 2 * q / Q * (h - gvals[:, None])  # (m, r)
    m = A.shape[0]
    jac = np.concatenate(
        [dg_dV.real.reshape(m, -1), dg_dV.imag.reshape(m, -1), dg_dq], axis=1
    )
    return ObjectiveEval(fid, constraint, grad_V, grad_q, jac)


def random_pure_state(d: int, real_only: bool = False, seed=None) -> np.ndarray:
    """Uniform pure state: on the real sphere S^{d-1} if ``real_only``,
    Haar-random otherwise."""
    if d < 2:
        raise ValueError("dimension must be at least 2")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(d)
    if not real_only:
        x = x + 1j * rng.standard_normal(d)
    return normalize(x)


# --- four-qubit symmetric states -------------------------------------------


def symmetric_basis() -> list[np.ndarray]:
    """|w_k>: normalized equal superposition of 4-qubit kets with Hamming weight k."""
    basis = []
    for k in range(5):
        v = np.zeros(16, dtype=np.complex128)
        for ones in itertools.combinations(range(4), k):
            v[sum(1 << (3 - s) for s in ones)] = 1.0
        basis.append(v / math.sqrt(math.comb(4, k)))
    return basis


def symmetric_state(coeffs) -> np.ndarray:
    """sum_k coeffs[k] |w_k> for five (possibly complex) coefficients."""
    coeffs = np.asarray(coeffs, dtype=np.complex128)
    if coeffs.shape != (5,):
        raise DimensionError("need five symmetric-basis coefficients")
    return np.tensordot(coeffs, np.array(symmetric_basis()), axes=1)


def ghz_state(theta: float) -> np.ndarray:
    """sin(theta)|w0> + cos(theta)|w4>."""
    return symmetric_state([math.sin(theta), 0, 0, 0, math.cos(theta)])


def _check_norm(c0, c2, c4):
    s = c0 * c0 + c2 * c2 + c4 * c4
    if abs(s - 1) > NORM_ATOL:
        raise NormError(f"coefficients are not normalized (sum of squares {s!r})")


def special_symmetric_state(c0: float, c2: float, c4: float) -> np.ndarray:
    """c0|w0> + c2|w2> + c4|w4> with real normalized coefficients."""
    _check_norm(c0, c2, c4)
    return symmetric_state([c0, 0, c2, 0, c4])


def symmetric_coefficients(psi, atol: float = NORM_ATOL) -> tuple[float, float, float]:
    """Recover real (c0, c2, c4) from a state of that form, up to a global phase."""
    psi = np.asarray(psi, dtype=np.complex128)
    if psi.shape != (16,):
        raise FormError("expected a 4-qubit state vector")
    basis = np.array(symmetric_basis())
    b = basis.conj() @ psi
    k = int(np.argmax(np.abs(b)))
    phase = abs(b[k]) / b[k]
    b = b * phase
    resid = psi * phase - b @ basis
    if np.max(np.abs(resid)) > atol or abs(b[1]) > atol or abs(b[3]) > atol:
        raise FormError("state is not of the form c0|w0> + c2|w2> + c4|w4>")
    if np.max(np.abs(b.imag)) > atol:
        raise FormError("symmetric coefficients are not real up to a global phase")
    if abs(np.linalg.norm(psi) - 1) > atol:
        raise FormError("state is not normalized")
    return float(b[0].real), float(b[2].real), float(b[4].real)


def intersection_states() -> tuple[np.ndarray, np.ndarray]:
    """The pair (psi_inter, phi_inter) sharing all 2-RDMs.

    psi_inter = (|w0> + |w4>)/(2 sqrt 2) + (sqrt 3 / 2)|w2>,
    phi_inter = (|w1> + |w3>)/sqrt 2.
    """
    a = 1 / (2 * math.sqrt(2))
    psi = special_symmetric_state(a, math.sqrt(3) / 2, a)
    phi = symmetric_state([0, 1 / math.sqrt(2), 0, 1 / math.sqrt(2), 0])
    return psi, phi


def two_rdm_closed_form(c0: float, c2: float, c4: float) -> np.ndarray:
    """Two-qubit reduced state of c0|w0> + c2|w2> + c4|w4> (any qubit pair)."""
    _check_norm(c0, c2, c4)
    off = c2 * (c0 + c4) / math.sqrt(6)
    mid = c2 * c2 / 3
    return np.array(
        [
            [c0 * c0 + c2 * c2 / 6, 0, 0, off],
            [0, mid, mid, 0],
            [0, mid, mid, 0],
            [off, 0, 0, c4 * c4 + c2 * c2 / 6],
        ],
        dtype=np.complex128,
    )


def rdm_eigenvalues(c0: float, c2: float, c4: float) -> np.ndarray:
    """(lambda1, lambda2, lambda3, lambda4) of the closed-form 2-RDM.

    lambda1 = 0 and lambda2 = 2 c2^2 / 3 come from the {|01>, |10>} block;
    lambda3 >= lambda4 are the roots of the {|00>, |11>} block.
    """
    _check_norm(c0, c2, c4)
    s = c0 * c0 + c4 * c4 + c2 * c2 / 3
    disc = (c0 + c4) ** 2 * ((c0 - c4) ** 2 + 2 * c2 * c2 / 3)
    root = math.sqrt(max(disc, 0.0))
    return np.array([0.0, 2 * c2 * c2 / 3, (s + root) / 2, (s - root) / 2])


class Degeneracy(enum.Enum):
    I = "I"  # lambda1 == lambda2
    II = "II"  # lambda3 == lambda4
    III = "III"  # lambda1 == lambda3 or lambda4
    IV = "IV"  # lambda2 == lambda3 or lambda4


def degeneracy_class(c0: float, c2: float, c4: float, tol: float = 1e-9) -> set[Degeneracy]:
    if tol <= 0:
        raise ValueError("tol must be positive")
    l1, l2, l3, l4 = rdm_eigenvalues(c0, c2, c4)
    out = set()
    if abs(l1 - l2) <= tol:
        out.add(Degeneracy.I)
    if abs(l3 - l4) <= tol:
        out.add(Degeneracy.II)
    if abs(l1 - l3) <= tol or abs(l1 - l4) <= tol:
        out.add(Degeneracy.III)
    if abs(l2 - l3) <= tol or abs(l2 - l4) <= tol:
        out.add(Degeneracy.IV)
    return out


def degeneracy_curve_point(kind: Degeneracy, t: float) -> tuple[float, float, float]:
    """Point on the unit-sphere curve where degeneracy ``kind`` holds.

    ``t`` in [0, 1) is the curve parameter; sampling it uniformly gives the
    curve sampling used by the experiment harness.

    Types I and II are great circles (c2 = 0, and c4 = -c0). For III and IV,
    write c0 = sqrt(u) cos(phi), c4 = sqrt(u) sin(phi), c2^2 = 1 - u and
    s = sin(2 phi)/2; the degeneracy condition fixes y = (1 - u) / (3u):
    III needs y = 2s (s >= 0), IV needs (9/4) y^2 - (2 + s) y + s^2 = 0.
    """
    t = float(t) % 1.0
    if kind is Degeneracy.I:
        a = 2 * math.pi * t
        return math.cos(a), 0.0, math.sin(a)
    if kind is Degeneracy.II:
        a = 2 * math.pi * t
        return math.cos(a) / math.sqrt(2), math.sin(a), -math.cos(a) / math.sqrt(2)
    # two branches (sign of c2); phi sweeps the allowed arc on each
    sign = 1.0 if t < 0.5 else -1.0
    tau = (t % 0.5) * 2
    if kind is Degeneracy.III:
        # s >= 0 means phi in [0, pi/2] or [pi, 3pi/2]
        phi = tau * math.pi
        phi = phi if phi <= math.pi / 2 else phi + math.pi / 2
        s = math.sin(2 * phi) / 2
        y = 2 * max(s, 0.0)
    elif kind is Degeneracy.IV:
        # both roots of the quadratic in y are admissible; sweep each over phi
        root_sign = 1.0 if tau < 0.5 else -1.0
        phi = (tau % 0.5) * 4 * math.pi
        s = math.sin(2 * phi) / 2
        disc = max((1 - s) * (1 + 2 * s), 0.0)
        y = (2 / 9) * ((2 + s) + root_sign * 2 * math.sqrt(disc))
        y = max(y, 0.0)
    else:
        raise ValueError(f"unknown degeneracy kind {kind!r}")
    u = 1 / (1 + 3 * y)
    ru = math.sqrt(u)
    return ru * math.cos(phi), sign * math.sqrt(max(1 - u, 0.0)), ru * math.sin(phi)
