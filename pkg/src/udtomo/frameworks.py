"""Measurement frameworks: Gell-Mann subsets, 2-local Pauli strings, and the
reduced 35-element framework used for symmetric four-qubit targets.

Observable ordering is frozen per builder so that measurement vectors and
multiplier vectors are bit-stable between runs.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionError, FormError, HermiticityError
from .linalg import as_matrix, projector

PAULI = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}

GELL_MANN_VARIANTS = {
    "A8": (1, 2, 3, 4, 5, 6, 7, 8),
    "A7": (1, 2, 3, 4, 5, 6, 7),
    "A6": (1, 2, 3, 5, 6, 7),
}


@dataclass(frozen=True, eq=False)
class MeasurementFramework:
    """An ordered set of Hermitian observables on a ``dimension``-dim space.

    ``observables`` has shape ``(m, d, d)``. The identity is rejected unless
    ``allow_identity`` is set (only the reduced symmetric framework needs it).
    """

    observables: np.ndarray
    labels: tuple
    allow_identity: bool = field(default=False)

    def __post_init__(self):
        obs = np.ascontiguousarray(np.asarray(self.observables, dtype=np.complex128))
        if obs.ndim != 3 or obs.shape[1] != obs.shape[2]:
            raise DimensionError(f"observables must have shape (m, d, d), got {obs.shape}")
        if obs.shape[0] < 1:
            raise DimensionError("a framework needs at least one observable")
        if len(self.labels) != obs.shape[0]:
            raise DimensionError("one label per observable is required")
        herm_err = np.max(np.abs(obs - obs.conj().transpose(0, 2, 1)))
        if herm_err > 1e-12:
            raise HermiticityError(f"observable not Hermitian (error {herm_err:.2e})")
        if not self.allow_identity:
            eye = np.eye(obs.shape[1])
            for lab, a in zip(self.labels, obs):
                if np.allclose(a, eye, atol=1e-12):
                    raise FormError(f"observable {lab!r} is the identity")
        obs.setflags(write=False)
        object.__setattr__(self, "observables", obs)
        object.__setattr__(self, "labels", tuple(str(x) for x in self.labels))

    @property
    def dimension(self) -> int:
        return self.observables.shape[1]

    def __len__(self) -> int:
        return self.observables.shape[0]

    def to_json(self) -> str:
        doc = {
            "dimension": self.dimension,
            "labels": list(self.labels),
            "allow_identity": self.allow_identity,
            "observables": {
                "real": self.observables.real.tolist(),
                "imag": self.observables.imag.tolist(),
            },
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "MeasurementFramework":
        doc = json.loads(text)
        obs = np.asarray(doc["observables"]["real"]) + 1j * np.asarray(doc["observables"]["imag"])
        if obs.shape[1] != doc["dimension"]:
            raise DimensionError("dimension field disagrees with observable shape")
        return cls(obs, tuple(doc["labels"]), allow_identity=doc.get("allow_identity", False))


def measurement_vector(fw: MeasurementFramework, rho) -> np.ndarray:
    """Return ``[Tr(A_j rho) for A_j in fw]`` as a real vector."""
    rho = as_matrix(rho)
    if rho.shape != (fw.dimension, fw.dimension):
        raise DimensionError(f"state of shape {rho.shape} does not match framework dimension {fw.dimension}")
    # Tr(A rho) = sum_ik A_ik rho_ki
    vals = np.einsum("jik,ki->j", fw.observables, rho)
    return vals.real.copy()


def gell_mann_matrices() -> np.ndarray:
    """The eight Gell-Mann matrices M_1..M_8, stacked in the conventional order."""
    m = np.zeros((8, 3, 3), dtype=np.complex128)
    # (symmetric index, antisymmetric index, row, col)
    for s, a, i, j in ((0, 1, 0, 1), (3, 4, 0, 2), (5, 6, 1, 2)):
        m[s, i, j] = m[s, j, i] = 1
        m[a, i, j] = -1j
        m[a, j, i] = 1j
    m[2] = np.diag([1, -1, 0])
    m[7] = np.diag([1, 1, -2]) / np.sqrt(3)
    return m


def gell_mann_framework(variant: str = "A8") -> MeasurementFramework:
    """Qutrit framework ``A8`` (all Gell-Mann matrices), ``A7`` (drops M8)
    or ``A6`` (drops M8 and M4)."""
    key = variant.upper()
    if key not in GELL_MANN_VARIANTS:
        raise ValueError(f"unknown Gell-Mann variant {variant!r}")
    mats = gell_mann_matrices()
    idx = GELL_MANN_VARIANTS[key]
    return MeasurementFramework(mats[[i - 1 for i in idx]], tuple(f"M{i}" for i in idx))


def pauli_string(ops: dict, n_qubits: int) -> np.ndarray:
    """Kronecker product with ``ops[site]`` on the given sites and I elsewhere."""
    out = np.ones((1, 1), dtype=np.complex128)
    for s in range(n_qubits):
        out = np.kron(out, PAULI[ops.get(s, "I")])
    return out


def pauli_2local_framework(n_qubits: int = 4) -> MeasurementFramework:
    """All weight-1 and weight-2 Pauli strings on ``n_qubits`` qubits.

    Ordering: single-site operators by (site, X<Y<Z), then two-site operators
    by (pair in lexicographic order, 3x3 Pauli grid in row-major order).
    Labels look like ``X0`` or ``Z1Y3``.
    """
    if n_qubits < 2:
        raise ValueError("need at least two qubits")
    mats, labels = [], []
    for s in range(n_qubits):
        for a in "XYZ":
            mats.append(pauli_string({s: a}, n_qubits))
            labels.append(f"{a}{s}")
    for j, k in itertools.combinations(range(n_qubits), 2):
        for a in "XYZ":
            for b in "XYZ":
                mats.append(pauli_string({j: a, k: b}, n_qubits))
                labels.append(f"{a}{j}{b}{k}")
    return MeasurementFramework(np.array(mats), tuple(labels))


# the five two-site operators kept per pair in the reduced framework
_REDUCED_PAIR_OPS = (("Y", "Z"), ("Z", "X"), ("X", "Y"), ("X", "X"), ("Y", "Y"))


def reduced_symmetric_framework(target) -> MeasurementFramework:
    """The 35-observable framework for a target c0|w0> + c2|w2> + c4|w4>.

    Contents, in order: X, Y, Z on qubit 0; for each of the six qubit pairs
    the operators YZ, ZX, XY, XX, YY; the identity; and |target><target|.
    """
    from .states import symmetric_coefficients  # local import avoids a cycle

    psi = np.asarray(target, dtype=np.complex128)
    if psi.shape != (16,):
        raise FormError("reduced symmetric framework needs a 4-qubit target")
    symmetric_coefficients(psi)  # raises FormError if not of the required form
    mats = [pauli_string({0: a}, 4) for a in "XYZ"]
    labels = [f"{a}0" for a in "XYZ"]
    for j, k in itertools.combinations(range(4), 2):
        for a, b in _REDUCED_PAIR_OPS:
            mats.append(pauli_string({j: a, k: b}, 4))
            labels.append(f"{a}{j}{b}{k}")
    mats.append(np.eye(16, dtype=np.complex128))
    labels.append("I")
    mats.append(projector(psi))
    labels.append("psi")
    return MeasurementFramework(np.array(mats), tuple(labels), allow_identity=True)


def framework_by_name(name: str, n_qubits: int = 4) -> MeasurementFramework:
    key = name.lower()
    if key in ("a8", "a7", "a6"):
        return gell_mann_framework(key.upper())
    if key in ("pauli2", "pauli", "2local"):
        return pauli_2local_framework(n_qubits)
    raise ValueError(f"unknown framework {name!r}")
