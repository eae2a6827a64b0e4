import math

import numpy as np
import pytest

from udtomo.errors import InvalidDensityError, NormError
from udtomo.frameworks import gell_mann_framework, measurement_vector, pauli_2local_framework
from udtomo.linalg import projector
from udtomo.oracles import (
    ghz_optimum,
    qutrit_uda_min_fidelity,
    qutrit_udp_oracle,
    shared_rdm_residual,
    verify_witness,
)
from udtomo.states import ghz_state

S = 1 / math.sqrt(2)


@pytest.mark.parametrize(
    "a,variant,expected",
    [
        ((0.6, 0.8, 0.0), "A6", True),
        ((S, 0.0, S), "A6", False),
        ((0.0, 0.0, 1.0), "A6", True),
        ((1.0, 0.0, 0.0), "A6", True),
        ((S, 0.0, -S), "A6", False),
        ((S, 0.0, S), "A7", True),
        ((0.6, 1e-13, 0.8), "A6", False),
        ((0.6, 1e-11, math.sqrt(1 - 0.36 - 1e-22)), "A6", True),
    ],
)
def test_qutrit_udp_oracle(a, variant, expected):
    assert qutrit_udp_oracle(*a, variant=variant) is expected


def test_qutrit_udp_oracle_norm():
    with pytest.raises(NormError):
        qutrit_udp_oracle(1, 1, 0)


def test_a6_counterexample_shares_outcomes():
    fw = gell_mann_framework("A6")
    a = measurement_vector(fw, projector([S, 0, S]))
    b = measurement_vector(fw, projector([S, 0, -S]))
    assert np.allclose(a, b, atol=1e-15)


@pytest.mark.parametrize("theta", [0.0, 0.3, math.pi / 4, math.pi / 3, 1.2, 2.5])
def test_ghz_optimum(theta):
    phi, f = ghz_optimum(theta)
    assert f == pytest.approx(math.cos(2 * theta) ** 2, abs=1e-15)
    psi = ghz_state(theta)
    assert abs(np.vdot(psi, phi)) ** 2 == pytest.approx(f, abs=1e-14)
    fw = pauli_2local_framework(4)
    gap = measurement_vector(fw, projector(phi)) - measurement_vector(fw, projector(psi))
    assert np.max(np.abs(gap)) < 1e-12


def test_ghz_optimum_examples():
    assert ghz_optimum(math.pi / 4)[1] == pytest.approx(0, abs=1e-15)
    assert ghz_optimum(0)[1] == 1


@pytest.mark.parametrize("theta", np.linspace(0, math.pi, 7))
def test_shared_rdm_residual_phase_flip(theta):
    b = [math.sin(theta), 0, 0, 0, math.cos(theta)]
    c = [math.sin(theta), 0, 0, 0, -math.cos(theta)]
    assert np.max(shared_rdm_residual(b, c)) < 1e-12


def test_shared_rdm_residual_intersection_pair():
    a = 1 / (2 * math.sqrt(2))
    b = [a, 0, math.sqrt(3) / 2, 0, a]
    c = [0, S, 0, S, 0]
    assert np.max(shared_rdm_residual(b, c)) < 1e-12


def test_shared_rdm_residual_detects_difference():
    assert np.max(shared_rdm_residual([1, 0, 0, 0, 0], [0, 0, 0, 0, 1])) > 0.5


def test_shared_rdm_residual_symmetry(rng):
    b = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    c = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    r1, r2 = shared_rdm_residual(b, c), shared_rdm_residual(c, b)
    assert np.allclose(r1[:6], r2[:6])
    assert np.allclose(r1[6:], r2[6:][::-1])


def test_verify_witness_ghz():
    fw = pauli_2local_framework(4)
    theta = math.pi / 3
    phi, f = ghz_optimum(theta)
    rep = verify_witness(ghz_state(theta), projector(phi), fw)
    assert rep.valid
    assert rep.fidelity == pytest.approx(0.25)
    assert rep.measurement_gap < 1e-12


def test_verify_witness_rejects_target_itself():
    fw = gell_mann_framework("A8")
    psi = np.array([1, 0, 0])
    assert not verify_witness(psi, projector(psi), fw).valid


def test_verify_witness_rejects_mismatched_outcomes():
    fw = gell_mann_framework("A8")
    assert not verify_witness([1, 0, 0], projector([0, 1, 0]), fw).valid


def test_verify_witness_bad_density():
    fw = gell_mann_framework("A8")
    with pytest.raises(InvalidDensityError):
        verify_witness([1, 0, 0], np.diag([1.2, -0.2, 0]), fw)
    with pytest.raises(InvalidDensityError):
        verify_witness([1, 0, 0], np.eye(3), fw)


# reference minima from an independent SDP (cvxpy/Clarabel) over the same slice
SDP_REFERENCE = [
    ([-0.6323984977, -0.3228562277, -0.70415623], 0.6473007836, 0.9999999996),
    ([0.0619923427, -0.0739279544, -0.995334922], 0.0245072093, 0.0414978606),
    ([0.0030339313, 0.7367971103, -0.6761071021], 0.9999999999, 0.9999999999),
    ([-0.7153653746, 0.5647545804, 0.4114664563], 0.9999999996, 0.9999999998),
]


@pytest.mark.parametrize("a,f6,f7", SDP_REFERENCE)
def test_qutrit_uda_min_fidelity_reference(a, f6, f7):
    a = np.array(a) / np.linalg.norm(a)
    assert qutrit_uda_min_fidelity(a, "A6") == pytest.approx(f6, abs=1e-6)
    assert qutrit_uda_min_fidelity(a, "A7") == pytest.approx(f7, abs=1e-6)
    assert qutrit_uda_min_fidelity(a, "A8") == 1


def test_qutrit_uda_min_fidelity_pure_counterexample_bound():
    # the A6 pure counterexample caps the all-state minimum from above
    assert qutrit_uda_min_fidelity([S, 0, S], "A6") <= 1e-9
