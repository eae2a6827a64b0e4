"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The heavy sweeps run once per session (module-scoped fixtures) and feed the
witness-integrity check at the end.
"""

import itertools
import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from gradcheck import gradient_errors, random_configuration
from udtomo.alm import Category, classify
from udtomo.experiments import (
    Experiment,
    ExperimentConfig,
    complex_from_json,
    run_experiment,
    witness_path,
    write_outputs,
)
from udtomo.frameworks import (
    framework_by_name,
    gell_mann_framework,
    measurement_vector,
    pauli_2local_framework,
    reduced_symmetric_framework,
)
from udtomo.linalg import min_eigenvalue, numerical_rank, partial_trace, projector
from udtomo.oracles import qutrit_uda_min_fidelity, qutrit_udp_oracle, shared_rdm_residual, verify_witness
from udtomo.rank import rank_reduce, symmetric_uda_rank, uda_rank_bound
from udtomo.states import intersection_states, rdm_eigenvalues, special_symmetric_state, two_rdm_closed_form

pytestmark = pytest.mark.slow

DELTA = 0.01
PAULI = pauli_2local_framework(4)


def record(label, ok, detail):
    line = f"CRITERION {label}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def _run(experiment, n, framework, seed):
    t0 = time.perf_counter()
    res = run_experiment(ExperimentConfig(experiment, n, framework=framework, seed=seed))
    res.summary["elapsed_s"] = time.perf_counter() - t0
    return res


@pytest.fixture(scope="module")
def ghz_sweep():
    return _run(Experiment.GHZ_SWEEP, 200, "pauli2", 1)


@pytest.fixture(scope="module")
def a8_sphere():
    return _run(Experiment.QUTRIT_SPHERE, 500, "a8", 2)


@pytest.fixture(scope="module")
def a7_sphere():
    return _run(Experiment.QUTRIT_SPHERE, 2000, "a7", 3)


@pytest.fixture(scope="module")
def a6_sphere():
    return _run(Experiment.QUTRIT_SPHERE, 2000, "a6", 4)


@pytest.fixture(scope="module")
def a6_circle():
    return _run(Experiment.QUTRIT_CIRCLE, 500, "a6", 5)


@pytest.fixture(scope="module")
def intersection_verdict():
    psi, _ = intersection_states()
    return psi, classify(psi, PAULI)


def _counts(res):
    labels = [r.label for r in res.rows]
    return {k: labels.count(k) for k in ("UDA", "UDP_NOT_UDA", "NOT_UDP", "X")}


def _non_uda_fraction(res):
    resolved = [r for r in res.rows if r.category is not None]
    bad = sum(r.category is not Category.UDA for r in resolved)
    return bad / len(resolved), len(res.rows) - len(resolved)


def test_criterion_1_ghz_analytic_agreement(ghz_sweep):
    s = ghz_sweep.summary
    mse = s["mse"]
    ok = s["n"] == 200 and s["unresolved"] == 0 and mse is not None and mse < 1e-6
    record(1, ok, f"GHZ sweep n={s['n']} MSE={mse:.3e} (< 1e-6), max |err|={s['max_abs_error']:.2e}, "
                  f"unresolved={s['unresolved']}, {s['elapsed_s']:.0f}s")
    assert ok


def test_criterion_2_a8_completeness(a8_sphere):
    c = _counts(a8_sphere)
    ok = c["UDA"] == 500
    record(2, ok, f"A8 500 sphere samples: {c}")
    assert ok


def test_criterion_3_a7(a7_sphere):
    c = _counts(a7_sphere)
    not_udp = c["NOT_UDP"] + sum("unresolved-udp" in r.flags for r in a7_sphere.rows)
    frac, unresolved = _non_uda_fraction(a7_sphere)
    ok = not_udp == 0 and 0.15 <= frac <= 0.25
    record(3, ok, f"A7 2000 sphere samples: {c}; UDP failures={not_udp}; non-UDA fraction={frac:.4f} "
                  f"(target 0.20 +/- 0.05, {unresolved} unresolved excluded)")
    assert ok


def test_criterion_4a_a6_sphere(a6_sphere):
    c = _counts(a6_sphere)
    frac, unresolved = _non_uda_fraction(a6_sphere)
    ok = 0.32 <= frac <= 0.42
    record("4a", ok, f"A6 2000 sphere samples: {c}; non-UDA fraction={frac:.4f} "
                     f"(target 0.37 +/- 0.05, {unresolved} unresolved excluded)")
    assert ok


def _circle_disagreements(res):
    out = []
    for row in res.rows:
        a0, a1, a2 = row.coordinates
        solver_udp = row.category in (Category.UDA, Category.UDP_NOT_UDA)
        if row.category is None or solver_udp != qutrit_udp_oracle(a0, a1, a2, "A6"):
            out.append(row)
    return out


def test_criterion_4b_a6_circle_matches_oracle(a6_circle):
    bad = _circle_disagreements(a6_circle)
    band = sum((r.coordinates[0] ** 2 - r.coordinates[2] ** 2) ** 2 > 1 - DELTA for r in bad)
    ok = not bad
    record("4b", ok, f"A6 500 circle samples: {len(bad)} UDP disagreements with the exact oracle "
                     f"({band} of them have exact minimal fidelity cos^2(2t) > 1 - delta)")
    assert ok


def test_a6_circle_disagreements_lie_in_threshold_band(a6_circle):
    # companion diagnostic: a disagreement is only possible where the exact
    # minimal pure-state fidelity cos^2(2t) exceeds 1 - delta
    for row in _circle_disagreements(a6_circle):
        a0, _, a2 = row.coordinates
        assert row.category is not None
        assert (a0 * a0 - a2 * a2) ** 2 > 1 - DELTA
        assert row.udp_fidelity > 1 - DELTA


@pytest.mark.parametrize("which", ["a7", "a6"])
def test_qutrit_uda_verdicts_match_slice_oracle(which, a7_sphere, a6_sphere):
    # per-sample check against the exact minimum over the unmeasured directions,
    # skipping samples within 1e-4 of the threshold
    res = {"a7": a7_sphere, "a6": a6_sphere}[which]
    wrong = 0
    for row in res.rows:
        if row.category is None:
            continue
        exact = qutrit_uda_min_fidelity(np.array(row.coordinates), which.upper())
        if abs(exact - (1 - DELTA)) < 1e-4:
            continue
        wrong += (row.category is Category.UDA) != (exact > 1 - DELTA)
    assert wrong == 0


def test_criterion_5_intersection_witness(intersection_verdict):
    psi, verdict = intersection_verdict
    _, phi = intersection_states()
    gap = np.max(np.abs(measurement_vector(PAULI, projector(psi)) - measurement_vector(PAULI, projector(phi))))
    ok = gap <= 1e-12 and verdict.category in (Category.UDP_NOT_UDA, Category.NOT_UDP)
    record(5, ok, f"measurement gap={gap:.1e} (<= 1e-12), classify(psi_inter)={verdict.category.name}")
    assert ok


def test_criterion_6_rank_bounds():
    psi, _ = intersection_states()
    got = (uda_rank_bound(6).max_rank, uda_rank_bound(66).max_rank, symmetric_uda_rank().max_rank,
           len(reduced_symmetric_framework(psi)))
    ok = got == (2, 8, 5, 35)
    record(6, ok, f"(uda_rank_bound(6), uda_rank_bound(66), symmetric_uda_rank, |reduced framework|) = {got}")
    assert ok


def test_criterion_7_rank_reduction():
    rng = np.random.default_rng(7)
    worst = dict(rank=0, dev=0.0, trace=0.0, eig=np.inf)
    for _ in range(200):
        r = int(rng.integers(10, 17))
        v = rng.standard_normal((16, r)) + 1j * rng.standard_normal((16, r))
        rho = v @ v.conj().T
        rho /= np.trace(rho).real
        out = rank_reduce(rho, PAULI)
        worst["rank"] = max(worst["rank"], numerical_rank(np.linalg.eigvalsh(out)[::-1]))
        worst["dev"] = max(worst["dev"], np.max(np.abs(measurement_vector(PAULI, out) - measurement_vector(PAULI, rho))))
        worst["trace"] = max(worst["trace"], abs(np.trace(out).real - 1))
        worst["eig"] = min(worst["eig"], min_eigenvalue(out))
    ok = worst["rank"] <= 8 and worst["dev"] <= 1e-9 and worst["trace"] <= 1e-10 and worst["eig"] >= -1e-10
    record(7, ok, f"200 densities of rank 10-16: max output rank={worst['rank']}, max deviation={worst['dev']:.1e}, "
                  f"max trace error={worst['trace']:.1e}, min eigenvalue={worst['eig']:.1e}")
    assert ok


def test_criterion_8_gradients():
    rng = np.random.default_rng(8)
    fws = {3: gell_mann_framework("A8"), 16: PAULI}
    worst = 0.0
    combos = list(itertools.product((3, 16), (1, 5)))
    for k in range(100):
        d, r = combos[k % 4]
        params, psi, lam, mu, alpha, beta = random_configuration(rng, fws[d], r)
        worst = max(worst, *gradient_errors(params, psi, fws[d], lam, mu, alpha, beta))
    ok = worst < 1e-6
    record(8, ok, f"100 configurations over d in {{3, 16}}, r in {{1, 5}}: worst relative error {worst:.2e} (< 1e-6)")
    assert ok


def test_criterion_9_structural_identities():
    rng = np.random.default_rng(9)
    rdm_err = eig_err = 0.0
    for _ in range(1000):
        c = rng.standard_normal(3)
        c /= np.linalg.norm(c)
        rho = projector(special_symmetric_state(*c))
        closed = two_rdm_closed_form(*c)
        rdm_err = max(rdm_err, np.max(np.abs(partial_trace(rho, [2] * 4, [2, 3]) - closed)))
        eig_err = max(eig_err, np.max(np.abs(np.sort(rdm_eigenvalues(*c)) - np.linalg.eigvalsh(closed))))
    res = 0.0
    for t in np.linspace(0, math.pi, 101):
        res = max(res, np.max(shared_rdm_residual([math.sin(t), 0, 0, 0, math.cos(t)],
                                                  [math.sin(t), 0, 0, 0, -math.cos(t)])))
    a = 1 / (2 * math.sqrt(2))
    s = 1 / math.sqrt(2)
    res = max(res, np.max(shared_rdm_residual([a, 0, math.sqrt(3) / 2, 0, a], [0, s, 0, s, 0])))
    ok = rdm_err <= 1e-12 and eig_err <= 1e-10 and res < 1e-12
    record(9, ok, f"2-RDM closed form err={rdm_err:.1e}, eigenvalue err={eig_err:.1e}, "
                  f"shared-RDM residual={res:.1e} (GHZ phase-flip family and intersection pair)")
    assert ok


def test_criterion_10_verdict_integrity(a8_sphere, a7_sphere, a6_sphere, a6_circle, intersection_verdict, tmp_path):
    checked = failures = 0
    runs = {"a8": a8_sphere, "a7": a7_sphere, "a6": a6_sphere, "a6-circle": a6_circle}
    for name, res in runs.items():
        fw = framework_by_name(name.split("-")[0])
        out = tmp_path / f"{name}.csv"
        write_outputs(res, out)
        wits = {}
        if witness_path(out).exists():
            import json

            wits = json.loads(witness_path(out).read_text())
        for i, row in enumerate(res.rows):
            if row.category not in (Category.UDP_NOT_UDA, Category.NOT_UDP):
                continue
            checked += 1
            entry = wits.get(str(i))
            if entry is None:
                failures += 1
                continue
            rep = verify_witness(complex_from_json(entry["target"]), complex_from_json(entry["witness"]), fw, DELTA)
            failures += not rep.valid
    psi, verdict = intersection_verdict
    if verdict.category is not Category.UDA:
        checked += 1
        failures += verdict.witness is None or not verify_witness(psi, verdict.witness, PAULI, DELTA).valid
    ok = failures == 0 and checked > 0
    record(10, ok, f"{checked} non-unique verdicts re-verified from stored witnesses, {failures} failures")
    assert ok
