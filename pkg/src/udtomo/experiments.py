"""Sampling sweeps over qutrit and four-qubit symmetric targets.

Samples are processed in fixed-size chunks. Chunk ``c`` draws its sample
coordinates and its per-sample solver seeds from ``default_rng([seed, c])``,
so the output does not depend on how many worker processes run the chunks.
"""

from __future__ import annotations

import enum
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from statistics import NormalDist
from typing import Callable, Iterable

import numpy as np

from .alm import ALMConfig, Category, classify_many, solve_batch
from .frameworks import MeasurementFramework, framework_by_name
from .oracles import verify_witness
from .rank import RankBudget, RankSource
from .states import Degeneracy, degeneracy_class, degeneracy_curve_point, ghz_state, special_symmetric_state

SCHEMA = "udtomo-v1"
CHUNK_SIZE = 100
CSV_COLUMNS = ("coord0", "coord1", "coord2", "category", "udp_fidelity", "uda_fidelity", "flags")
GHZ_COLUMNS = ("theta", "solver_min_fidelity", "analytic", "abs_error")
UNRESOLVED = "X"
QUTRIT_FRAMEWORKS = ("a8", "a7", "a6")

DEFAULT_SAMPLES = {
    "qutrit-sphere": 2000,
    "qutrit-circle": 500,
    "ghz-sweep": 200,
    "symmetric-scan": 1000,
    "degeneracy-curves": 200,
}


class Experiment(enum.Enum):
    QUTRIT_SPHERE = "qutrit-sphere"
    QUTRIT_CIRCLE = "qutrit-circle"
    GHZ_SWEEP = "ghz-sweep"
    SYMMETRIC_SCAN = "symmetric-scan"
    DEGENERACY_CURVES = "degeneracy-curves"
    SINGLE = "single"


@dataclass
class ExperimentConfig:
    experiment: Experiment
    n_samples: int
    framework: str = "a8"
    alm: ALMConfig = field(default_factory=ALMConfig)
    seed: int = 0
    output_path: Path | None = None
    parallelism: int = 1
    rank_budget: int | None = None  # None means automatic

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be at least 1")
        if self.parallelism < 1:
            raise ValueError("parallelism must be at least 1")
        if self.rank_budget is not None and self.rank_budget < 1:
            raise ValueError("rank budget must be at least 1")
        self.framework = self.framework.lower()

    def budget(self) -> RankBudget | None:
        if self.rank_budget is None:
            return None
        return RankBudget(self.rank_budget, RankSource.USER)


@dataclass
class ClassifiedSample:
    coordinates: tuple[float, ...]
    category: Category | None
    udp_fidelity: float | None
    uda_fidelity: float | None = None
    flags: frozenset[str] = frozenset()
    target: np.ndarray | None = None
    witness: np.ndarray | None = None

    @property
    def label(self) -> str:
        return UNRESOLVED if self.category is None else self.category.name

    def csv_row(self) -> list[str]:
        def fmt(x):
            return "" if x is None else repr(float(x))

        return [*(repr(float(c)) for c in self.coordinates), self.label,
                fmt(self.udp_fidelity), fmt(self.uda_fidelity), ";".join(sorted(self.flags))]


@dataclass
class ExperimentResult:
    rows: list
    summary: dict
    columns: tuple[str, ...] = CSV_COLUMNS

    def witnesses(self) -> dict[str, dict]:
        out = {}
        for i, row in enumerate(self.rows):
            if getattr(row, "witness", None) is None:
                continue
            out[str(i)] = {
                "category": row.label,
                "target": _complex_json(row.target),
                "witness": _complex_json(row.witness),
            }
        return out


def _complex_json(a: np.ndarray) -> dict:
    a = np.asarray(a)
    return {"real": a.real.tolist(), "imag": a.imag.tolist()}


def complex_from_json(obj: dict) -> np.ndarray:
    return np.asarray(obj["real"], dtype=float) + 1j * np.asarray(obj["imag"], dtype=float)


def wilson_interval(k: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    if n == 0:
        return (0.0, 1.0)
    z = NormalDist().inv_cdf(0.5 + confidence / 2)
    p = k / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return (max(0.0, centre - half), min(1.0, centre + half))


# --- sample generation -----------------------------------------------------------


def _sphere(rng: np.random.Generator, n: int) -> np.ndarray:
    x = rng.standard_normal((n, 3))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def _circle(rng: np.random.Generator, n: int) -> np.ndarray:
    t = rng.uniform(0, 2 * np.pi, n)
    return np.stack([np.cos(t), np.zeros(n), np.sin(t)], axis=1)


def _chunks(n: int) -> list[tuple[int, int]]:
    return [(c, min(CHUNK_SIZE, n - c * CHUNK_SIZE)) for c in range(math.ceil(n / CHUNK_SIZE))]


def _seeds(rng: np.random.Generator, n: int) -> list[int]:
    return [int(s) for s in rng.integers(0, 2**31 - 1, size=n)]


@dataclass(frozen=True)
class _Job:
    kind: str
    framework: str
    seed: int
    chunk: int
    size: int
    alm: ALMConfig
    rank_budget: int | None
    curve: str | None = None
    total: int = 0


def _classify_chunk(job: _Job) -> list[ClassifiedSample]:
    rng = np.random.default_rng([job.seed, job.chunk])
    if job.kind == "qutrit-sphere":
        coords = _sphere(rng, job.size)
    elif job.kind == "qutrit-circle":
        coords = _circle(rng, job.size)
    elif job.kind == "symmetric-scan":
        coords = _sphere(rng, job.size)
    elif job.kind == "degeneracy-curves":
        kind = Degeneracy[job.curve]
        coords = np.array([degeneracy_curve_point(kind, t) for t in rng.uniform(0, 1, job.size)])
    else:
        raise ValueError(f"not a classification experiment: {job.kind}")
    seeds = _seeds(rng, job.size)
    fw = framework_by_name(job.framework)
    if job.kind.startswith("qutrit"):
        targets = coords.astype(np.complex128)
    else:
        targets = np.array([special_symmetric_state(*c) for c in coords])
    budget = None if job.rank_budget is None else RankBudget(job.rank_budget, RankSource.USER)
    verdicts = classify_many(targets, fw, job.alm, budget, seeds=seeds, strict=False)

    out = []
    for c, psi, v in zip(coords, targets, verdicts):
        flags = set()
        if not job.kind.startswith("qutrit"):
            flags |= {d.name for d in degeneracy_class(*c)}
        if job.curve is not None:
            flags.add(f"curve-{job.curve}")
        if v.category is None:
            # a UDA-stage failure still carries a confirmed UDP verdict
            flags.add("unresolved-uda" if v.uda_runs else "unresolved-udp")
        udp_f = v.udp_result.fidelity if v.udp_result is not None else None
        uda_f = v.uda_result.fidelity if v.uda_result is not None else None
        if v.witness is not None and not verify_witness(psi, v.witness, fw, job.alm.delta).valid:
            flags.add("witness-invalid")
        out.append(ClassifiedSample(tuple(float(x) for x in c), v.category, udp_f, uda_f,
                                    frozenset(flags), psi, v.witness))
    return out


def _run_jobs(jobs: list[_Job], fn: Callable, parallelism: int) -> list:
    if parallelism <= 1 or len(jobs) <= 1:
        results = [fn(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(fn, jobs))
    return [row for chunk in results for row in chunk]


def _category_summary(cfg: ExperimentConfig, rows: list[ClassifiedSample]) -> dict:
    n = len(rows)
    counts = {c.name: 0 for c in Category}
    counts[UNRESOLVED] = 0
    for r in rows:
        counts[r.label] += 1
    fractions = {k: {"count": v, "fraction": v / n, "wilson95": list(wilson_interval(v, n))}
                 for k, v in counts.items()}
    non_uda = counts["UDP_NOT_UDA"] + counts["NOT_UDP"]
    return {
        "experiment": cfg.experiment.value,
        "framework": cfg.framework,
        "seed": cfg.seed,
        "n": n,
        "delta": cfg.alm.delta,
        "categories": fractions,
        "non_uda": {"count": non_uda, "fraction": non_uda / n, "wilson95": list(wilson_interval(non_uda, n))},
        "non_udp": {"count": counts["NOT_UDP"], "fraction": counts["NOT_UDP"] / n,
                    "wilson95": list(wilson_interval(counts["NOT_UDP"], n))},
        "witness_failures": sum("witness-invalid" in r.flags for r in rows),
    }


def run_qutrit_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    if cfg.framework not in QUTRIT_FRAMEWORKS:
        raise ValueError(f"qutrit experiments need one of {QUTRIT_FRAMEWORKS}, got {cfg.framework!r}")
    if cfg.experiment not in (Experiment.QUTRIT_SPHERE, Experiment.QUTRIT_CIRCLE):
        raise ValueError("not a qutrit experiment")
    jobs = [_Job(cfg.experiment.value, cfg.framework, cfg.seed, c, size, cfg.alm, cfg.rank_budget)
            for c, size in _chunks(cfg.n_samples)]
    rows = _run_jobs(jobs, _classify_chunk, cfg.parallelism)
    return ExperimentResult(rows, _category_summary(cfg, rows))


def run_symmetric_scan(cfg: ExperimentConfig) -> ExperimentResult:
    """Sphere-uniform (c0, c2, c4) samples, or with ``DEGENERACY_CURVES``
    ``n_samples`` points on each of the four degeneracy curves."""
    if cfg.framework != "pauli2":
        raise ValueError("symmetric experiments need the pauli2 framework")
    if cfg.experiment is Experiment.SYMMETRIC_SCAN:
        jobs = [_Job("symmetric-scan", "pauli2", cfg.seed, c, size, cfg.alm, cfg.rank_budget)
                for c, size in _chunks(cfg.n_samples)]
    elif cfg.experiment is Experiment.DEGENERACY_CURVES:
        jobs = []
        for k, kind in enumerate(Degeneracy):
            # offset keeps the curves' random streams apart
            jobs += [_Job("degeneracy-curves", "pauli2", cfg.seed, 1000 * (k + 1) + c, size, cfg.alm,
                          cfg.rank_budget, kind.name) for c, size in _chunks(cfg.n_samples)]
    else:
        raise ValueError("not a symmetric experiment")
    rows = _run_jobs(jobs, _classify_chunk, cfg.parallelism)
    return ExperimentResult(rows, _category_summary(cfg, rows))


# --- GHZ sweep -------------------------------------------------------------------------


@dataclass
class GHZRow:
    theta: float
    solver_min_fidelity: float | None
    analytic: float

    @property
    def abs_error(self) -> float | None:
        if self.solver_min_fidelity is None:
            return None
        return abs(self.solver_min_fidelity - self.analytic)

    def csv_row(self) -> list[str]:
        def fmt(x):
            return "" if x is None else repr(float(x))

        return [repr(self.theta), fmt(self.solver_min_fidelity), repr(self.analytic), fmt(self.abs_error)]


def ghz_min_fidelities(thetas: Iterable[float], fw: MeasurementFramework, cfg: ALMConfig,
                       seeds: list[int]) -> list[float | None]:
    """Minimal fidelity over pure states sharing each GHZ target's
    measurement vector: the lowest result over ``n_restarts`` converged
    runs, with non-converged runs replaced up to ``max_attempts``. None
    when no run converged."""
    thetas = list(thetas)
    targets = np.array([ghz_state(t) for t in thetas])
    found: list[list[float]] = [[] for _ in thetas]
    tried = [0] * len(thetas)
    while True:
        rows, run_seeds, mu0 = [], [], []
        for i in range(len(thetas)):
            want = min(cfg.n_restarts - len(found[i]), cfg.max_attempts - tried[i])
            for _ in range(max(want, 0)):
                rows.append(i)
                run_seeds.append(seeds[i] + tried[i])
                mu0.append(cfg.mu0 if tried[i] < cfg.n_restarts else cfg.retry_mu0)
                tried[i] += 1
        if not rows:
            break
        for i, res in zip(rows, solve_batch(targets[rows], fw, 1, cfg, run_seeds, mu0=mu0)):
            if res.converged:
                found[i].append(res.fidelity)
    return [min(f) if f else None for f in found]


def _ghz_chunk(job: _Job) -> list[GHZRow]:
    rng = np.random.default_rng([job.seed, job.chunk])
    seeds = _seeds(rng, job.size)
    start = job.chunk * CHUNK_SIZE
    thetas = [math.pi * (start + i) / job.total for i in range(job.size)]
    mins = ghz_min_fidelities(thetas, framework_by_name("pauli2"), job.alm, seeds)
    return [GHZRow(t, f, math.cos(2 * t) ** 2) for t, f in zip(thetas, mins)]


def run_ghz_sweep(cfg: ExperimentConfig) -> ExperimentResult:
    """Evenly spaced theta over [0, pi) with solver and closed-form minima."""
    if cfg.n_samples < 2:
        raise ValueError("the GHZ sweep needs at least two points")
    jobs = [_Job("ghz-sweep", "pauli2", cfg.seed, c, size, cfg.alm, None, total=cfg.n_samples)
            for c, size in _chunks(cfg.n_samples)]
    rows = _run_jobs(jobs, _ghz_chunk, cfg.parallelism)
    errs = np.array([r.abs_error for r in rows if r.abs_error is not None])
    summary = {
        "experiment": cfg.experiment.value,
        "framework": "pauli2",
        "seed": cfg.seed,
        "n": len(rows),
        "unresolved": sum(r.abs_error is None for r in rows),
        "mse": float(np.mean(errs**2)) if errs.size else None,
        "max_abs_error": float(errs.max()) if errs.size else None,
    }
    return ExperimentResult(rows, summary, GHZ_COLUMNS)


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    runners = {
        Experiment.QUTRIT_SPHERE: run_qutrit_experiment,
        Experiment.QUTRIT_CIRCLE: run_qutrit_experiment,
        Experiment.SYMMETRIC_SCAN: run_symmetric_scan,
        Experiment.DEGENERACY_CURVES: run_symmetric_scan,
        Experiment.GHZ_SWEEP: run_ghz_sweep,
    }
    if cfg.experiment not in runners:
        raise ValueError(f"{cfg.experiment.value} is not a sweep")
    return runners[cfg.experiment](cfg)


# --- output ---------------------------------------------------------------------------


def write_csv(result: ExperimentResult, stream) -> None:
    import csv

    stream.write(f"# schema={SCHEMA}\n")
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(result.columns)
    for row in result.rows:
        writer.writerow(row.csv_row())
    stream.write(f"# summary={json.dumps(result.summary, sort_keys=True)}\n")


def witness_path(csv_path: Path) -> Path:
    return Path(str(csv_path) + ".witnesses.json")


def write_outputs(result: ExperimentResult, path: Path) -> None:
    """CSV at ``path``; witnesses, when any, next to it."""
    path = Path(path)
    tmp = path.with_name(path.name + f".tmp{os.getpid()}")
    with open(tmp, "w", newline="") as fh:
        write_csv(result, fh)
    tmp.replace(path)
    wit = result.witnesses()
    if wit:
        witness_path(path).write_text(json.dumps(wit))


def read_csv(path: Path) -> tuple[list[dict], dict]:
    """Rows (as string dicts) and the summary footer of a result file."""
    import csv

    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != f"# schema={SCHEMA}":
        raise ValueError("missing or unknown schema header")
    summary = {}
    body = []
    for line in lines[1:]:
        if line.startswith("# summary="):
            summary = json.loads(line[len("# summary="):])
        elif not line.startswith("#"):
            body.append(line)
    return list(csv.DictReader(body)), summary
