"""``udtomo`` command line.

Exit codes: 0 success, 2 usage or parse error, 3 when the solver could not
produce any converged run for a single target.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .alm import ALMConfig, AdamConfig, classify
from .errors import InfeasibleError, UdtomoError
from .experiments import (
    DEFAULT_SAMPLES,
    Experiment,
    ExperimentConfig,
    QUTRIT_FRAMEWORKS,
    run_experiment,
    write_csv,
    write_outputs,
)
from .frameworks import framework_by_name
from .oracles import verify_witness
from .rank import RankBudget, RankSource
from .states import ghz_state, normalize, special_symmetric_state

EXIT_USAGE = 2
EXIT_INFEASIBLE = 3

_ALM_FIELDS = {f.name: f.type for f in dataclasses.fields(ALMConfig) if f.name != "adam"}
_ADAM_FIELDS = {"adam_" + f.name: f.type for f in dataclasses.fields(AdamConfig)}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def read_config_file(path: Path) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment. Keys are flag
    names without the leading dashes (``rank-budget`` or ``rank_budget``)
    or ALM fields such as ``inner_iters`` and ``adam_step_size``."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from exc
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{n}: expected key = value")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _number(kind: str, key: str, value: str):
    try:
        return int(value) if kind == "int" else float(value)
    except ValueError:
        raise UsageError(f"{key}: not a valid {kind}: {value!r}") from None


def build_alm_config(settings: dict[str, str], delta: float | None) -> ALMConfig:
    alm, adam = {}, {}
    for key, value in settings.items():
        if key in _ALM_FIELDS:
            alm[key] = _number(_ALM_FIELDS[key], key, value)
        elif key in _ADAM_FIELDS:
            adam[key[5:]] = _number(_ADAM_FIELDS[key], key, value)
    if delta is not None:
        alm["delta"] = delta
    try:
        return ALMConfig(adam=AdamConfig(**adam), **alm)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _parse_rank_budget(value: str) -> int | None:
    if value == "auto":
        return None
    try:
        r = int(value)
    except ValueError:
        raise UsageError(f"--rank-budget must be 'auto' or a positive integer, got {value!r}") from None
    if r < 1:
        raise UsageError("--rank-budget must be positive")
    return r


def _floats(text: str, n: int | None = None) -> list[float]:
    try:
        vals = [float(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError:
        raise UsageError(f"cannot parse numbers from {text!r}") from None
    if n is not None and len(vals) != n:
        raise UsageError(f"expected {n} comma-separated numbers, got {len(vals)}")
    if not vals:
        raise UsageError("empty number list")
    return vals


def _amplitudes(text: str) -> np.ndarray:
    """Comma-separated amplitudes; each may be complex, e.g. ``0.5+0.5j``."""
    try:
        vals = np.array([complex(x.strip()) for x in text.split(",")], dtype=np.complex128)
    except ValueError:
        raise UsageError(f"cannot parse amplitudes from {text!r}") from None
    if np.linalg.norm(vals) < 1e-12:
        raise UsageError("amplitudes must not all vanish")
    return normalize(vals)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--framework", choices=("a8", "a7", "a6", "pauli2"), type=str.lower)
    common.add_argument("--samples", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--out", type=Path, help="CSV (or JSON for 'single') output path; stdout if omitted")
    common.add_argument("--jobs", type=int, help="worker processes (default: $UDTOMO_JOBS or 1)")
    common.add_argument("--delta", type=float)
    common.add_argument("--rank-budget", help="'auto' or a positive integer")
    common.add_argument("--config", type=Path, help="flat key = value file mirroring the flags")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="udtomo", description="Classify pure states as UDA, UDP-not-UDA or not UDP.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for exp in Experiment:
        if exp is Experiment.SINGLE:
            continue
        sub.add_parser(exp.value, parents=[common], help=f"{exp.value} sweep")
    single = sub.add_parser("single", parents=[common], help="classify one state, JSON output")
    group = single.add_mutually_exclusive_group(required=True)
    group.add_argument("--ghz-theta", type=float)
    group.add_argument("--qutrit", help="a0,a1,a2")
    group.add_argument("--symmetric", help="c0,c2,c4")
    group.add_argument("--amplitudes", help="comma-separated (complex) amplitudes")
    return p


def _settings(args) -> dict[str, str]:
    settings = read_config_file(args.config) if args.config else {}
    for key in ("framework", "samples", "seed", "out", "jobs", "delta", "rank_budget"):
        val = getattr(args, key)
        if val is not None:
            settings[key] = str(val)
    return settings


def _common(settings: dict[str, str]):
    delta = _number("float", "delta", settings["delta"]) if "delta" in settings else None
    cfg = build_alm_config(settings, delta)
    seed = _number("int", "seed", settings.get("seed", "0"))
    jobs = _number("int", "jobs", settings.get("jobs", os.environ.get("UDTOMO_JOBS", "1")))
    if jobs < 1:
        raise UsageError("--jobs must be positive")
    budget = _parse_rank_budget(settings.get("rank_budget", "auto"))
    return cfg.replace(seed=seed), seed, jobs, budget


def _single(args, settings) -> dict:
    cfg, _, _, budget = _common(settings)
    fw_name = settings.get("framework", "").lower() or None
    if args.ghz_theta is not None:
        target, kind = ghz_state(args.ghz_theta), {"ghz_theta": args.ghz_theta}
        fw_name = fw_name or "pauli2"
    elif args.qutrit is not None:
        a = _floats(args.qutrit, 3)
        target, kind = normalize(np.array(a, dtype=np.complex128)), {"qutrit": a}
        fw_name = fw_name or "a8"
    elif args.symmetric is not None:
        c = np.array(_floats(args.symmetric, 3))
        if np.linalg.norm(c) < 1e-12:
            raise UsageError("symmetric coefficients must not all vanish")
        c = c / np.linalg.norm(c)
        target, kind = special_symmetric_state(*c), {"symmetric": c.tolist()}
        fw_name = fw_name or "pauli2"
    else:
        target = _amplitudes(args.amplitudes)
        kind = {"amplitudes": {"real": target.real.tolist(), "imag": target.imag.tolist()}}
        fw_name = fw_name or {3: "a8", 16: "pauli2"}.get(len(target))
        if fw_name is None:
            raise UsageError("give --framework for this dimension")
    try:
        fw = framework_by_name(fw_name)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if fw.dimension != len(target):
        raise UsageError(f"framework {fw_name} acts on dimension {fw.dimension}, state has {len(target)}")
    rb = None if budget is None else RankBudget(budget, RankSource.USER)
    v = classify(target, fw, cfg, rb)

    def run(res):
        if res is None:
            return None
        return {"fidelity": res.fidelity, "constraint_inf_norm": res.constraint_inf_norm,
                "converged": res.converged, "early_stop": res.early_stop, "outer_iters": res.outer_iters,
                "rank": res.params.rank}

    doc = {"target": kind, "framework": fw_name, "delta": cfg.delta, "category": v.category.name,
           "udp": run(v.udp_result), "uda": run(v.uda_result), "witness": None}
    if v.witness is not None:
        rep = verify_witness(target, v.witness, fw, cfg.delta)
        doc["witness"] = {"real": v.witness.real.tolist(), "imag": v.witness.imag.tolist(),
                          "fidelity": rep.fidelity, "measurement_gap": rep.measurement_gap, "valid": rep.valid}
    return doc


def _sweep(command: str, settings) -> tuple[object, Path | None]:
    cfg, seed, jobs, budget = _common(settings)
    exp = Experiment(command)
    default_fw = "pauli2" if exp in (Experiment.GHZ_SWEEP, Experiment.SYMMETRIC_SCAN,
                                     Experiment.DEGENERACY_CURVES) else "a8"
    fw = settings.get("framework", default_fw).lower()
    if exp in (Experiment.QUTRIT_SPHERE, Experiment.QUTRIT_CIRCLE) and fw not in QUTRIT_FRAMEWORKS:
        raise UsageError(f"{command} needs --framework a8, a7 or a6")
    if exp not in (Experiment.QUTRIT_SPHERE, Experiment.QUTRIT_CIRCLE) and fw != "pauli2":
        raise UsageError(f"{command} needs --framework pauli2")
    n = _number("int", "samples", settings.get("samples", str(DEFAULT_SAMPLES[command])))
    out = Path(settings["out"]) if "out" in settings else None
    try:
        ecfg = ExperimentConfig(exp, n, fw, cfg, seed, out, jobs, budget)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return run_experiment(ecfg), out


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                            format="%(levelname)s %(name)s: %(message)s")
        settings = _settings(args)
        if args.command == "single":
            doc = _single(args, settings)
            text = json.dumps(doc, indent=2)
            if "out" in settings:
                Path(settings["out"]).write_text(text + "\n")
            else:
                print(text)
            return 0
        result, out = _sweep(args.command, settings)
    except UsageError as exc:
        print(f"udtomo: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleError as exc:
        print(f"udtomo: solver failed: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except UdtomoError as exc:
        print(f"udtomo: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if out is None:
        write_csv(result, sys.stdout)
    else:
        write_outputs(result, out)
        print(json.dumps(result.summary, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
