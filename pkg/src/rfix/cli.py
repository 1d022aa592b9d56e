"""Command-line front end.

    rfix synth  problem.json -o out/
    rfix check  problem.json controller.json -o out/
    rfix bode   problem.json controller.json -o out/
    rfix step   problem.json controller.json -o out/

Exit codes: 0 success/feasible, 1 usage or I/O error, 2 infeasible or a
failed oracle, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import synth, verify
from .poly import Controller, IntervalPlant, hurwitz_from_controller
from .sdp import FEASIBLE, INFEASIBLE

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_NUMERICAL = 0, 1, 2, 3
SEED_ENV = "RFIX_SEED"
CERT_SOUNDNESS_SAMPLES = 200

logger = logging.getLogger("rfix")

_BAND_SPEC = {
    "type": "object",
    "required": ["bound_db", "band_rad_s"],
    "properties": {
        "bound_db": {"type": "number"},
        "band_rad_s": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 2, "maxItems": 2},
        "range_kind": {"enum": ["low", "middle", "high"]},
    },
    "additionalProperties": False,
}

PROBLEM_SCHEMA = {
    "type": "object",
    "required": ["plant", "controller", "dc"],
    "properties": {
        "plant": {
            "type": "object",
            "required": ["a_bounds", "b_bounds"],
            "properties": {
                "order": {"type": "integer", "minimum": 1},
                "a_bounds": {"type": "array", "minItems": 1,
                             "items": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}},
                "b_bounds": {"type": "array", "minItems": 1,
                             "items": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}},
            },
        },
        "controller": {
            "type": "object",
            "required": ["order"],
            "properties": {
                "order": {"type": "integer", "minimum": 0},
                "pins": {"type": "object", "additionalProperties": {"type": "number"}},
            },
        },
        "dc": {
            "type": "object",
            "oneOf": [{"required": ["coeffs"]}, {"required": ["from_controller"]}],
            "properties": {
                "coeffs": {"type": "array", "items": {"type": "number"}, "minItems": 2},
                "from_controller": {"type": "object", "required": ["x", "y"]},
            },
        },
        "specs": {
            "type": "object",
            "properties": {"sensitivity": _BAND_SPEC, "comp_sensitivity": _BAND_SPEC},
            "additionalProperties": False,
        },
        "verify": {
            "type": "object",
            "properties": {
                "samples": {"type": "integer", "minimum": 0},
                "seed": {"type": "integer"},
                "grid_points": {"type": "integer", "minimum": 2},
                "step": {
                    "type": "object",
                    "properties": {
                        "a": {"type": "array", "items": {"type": "number"}},
                        "b": {"type": "array", "items": {"type": "number"}},
                        "t_end": {"type": "number", "exclusiveMinimum": 0},
                    },
                },
            },
        },
    },
}

CONTROLLER_SCHEMA = {
    "type": "object",
    "required": ["x", "y"],
    "properties": {
        "x": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        "y": {"type": "array", "items": {"type": "number"}, "minItems": 1},
    },
}


class ProblemError(ValueError):
    """Invalid problem or controller file."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _read_json(path, schema) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ProblemError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ProblemError(f"{path} is not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as exc:
        loc = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ProblemError(f"schema error at {loc}: {exc.message}") from exc
    return doc


def load_problem(path, range_kinds: dict | None = None) -> tuple[synth.SynthesisSpec, dict]:
    """Parse a problem file into a spec plus its ``verify`` settings."""
    doc = _read_json(path, PROBLEM_SCHEMA)
    range_kinds = range_kinds or {}
    p = doc["plant"]
    for key in ("a_bounds", "b_bounds"):
        for lo, hi in p[key]:
            if lo > hi:
                raise ProblemError(f"plant.{key}: bound [{lo}, {hi}] is misordered (need l <= u)")
    if len(p["a_bounds"]) != len(p["b_bounds"]):
        raise ProblemError("plant.a_bounds and plant.b_bounds must have the same length")
    if "order" in p and p["order"] != len(p["a_bounds"]):
        raise ProblemError("plant.order does not match the number of bounds")
    plant = IntervalPlant.from_bounds(p["a_bounds"], p["b_bounds"])
    m = doc["controller"]["order"]
    pins = doc["controller"].get("pins", {})

    if "coeffs" in doc["dc"]:
        dc = np.asarray(doc["dc"]["coeffs"], dtype=float)
    else:
        base = doc["dc"]["from_controller"]
        try:
            dc = hurwitz_from_controller(plant, Controller(base["x"], base["y"]))
        except ValueError as exc:
            raise ProblemError(f"dc.from_controller: {exc}") from exc

    perf = {}
    for key in ("sensitivity", "comp_sensitivity"):
        entry = doc.get("specs", {}).get(key)
        if entry is None:
            perf[key] = None
            continue
        lo, hi = entry["band_rad_s"]
        kind = range_kinds.get(key) or entry.get("range_kind", "middle")
        if kind == "middle" and not 0 < lo < hi:
            raise ProblemError(f"specs.{key}.band_rad_s must satisfy 0 < lo < hi")
        try:
            perf[key] = synth.PerformanceSpec.from_db(entry["bound_db"], (lo, hi), kind)
        except ValueError as exc:
            raise ProblemError(f"specs.{key}: {exc}") from exc
    try:
        spec = synth.SynthesisSpec(plant, m, dc, perf["sensitivity"], perf["comp_sensitivity"], pins)
    except ValueError as exc:
        raise ProblemError(str(exc)) from exc

    settings = {"samples": verify.DEFAULT_SAMPLES, "seed": verify.DEFAULT_SEED,
                "grid_points": verify.GRID_POINTS, "step": {}}
    settings.update(doc.get("verify", {}))
    if os.environ.get(SEED_ENV):
        try:
            settings["seed"] = int(os.environ[SEED_ENV])
        except ValueError as exc:
            raise ProblemError(f"{SEED_ENV} must be an integer") from exc
    return spec, settings


def load_controller(path, m: int) -> Controller:
    doc = _read_json(path, CONTROLLER_SCHEMA)
    try:
        ctrl = Controller(doc["x"], doc["y"])
    except ValueError as exc:
        raise ProblemError(f"controller file: {exc}") from exc
    if ctrl.m != m:
        raise ProblemError(f"controller order {ctrl.m} does not match problem order {m}")
    return ctrl


def controller_json(ctrl: Controller) -> dict:
    return {"x": [float(v) for v in ctrl.x], "y": [float(v) for v in ctrl.y],
            "coefficients": ctrl.as_dict(), "pins": dict(ctrl.pins)}


def _certificates_json(result: synth.SynthesisResult) -> dict:
    out = {"status": result.status, "margin": _num(result.margin), "outcomes": {}}
    for label, o in result.certificates.items():
        entry = {
            "status": o.status,
            "achieved_margin": _num(o.achieved_margin),
            "solver": {k: _num(v) for k, v in o.solver_stats.items() if k != "runtime"},
            "assignment": {k: [float(x) for x in np.ravel(v)] for k, v in o.assignment.items()},
        }
        if o.report is not None:
            entry["lmis"] = {name: {"max_eig": o.report.max_eigs[name],
                                    "required": o.report.required[name],
                                    "pass": o.report.passed[name]} for name in o.report.max_eigs}
        out["outcomes"][label] = entry
    if "triage" in result.diagnostics:
        out["triage"] = result.diagnostics["triage"]
    return out


def _num(v):
    if isinstance(v, (float, np.floating)):
        return float(v) if np.isfinite(v) else str(v)
    return v


def _status_word(status: str) -> str:
    return {FEASIBLE: "feasible", INFEASIBLE: "infeasible"}.get(status, "error")


def _exit_for(status: str) -> int:
    return {FEASIBLE: EXIT_OK, INFEASIBLE: EXIT_INFEASIBLE}.get(status, EXIT_NUMERICAL)


_PAIR_NAMES = {"sensitivity": "S-pair", "comp_sensitivity": "T-pair"}


def _triage_lines(triage: list[dict]) -> list[str]:
    lines = []
    for step in triage:
        groups = "+".join(step["groups"])
        lines.append(f"triage {groups}: {step['status']} (t_opt={step['t_opt']})")
    failing = [s for s in triage if s["status"] != FEASIBLE]
    if failing:
        first = failing[0]["groups"]
        culprit = "stability" if first == ["stability"] else _PAIR_NAMES[first[-1]]
        lines.append(f"culprit: {culprit}")
    return lines


def _write(out_dir: Path, name: str, text: str) -> None:
    (out_dir / name).write_text(text)


def cmd_synth(args) -> int:
    spec, _ = load_problem(args.problem, _range_kinds(args))
    out = _out_dir(args)
    result = synth.synthesize(spec, backend=args.backend)
    lines = [f"status={_status_word(result.status)} margin={_num(result.margin)}",
             f"lmis={result.diagnostics['lmi_count']}"]
    if result.controller is not None:
        _write(out, "controller.json", json.dumps(controller_json(result.controller), indent=2) + "\n")
        lines += [f"{k}={v!r}" for k, v in result.controller.as_dict().items()]
    lines += [f"margin[{k}]={v:.6g}" for k, v in result.diagnostics["margins"].items()]
    lines += _triage_lines(result.diagnostics.get("triage", []))
    _write(out, "certificates.json", json.dumps(_certificates_json(result), indent=2) + "\n")
    _write(out, "summary.txt", "\n".join(lines) + "\n")
    print(lines[0])
    return _exit_for(result.status)


def _sweeps(spec, ctrl, samples, settings, out: Path) -> dict[str, verify.SweepReport]:
    reports = {}
    for key, kind in (("sensitivity", "S"), ("comp_sensitivity", "T")):
        perf = getattr(spec, key)
        if perf is None:
            continue
        rep = verify.sweep_sensitivity(spec.plant, ctrl, samples, perf.range, perf.bound_db, kind,
                                       dc=spec.dc, grid_points=settings["grid_points"])
        verify.write_bode_csv(out / f"bode_{kind}.csv", rep)
        reports[kind] = rep
    return reports


def _step_sample(spec, settings) -> verify.UncertaintySample:
    step = settings.get("step") or {}
    if "a" in step and "b" in step:
        da, db = spec.plant.deltas_for(step["a"], step["b"])
        return verify.UncertaintySample(da, db, "step-plant")
    return verify.nominal_sample(spec.plant.n)


def _step(spec, ctrl, settings, out: Path):
    smp = _step_sample(spec, settings)
    trace = verify.step_response(spec.plant, ctrl, smp, t_end=float(settings.get("step", {}).get("t_end", 30.0)))
    verify.write_step_csv(out / "step.csv", trace)
    return trace


def cmd_check(args) -> int:
    spec, settings = load_problem(args.problem, _range_kinds(args))
    ctrl = load_controller(args.controller, spec.m)
    out = _out_dir(args)
    result = synth.check_controller(spec, ctrl, backend=args.backend)

    samples = verify.sampling_plan(spec.plant.n, settings["samples"], settings["seed"])
    stable = verify.stability_table(spec.plant, ctrl, samples)
    verify.write_stability_csv(out / "stability.csv", samples, stable)
    reports = _sweeps(spec, ctrl, samples, settings, out)

    lines = [f"status={_status_word(result.status)} margin={_num(result.margin)}"]
    lines += [f"lmi[{g}]={v}" for g, v in result.diagnostics["verdicts"].items()]
    lines += [f"margin[{k}]={v:.6g}" for k, v in result.diagnostics["margins"].items()]
    n_vert = 4 ** spec.plant.n
    unstable = [i for i, ok in enumerate(stable) if not ok]
    lines.append(f"oracle stability: {len(stable) - len(unstable)}/{len(stable)} stable "
                 f"({n_vert} vertices + {len(stable) - n_vert} random, seed {settings['seed']})")
    for i in unstable[:20]:
        s = samples[i]
        lines.append(f"unstable sample {i} ({s.provenance}): delta_a={s.delta_a.tolist()} delta_b={s.delta_b.tolist()}")
    for kind, rep in reports.items():
        lines.append(f"oracle |{kind}| < {rep.bound_db:.4g} dB: {'pass' if rep.passed else 'fail'} "
                     f"(worst margin {rep.worst_margin_db:.4g} dB, {len(rep.unstable)} unstable samples)")
    if not unstable:
        trace = _step(spec, ctrl, settings, out)
        lines.append(f"step final value {trace.y[-1]:.6f}")
    if result.feasible:
        snd_samples = verify.vertex_samples(spec.plant.n) + verify.random_samples(
            spec.plant.n, CERT_SOUNDNESS_SAMPLES, settings["seed"])
        worst = verify.certificate_soundness(spec, result, snd_samples)
        lines += [f"soundness[{k}] worst max eig {v:.6g}" for k, v in worst.items()]
    oracles_ok = not unstable and all(r.passed for r in reports.values())
    lines.append(f"oracles={'pass' if oracles_ok else 'fail'}")

    _write(out, "certificates.json", json.dumps(_certificates_json(result), indent=2) + "\n")
    _write(out, "summary.txt", "\n".join(lines) + "\n")
    print("\n".join(lines))
    code = _exit_for(result.status)
    if code == EXIT_OK and not oracles_ok:
        code = EXIT_INFEASIBLE
    return code


def cmd_bode(args) -> int:
    spec, settings = load_problem(args.problem, _range_kinds(args))
    ctrl = load_controller(args.controller, spec.m)
    out = _out_dir(args)
    samples = verify.sampling_plan(spec.plant.n, settings["samples"], settings["seed"])
    for kind, rep in _sweeps(spec, ctrl, samples, settings, out).items():
        print(f"bode_{kind}.csv worst margin {rep.worst_margin_db:.4g} dB")
    return EXIT_OK


def cmd_step(args) -> int:
    spec, settings = load_problem(args.problem, _range_kinds(args))
    ctrl = load_controller(args.controller, spec.m)
    out = _out_dir(args)
    try:
        trace = _step(spec, ctrl, settings, out)
    except verify.UnstableLoopError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    print(f"step.csv final value {trace.y[-1]:.6f}")
    return EXIT_OK


def _range_kinds(args) -> dict:
    return {"sensitivity": args.s_range_kind or args.range_kind,
            "comp_sensitivity": args.t_range_kind or args.range_kind}


def _out_dir(args) -> Path:
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rfix", description="Robust fixed-order controller synthesis for interval plants.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, with_controller):
        p.add_argument("problem")
        if with_controller:
            p.add_argument("controller")
        p.add_argument("-o", "--output", required=True, help="output directory")
        p.add_argument("--range-kind", choices=["low", "middle", "high"], help="override both bands' range kind")
        p.add_argument("--s-range-kind", choices=["low", "middle", "high"])
        p.add_argument("--t-range-kind", choices=["low", "middle", "high"])
        p.add_argument("--backend", choices=["cvxopt", "clarabel"], default="cvxopt")

    common(sub.add_parser("synth", help="synthesize a controller"), False)
    common(sub.add_parser("check", help="audit a controller: LMIs plus sampling oracles"), True)
    common(sub.add_parser("bode", help="write |S| and |T| envelope CSVs"), True)
    common(sub.add_parser("step", help="write a step-response CSV"), True)
    return parser


COMMANDS = {"synth": cmd_synth, "check": cmd_check, "bode": cmd_bode, "step": cmd_step}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ProblemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
