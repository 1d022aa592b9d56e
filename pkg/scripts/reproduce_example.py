"""Synthesize a controller for the bundled example and audit it next to the published ones.

    python scripts/reproduce_example.py [--out results/] [--backend cvxopt|clarabel]

Prints one row per controller: LMI verdicts, worst LMI margin, sampling-oracle
stability count and worst in-band |S|, |T| in dB.  With ``--out`` it also
writes the bode/step CSVs per controller.
"""

import argparse
import json
from pathlib import Path

from rfix import verify
from rfix.cli import load_problem
from rfix.poly import Controller
from rfix.synth import check_controller, synthesize

ROOT = Path(__file__).resolve().parents[1]


def audit(spec, settings, ctrl, backend):
    res = check_controller(spec, ctrl, backend=backend)
    samples = verify.sampling_plan(spec.plant.n, settings["samples"], settings["seed"])
    stable = verify.stability_table(spec.plant, ctrl, samples)
    sweeps = {}
    for kind, perf in (("S", spec.sensitivity), ("T", spec.comp_sensitivity)):
        sweeps[kind] = verify.sweep_sensitivity(spec.plant, ctrl, samples, perf.range, perf.bound_db, kind, dc=spec.dc)
    return res, stable, sweeps


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--problem", default=str(ROOT / "problems" / "example.json"))
    ap.add_argument("--out")
    ap.add_argument("--backend", default="cvxopt", choices=["cvxopt", "clarabel"])
    args = ap.parse_args()

    spec, settings = load_problem(args.problem)
    result = synthesize(spec, backend=args.backend)
    print(f"synthesis: {result.status}, margin {result.margin:.4g}, "
          f"{result.diagnostics['runtime']:.2f} s, {result.diagnostics['lmi_count']} LMIs")
    controllers = {}
    if result.controller is not None:
        controllers["synthesized"] = result.controller
        print("  " + ", ".join(f"{k}={v:.4f}" for k, v in result.controller.as_dict().items()))
    for path in sorted((ROOT / "problems" / "controllers").glob("*.json")):
        doc = json.loads(path.read_text())
        controllers[path.stem] = Controller(doc["x"], doc["y"])

    header = f"{'controller':<22}{'stab':>12}{'S-pair':>12}{'T-pair':>12}{'margin':>10}{'stable':>11}{'|S| dB':>9}{'|T| dB':>9}"
    print(header)
    print("-" * len(header))
    for name, ctrl in controllers.items():
        res, stable, sweeps = audit(spec, settings, ctrl, args.backend)
        v = res.diagnostics["verdicts"]
        worst = {k: r.bound_db - r.worst_margin_db for k, r in sweeps.items()}
        print(f"{name:<22}{v['stability']:>12}{v['sensitivity']:>12}{v['comp_sensitivity']:>12}"
              f"{res.margin:>10.3g}{sum(stable):>6}/{len(stable):<4}{worst['S']:>9.2f}{worst['T']:>9.2f}")
        if args.out:
            out = Path(args.out) / name
            out.mkdir(parents=True, exist_ok=True)
            for kind, rep in sweeps.items():
                verify.write_bode_csv(out / f"bode_{kind}.csv", rep)
            if all(stable):
                step = settings.get("step", {})
                smp = verify.UncertaintySample(*spec.plant.deltas_for(step["a"], step["b"]), "step-plant")
                verify.write_step_csv(out / "step.csv", verify.step_response(spec.plant, ctrl, smp))


if __name__ == "__main__":
    main()
