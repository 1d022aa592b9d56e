"""Write the assembled SDP for a problem file in the plain-text sparse block format.

    python scripts/export_sdp.py problems/example.json [--controller c.json] > problem.sdp

With ``--controller`` every coefficient is pinned (the audit problem);
otherwise the synthesis problem with only the file's pins is exported.
"""

import argparse
import json
import sys

from rfix.cli import load_problem
from rfix.sdp import SdpProblem, export_problem
from rfix.synth import constraint_groups


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("problem")
    ap.add_argument("--controller")
    args = ap.parse_args()
    spec, _ = load_problem(args.problem)
    pins = dict(spec.pins)
    if args.controller:
        doc = json.load(open(args.controller))
        pins.update({f"x{i}": v for i, v in enumerate(doc["x"]) if i > 0})
        pins.update({f"y{i}": v for i, v in enumerate(doc["y"])})
    groups = constraint_groups(spec)
    problem = SdpProblem.build([c for g in spec.enabled for c in groups[g]], pins=pins)
    sys.stdout.write(export_problem(problem))


if __name__ == "__main__":
    main()
