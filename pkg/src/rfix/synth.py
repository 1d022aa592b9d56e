"""End-to-end fixed-order synthesis and controller auditing."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import lmi as L
from .poly import Controller, IntervalPlant, as_poly, coefficient_names, is_strictly_hurwitz
from .realize import build_constructed_systems
from .sdp import FEASIBLE, INFEASIBLE, NUMERICAL_FAILURE, SdpOutcome, SdpProblem, solve

logger = logging.getLogger(__name__)

GROUPS = ("stability", "sensitivity", "comp_sensitivity")


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 20.0)


@dataclass(frozen=True, eq=False)
class PerformanceSpec:
    """``|H(jw)| < rho`` over the frequency range ``range``."""

    rho: float
    range: L.FrequencyRange

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("rho must be positive")

    @classmethod
    def from_db(cls, bound_db: float, band, kind: str = "middle") -> "PerformanceSpec":
        return cls(db_to_linear(bound_db), L.range_from_band(kind, band))

    @property
    def bound_db(self) -> float:
        return 20.0 * np.log10(self.rho)


@dataclass(frozen=True, eq=False)
class SynthesisSpec:
    plant: IntervalPlant
    m: int
    dc: np.ndarray
    sensitivity: PerformanceSpec | None = None
    comp_sensitivity: PerformanceSpec | None = None
    pins: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        dc = as_poly(self.dc)
        if dc.size - 1 != self.m + self.plant.n:
            raise ValueError(f"deg(d_c) must equal m + n = {self.m + self.plant.n}")
        if not is_strictly_hurwitz(dc):
            raise ValueError("d_c is not strictly Hurwitz")
        object.__setattr__(self, "dc", dc / dc[0])
        object.__setattr__(self, "pins", {k: float(v) for k, v in self.pins.items()})
        unknown = set(self.pins) - set(coefficient_names(self.m))
        if unknown:
            raise ValueError(f"unknown pinned coefficients {sorted(unknown)}")

    @property
    def enabled(self) -> tuple[str, ...]:
        out = ["stability"]
        if self.sensitivity is not None:
            out.append("sensitivity")
        if self.comp_sensitivity is not None:
            out.append("comp_sensitivity")
        return tuple(out)

    def with_bounds(self, sensitivity=..., comp_sensitivity=...) -> "SynthesisSpec":
        return SynthesisSpec(
            self.plant, self.m, self.dc,
            self.sensitivity if sensitivity is ... else sensitivity,
            self.comp_sensitivity if comp_sensitivity is ... else comp_sensitivity,
            self.pins,
        )


@dataclass(frozen=True, eq=False)
class SynthesisResult:
    status: str
    controller: Controller | None
    certificates: dict[str, SdpOutcome]
    problems: dict[str, SdpProblem]
    diagnostics: dict = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.status == FEASIBLE

    @property
    def margin(self) -> float:
        return min((o.achieved_margin for o in self.certificates.values()), default=-np.inf)

    def lmi_eigs(self) -> dict[str, float]:
        """Max eigenvalue per LMI across all certificates."""
        out = {}
        for outcome in self.certificates.values():
            if outcome.report is not None:
                out.update(outcome.report.max_eigs)
        return out


def constraint_groups(spec: SynthesisSpec, groups=None) -> dict[str, list[L.AffineLmi]]:
    """The enabled LMI groups, each a list of constraints (main LMIs plus positivity)."""
    groups = spec.enabled if groups is None else groups
    plant = spec.plant
    cv = L.controller_vars(plant, spec.m, spec.dc)
    base = Controller(np.r_[1.0, np.zeros(spec.m)], np.zeros(spec.m + 1))
    sys_ = build_constructed_systems(plant, base, spec.dc)
    out = {}
    for g in groups:
        if g == "stability":
            out[g] = L.stability_constraints(sys_, plant, cv)
        elif g == "sensitivity":
            s = spec.sensitivity
            out[g] = L.sensitivity_constraints(sys_, plant, cv, s.rho, s.range)
        elif g == "comp_sensitivity":
            t = spec.comp_sensitivity
            out[g] = L.comp_sensitivity_constraints(sys_, plant, cv, t.rho, t.range)
        else:
            raise ValueError(f"unknown group {g!r}")
    return out


def _combine(statuses) -> str:
    statuses = list(statuses)
    if all(s == FEASIBLE for s in statuses):
        return FEASIBLE
    if INFEASIBLE in statuses:
        return INFEASIBLE
    return NUMERICAL_FAILURE


def _margins(outcomes: Mapping[str, SdpOutcome]) -> dict[str, float]:
    out = {}
    for o in outcomes.values():
        if o.report is not None:
            out.update({k: -v for k, v in o.report.max_eigs.items() if o.report.required[k] > 0})
    return out


def synthesize(spec: SynthesisSpec, backend: str = "cvxopt") -> SynthesisResult:
    """Solve all enabled LMIs jointly with the unpinned controller coefficients free."""
    groups = constraint_groups(spec)
    lmis = [c for g in spec.enabled for c in groups[g]]
    problem = SdpProblem.build(lmis, pins=spec.pins)
    outcome = solve(problem, backend=backend)
    diagnostics = {
        "runtime": outcome.solver_stats.get("runtime"),
        "margins": _margins({"joint": outcome}),
        "lmi_count": sum(1 for c in lmis if c.strict),
    }
    controller = None
    if outcome.feasible:
        values = {nm: float(outcome.assignment[nm][0]) for nm in coefficient_names(spec.m)}
        controller = Controller.from_dict(spec.m, values, pins=spec.pins)
    else:
        diagnostics["triage"] = triage(spec, groups, backend)
    return SynthesisResult(outcome.status, controller, {"joint": outcome}, {"joint": problem}, diagnostics)


def triage(spec: SynthesisSpec, groups=None, backend: str = "cvxopt") -> list[dict]:
    """Solve stability alone, then +S, then +T; the first failing subset names the culprit."""
    groups = constraint_groups(spec) if groups is None else groups
    steps = [("stability",)]
    if "sensitivity" in groups:
        steps.append(("stability", "sensitivity"))
    if "comp_sensitivity" in groups:
        steps.append(("stability", "comp_sensitivity"))
    out = []
    for subset in steps:
        problem = SdpProblem.build([c for g in subset for c in groups[g]], pins=spec.pins)
        o = solve(problem, backend=backend)
        out.append({"groups": list(subset), "status": o.status, "t_opt": o.solver_stats.get("t_opt")})
    return out


def check_controller(spec: SynthesisSpec, ctrl: Controller, backend: str = "cvxopt") -> SynthesisResult:
    """Audit a fully specified controller: certificate variables only, one solve per group.

    With every coefficient pinned the three groups share no variables, so the
    joint problem is feasible exactly when each group is.
    """
    if ctrl.m != spec.m:
        raise ValueError("controller order does not match the specification")
    pins = ctrl.as_dict()
    groups = constraint_groups(spec)
    outcomes, problems = {}, {}
    for g in spec.enabled:
        problems[g] = SdpProblem.build(groups[g], pins=pins)
        outcomes[g] = solve(problems[g], backend=backend)
    status = _combine(o.status for o in outcomes.values())
    diagnostics = {
        "verdicts": {g: o.status for g, o in outcomes.items()},
        "margins": _margins(outcomes),
        "runtime": sum(o.solver_stats.get("runtime", 0.0) for o in outcomes.values()),
    }
    return SynthesisResult(status, ctrl, outcomes, problems, diagnostics)
