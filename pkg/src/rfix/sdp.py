"""Semidefinite feasibility over assembled affine LMIs.

The problem solved is

    maximize t   s.t.   F_i(z) <= -t I   (strict LMIs)
                        F_j(z) <= 0      (auxiliary LMIs)
                        z_diag >= eps_diag,   t <= t_max

and the outcome is declared feasible only after an eigenvalue re-check of
every LMI outside the solver.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .lmi import AffineLmi, Variable, real_embed

logger = logging.getLogger(__name__)

AUX_TOL = 1e-9
T_MAX = 1.0
DUAL_FEAS_TOL = 1e-4
REL_GAP_TOL = 1e-6

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
NUMERICAL_FAILURE = "numerical-failure"


@dataclass(frozen=True, eq=False)
class SdpProblem:
    lmis: tuple[AffineLmi, ...]
    variables: Mapping[str, Variable]
    pins: Mapping[str, np.ndarray] = field(default_factory=dict)
    t_max: float = T_MAX

    @classmethod
    def build(cls, lmis, pins: Mapping[str, object] | None = None, t_max: float = T_MAX) -> "SdpProblem":
        """Embed complex LMIs, collect and cross-check variable declarations."""
        real = []
        variables: dict[str, Variable] = {}
        for lmi in lmis:
            real.append(real_embed(lmi) if lmi.is_complex else lmi)
            for name, var in lmi.variables.items():
                if name in variables and variables[name] != var:
                    raise ValueError(f"variable {name} declared inconsistently")
                variables[name] = var
            missing = set(lmi.terms) - set(lmi.variables)
            if missing:
                raise ValueError(f"LMI {lmi.name} references undeclared {sorted(missing)}")
        pinned = {}
        for name, val in (pins or {}).items():
            if name not in variables:
                continue
            arr = np.atleast_1d(np.asarray(val, dtype=float))
            if arr.size != variables[name].size:
                raise ValueError(f"pin for {name} has the wrong size")
            pinned[name] = arr
        return cls(tuple(real), variables, pinned, t_max)

    @property
    def free(self) -> list[str]:
        return [name for name in self.variables if name not in self.pins]

    @property
    def required_margin(self) -> float:
        return max((l.margin for l in self.lmis if l.strict), default=0.0)


@dataclass(frozen=True)
class CertificateReport:
    max_eigs: dict[str, float]
    required: dict[str, float]
    passed: dict[str, bool]

    @property
    def all_pass(self) -> bool:
        return all(self.passed.values())

    @property
    def margin(self) -> float:
        """Smallest distance ``-max eig`` over the strict LMIs."""
        strict = [-v for k, v in self.max_eigs.items() if self.required[k] > 0]
        return min(strict) if strict else np.inf


@dataclass(frozen=True, eq=False)
class SdpOutcome:
    status: str
    assignment: dict[str, np.ndarray]
    achieved_margin: float
    report: CertificateReport | None
    solver_stats: dict

    @property
    def feasible(self) -> bool:
        return self.status == FEASIBLE


def verify_certificate(problem: SdpProblem, assignment: Mapping[str, np.ndarray]) -> CertificateReport:
    """Eigenvalue re-check of every LMI, independent of the solver."""
    max_eigs, required, passed = {}, {}, {}
    for lmi in problem.lmis:
        ev = lmi.max_eig(assignment)
        max_eigs[lmi.name] = ev
        required[lmi.name] = lmi.margin if lmi.strict else 0.0
        passed[lmi.name] = ev <= -lmi.margin if lmi.strict else ev <= AUX_TOL
    for name, var in problem.variables.items():
        if var.lower is not None:
            ok = bool(np.all(np.asarray(assignment[name]) > 0))
            passed[f"{name}>0"] = ok
            max_eigs[f"{name}>0"] = float(-np.min(assignment[name]))
            required[f"{name}>0"] = 0.0
    return CertificateReport(max_eigs, required, passed)


def _standard_form(problem: SdpProblem):
    """Columns of ``F_i`` per free scalar, plus the pinned-folded constants."""
    offsets = {}
    nz = 0
    for name in problem.free:
        offsets[name] = nz
        nz += problem.variables[name].size
    blocks = []
    for lmi in problem.lmis:
        d = lmi.size
        F0 = lmi.constant.astype(float).copy()
        G = np.zeros((d * d, nz + 1))
        for name, coeffs in lmi.terms.items():
            if name in problem.pins:
                F0 += np.tensordot(problem.pins[name], coeffs, axes=1)
                continue
            off = offsets[name]
            for i, F in enumerate(coeffs):
                G[:, off + i] = F.reshape(-1, order="F")
        if lmi.strict:
            G[:, nz] = np.eye(d).reshape(-1, order="F")
        blocks.append((d, F0, G))
    lower = []
    for name in problem.free:
        var = problem.variables[name]
        if var.lower is not None:
            lower += [(offsets[name] + i, var.lower) for i in range(var.size)]
    return offsets, nz, blocks, lower


def _drop_unused(nz, blocks, lower):
    """Remove scalar unknowns that no LMI touches (solvers reject rank-deficient data).

    They are set to their lower bound, or zero.  The margin ``t`` (last
    column) is always kept.
    """
    used = np.zeros(nz + 1, dtype=bool)
    used[nz] = True
    for _, _, G in blocks:
        used |= np.any(G != 0, axis=0)
    fill = np.zeros(nz + 1)
    for idx, lb in lower:
        if not used[idx]:
            fill[idx] = lb
    active = np.flatnonzero(used)
    remap = {int(old): new for new, old in enumerate(active)}
    blocks = [(d, F0, G[:, active]) for d, F0, G in blocks]
    lower = [(remap[idx], lb) for idx, lb in lower if used[idx]]
    return blocks, lower, active, fill


def _unpack(problem: SdpProblem, offsets, z) -> dict[str, np.ndarray]:
    out = {name: np.array(val) for name, val in problem.pins.items()}
    for name, off in offsets.items():
        out[name] = np.asarray(z[off:off + problem.variables[name].size], dtype=float).copy()
    return {name: out[name] for name in problem.variables}


def _solve_cvxopt(problem: SdpProblem, offsets, nz, blocks, lower, options):
    from cvxopt import matrix, solvers

    c = np.zeros(nz + 1)
    c[nz] = -1.0
    Gl = [np.eye(1, nz + 1, nz)[0]]
    hl = [problem.t_max]
    for idx, lb in lower:
        row = np.zeros(nz + 1)
        row[idx] = -1.0
        Gl.append(row)
        hl.append(-lb)
    Gs = [matrix(G) for _, _, G in blocks]
    hs = [matrix(-F0) for _, F0, _ in blocks]
    opts = {"show_progress": False, "maxiters": 200, "abstol": 1e-9, "reltol": 1e-8, "feastol": 1e-9}
    opts.update(options or {})
    sol = solvers.sdp(matrix(c), Gl=matrix(np.array(Gl)), hl=matrix(np.array(hl)),
                      Gs=Gs, hs=hs, options=opts)
    z = None if sol["x"] is None else np.array(sol["x"]).ravel()
    stats = {
        "solver_status": sol["status"],
        "iterations": int(sol.get("iterations", 0) or 0),
        "primal_objective": sol.get("primal objective"),
        "dual_objective": sol.get("dual objective"),
    }
    # A converged, (nearly) dual-feasible iterate bounds t from above even when
    # the iteration cap is hit before cvxopt's own tolerances are met.
    dinf, gap = sol.get("dual infeasibility"), sol.get("relative gap")
    if (sol.get("dual objective") is not None and dinf is not None and gap is not None
            and dinf <= DUAL_FEAS_TOL and abs(gap) <= REL_GAP_TOL):
        stats["t_upper"] = -float(sol["dual objective"])
    return z, sol["status"] == "optimal", stats


def _solve_clarabel(problem: SdpProblem, offsets, nz, blocks, lower, options):
    import cvxpy as cp

    z = cp.Variable(nz + 1)
    cons = [z[nz] <= problem.t_max]
    for idx, lb in lower:
        cons.append(z[idx] >= lb)
    for d, F0, G in blocks:
        expr = cp.reshape(G @ z, (d, d), order="F") + F0
        cons.append(-(expr + expr.T) / 2 >> 0)
    prob = cp.Problem(cp.Maximize(z[nz]), cons)
    prob.solve(solver=cp.CLARABEL, **(options or {}))
    val = None if z.value is None else np.asarray(z.value).ravel()
    stats = {
        "solver_status": prob.status,
        "iterations": int(prob.solver_stats.num_iters or 0) if prob.solver_stats else 0,
        "primal_objective": prob.value,
        "dual_objective": None,
    }
    return val, prob.status == cp.OPTIMAL, stats


BACKENDS = {"cvxopt": _solve_cvxopt, "clarabel": _solve_clarabel}


def solve(problem: SdpProblem, backend: str = "cvxopt", options: dict | None = None) -> SdpOutcome:
    """Maximise the common margin; report a verified certificate or the evidence against one."""
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}")
    offsets, nz, blocks, lower = _standard_form(problem)
    blocks, lower, active, fill = _drop_unused(nz, blocks, lower)
    start = time.perf_counter()
    try:
        z_act, optimal, stats = BACKENDS[backend](problem, offsets, active.size - 1, blocks, lower, options)
    except (ArithmeticError, ValueError) as exc:
        logger.warning("solver failure: %s", exc)
        z_act, optimal, stats = None, False, {"solver_status": f"error: {exc}", "iterations": 0}
    z = None
    if z_act is not None:
        z = fill.copy()
        z[active] = z_act
    stats["backend"] = backend
    stats["runtime"] = time.perf_counter() - start
    if z is None:
        return SdpOutcome(NUMERICAL_FAILURE, {}, -np.inf, None, stats)

    t_opt = float(z[nz])
    stats["t_opt"] = t_opt
    assignment = _unpack(problem, offsets, z)
    report = verify_certificate(problem, assignment)
    t_bound = stats.get("t_upper", t_opt if optimal else None)
    if report.all_pass:
        status = FEASIBLE
    elif t_bound is not None and t_bound < problem.required_margin:
        status = INFEASIBLE
    else:
        status = NUMERICAL_FAILURE
    return SdpOutcome(status, assignment, float(report.margin), report, stats)


def export_problem(problem: SdpProblem) -> str:
    """Plain-text sparse block format.

    ``variable <name> <kind> <dim> <size> [pinned v...]`` lines, then per LMI a
    ``lmi <name> <size> <strict|aux> <margin>`` header followed by upper-triangle
    triplets ``<var|const> <entry> <i> <j> <value>`` (1-based ``i``, ``j``).
    """
    lines = [f"# objective: maximize t <= {problem.t_max!r}", f"variables {len(problem.variables)}"]
    for name, var in problem.variables.items():
        line = f"variable {name} {var.kind} {var.dim} {var.size}"
        if var.lower is not None:
            line += f" lower {var.lower!r}"
        if name in problem.pins:
            line += " pinned " + " ".join(repr(float(v)) for v in problem.pins[name])
        lines.append(line)

    def triplets(tag, idx, M):
        iu, ju = np.triu_indices(M.shape[0])
        for i, j in zip(iu, ju):
            if M[i, j] != 0:
                lines.append(f"{tag} {idx} {i + 1} {j + 1} {float(M[i, j])!r}")

    for lmi in problem.lmis:
        lines.append(f"lmi {lmi.name} {lmi.size} {'strict' if lmi.strict else 'aux'} {lmi.margin!r}")
        triplets("const", 0, lmi.constant)
        for name, coeffs in lmi.terms.items():
            for i, F in enumerate(coeffs):
                triplets(name, i, F)
    return "\n".join(lines) + "\n"
