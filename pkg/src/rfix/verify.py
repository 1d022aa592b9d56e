"""Solver-independent checks of synthesized or given controllers.

Nothing here touches the LMI assembly path except :func:`uncertain_inequality_eigs`,
which rebuilds the uncertain (G)KYP inequalities directly from the realizations
and the certificate matrices for a concrete uncertainty sample.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .lmi import FrequencyRange, Variable, gkyp_xi
from .poly import Controller, IntervalPlant, closed_loop_polynomial, eig_hurwitz
from .realize import build_constructed_systems, realize_canonical, resolvent_columns

DEFAULT_SEED = 42
DEFAULT_SAMPLES = 1000
GRID_POINTS = 400
# open-ended bands are swept over this many decades beyond their finite edge
OPEN_BAND_DECADES = 3


class UnstableLoopError(ValueError):
    """The closed loop is unstable at the requested sample."""


@dataclass(frozen=True, eq=False)
class UncertaintySample:
    delta_a: np.ndarray
    delta_b: np.ndarray
    provenance: str

    def __post_init__(self):
        for name in ("delta_a", "delta_b"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if np.any(np.abs(arr) > 1.0):
                raise ValueError("interval variables must lie in [-1, 1]")
            object.__setattr__(self, name, arr)


def vertex_samples(n: int) -> list[UncertaintySample]:
    out = []
    for signs in itertools.product((-1.0, 1.0), repeat=2 * n):
        s = np.array(signs)
        out.append(UncertaintySample(s[:n], s[n:], "vertex"))
    return out


def random_samples(n: int, count: int, seed: int = DEFAULT_SEED) -> list[UncertaintySample]:
    rng = np.random.default_rng(seed)
    draws = rng.uniform(-1.0, 1.0, size=(count, 2 * n))
    return [UncertaintySample(d[:n], d[n:], f"random({seed})") for d in draws]


def sampling_plan(n: int, count: int = DEFAULT_SAMPLES, seed: int = DEFAULT_SEED) -> list[UncertaintySample]:
    """All vertices followed by ``count`` seeded uniform interior samples."""
    return vertex_samples(n) + random_samples(n, count, seed)


def nominal_sample(n: int) -> UncertaintySample:
    return UncertaintySample(np.zeros(n), np.zeros(n), "nominal")


def closed_loop_stable(plant: IntervalPlant, ctrl: Controller, sample: UncertaintySample) -> bool:
    a, b = plant.coefficients(sample.delta_a, sample.delta_b)
    return eig_hurwitz(closed_loop_polynomial(a, b, ctrl.x, ctrl.y))


def stability_table(plant, ctrl, samples) -> list[bool]:
    return [closed_loop_stable(plant, ctrl, s) for s in samples]


def sweep_grid(band, points: int = GRID_POINTS) -> np.ndarray:
    """Log-spaced grid strictly inside ``band``, endpoints excluded by one step."""
    if isinstance(band, FrequencyRange):
        band = band.band
    lo, hi = (float(v) for v in band)
    if lo <= 0:
        lo = hi * 10.0 ** -OPEN_BAND_DECADES
    if not np.isfinite(hi):
        hi = lo * 10.0 ** OPEN_BAND_DECADES
    if not 0 < lo < hi:
        raise ValueError("band must satisfy 0 <= lo < hi")
    return np.geomspace(lo, hi, points + 2)[1:-1]


def _default_dc(k: int) -> np.ndarray:
    # S and T do not depend on d_c; any strictly Hurwitz choice works
    return np.poly(-np.ones(k))


@dataclass(frozen=True, eq=False)
class SweepReport:
    kind: str
    bound_db: float
    grid: np.ndarray
    magnitudes: np.ndarray
    worst_margin_db: float
    unstable: tuple[int, ...] = ()

    @property
    def passed(self) -> bool:
        return not self.unstable and self.worst_margin_db > 0

    def envelope_db(self) -> tuple[np.ndarray, np.ndarray]:
        db = 20.0 * np.log10(self.magnitudes)
        return db.min(axis=0), db.max(axis=0)


def closed_loop_responses(plant, ctrl, samples, grid, dc=None) -> tuple[np.ndarray, np.ndarray]:
    """``S(jw)`` and ``T(jw)`` for every sample (rows) and grid point (columns).

    Evaluated as ``G_p/G_s`` and ``G_q/G_s`` on the canonical realizations
    with each sample's uncertain output rows added.
    """
    k = plant.n + ctrl.m
    sys_ = build_constructed_systems(plant, ctrl, _default_dc(k) if dc is None else dc)
    Z = resolvent_columns(sys_.A, sys_.B, grid)
    S = np.empty((len(samples), grid.size), dtype=complex)
    T = np.empty_like(S)
    for i, smp in enumerate(samples):
        rows = sys_.uncertain_rows(smp.delta_a, smp.delta_b)
        gs = ((sys_.gs.C + rows["gs"]) @ Z)[0] + sys_.gs.D
        gp = ((sys_.gp.C + rows["gp"]) @ Z)[0] + sys_.gp.D
        gq = ((sys_.gq.C + rows["gq"]) @ Z)[0] + sys_.gq.D
        S[i] = gp / gs
        T[i] = gq / gs
    return S, T


def sweep_sensitivity(plant, ctrl, samples, band, bound_db: float, kind: str = "S",
                      dc=None, grid_points: int = GRID_POINTS) -> SweepReport:
    """Worst-case ``|S|`` or ``|T|`` against ``bound_db`` over a dense in-band grid."""
    if kind not in ("S", "T"):
        raise ValueError("kind must be 'S' or 'T'")
    grid = sweep_grid(band, grid_points)
    unstable = tuple(i for i, s in enumerate(samples) if not closed_loop_stable(plant, ctrl, s))
    S, T = closed_loop_responses(plant, ctrl, samples, grid, dc)
    mags = np.abs(S if kind == "S" else T)
    worst = float(np.min(bound_db - 20.0 * np.log10(mags)))
    return SweepReport(kind, float(bound_db), grid, mags, worst, unstable)


def complementarity_error(plant, ctrl, samples, grid, dc=None) -> float:
    """``max |S + T - 1|`` over samples and grid points."""
    S, T = closed_loop_responses(plant, ctrl, samples, np.asarray(grid, dtype=float), dc)
    return float(np.abs(S + T - 1.0).max())


@dataclass(frozen=True, eq=False)
class SbrSprCheck:
    grid: np.ndarray
    bounded_real: np.ndarray
    positive_real: np.ndarray

    @property
    def agree(self) -> bool:
        return bool(np.all(self.bounded_real == self.positive_real))

    def __bool__(self) -> bool:
        return self.agree


def bounded_real_transform_check(N, D, gamma: float, band, grid_points: int = GRID_POINTS) -> SbrSprCheck:
    """Pointwise ``|N/D| < gamma`` against ``Re((D - N/gamma)/(D + N/gamma)) > 0``."""
    grid = sweep_grid(band, grid_points)
    s = 1j * grid
    Nv = np.polyval(np.asarray(N, dtype=float), s)
    Dv = np.polyval(np.asarray(D, dtype=float), s)
    if np.any(Dv == 0):
        raise ValueError("D vanishes on the grid")
    sbr = np.abs(Nv / Dv) < gamma
    spr = np.real((Dv - Nv / gamma) / (Dv + Nv / gamma)) > 0
    return SbrSprCheck(grid, sbr, spr)


@dataclass(frozen=True, eq=False)
class StepTrace:
    t: np.ndarray
    y: np.ndarray
    dt: float


def _rk4_constant_input(A, B, h):
    """One RK4 step of ``x' = Ax + B`` written as ``x <- Phi x + Gamma``."""
    k = A.shape[0]
    hA = h * A
    I = np.eye(k)
    hA2 = hA @ hA
    hA3 = hA2 @ hA
    Phi = I + hA + hA2 / 2 + hA3 / 6 + hA3 @ hA / 24
    Gamma = h * (I + hA / 2 + hA2 / 6 + hA3 / 24) @ B
    return Phi, Gamma


def step_response(plant: IntervalPlant, ctrl: Controller, sample: UncertaintySample,
                  t_end: float = 30.0, dt: float | None = None) -> StepTrace:
    """Unit-step output of the unity-feedback loop ``T = b y / (a x + b y)`` by fixed-step RK4."""
    a, b = plant.coefficients(sample.delta_a, sample.delta_b)
    den = closed_loop_polynomial(a, b, ctrl.x, ctrl.y)
    if not eig_hurwitz(den):
        raise UnstableLoopError(f"closed loop unstable at {sample.provenance} sample")
    num = np.convolve(b, ctrl.y)
    ss = realize_canonical(num / den[0], den / den[0])
    if dt is None:
        fastest = np.abs(np.linalg.eigvals(ss.A)).max()
        dt = min(1e-3, 1.0 / fastest / 50.0)
    steps = int(round(t_end / dt))
    Phi, Gamma = _rk4_constant_input(ss.A, ss.B, dt)
    x = np.zeros((ss.k, 1))
    y = np.empty(steps + 1)
    y[0] = ss.D
    Crow = ss.C[0]
    for i in range(1, steps + 1):
        x = Phi @ x + Gamma
        y[i] = Crow @ x[:, 0] + ss.D
    return StepTrace(np.arange(steps + 1) * dt, y, dt)


def _matrix(assignment, name: str, kind: str, k: int) -> np.ndarray:
    return Variable(name, kind, k).matrix(assignment[name])


def uncertain_inequality_eigs(spec, result, sample: UncertaintySample) -> dict[str, float]:
    """Max eigenvalue of each uncertain (G)KYP inequality at one sample.

    Uses the certificate's ``P``/``Q`` matrices and the controller, with the
    uncertainty placed back into the output rows instead of the multipliers.
    """
    assignment = {}
    for outcome in result.certificates.values():
        assignment.update(outcome.assignment)
    ctrl = result.controller
    plant = spec.plant
    sys_ = build_constructed_systems(plant, ctrl, spec.dc)
    k = sys_.A.shape[0]
    rows = sys_.uncertain_rows(sample.delta_a, sample.delta_b)
    Cs = sys_.gs.C + rows["gs"]
    Cp = sys_.gp.C + rows["gp"]
    Cq = sys_.gq.C + rows["gq"]
    M = np.block([[sys_.A, sys_.B], [np.eye(k), np.zeros((k, 1))]])

    def pi(C, D):
        return np.block([[np.zeros((k, k)), C.T], [C, np.array([[2.0 * D]])]])

    def herm(prefix):
        P = _matrix(assignment, prefix, "symmetric", k).astype(complex)
        if prefix + "_im" in assignment:
            P = P + 1j * _matrix(assignment, prefix + "_im", "skew", k)
        return P

    out = {}
    if "Ps" in assignment:
        Ps = _matrix(assignment, "Ps", "symmetric", k)
        G = np.block([[sys_.A.T @ Ps + Ps @ sys_.A, Ps @ sys_.B],
                      [sys_.B.T @ Ps, np.zeros((1, 1))]]) - pi(Cs, sys_.gs.D)
        out["stability"] = float(np.linalg.eigvalsh(G).max())
    for label, perf, prefix, Co, Do in (
        ("sensitivity", spec.sensitivity, "p", Cp, sys_.gp.D),
        ("comp_sensitivity", spec.comp_sensitivity, "q", Cq, sys_.gq.D),
    ):
        if perf is None or "P" + prefix not in assignment:
            continue
        Xi = gkyp_xi(perf.range, herm("P" + prefix), herm("Q" + prefix))
        core = M.T @ Xi @ M
        for sign, tag in ((1.0, "+"), (-1.0, "-")):
            G = core - pi(Cs + sign * Co / perf.rho, sys_.gs.D + sign * Do / perf.rho)
            out[label + tag] = float(np.linalg.eigvalsh(G).max())
    return out


def certificate_soundness(spec, result, samples: Sequence[UncertaintySample]) -> dict[str, float]:
    """Worst (largest) max eigenvalue of each uncertain inequality over ``samples``."""
    worst: dict[str, float] = {}
    for smp in samples:
        for name, ev in uncertain_inequality_eigs(spec, result, smp).items():
            worst[name] = max(worst.get(name, -np.inf), ev)
    return worst


# -- CSV output ------------------------------------------------------------------

def write_bode_csv(path, report: SweepReport) -> None:
    lo, hi = report.envelope_db()
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["omega_rad_s", f"min_{report.kind}_db", f"max_{report.kind}_db", "bound_db"])
        for row in zip(report.grid, lo, hi):
            w.writerow([f"{v:.12g}" for v in row] + [f"{report.bound_db:.12g}"])


def write_step_csv(path, trace: StepTrace, stride: int = 1) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "y"])
        for t, y in zip(trace.t[::stride], trace.y[::stride]):
            w.writerow([f"{t:.12g}", f"{y:.12g}"])


def write_stability_csv(path, samples: Sequence[UncertaintySample], verdicts: Sequence[bool]) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        n = samples[0].delta_a.size if samples else 0
        w.writerow(["sample", "provenance", *[f"delta_a{i + 1}" for i in range(n)],
                    *[f"delta_b{i + 1}" for i in range(n)], "stable"])
        for i, (s, ok) in enumerate(zip(samples, verdicts)):
            w.writerow([i, s.provenance, *[f"{v:.12g}" for v in s.delta_a],
                        *[f"{v:.12g}" for v in s.delta_b], int(bool(ok))])
