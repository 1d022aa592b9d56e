"""Affine LMIs for robust stability and finite-frequency sensitivity shaping.

Every assembled LMI has the block layout

    [ state (k) | input (1) | R_a border (n) | R_b border (n) ]

with ``k = m + n``.  The top-left ``(k+1) x (k+1)`` block is the (G)KYP term
``[A B; I 0]^T Xi [A B; I 0]`` minus ``[[0, C^T], [C, D + D^T - ...]]``; the
uncertainty enters through the Toeplitz borders and the diagonal multipliers.

An LMI is stored as ``F(z) = F_0 + sum_i z_i F_i`` where ``z`` runs over the
scalar entries of the declared decision variables.  Middle frequency ranges
make ``F`` complex Hermitian; :func:`real_embed` maps it to a real symmetric
LMI of twice the size.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .poly import IntervalPlant, coefficient_names, convolve, toeplitz_band
from .realize import ConstructedSystems, canonical_row

EPS_STRICT_REL = 1e-7
EPS_Q = 1e-9
EPS_P = 1e-9
EPS_DIAG = 1e-9
HERMITIAN_TOL = 1e-12

PHI = np.array([[0.0, 1.0], [1.0, 0.0]])


# -- decision variables ------------------------------------------------------

@dataclass(frozen=True)
class Variable:
    """A structured decision variable.

    ``kind`` is one of ``scalar``, ``symmetric``, ``skew`` or ``diagonal``;
    ``lower`` is an entrywise lower bound (used for diagonal multipliers).
    """

    name: str
    kind: str
    dim: int = 1
    lower: float | None = None

    def __post_init__(self):
        if self.kind not in ("scalar", "symmetric", "skew", "diagonal"):
            raise ValueError(f"unknown variable kind {self.kind!r}")
        if self.kind == "scalar" and self.dim != 1:
            raise ValueError("scalar variables have dim 1")

    @property
    def size(self) -> int:
        d = self.dim
        return {"scalar": 1, "symmetric": d * (d + 1) // 2,
                "skew": d * (d - 1) // 2, "diagonal": d}[self.kind]

    def _index_pairs(self):
        d = self.dim
        if self.kind in ("scalar", "diagonal"):
            return [(i, i) for i in range(d)]
        if self.kind == "symmetric":
            return [(i, j) for i in range(d) for j in range(i, d)]
        return [(i, j) for i in range(d) for j in range(i + 1, d)]

    def basis(self) -> np.ndarray:
        """Basis matrices, one per scalar entry, shape ``(size, dim, dim)``."""
        out = np.zeros((self.size, self.dim, self.dim))
        for idx, (i, j) in enumerate(self._index_pairs()):
            out[idx, i, j] = 1.0
            if i != j:
                out[idx, j, i] = -1.0 if self.kind == "skew" else 1.0
        return out

    def matrix(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=float).reshape(self.size)
        return np.tensordot(values, self.basis(), axes=1)

    def entries(self, M) -> np.ndarray:
        """Inverse of :meth:`matrix`."""
        M = np.atleast_2d(np.asarray(M, dtype=float))
        return np.array([M[i, j] for i, j in self._index_pairs()])


# -- the affine LMI container -------------------------------------------------

@dataclass(frozen=True, eq=False)
class AffineLmi:
    """``constant + sum_v sum_i z[v][i] * terms[v][i]`` required to be ``< 0``.

    Strict LMIs must reach ``max eig <= -margin``; non-strict (auxiliary)
    ones only ``max eig <= 0``.
    """

    name: str
    constant: np.ndarray
    terms: Mapping[str, np.ndarray]
    variables: Mapping[str, Variable]
    margin: float = 0.0
    strict: bool = True

    @property
    def size(self) -> int:
        return self.constant.shape[0]

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.constant) or any(np.iscomplexobj(t) for t in self.terms.values())

    def evaluate(self, assignment: Mapping[str, np.ndarray]) -> np.ndarray:
        """Matrix value at ``assignment`` (variable name -> scalar entries)."""
        out = self.constant.copy()
        for name, coeffs in self.terms.items():
            z = np.asarray(assignment[name], dtype=float).reshape(-1)
            out = out + np.tensordot(z, coeffs, axes=1)
        return out

    def max_eig(self, assignment) -> float:
        return float(np.linalg.eigvalsh(self.evaluate(assignment)).max())

    def dump(self) -> str:
        """Plain-text listing: constant block, then one block per variable entry."""
        lines = [f"lmi {self.name} size={self.size} strict={self.strict} margin={self.margin:.17g}"]
        fmt = (lambda v: f"{v.real:.17g}{v.imag:+.17g}j") if self.is_complex else (lambda v: f"{v:.17g}")
        lines.append("constant")
        lines += [" ".join(fmt(v) for v in row) for row in self.constant]
        for name, coeffs in self.terms.items():
            for i, F in enumerate(coeffs):
                lines.append(f"term {name}[{i}]")
                lines += [" ".join(fmt(v) for v in row) for row in F]
        return "\n".join(lines) + "\n"


def _embed(H: np.ndarray) -> np.ndarray:
    Hr, Hi = H.real, H.imag
    return np.block([[Hr, -Hi], [Hi, Hr]])


def _is_hermitian(H: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    scale = 1.0 + np.abs(H).max(initial=0.0)
    return bool(np.abs(H - H.conj().T).max(initial=0.0) <= tol * scale)


def real_embed(lmi):
    """Map ``H = H_r + jH_i`` to ``[[H_r, -H_i], [H_i, H_r]]``.

    Accepts a plain Hermitian matrix or an :class:`AffineLmi`; the embedded
    matrix has the eigenvalues of ``H``, each with doubled multiplicity.
    """
    if isinstance(lmi, AffineLmi):
        mats = [lmi.constant] + [F for coeffs in lmi.terms.values() for F in coeffs]
        if not all(_is_hermitian(M) for M in mats):
            raise ValueError(f"LMI {lmi.name} is not Hermitian")
        return AffineLmi(
            name=lmi.name,
            constant=_embed(lmi.constant),
            terms={k: np.stack([_embed(F) for F in v]) for k, v in lmi.terms.items()},
            variables=lmi.variables,
            margin=lmi.margin,
            strict=lmi.strict,
        )
    H = np.asarray(lmi)
    if not _is_hermitian(H):
        raise ValueError("matrix is not Hermitian")
    return _embed(H.astype(complex))


# -- frequency ranges ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FrequencyRange:
    kind: str
    omega_l: float | None
    omega_h: float | None
    Phi: np.ndarray
    Psi: np.ndarray

    @property
    def band(self) -> tuple[float, float]:
        """Open interval ``(lo, hi)`` of frequencies covered, in rad/s."""
        if self.kind == "low":
            return 0.0, self.omega_l
        if self.kind == "high":
            return self.omega_h, np.inf
        return self.omega_l, self.omega_h

    @property
    def is_complex(self) -> bool:
        return bool(np.any(np.imag(self.Psi) != 0))


def range_matrices(kind: str, omega_l: float | None = None, omega_h: float | None = None) -> FrequencyRange:
    """Frequency-range matrices for ``(0, w_l)``, ``(w_l, w_h)`` or ``(w_h, inf)``."""
    if kind == "low":
        if omega_l is None or not omega_l > 0:
            raise ValueError("low range needs omega_l > 0")
        psi = np.array([[-1.0, 0.0], [0.0, omega_l ** 2]])
        omega_h = None
    elif kind == "high":
        if omega_h is None or not omega_h > 0:
            raise ValueError("high range needs omega_h > 0")
        psi = np.array([[1.0, 0.0], [0.0, -omega_h ** 2]])
        omega_l = None
    elif kind == "middle":
        if omega_l is None or omega_h is None or not 0 < omega_l < omega_h:
            raise ValueError("middle range needs 0 < omega_l < omega_h")
        wc = (omega_h + omega_l) / 2
        psi = np.array([[-1.0, 1j * wc], [-1j * wc, -omega_l * omega_h]])
    else:
        raise ValueError(f"unknown range kind {kind!r}")
    return FrequencyRange(kind, omega_l, omega_h, PHI.copy(), psi)


def range_from_band(kind: str, band) -> FrequencyRange:
    """Frequency range for a user band ``[lo, hi]``.

    ``low`` keeps the upper edge as ``w_l``; ``high`` keeps the lower edge as
    ``w_h``.
    """
    lo, hi = (float(v) for v in band)
    if kind == "low":
        return range_matrices("low", omega_l=hi)
    if kind == "high":
        return range_matrices("high", omega_h=lo)
    return range_matrices(kind, lo, hi)


def gkyp_xi(rng: FrequencyRange, P, Q) -> np.ndarray:
    """``Phi (x) P + Psi (x) Q``."""
    P = np.asarray(P)
    Q = np.asarray(Q)
    if P.ndim != 2 or P.shape != Q.shape or P.shape[0] != P.shape[1]:
        raise ValueError("P and Q must be square matrices of the same size")
    return np.kron(rng.Phi, P) + np.kron(rng.Psi, Q)


# -- controller coefficients as decision variables ----------------------------

_ROW_KEYS = ("Cs", "Cp", "Cq", "Ds", "Dp", "Dq", "X", "Y")


def _rows(plant: IntervalPlant, x, y, dc) -> dict:
    """Nominal output rows and state-ordered Toeplitz borders; linear in ``(x, y)``."""
    ax = convolve(plant.a_c, x)
    by = convolve(plant.b_c, y)
    Cs, Ds = canonical_row(ax + by, dc)
    Cp, Dp = canonical_row(ax, dc)
    Cq, Dq = canonical_row(by, dc)
    return {
        "Cs": Cs, "Cp": Cp, "Cq": Cq, "Ds": Ds, "Dp": Dp, "Dq": Dq,
        "X": toeplitz_band(x, plant.n)[:, ::-1],
        "Y": toeplitz_band(y, plant.n)[:, ::-1],
    }


@dataclass(frozen=True, eq=False)
class ControllerVars:
    """Affine dependence of every controller-dependent block on ``x_1..x_m, y_0..y_m``.

    ``base`` holds the blocks at ``x = [1, 0, ..., 0]``, ``y = 0``;
    ``directions[name]`` the linear part contributed by one unit of ``name``.
    """

    m: int
    names: tuple[str, ...]
    base: Mapping[str, object]
    directions: Mapping[str, Mapping[str, object]]

    @property
    def variables(self) -> dict[str, Variable]:
        return {nm: Variable(nm, "scalar") for nm in self.names}

    def blocks(self, values: Mapping[str, float]) -> dict:
        """All blocks evaluated at concrete coefficient values."""
        out = {key: np.array(self.base[key], dtype=float) for key in _ROW_KEYS}
        for nm in self.names:
            for key in _ROW_KEYS:
                out[key] = out[key] + values[nm] * np.asarray(self.directions[nm][key])
        return out


def controller_vars(plant: IntervalPlant, m: int, dc) -> ControllerVars:
    dc = np.asarray(dc, dtype=float)
    dc = dc / dc[0]
    if dc.size - 1 != plant.n + m:
        raise ValueError("deg(d_c) must equal m + n")
    names = tuple(coefficient_names(m))
    x0 = np.r_[1.0, np.zeros(m)]
    base = _rows(plant, x0, np.zeros(m + 1), dc)
    # the map (x, y) -> rows is linear once the monic x_0 = 1 part is split off
    directions = {}
    for nm in names:
        dx = np.zeros(m + 1)
        dy = np.zeros(m + 1)
        (dx if nm[0] == "x" else dy)[int(nm[1:])] = 1.0
        directions[nm] = _rows(plant, dx, dy, dc)
    return ControllerVars(m, names, base, directions)


# -- assembly -----------------------------------------------------------------

def rho_pm(rho: float) -> tuple[float, float]:
    """``(1 + 1/rho, 1 - 1/rho)``."""
    if not rho > 0:
        raise ValueError("performance bound rho must be positive")
    return 1.0 + 1.0 / rho, 1.0 - 1.0 / rho


def _pi_block(C, D) -> np.ndarray:
    C = np.asarray(C, dtype=float).reshape(1, -1)
    k = C.shape[1]
    out = np.zeros((k + 1, k + 1))
    out[:k, k] = C[0]
    out[k, :k] = C[0]
    out[k, k] = 2.0 * D
    return out


def _lyapunov_vars(prefix: str, k: int, hermitian: bool) -> list[tuple[Variable, complex]]:
    out = [(Variable(prefix, "symmetric", k), 1.0)]
    if hermitian and k > 1:
        out.append((Variable(prefix + "_im", "skew", k), 1j))
    return out


def _assemble(name, A, B, plant: IntervalPlant, cv: ControllerVars, *,
              p_vars, q_vars, psi, other: str | None, weight: float,
              alpha_a: float, alpha_b: float, ra: str, rb: str) -> AffineLmi:
    k = A.shape[0]
    n = plant.n
    d = k + 1 + 2 * n
    cplx = any(np.iscomplexobj(f) for _, f in p_vars + q_vars) or (psi is not None and np.iscomplexobj(psi))
    dtype = complex if cplx else float
    top = slice(0, k + 1)
    st = slice(0, k)
    ba = slice(k + 1, k + 1 + n)
    bb = slice(k + 1 + n, d)
    Mab = np.block([[A, B], [np.eye(k), np.zeros((k, 1))]])

    def row(blocks):
        C = np.asarray(blocks["Cs"], dtype=float)
        D = float(blocks["Ds"])
        if other is not None:
            C = C + weight * np.asarray(blocks["C" + other])
            D = D + weight * float(blocks["D" + other])
        return C, D

    def borders(F, blocks):
        X = np.asarray(blocks["X"], dtype=float)
        Y = np.asarray(blocks["Y"], dtype=float)
        F[ba, st] += X
        F[st, ba] += X.T
        F[bb, st] += Y
        F[st, bb] += Y.T

    F0 = np.zeros((d, d), dtype=dtype)
    F0[top, top] -= _pi_block(*row(cv.base))
    borders(F0, cv.base)

    terms: dict[str, np.ndarray] = {}
    variables: dict[str, Variable] = {}

    def lyap(pairs, outer):
        for var, factor in pairs:
            coeffs = np.zeros((var.size, d, d), dtype=dtype)
            for i, E in enumerate(var.basis()):
                coeffs[i][top, top] = Mab.T @ np.kron(outer, factor * E) @ Mab
            terms[var.name] = coeffs
            variables[var.name] = var

    lyap(p_vars, PHI)
    if q_vars:
        lyap(q_vars, psi)

    for nm in cv.names:
        F = np.zeros((d, d), dtype=dtype)
        blocks = cv.directions[nm]
        F[top, top] -= _pi_block(*row(blocks))
        borders(F, blocks)
        terms[nm] = F[None]
        variables[nm] = Variable(nm, "scalar")

    for vname, sl, alpha, dev in ((ra, ba, alpha_a, plant.a_d), (rb, bb, alpha_b, plant.b_d)):
        var = Variable(vname, "diagonal", n, lower=EPS_DIAG)
        coeffs = np.zeros((n, d, d), dtype=dtype)
        for j in range(n):
            idx = sl.start + j
            coeffs[j, idx, idx] = -1.0
            coeffs[j, k, k] = alpha ** 2 * dev[j] ** 2
        terms[vname] = coeffs
        variables[vname] = var

    margin = EPS_STRICT_REL * (1.0 + float(np.abs(F0).max()))
    return AffineLmi(name, F0, terms, variables, margin=margin, strict=True)


def positivity_lmi(name: str, pairs, eps: float) -> AffineLmi:
    """``-(sum of parts) + eps I <= 0`` for a (possibly Hermitian) matrix variable."""
    k = pairs[0][0].dim
    cplx = any(np.iscomplexobj(f) for _, f in pairs)
    dtype = complex if cplx else float
    terms = {var.name: -(factor * var.basis()).astype(dtype) for var, factor in pairs}
    variables = {var.name: var for var, _ in pairs}
    return AffineLmi(name, (eps * np.eye(k)).astype(dtype), terms, variables, margin=0.0, strict=False)


def assemble_stability_lmi(sys: ConstructedSystems, plant: IntervalPlant, cv: ControllerVars) -> AffineLmi:
    """Robust stability LMI in ``P_s``, ``R_sa``, ``R_sb`` and the controller coefficients."""
    _check_dims(sys, plant, cv)
    k = sys.A.shape[0]
    return _assemble("stability", sys.A, sys.B, plant, cv,
                     p_vars=_lyapunov_vars("Ps", k, False), q_vars=[], psi=None,
                     other=None, weight=0.0, alpha_a=1.0, alpha_b=1.0, ra="Rsa", rb="Rsb")


def _performance_pair(prefix, other, sys, plant, cv, rho, rng: FrequencyRange, names):
    _check_dims(sys, plant, cv)
    rp, rm = rho_pm(rho)
    k = sys.A.shape[0]
    herm = rng.is_complex
    p_vars = _lyapunov_vars("P" + prefix, k, herm)
    q_vars = _lyapunov_vars("Q" + prefix, k, herm)
    out = []
    for sign, alpha, (ra, rb) in ((1.0, rp, names[0]), (-1.0, rm, names[1])):
        # the uncertain row scales by rho^+- on the a-part (S) or the b-part (T)
        alpha_a, alpha_b = (alpha, 1.0) if other == "p" else (1.0, alpha)
        label = ("sensitivity" if other == "p" else "comp_sensitivity") + ("+" if sign > 0 else "-")
        out.append(_assemble(label, sys.A, sys.B, plant, cv, p_vars=p_vars, q_vars=q_vars,
                             psi=rng.Psi, other=other, weight=sign / rho,
                             alpha_a=alpha_a, alpha_b=alpha_b, ra=ra, rb=rb))
    return tuple(out), q_vars


def assemble_sensitivity_lmis(sys, plant, cv, rho_s: float, range_s: FrequencyRange):
    """The ``|S(jw)| < rho_s`` pair sharing one Lyapunov pair ``(P_p, Q_p)``."""
    pair, _ = _performance_pair("p", "p", sys, plant, cv, rho_s, range_s, (("Rpa", "Rpb"), ("Rpc", "Rpd")))
    return pair


def assemble_comp_sensitivity_lmis(sys, plant, cv, rho_t: float, range_t: FrequencyRange):
    """The ``|T(jw)| < rho_t`` pair sharing one Lyapunov pair ``(P_q, Q_q)``."""
    pair, _ = _performance_pair("q", "q", sys, plant, cv, rho_t, range_t, (("Rqa", "Rqb"), ("Rqc", "Rqd")))
    return pair


def stability_constraints(sys, plant, cv) -> list[AffineLmi]:
    k = sys.A.shape[0]
    return [assemble_stability_lmi(sys, plant, cv),
            positivity_lmi("Ps_pos", _lyapunov_vars("Ps", k, False), EPS_P)]


def sensitivity_constraints(sys, plant, cv, rho_s, range_s) -> list[AffineLmi]:
    pair, q_vars = _performance_pair("p", "p", sys, plant, cv, rho_s, range_s, (("Rpa", "Rpb"), ("Rpc", "Rpd")))
    return [*pair, positivity_lmi("Qp_pos", q_vars, EPS_Q)]


def comp_sensitivity_constraints(sys, plant, cv, rho_t, range_t) -> list[AffineLmi]:
    pair, q_vars = _performance_pair("q", "q", sys, plant, cv, rho_t, range_t, (("Rqa", "Rqb"), ("Rqc", "Rqd")))
    return [*pair, positivity_lmi("Qq_pos", q_vars, EPS_Q)]


def _check_dims(sys: ConstructedSystems, plant: IntervalPlant, cv: ControllerVars):
    k = sys.A.shape[0]
    if k != plant.n + cv.m or sys.X.shape != (plant.n, k):
        raise ValueError("constructed systems, plant and controller orders are inconsistent")
