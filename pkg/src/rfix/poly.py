"""Real polynomial algebra, interval plants and fixed-order controllers.

Coefficient vectors are ordered highest degree first everywhere, i.e. the
vector ``[1, 4.5, 6.225]`` is ``s**2 + 4.5 s + 6.225``.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

logger = logging.getLogger(__name__)

TAU_HURWITZ = 1e-9
ROUTH_ZERO = 1e-12


class DegenerateInputError(ValueError):
    """Raised when a polynomial has a vanishing leading coefficient."""


def as_poly(p) -> np.ndarray:
    p = np.atleast_1d(np.asarray(p, dtype=float))
    if p.ndim != 1 or p.size == 0:
        raise ValueError("polynomial coefficients must be a nonempty 1-D sequence")
    return p


def trim(p) -> np.ndarray:
    """Drop leading zeros; the zero polynomial becomes ``[0.]``."""
    p = as_poly(p)
    nz = np.flatnonzero(p)
    return p[nz[0]:].copy() if nz.size else np.zeros(1)


def convolve(p, q) -> np.ndarray:
    """Cauchy product of two coefficient vectors."""
    return np.convolve(as_poly(p), as_poly(q))


def toeplitz_band(v, rows: int) -> np.ndarray:
    """Banded Toeplitz operator whose row ``i`` holds ``v`` starting at column ``i``.

    For a row vector ``c`` of length ``rows`` the product
    ``c @ toeplitz_band(v, rows)`` is the coefficient vector of
    ``(sum_i c_i s**(rows-1-i)) * v(s)``.
    """
    v = as_poly(v)
    if rows < 1:
        raise ValueError("rows must be >= 1")
    out = np.zeros((rows, rows + v.size - 1))
    for i in range(rows):
        out[i, i:i + v.size] = v
    return out


def _monic(p) -> np.ndarray:
    p = as_poly(p)
    if abs(p[0]) < ROUTH_ZERO:
        raise DegenerateInputError("leading coefficient is zero")
    return p / p[0]


def shift(p, tau: float) -> np.ndarray:
    """Coefficients of ``p(s - tau)``."""
    p = as_poly(p)
    out = np.zeros(1)
    lin = np.array([1.0, -tau])
    for c in p:
        out = np.polyadd(np.convolve(out, lin), [c])
    return out[-p.size:]


def routh_first_column(p) -> np.ndarray:
    """First column of the Routh array of a monic-normalised polynomial.

    A zero pivot stops the construction; the returned column then ends with
    that (near) zero entry.
    """
    p = _monic(p)
    deg = p.size - 1
    if deg == 0:
        return np.ones(1)
    width = deg // 2 + 1
    r0 = np.zeros(width)
    r1 = np.zeros(width)
    r0[: p[0::2].size] = p[0::2]
    r1[: p[1::2].size] = p[1::2]
    col = [r0[0], r1[0]]
    for _ in range(deg - 1):
        if abs(r1[0]) < ROUTH_ZERO:
            break
        nxt = np.zeros(width)
        nxt[:-1] = (r1[0] * r0[1:] - r0[0] * r1[1:]) / r1[0]
        r0, r1 = r1, nxt
        col.append(r1[0])
    return np.array(col)


def routh_hurwitz(p, tau: float = TAU_HURWITZ) -> bool:
    """Routh test on ``p(s - tau)``: True iff every root has real part < -tau."""
    q = shift(_monic(p), tau)
    col = routh_first_column(q)
    if col.size < q.size:
        return False
    return bool(np.all(col > ROUTH_ZERO))


def eig_hurwitz(p, tau: float = TAU_HURWITZ) -> bool:
    """Companion-matrix eigenvalue test: True iff max real part < -tau."""
    p = _monic(p)
    if p.size == 1:
        return True
    return bool(np.roots(p).real.max() < -tau)


def is_strictly_hurwitz(p, tau: float = TAU_HURWITZ) -> bool:
    """Strict Hurwitz test, Routh verdict cross-checked against eigenvalues.

    Disagreement only happens for roots within floating-point reach of the
    ``-tau`` line; such polynomials are reported as not strictly Hurwitz.
    """
    routh = routh_hurwitz(p, tau)
    eig = eig_hurwitz(p, tau)
    if routh != eig:
        logger.debug("Routh/eigenvalue verdicts disagree for %s", p)
    return routh and eig


def _check_bounds(bounds, label: str) -> np.ndarray:
    arr = np.asarray(bounds, dtype=float).reshape(-1, 2)
    if np.any(arr[:, 0] > arr[:, 1]):
        raise ValueError(f"{label} bounds must satisfy lower <= upper")
    return arr


@dataclass(frozen=True, eq=False)
class IntervalPlant:
    """``P(s) = (b_c + [0, b_d Δ_b]) s_n / (a_c + [0, a_d Δ_a]) s_n``.

    ``a_c`` and ``b_c`` have length ``n + 1`` with leading entries 1 and 0;
    ``a_d`` and ``b_d`` hold the nonnegative half-widths.
    """

    a_c: np.ndarray
    b_c: np.ndarray
    a_d: np.ndarray
    b_d: np.ndarray

    def __post_init__(self):
        for name in ("a_c", "b_c", "a_d", "b_d"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        n = self.a_d.size
        if n < 1:
            raise ValueError("plant order must be >= 1")
        if self.a_c.shape != (n + 1,) or self.b_c.shape != (n + 1,) or self.b_d.shape != (n,):
            raise ValueError("inconsistent plant coefficient lengths")
        if self.a_c[0] != 1.0 or self.b_c[0] != 0.0:
            raise ValueError("a_c must be monic and b_c must have a zero leading entry")
        if np.any(self.a_d < 0) or np.any(self.b_d < 0):
            raise ValueError("deviations must be nonnegative")

    @classmethod
    def from_bounds(cls, a_bounds, b_bounds) -> "IntervalPlant":
        """Build from ``[[a_1^l, a_1^u], ...]`` and ``[[b_1^l, b_1^u], ...]``."""
        a = _check_bounds(a_bounds, "a")
        b = _check_bounds(b_bounds, "b")
        if a.shape != b.shape or a.shape[0] < 1:
            raise ValueError("a_bounds and b_bounds must have the same nonzero length")
        return cls(
            a_c=np.r_[1.0, a.mean(axis=1)],
            b_c=np.r_[0.0, b.mean(axis=1)],
            a_d=(a[:, 1] - a[:, 0]) / 2,
            b_d=(b[:, 1] - b[:, 0]) / 2,
        )

    @classmethod
    def nominal(cls, a, b) -> "IntervalPlant":
        """Zero-deviation plant with denominator ``a`` (monic) and numerator ``b``."""
        a = as_poly(a)
        b = np.r_[np.zeros(a.size - as_poly(b).size), as_poly(b)]
        return cls(a_c=a, b_c=b, a_d=np.zeros(a.size - 1), b_d=np.zeros(a.size - 1))

    @property
    def n(self) -> int:
        return self.a_d.size

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Recover ``(a_bounds, b_bounds)`` as ``n x 2`` arrays."""
        a = np.column_stack([self.a_c[1:] - self.a_d, self.a_c[1:] + self.a_d])
        b = np.column_stack([self.b_c[1:] - self.b_d, self.b_c[1:] + self.b_d])
        return a, b

    def coefficients(self, delta_a=None, delta_b=None) -> tuple[np.ndarray, np.ndarray]:
        """Denominator and numerator at the interval variables ``delta_a``, ``delta_b``."""
        da = np.zeros(self.n) if delta_a is None else np.asarray(delta_a, dtype=float)
        db = np.zeros(self.n) if delta_b is None else np.asarray(delta_b, dtype=float)
        return self.a_c + np.r_[0.0, self.a_d * da], self.b_c + np.r_[0.0, self.b_d * db]

    def deltas_for(self, a, b) -> tuple[np.ndarray, np.ndarray]:
        """Interval variables reproducing the concrete coefficients ``a_1..a_n``, ``b_1..b_n``."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)

        def norm(val, c, d):
            out = np.zeros_like(val)
            nz = d > 0
            out[nz] = (val[nz] - c[nz]) / d[nz]
            if np.any(~nz & ~np.isclose(val, c)):
                raise ValueError("coefficient differs from a zero-width interval")
            return out

        da = norm(a, self.a_c[1:], self.a_d)
        db = norm(b, self.b_c[1:], self.b_d)
        if np.any(np.abs(np.r_[da, db]) > 1 + 1e-12):
            raise ValueError("coefficients lie outside the plant intervals")
        return da, db

    def vertices(self):
        """Iterate over all ``2**(2n)`` vertex ``(delta_a, delta_b)`` pairs."""
        for signs in itertools.product((-1.0, 1.0), repeat=2 * self.n):
            s = np.array(signs)
            yield s[: self.n], s[self.n:]


def coefficient_names(m: int) -> list[str]:
    """Names of the controller coefficients in their frozen order."""
    return [f"x{i}" for i in range(1, m + 1)] + [f"y{j}" for j in range(m + 1)]


@dataclass(frozen=True, eq=False)
class Controller:
    """``K(s) = y s_m / x s_m`` with monic ``x``; ``pins`` fixes named coefficients."""

    x: np.ndarray
    y: np.ndarray
    pins: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))
        object.__setattr__(self, "pins", dict(self.pins))
        if self.x.ndim != 1 or self.x.size < 1 or self.x[0] != 1.0:
            raise ValueError("x must be a monic coefficient vector")
        if self.y.shape != self.x.shape:
            raise ValueError("x and y must have the same length m + 1")
        values = self.as_dict()
        for name, val in self.pins.items():
            if name not in values:
                raise ValueError(f"unknown pinned coefficient {name!r}")
            if values[name] != val:
                raise ValueError(f"coefficient {name} violates its pin {val}")

    @property
    def m(self) -> int:
        return self.x.size - 1

    def as_dict(self) -> dict[str, float]:
        vals = list(self.x[1:]) + list(self.y)
        return {k: float(v) for k, v in zip(coefficient_names(self.m), vals)}

    @classmethod
    def from_dict(cls, m: int, values: Mapping[str, float], pins=None) -> "Controller":
        x = [1.0] + [float(values[f"x{i}"]) for i in range(1, m + 1)]
        y = [float(values[f"y{j}"]) for j in range(m + 1)]
        return cls(np.array(x), np.array(y), pins or {})

    def transfer(self) -> tuple[np.ndarray, np.ndarray]:
        return self.y.copy(), self.x.copy()


def closed_loop_polynomial(a, b, x, y) -> np.ndarray:
    """``a * x + b * y``, the characteristic polynomial of the unity-feedback loop."""
    return np.polyadd(convolve(a, x), convolve(b, y))


def hurwitz_from_controller(plant: IntervalPlant, ctrl: Controller) -> np.ndarray:
    """Monic nominal closed-loop characteristic polynomial, a ready-made ``d_c``."""
    p = closed_loop_polynomial(plant.a_c, plant.b_c, ctrl.x, ctrl.y)
    p = p[-(plant.n + ctrl.m + 1):]
    if not is_strictly_hurwitz(p):
        raise ValueError("baseline controller does not stabilise the nominal plant")
    return p / p[0]


def polyval(p: Sequence[float], s):
    return np.polyval(as_poly(p), s)
