"""Controllable canonical realizations of the constructed systems G_s, G_p, G_q.

State ordering follows the bottom-row companion form: with ``B = e_k`` the
resolvent column ``(sI - A)^{-1} B`` equals ``[1, s, ..., s^{k-1}]^T / den(s)``,
so output rows hold numerator remainders in ascending powers of ``s``.  The
Toeplitz matrices ``X``, ``Y`` produce coefficient rows in descending powers;
``X_state`` and ``Y_state`` are the same operators with columns reversed to
match the state ordering.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .poly import (
    Controller,
    IntervalPlant,
    as_poly,
    convolve,
    is_strictly_hurwitz,
    toeplitz_band,
)

MONIC_TOL = 1e-12


class SingularResolventError(RuntimeError):
    """``jwI - A`` is singular; cannot happen for a strictly Hurwitz ``d_c``."""


@dataclass(frozen=True, eq=False)
class StateSpace:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: float

    @property
    def k(self) -> int:
        return self.A.shape[0]

    def evaluate(self, s, delta_row=None) -> complex:
        """Transfer function value at a complex point ``s``."""
        C = self.C if delta_row is None else self.C + np.asarray(delta_row)
        try:
            z = np.linalg.solve(s * np.eye(self.k) - self.A, self.B)
        except np.linalg.LinAlgError as exc:
            raise SingularResolventError(f"sI - A singular at s={s}") from exc
        return complex((C @ z).item() + self.D)


def companion(den) -> tuple[np.ndarray, np.ndarray]:
    """Bottom-row companion pair ``(A, B)`` of a monic denominator."""
    den = as_poly(den)
    if abs(den[0] - 1.0) > MONIC_TOL:
        raise ValueError("denominator must be monic")
    k = den.size - 1
    A = np.zeros((k, k))
    A[:-1, 1:] = np.eye(k - 1)
    A[-1, :] = -den[1:][::-1]
    B = np.zeros((k, 1))
    B[-1, 0] = 1.0
    return A, B


def canonical_row(num, den) -> tuple[np.ndarray, float]:
    """Output row ``C`` (1 x k) and feedthrough ``D`` for ``num/den``.

    The map ``num -> (C, D)`` is linear for a fixed ``den``, which is what
    lets the LMI assembly treat controller coefficients as decision variables.
    """
    num = as_poly(num)
    den = as_poly(den)
    k = den.size - 1
    if num.size > k + 1:
        extra = num[: num.size - k - 1]
        if np.any(extra != 0):
            raise ValueError("numerator degree exceeds denominator degree")
        num = num[num.size - k - 1:]
    num = np.r_[np.zeros(k + 1 - num.size), num]
    D = float(num[0])
    rem = num[1:] - D * den[1:]
    return rem[::-1].reshape(1, k), D


def realize_canonical(num, den) -> StateSpace:
    A, B = companion(den)
    C, D = canonical_row(num, den)
    return StateSpace(A, B, C, D)


@dataclass(frozen=True, eq=False)
class ConstructedSystems:
    """Nominal realizations of G_s, G_p, G_q sharing ``A``, ``B`` from ``d_c``."""

    gs: StateSpace
    gp: StateSpace
    gq: StateSpace
    X: np.ndarray
    Y: np.ndarray
    a_d: np.ndarray
    b_d: np.ndarray
    dc: np.ndarray

    @property
    def A(self) -> np.ndarray:
        return self.gs.A

    @property
    def B(self) -> np.ndarray:
        return self.gs.B

    @property
    def X_state(self) -> np.ndarray:
        return self.X[:, ::-1]

    @property
    def Y_state(self) -> np.ndarray:
        return self.Y[:, ::-1]

    def a_row(self, delta_a) -> np.ndarray:
        """``a_d Δ_a X`` in state ordering."""
        return (self.a_d * np.asarray(delta_a, dtype=float)) @ self.X_state

    def b_row(self, delta_b) -> np.ndarray:
        """``b_d Δ_b Y`` in state ordering."""
        return (self.b_d * np.asarray(delta_b, dtype=float)) @ self.Y_state

    def uncertain_rows(self, delta_a, delta_b) -> dict[str, np.ndarray]:
        """Output-row perturbations of G_s, G_p and G_q for one sample."""
        ra = self.a_row(delta_a).reshape(1, -1)
        rb = self.b_row(delta_b).reshape(1, -1)
        return {"gs": ra + rb, "gp": ra, "gq": rb}


def _check_dc(dc, k: int) -> np.ndarray:
    dc = as_poly(dc)
    if dc.size - 1 != k:
        raise ValueError(f"deg(d_c) = {dc.size - 1} but m + n = {k}")
    if not is_strictly_hurwitz(dc):
        raise ValueError("d_c is not strictly Hurwitz")
    return dc / dc[0]


def build_constructed_systems(plant: IntervalPlant, ctrl: Controller, dc) -> ConstructedSystems:
    k = plant.n + ctrl.m
    dc = _check_dc(dc, k)
    A, B = companion(dc)
    ax = convolve(plant.a_c, ctrl.x)
    by = convolve(plant.b_c, ctrl.y)

    def ss(num):
        C, D = canonical_row(num, dc)
        return StateSpace(A, B, C, D)

    return ConstructedSystems(
        gs=ss(ax + by),
        gp=ss(ax),
        gq=ss(by),
        X=toeplitz_band(ctrl.x, plant.n),
        Y=toeplitz_band(ctrl.y, plant.n),
        a_d=plant.a_d,
        b_d=plant.b_d,
        dc=dc,
    )


def resolvent_columns(A, B, omegas) -> np.ndarray:
    """``(jwI - A)^{-1} B`` for each ``w`` as the columns of a k x len(omegas) array."""
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    k = A.shape[0]
    out = np.empty((k, omegas.size), dtype=complex)
    eye = np.eye(k)
    for i, w in enumerate(omegas):
        try:
            out[:, i] = np.linalg.solve(1j * w * eye - A, B[:, 0])
        except np.linalg.LinAlgError as exc:
            raise SingularResolventError(f"jwI - A singular at w={w}") from exc
    return out


def freq_response(ss: StateSpace, omega, delta_row=None):
    """``(C + delta_row)(jwI - A)^{-1} B + D``; scalar in, scalar out."""
    omega = np.asarray(omega, dtype=float)
    if not np.all(np.isfinite(omega)):
        raise ValueError("omega must be finite")
    C = ss.C if delta_row is None else ss.C + np.asarray(delta_row).reshape(1, -1)
    Z = resolvent_columns(ss.A, ss.B, omega.ravel())
    H = (C @ Z)[0] + ss.D
    return complex(H[0]) if omega.ndim == 0 else H.reshape(omega.shape)
