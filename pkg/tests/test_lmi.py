import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rfix import lmi as L
from rfix.poly import Controller, IntervalPlant
from rfix.realize import build_constructed_systems
from rfix.sdp import SdpProblem, solve
from rfix.synth import db_to_linear

from .reference import DC

RHO = db_to_linear(-3.0)


@pytest.fixture(scope="module")
def parts(plant):
    cv = L.controller_vars(plant, 2, DC)
    base = build_constructed_systems(plant, Controller([1, 0, 0], [0, 0, 0]), DC)
    return cv, base


def _random_assignment(lmi, rng):
    out = {}
    for name, var in lmi.variables.items():
        vals = rng.normal(size=var.size)
        if var.lower is not None:
            vals = np.abs(vals) + 0.1
        out[name] = vals
    return out


def _controller_from(assign):
    return Controller([1.0, assign["x1"][0], assign["x2"][0]],
                      [assign["y0"][0], assign["y1"][0], assign["y2"][0]])


def _reference_gamma(plant, assign, *, P, Q=None, psi=None, other=None, weight=0.0,
                     alpha_a=1.0, alpha_b=1.0, Ra, Rb):
    """Dense transcription of the bordered (G)KYP matrix from the controller's own realizations."""
    ctrl = _controller_from(assign)
    s = build_constructed_systems(plant, ctrl, DC)
    A, B, k, n = s.A, s.B, s.A.shape[0], plant.n
    C, D = s.gs.C.copy(), s.gs.D
    if other is not None:
        o = getattr(s, "g" + other)
        C, D = C + weight * o.C, D + weight * o.D
    if Q is None:
        top = np.block([[A.T @ P + P @ A, P @ B], [B.T @ P, np.zeros((1, 1))]])
    else:
        M = np.block([[A, B], [np.eye(k), np.zeros((k, 1))]])
        top = M.T @ (np.kron(L.PHI, P) + np.kron(psi, Q)) @ M
    top = top - np.block([[np.zeros((k, k)), C.T], [C, np.array([[2.0 * D]])]])
    top = top.astype(complex)
    top[k, k] += alpha_a ** 2 * plant.a_d @ Ra @ plant.a_d + alpha_b ** 2 * plant.b_d @ Rb @ plant.b_d
    Z = np.zeros((n, n))
    Xs, Ys = s.X_state, s.Y_state
    zc = np.zeros((n, 1))
    return np.block([
        [top, np.vstack([Xs.T, zc.T]), np.vstack([Ys.T, zc.T])],
        [np.hstack([Xs, zc]), -Ra, Z],
        [np.hstack([Ys, zc]), Z, -Rb],
    ])


def _diag(assign, name):
    return np.diag(assign[name])


def _herm(lmi, assign, prefix, k):
    H = lmi.variables[prefix].matrix(assign[prefix]).astype(complex)
    if prefix + "_im" in lmi.variables:
        H = H + 1j * lmi.variables[prefix + "_im"].matrix(assign[prefix + "_im"])
    return H


def test_psi_middle_range():
    rng = L.range_matrices("middle", 0.01, 0.1)
    np.testing.assert_allclose(rng.Psi, [[-1, 0.055j], [-0.055j, -0.001]], atol=1e-15)
    assert rng.is_complex


def test_psi_low_and_high_ranges():
    np.testing.assert_array_equal(L.range_matrices("high", omega_h=50).Psi, [[1, 0], [0, -2500]])
    np.testing.assert_array_equal(L.range_matrices("low", omega_l=0.1).Psi, [[-1, 0], [0, 0.1 ** 2]])
    assert L.range_from_band("high", (50, 100)).omega_h == 50
    assert L.range_from_band("low", (0.01, 0.1)).omega_l == 0.1


@pytest.mark.parametrize("kind, args", [("low", (0.5, None)), ("middle", (1.0, 3.0)), ("high", (None, 4.0))])
def test_psi_hermitian(kind, args):
    psi = L.range_matrices(kind, *args).Psi
    np.testing.assert_array_equal(psi, psi.conj().T)


@pytest.mark.parametrize("kind, args", [("middle", (0.1, 0.01)), ("low", (-1.0, None)), ("bogus", (1.0, 2.0))])
def test_psi_rejects_bad_ranges(kind, args):
    with pytest.raises(ValueError):
        L.range_matrices(kind, *args)


def test_psi_sign_on_range():
    # [jw; 1]^* Psi [jw; 1] >= 0 exactly on the covered frequencies
    for kind, args, inside, outside in [
        ("low", (1.0, None), 0.5, 2.0),
        ("middle", (1.0, 3.0), 2.0, 5.0),
        ("high", (None, 3.0), 5.0, 1.0),
    ]:
        psi = L.range_matrices(kind, *args).Psi
        val = lambda w: (np.conj([1j * w, 1]) @ psi @ np.array([1j * w, 1])).real
        assert val(inside) > 0 > val(outside)


def test_xi_with_identity_p():
    rng = L.range_matrices("middle", 0.01, 0.1)
    Xi = L.gkyp_xi(rng, np.eye(2), np.zeros((2, 2)))
    np.testing.assert_array_equal(Xi, [[0, 0, 1, 0], [0, 0, 0, 1], [1, 0, 0, 0], [0, 1, 0, 0]])


def test_xi_with_unit_q_is_psi():
    rng = L.range_matrices("middle", 0.01, 0.1)
    np.testing.assert_array_equal(L.gkyp_xi(rng, np.zeros((1, 1)), np.eye(1)), rng.Psi)


def test_xi_hermitian_for_random_hermitian_inputs():
    r = np.random.default_rng(5)
    rng = L.range_matrices("middle", 0.3, 2.0)
    for _ in range(20):
        G = r.normal(size=(3, 3)) + 1j * r.normal(size=(3, 3))
        H = r.normal(size=(3, 3)) + 1j * r.normal(size=(3, 3))
        Xi = L.gkyp_xi(rng, G + G.conj().T, H + H.conj().T)
        np.testing.assert_allclose(Xi, Xi.conj().T, atol=1e-14)


def test_xi_rejects_mismatched_sizes():
    with pytest.raises(ValueError):
        L.gkyp_xi(L.range_matrices("high", omega_h=1.0), np.eye(2), np.eye(3))


def test_stability_lmi_entrywise(plant, parts):
    cv, base = parts
    lmi = L.assemble_stability_lmi(base, plant, cv)
    assert lmi.size == 4 + 1 + 2 * 2
    r = np.random.default_rng(1)
    for _ in range(10):
        a = _random_assignment(lmi, r)
        ref = _reference_gamma(plant, a, P=lmi.variables["Ps"].matrix(a["Ps"]),
                               Ra=_diag(a, "Rsa"), Rb=_diag(a, "Rsb"))
        np.testing.assert_allclose(lmi.evaluate(a), ref, atol=1e-12, rtol=0)


@pytest.mark.parametrize("kind", ["middle", "low", "high"])
def test_performance_lmis_entrywise(plant, parts, kind):
    cv, base = parts
    rng = L.range_from_band(kind, (0.01, 0.1))
    r = np.random.default_rng(2)
    rp, rm = L.rho_pm(RHO)
    for builder, other, prefix, names in (
        (L.assemble_sensitivity_lmis, "p", "p", (("Rpa", "Rpb"), ("Rpc", "Rpd"))),
        (L.assemble_comp_sensitivity_lmis, "q", "q", (("Rqa", "Rqb"), ("Rqc", "Rqd"))),
    ):
        plus, minus = builder(base, plant, cv, RHO, rng)
        for lmi, sign, alpha, (ra, rb) in ((plus, 1, rp, names[0]), (minus, -1, rm, names[1])):
            a = _random_assignment(lmi, r)
            k = 4
            aa, ab = (alpha, 1.0) if other == "p" else (1.0, alpha)
            ref = _reference_gamma(plant, a, P=_herm(lmi, a, "P" + prefix, k), Q=_herm(lmi, a, "Q" + prefix, k),
                                   psi=rng.Psi, other=other, weight=sign / RHO, alpha_a=aa, alpha_b=ab,
                                   Ra=_diag(a, ra), Rb=_diag(a, rb))
            np.testing.assert_allclose(lmi.evaluate(a), ref, atol=1e-12, rtol=0)


def test_pair_shares_lyapunov_variables(plant, parts):
    cv, base = parts
    plus, minus = L.assemble_sensitivity_lmis(base, plant, cv, RHO, L.range_matrices("middle", 0.01, 0.1))
    assert {"Pp", "Pp_im", "Qp", "Qp_im"} <= set(plus.terms) & set(minus.terms)
    assert {"Rpa", "Rpb"} <= set(plus.terms) and not {"Rpa", "Rpb"} & set(minus.terms)


def _all_lmis(plant, parts):
    cv, base = parts
    mid = L.range_matrices("middle", 0.01, 0.1)
    return (L.stability_constraints(base, plant, cv)
            + L.sensitivity_constraints(base, plant, cv, RHO, mid)
            + L.comp_sensitivity_constraints(base, plant, cv, RHO, L.range_matrices("middle", 50, 100)))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_affinity(plant, parts, seed):
    r = np.random.default_rng(seed)
    for lmi in _all_lmis(plant, parts):
        t1 = _random_assignment(lmi, r)
        t2 = _random_assignment(lmi, r)
        zero = {k: np.zeros_like(v) for k, v in t1.items()}
        both = {k: t1[k] + t2[k] for k in t1}
        lhs = lmi.evaluate(t1) + lmi.evaluate(t2) - lmi.evaluate(zero)
        np.testing.assert_allclose(lhs, lmi.evaluate(both), atol=1e-9)


def test_every_lmi_hermitian(plant, parts):
    r = np.random.default_rng(4)
    for lmi in _all_lmis(plant, parts):
        M = lmi.evaluate(_random_assignment(lmi, r))
        np.testing.assert_allclose(M, M.conj().T, atol=1e-12)


def test_real_embedding_of_real_matrix():
    H = np.array([[1.0, 2.0], [2.0, -3.0]])
    np.testing.assert_array_equal(L.real_embed(H), np.block([[H, 0 * H], [0 * H, H]]))


def test_real_embedding_eigenvalues_small_example():
    E = L.real_embed(np.array([[0, 1j], [-1j, 0]]))
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(E)), [-1, -1, 1, 1], atol=1e-15)


def test_real_embedding_rejects_non_hermitian():
    with pytest.raises(ValueError):
        L.real_embed(np.array([[0, 1j], [1j, 0]]))


def test_real_embedding_of_affine_lmi_preserves_eigenvalues(plant, parts):
    cv, base = parts
    plus, _ = L.assemble_sensitivity_lmis(base, plant, cv, RHO, L.range_matrices("middle", 0.01, 0.1))
    real = L.real_embed(plus)
    assert not real.is_complex and real.size == 2 * plus.size
    a = _random_assignment(plus, np.random.default_rng(9))
    ev = np.linalg.eigvalsh(plus.evaluate(a))
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(real.evaluate(a))), np.sort(np.r_[ev, ev]), atol=1e-9)


def test_rho_one_drops_minus_multiplier(plant, parts):
    cv, base = parts
    _, minus = L.assemble_sensitivity_lmis(base, plant, cv, 1.0, L.range_matrices("high", omega_h=1.0))
    k = 4
    for F in minus.terms["Rpc"]:
        assert F[k, k] == 0.0
    # Rpd still carries the b-part deviation
    assert any(F[k, k] != 0.0 for F in minus.terms["Rpd"])


def test_zero_b_deviation_decouples_rqb(parts):
    plant = IntervalPlant(a_c=[1, 0.75, 0], b_c=[0, 0.75, 1.25], a_d=[0.25, 1.0], b_d=[0.0, 0.0])
    cv = L.controller_vars(plant, 2, DC)
    base = build_constructed_systems(plant, Controller([1, 0, 0], [0, 0, 0]), DC)
    plus, minus = L.assemble_comp_sensitivity_lmis(base, plant, cv, RHO, L.range_matrices("middle", 50, 100))
    k, n = 4, 2
    for lmi, rb in ((plus, "Rqb"), (minus, "Rqd")):
        for j, F in enumerate(lmi.terms[rb]):
            assert F[k, k] == 0.0
            expected = np.zeros_like(F)
            expected[k + 1 + n + j, k + 1 + n + j] = -1.0
            np.testing.assert_array_equal(F, expected)
        # the Y border is still there through the controller terms
        assert np.any(lmi.terms["y0"][0][k + 1 + n:, :k] != 0)


def _pinned_feasible(lmis, pins):
    return solve(SdpProblem.build(lmis, pins=pins)).feasible


def test_comp_sensitivity_feasibility_nested_in_rho(plant, parts, ref_ctrl):
    cv, base = parts
    rng = L.range_matrices("middle", 50, 100)
    verdicts = {rho: _pinned_feasible(L.comp_sensitivity_constraints(base, plant, cv, rho, rng), ref_ctrl.as_dict())
                for rho in (0.7, 7.0)}
    assert verdicts[0.7] <= verdicts[7.0]
    assert verdicts[7.0]


def test_stability_infeasible_for_huge_deviation(ref_ctrl):
    plant = IntervalPlant(a_c=[1, 0.75, 0], b_c=[0, 0.75, 1.25], a_d=[250.0, 1000.0], b_d=[0.25, 0.25])
    cv = L.controller_vars(plant, 2, DC)
    base = build_constructed_systems(plant, Controller([1, 0, 0], [0, 0, 0]), DC)
    out = solve(SdpProblem.build(L.stability_constraints(base, plant, cv), pins=ref_ctrl.as_dict()))
    assert out.status == "infeasible"


def test_stability_feasible_for_zero_deviation_with_matching_dc(ref_ctrl):
    plant = IntervalPlant.nominal([1, 0.75, 0], [0.75, 1.25])
    from rfix.poly import hurwitz_from_controller
    dc = hurwitz_from_controller(plant, ref_ctrl)
    cv = L.controller_vars(plant, 2, dc)
    base = build_constructed_systems(plant, Controller([1, 0, 0], [0, 0, 0]), dc)
    assert _pinned_feasible(L.stability_constraints(base, plant, cv), ref_ctrl.as_dict())


def test_dump_lists_every_term(plant, parts):
    cv, base = parts
    lmi = L.assemble_stability_lmi(base, plant, cv)
    text = lmi.dump()
    assert text.startswith("lmi stability size=9")
    assert text.count("term ") == sum(len(v) for v in lmi.terms.values())


def test_variable_round_trip():
    for kind in ("symmetric", "skew", "diagonal"):
        v = L.Variable("V", kind, 4)
        vals = np.arange(1, v.size + 1, dtype=float)
        np.testing.assert_array_equal(v.entries(v.matrix(vals)), vals)
    with pytest.raises(ValueError):
        L.Variable("s", "scalar", 2)


def test_controller_vars_reproduce_rows(plant, ref_ctrl):
    cv = L.controller_vars(plant, 2, DC)
    blocks = cv.blocks(ref_ctrl.as_dict())
    s = build_constructed_systems(plant, ref_ctrl, DC)
    np.testing.assert_allclose(blocks["Cs"], s.gs.C, atol=1e-12)
    np.testing.assert_allclose(blocks["Cq"], s.gq.C, atol=1e-12)
    np.testing.assert_allclose(blocks["X"], s.X_state, atol=1e-15)
    np.testing.assert_allclose(blocks["Y"], s.Y_state, atol=1e-15)
