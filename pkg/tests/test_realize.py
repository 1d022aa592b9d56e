import numpy as np
import pytest
from hypothesis import given, strategies as st

from rfix.poly import Controller, IntervalPlant
from rfix.realize import (
    build_constructed_systems,
    canonical_row,
    companion,
    freq_response,
    realize_canonical,
    resolvent_columns,
)

from .oracles import cauchy_product, ratio
from .reference import DC, REF_X, REF_Y


@pytest.fixture(scope="module")
def systems(plant, ref_ctrl):
    return build_constructed_systems(plant, ref_ctrl, DC)


def test_unity_realization():
    ss = realize_canonical(DC, DC)
    np.testing.assert_array_equal(ss.C, np.zeros((1, 4)))
    assert ss.D == 1.0
    for w in (0.0, 0.3, 17.0):
        assert freq_response(ss, w) == pytest.approx(1.0 + 0.0j, abs=1e-14)


def test_companion_of_dc(systems):
    A, B = companion(DC)
    np.testing.assert_array_equal(systems.A, A)
    np.testing.assert_allclose(np.poly(A), DC, atol=1e-12)
    np.testing.assert_array_equal(B[:, 0], [0, 0, 0, 1])


def test_shared_dynamics(systems):
    assert systems.gs.A is systems.gp.A is systems.gq.A
    assert systems.gs.B is systems.gp.B is systems.gq.B


def test_feedthroughs(systems):
    # a * x is monic of degree m + n, b * y has degree < m + n
    assert systems.gs.D == 1.0
    assert systems.gp.D == 1.0
    assert systems.gq.D == 0.0


def test_round_trip_random_points(plant, ref_ctrl, systems):
    rng = np.random.default_rng(11)
    ax = cauchy_product(plant.a_c, REF_X)
    by = cauchy_product(plant.b_c, REF_Y)
    nums = {"gs": np.polyadd(ax, by), "gp": ax, "gq": by}
    worst = 0.0
    for name, num in nums.items():
        ss = getattr(systems, name)
        for s in rng.normal(size=20) + 1j * rng.normal(scale=3.0, size=20):
            ref = ratio(num, DC, s)
            worst = max(worst, abs(ss.evaluate(s) - ref) / abs(ref))
    assert worst < 1e-8


def test_nominal_dc_gain(systems):
    # (a^c x + b^c y)(0) / d_c(0) = 1.25 * 18.4318 / 1.5
    assert freq_response(systems.gs, 0.0).real == pytest.approx(23.03975 / 1.5, rel=1e-12)
    assert abs(freq_response(systems.gp, 0.0)) < 1e-14


@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4), st.floats(0.01, 100))
def test_conjugate_symmetry(num, w):
    ss = realize_canonical(num, DC)
    assert freq_response(ss, -w) == pytest.approx(np.conj(freq_response(ss, w)), rel=1e-10, abs=1e-12)


def test_zero_deviation_rows_vanish(ref_ctrl):
    p = IntervalPlant.nominal([1, 0.75, 0], [0.75, 1.25])
    sys_ = build_constructed_systems(p, ref_ctrl, DC)
    rng = np.random.default_rng(0)
    for _ in range(10):
        rows = sys_.uncertain_rows(rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 2))
        for r in rows.values():
            np.testing.assert_array_equal(r, 0.0)


def test_vertex_row_matches_vertex_realization(plant, ref_ctrl, systems):
    for da, db in plant.vertices():
        a, b = plant.coefficients(da, db)
        num = np.polyadd(cauchy_product(a, REF_X), cauchy_product(b, REF_Y))
        C_ref, D_ref = canonical_row(num, DC)
        rows = systems.uncertain_rows(da, db)
        np.testing.assert_allclose(systems.gs.C + rows["gs"], C_ref, atol=1e-12)
        assert D_ref == systems.gs.D


def test_uncertain_response_matches_perturbed_ratio(plant, ref_ctrl, systems):
    rng = np.random.default_rng(3)
    for _ in range(20):
        da, db = rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 2)
        a, b = plant.coefficients(da, db)
        w = rng.uniform(0.01, 100)
        rows = systems.uncertain_rows(da, db)
        ref = ratio(cauchy_product(b, REF_Y), DC, 1j * w)
        assert freq_response(systems.gq, w, rows["gq"]) == pytest.approx(ref, rel=1e-10)


def test_rejects_bad_dc(plant, ref_ctrl):
    with pytest.raises(ValueError):
        build_constructed_systems(plant, ref_ctrl, [1, 2, 1])
    with pytest.raises(ValueError):
        build_constructed_systems(plant, ref_ctrl, [1, -1, 1, 1, 1])


def test_resolvent_columns_are_monomials_over_den():
    A, B = companion(DC)
    w = np.array([0.1, 2.0])
    Z = resolvent_columns(A, B, w)
    for i, wi in enumerate(w):
        s = 1j * wi
        np.testing.assert_allclose(Z[:, i], s ** np.arange(4) / np.polyval(DC, s), rtol=1e-12)


def test_non_finite_frequency_rejected():
    with pytest.raises(ValueError):
        freq_response(realize_canonical([1.0], DC), np.inf)


def test_controller_order_zero():
    p = IntervalPlant.from_bounds([[1.0, 2.0]], [[0.5, 1.0]])
    sys_ = build_constructed_systems(p, Controller([1.0], [2.0]), [1.0, 3.0])
    assert sys_.A.shape == (1, 1)
    assert sys_.X.shape == (1, 1)
