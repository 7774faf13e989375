import dataclasses

import numpy as np
import pytest

from szegolab import lie_groups as lg
from szegolab import model_geometry as mg
from szegolab import reduction as rd
from szegolab.asymptotics import leading_term

from conftest import BUNDLED, scenario

CP1 = mg.QuantizedModel((1,))
CP2 = mg.QuantizedModel((2,))


def _t2_points(n, seed=0):
    s = scenario("cp2-t2")
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        try:
            out.append(rd.locus_point(s.action, s.nu, mg.random_point(s.model, rng)))
        except (rd.LocusSolverError, rd.NotFreeError):
            continue
    return out


def test_rank_one_varsigma_and_psi():
    s = scenario("cp1-s1-12")
    data = s.data
    assert data.varsigma == pytest.approx(1.5, abs=1e-14)
    assert data.psi_value == pytest.approx(1 / 1.5, rel=1e-13)
    assert data.t0_basis.shape[1] == 0
    assert data.horizontal_dim == 1


def test_rank_one_psi_is_inverse_moment_norm(rng):
    s = scenario("cp1-s1-12")
    for x in mg.random_point(s.model, rng, size=10):
        data = rd.locus_point(s.action, s.nu, x)
        assert data.psi_value == pytest.approx(1 / np.linalg.norm(data.moment), rel=1e-12)


def test_psi_under_weight_doubling(rng):
    s = scenario("cp1-s1-12")
    nu2 = lg.weight(s.action.group, 2)
    for x in mg.random_point(s.model, rng, size=5):
        a = rd.locus_point(s.action, s.nu, x)
        b = rd.locus_point(s.action, nu2, x)
        assert b.varsigma == pytest.approx(a.varsigma / 2)
        assert b.psi_value == pytest.approx(a.psi_value, rel=1e-13)


def test_t2_reference_point():
    data = scenario("cp2-t2").data
    assert data.varsigma == pytest.approx(2 / 3, abs=1e-13)
    assert data.D_matrix[0, 0] == pytest.approx(1 / 3, abs=1e-13)
    assert data.psi_value == pytest.approx(0.41350, abs=5e-5)
    assert data.cone_residual < 1e-10


def test_t2_locus_codimension_one():
    for data in _t2_points(5, seed=11):
        res = rd.splitting_residuals(data)
        assert res["locus_dim"] == 2 * data.d - (data.r - 1)
        assert data.cone_residual < 1e-10
        assert data.horizontal_dim == data.d - data.r + 1


def test_su2_alignment(rng):
    s = scenario("cp1-su2")
    for x in mg.random_point(s.model, rng, size=10):
        data = rd.locus_point(s.action, s.nu, x)
        aligned = data.varsigma * lg.su2_adjoint(data.align_element) @ s.nu.covector
        assert np.linalg.norm(data.moment - aligned) < 1e-10
        assert np.linalg.norm(data.moment) == pytest.approx(data.varsigma * s.nu.norm, abs=1e-10)


def test_psi_positive_and_continuous_su2():
    s = scenario("cp1-su2")
    ts = np.linspace(0.1, 1.4, 30)
    vals = [rd.locus_point(s.action, s.nu, [np.cos(t), np.sin(t) * np.exp(0.3j)]).psi_value for t in ts]
    assert min(vals) > 0
    assert np.max(np.abs(np.diff(vals))) < 1e-8 + 0.05 * np.max(vals)


@pytest.mark.parametrize("name", BUNDLED)
def test_margin_positive_and_orbit_invariant(name, rng):
    s = scenario(name)
    data = s.data
    m0 = rd.transversality_margin(data)
    assert m0 > 1e-8 and rd.is_transverse(data)
    gs = rng.uniform(0, 2 * np.pi, (3, s.action.group.rank)) if s.action.group.is_torus else \
        lg.su2_exp(rng.standard_normal((3, 3)))
    for g in gs:
        moved = rd.locus_point(s.action, s.nu, mg.act(s.action, g, data.point))
        assert rd.transversality_margin(moved) == pytest.approx(m0, abs=1e-9)


def test_rank_one_margin_is_smallest_singular_value():
    data = scenario("cp1-s1-12").data
    J = rd.moment_differential(data.action, data.chart)
    assert rd.transversality_margin(data) == pytest.approx(np.linalg.svd(J, compute_uv=False).min())


def test_margin_vanishes_at_fixed_point():
    s = scenario("cp1-s1-12")
    data = rd.locus_point(s.action, s.nu, [1, 0])
    assert rd.transversality_margin(data) < 1e-12
    assert not rd.is_transverse(data)


def test_moment_differential_matches_difference_quotient(rng):
    for name in BUNDLED:
        s = scenario(name)
        chart = mg.heisenberg_chart(s.model, mg.random_point(s.model, rng))
        np.testing.assert_allclose(rd.moment_differential(s.action, chart),
                                   rd.moment_differential_fd(s.action, chart), atol=1e-8)


def test_non_free_action_rejected():
    act = mg.torus_action(CP1, [2, 4])
    nu = lg.weight(act.group, 2)
    with pytest.raises(rd.NotFreeError):
        rd.locus_point(act, nu, [1, 1])
    data = rd.locus_point(act, nu, [1, 1], require_free=False)
    assert not data.free


def test_solver_failure_reported():
    s = scenario("cp2-t2")
    nu = lg.weight(s.action.group, (1, -1))
    with pytest.raises(rd.LocusSolverError):
        rd.locus_point(s.action, nu, [1, 1, 1], max_iter=50)


def test_reduced_metrics():
    for name in BUNDLED:
        data = scenario(name).data
        m = rd.reduced_metrics(data)
        np.testing.assert_allclose(m["g2"] * data.varsigma, m["g1"], atol=1e-12)
        np.testing.assert_allclose(m["omega2"] * data.varsigma, m["omega1"], atol=1e-12)
        np.testing.assert_allclose(m["g1"], m["g1"].T, atol=1e-12)
        np.testing.assert_allclose(m["omega1"], -m["omega1"].T, atol=1e-12)
        assert abs(np.linalg.det(m["omega1"])) > 1e-6
        assert rd.splitting_residuals(data)["J_horizontal"] < 1e-9


def test_leaf_tangent():
    assert scenario("cp1-s1-12").data.perp_frame.shape[1] == 0
    assert rd.characteristic_leaf_tangent(scenario("cp1-s1-12").data).shape[1] == 0
    for data in _t2_points(3, seed=5):
        leaf = rd.characteristic_leaf_tangent(data)
        assert leaf.shape[1] == 1
        # the leaf direction is in the radical of omega restricted to the locus
        T = rd.locus_tangent(data)
        assert np.max(np.abs(leaf.T @ rd.STANDARD_OMEGA(data.d) @ T)) < 1e-9


@pytest.mark.parametrize("name", BUNDLED)
def test_splitting_residuals(name):
    res = rd.splitting_residuals(scenario(name).data)
    for key in ("omega_perp_horizontal", "normal_is_J_perp", "normal_g_locus", "perp_in_locus",
                "horizontal_in_locus", "J_horizontal"):
        assert res[key] < 1e-9, key
    assert res["splitting_rank"] == 2 * scenario(name).data.d


def test_moment_constant_along_leaf_curves():
    for data in _t2_points(3, seed=8):
        curve = rd.leaf_curve(data, t_max=0.5)
        mom = mg.moment_map(data.action, curve)
        assert np.max(np.abs(mom - data.moment)) < 1e-6


@pytest.mark.parametrize("name", BUNDLED + ("cp1-plain",))
def test_circle_closes_after_full_turn(name):
    assert rd.circle_period_residual(scenario(name).data) < 1e-10


@pytest.mark.parametrize("name", BUNDLED)
def test_scalars_frame_independent(name):
    s = scenario(name)
    x = s.data.point
    a = rd.locus_point(s.action, s.nu, x, frame_rng=1)
    b = rd.locus_point(s.action, s.nu, x, frame_rng=2)
    assert a.varsigma == pytest.approx(b.varsigma, abs=1e-12)
    assert a.psi_value == pytest.approx(b.psi_value, rel=1e-12)
    assert rd.transversality_margin(a) == pytest.approx(rd.transversality_margin(b), abs=1e-12)
    w = np.full(a.horizontal_dim, 0.3 + 0.1j)
    assert leading_term(a, w, w, 100) == pytest.approx(leading_term(b, w, w, 100), rel=1e-12)


@pytest.mark.parametrize("name", BUNDLED)
def test_distance_ratio_positive(name, rng):
    data = scenario(name).data
    n = data.horizontal_dim
    ratios = []
    for _ in range(40):
        xi = rng.standard_normal(data.group.dim)
        xi *= rng.uniform(0.02, 0.3) / np.linalg.norm(xi)
        w = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        w *= 0.1 * rng.uniform() / np.linalg.norm(w)
        v *= 0.1 * rng.uniform() / np.linalg.norm(v)
        ratios.append(rd.distance_ratio(data, xi, w, v))
    assert min(ratios) > 0


def test_psi_requires_positive_det():
    data = scenario("cp2-t2").data
    bad = dataclasses.replace(data, D_matrix=np.zeros((1, 1)))
    with pytest.raises(rd.NotFreeError):
        rd.psi_nu(bad)


def test_locus_scan_rows():
    s = scenario("cp2-t2")
    rows = rd.locus_scan(s.action, s.nu, [[1, 1, 1], [1, 0.8, 1.3]])
    assert len(rows) == 2
    assert all(r["margin"] > 0 and r["cone_residual"] < 1e-10 for r in rows)
