from math import factorial

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from szegolab import hardy
from szegolab import lie_groups as lg
from szegolab import model_geometry as mg
from szegolab.asymptotics import loglog_fit

from conftest import scenario

CP1 = mg.QuantizedModel((1,))
CP2 = mg.QuantizedModel((2,))
CP1xCP1 = mg.QuantizedModel((1, 1))


def _enumerate_torus(action, nu, k, n_max):
    # brute-force oracle: every monomial up to level n_max, keep those of weight k nu
    out = []
    for n in range(n_max + 1):
        for a in hardy.level_multi_indices(action.model, n):
            if np.allclose(a @ action.weight_matrix, k * np.asarray(nu.components)):
                out.append(tuple(a))
    return sorted(out)


def test_monomial_norm_closed_form():
    for model in (CP1, CP2):
        d = model.d
        for alpha in [(3, 1, 0)[: d + 1], (0, 2, 2)[: d + 1], (5,) + (0,) * d]:
            sec = hardy.monomial_section(model, alpha)
            n = sum(alpha)
            expected = model.total_sphere_volume * np.prod([factorial(a) for a in alpha]) * factorial(d) / factorial(n + d)
            assert sec.norm**2 == pytest.approx(expected, rel=1e-13)


@pytest.mark.parametrize("model", [CP1, CP2, CP1xCP1])
def test_monomials_orthogonal_under_sphere_quadrature(model):
    pts, w = hardy.sphere_quadrature(model, 8)
    assert np.sum(w) == pytest.approx(model.total_sphere_volume, rel=1e-13)
    A = np.vstack([hardy.level_multi_indices(model, n) for n in (2, 3)])
    vals = np.prod(pts[:, None, :] ** A[None, :, :], axis=-1)
    gram = (vals.T * w) @ np.conj(vals)
    expected = np.diag(np.exp(hardy.monomial_log_norm2(model, A)))
    np.testing.assert_allclose(gram, expected, atol=1e-13)


def test_monomial_section_rejects_unbalanced_blocks():
    with pytest.raises(ValueError):
        hardy.monomial_section(CP1xCP1, (1, 0, 2, 0))


def test_level_kernel_orthogonal_points():
    assert abs(hardy.szego_level_kernel(CP1, 3, [1, 0], [0, 1])) == 0


@pytest.mark.parametrize("model", [CP1, CP2, CP1xCP1, mg.QuantizedModel((2, 1))])
def test_level_kernel_closed_form_vs_basis(model, rng):
    x = mg.random_point(model, rng, size=10)
    y = mg.random_point(model, rng, size=10)
    for k in (0, 1, 2, 5, 9):
        a = hardy.szego_level_kernel(model, k, x, y)
        b = hardy.level_kernel_by_basis(model, k, x, y)
        scale = np.sqrt(hardy.szego_level_kernel(model, k, x, x).real * hardy.szego_level_kernel(model, k, y, y).real)
        assert np.max(np.abs(a - b) / scale) < 1e-10


def test_level_kernel_diagonal_value():
    # d = 1, k = 2: (k + 1) / vol(X) on the diagonal
    x = mg.normalize_point(CP1, [0.3, 1j])
    assert hardy.szego_level_kernel(CP1, 2, x, x).real == pytest.approx(3 / np.pi)
    assert hardy.level_kernel_by_basis(CP1, 2, x, x).real == pytest.approx(3 / np.pi)


def test_level_kernel_reproduces_sections(rng):
    model = CP2
    pts, w = hardy.sphere_quadrature(model, 8)
    x = mg.random_point(model, rng)
    k = 4
    K = hardy.szego_level_kernel(model, k, x, pts)
    for alpha in hardy.level_multi_indices(model, k)[:6]:
        s = np.prod(pts ** alpha, axis=-1)
        assert np.sum(w * K * s) == pytest.approx(np.prod(x ** alpha), rel=1e-10)


def test_level_kernel_fourier_equivariance(rng):
    x, y = mg.random_point(CP2, rng, size=2)
    for k in (1, 4):
        lhs = hardy.szego_level_kernel(CP2, k, mg.circle_act(CP2, 0.8, x), y)
        assert lhs == pytest.approx(np.exp(0.8j * k) * hardy.szego_level_kernel(CP2, k, x, y))


def test_untwisted_near_diagonal_law():
    model = CP2
    x = mg.normalize_point(model, [1, 0.4j, -0.3])
    chart = mg.heisenberg_chart(model, x)
    v = np.array([0.8 + 0.5j, -0.4])
    w = np.array([-0.6j, 0.9 + 0.2j])
    limit = np.exp(v @ np.conj(w) - 0.5 * (v @ np.conj(v) + w @ np.conj(w))) / np.pi**2
    ks = [64, 128, 256, 512]
    errs = []
    for k in ks:
        val = hardy.szego_level_kernel(model, k, mg.chart_point(chart, v / np.sqrt(k)),
                                       mg.chart_point(chart, w / np.sqrt(k))) / k**2
        errs.append(abs(val / limit - 1))
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert -loglog_fit(ks, errs)[0] >= 0.4


def test_isotype_example_k4():
    s = scenario("cp1-s1-12")
    b = s.basis(4)
    assert b.dimension == 3
    assert sorted(map(tuple, b.multi_indices.tolist())) == [(0, 2), (2, 1), (4, 0)]
    assert all(m.weight == (4,) for m in b.members)


def test_isotype_k0_is_constants():
    s = scenario("cp1-s1-12")
    b = s.basis(0)
    assert b.dimension == 1 and b.levels.tolist() == [0]


def test_isotype_dimension_formula_cp1():
    s = scenario("cp1-s1-12")
    for k in range(51):
        assert s.basis(k).dimension == k // 2 + 1
    assert hardy.isotype_dimension(s.action, s.nu, 5) == 3


@pytest.mark.parametrize("name", ["cp1-s1-12", "cp2-t2", "cp1-plain"])
def test_torus_isotype_matches_brute_force(name):
    s = scenario(name)
    for k in (0, 1, 3, 6):
        n_lo, n_hi = hardy.level_range(s.action, s.nu, k)
        found = sorted(map(tuple, s.basis(k).multi_indices.tolist()))
        assert found == _enumerate_torus(s.action, s.nu, k, max(n_hi, 0) + 3)


def test_product_model_torus_isotype():
    act = mg.torus_action(CP1xCP1, [[1, 0], [2, 1], [0, 1], [1, 3]], shift=[0, 0])
    nu = lg.weight(act.group, (2, 3))
    for k in (1, 2, 3):
        b = hardy.isotype_basis(act, nu, k)
        assert sorted(map(tuple, b.multi_indices.tolist())) == _enumerate_torus(act, nu, k, 4 * k + 2)
        assert hardy.isotype_dimension(act, nu, k) == b.dimension


@pytest.mark.parametrize("name", ["cp2-t2", "cp1-su2"])
def test_dimension_routes_agree(name):
    s = scenario(name)
    for k in range(0, 13):
        char = hardy.isotype_dimension_by_characters(s.action, s.nu, k)
        assert abs(char - round(char)) < 1e-8
        assert round(char) == s.basis(k).dimension


def test_su2_isotype_multiplicity():
    # on CP^1 with the defining action, the spin-k/2 isotype occurs once, at level k
    s = scenario("cp1-su2")
    for k in range(8):
        b = s.basis(k)
        assert b.dimension == k + 1
        assert set(b.levels.tolist()) == ({k} if k else {0})


def test_su2_isotype_on_product():
    act = mg.su2_action(CP1xCP1, [[2], [1, 1]])
    nu = lg.weight(act.group, 1)
    for k in (1, 2, 3):
        b = hardy.isotype_basis(act, nu, k)
        assert hardy.isotype_dimension(act, nu, k) == b.dimension
        # only level k meets the isotype; Sym^k times the k + 1 invariant monomials of the second factor
        assert b.dimension == (k + 1) ** 2


def test_dimension_mismatch_raises(monkeypatch):
    s = scenario("cp1-s1-12")
    monkeypatch.setattr(hardy, "isotype_dimension_by_characters", lambda *a, **kw: 7.0)
    with pytest.raises(RuntimeError, match="mismatch"):
        hardy.isotype_dimension(s.action, s.nu, 4)


@pytest.mark.parametrize("name", ["cp1-s1-12", "cp2-t2", "cp1-su2"])
def test_isotype_basis_orthonormal(name):
    s = scenario(name)
    b = s.basis(4)
    pts, w = hardy.sphere_quadrature(s.model, int(max(b.levels)) + 1)
    S = hardy.basis_values(b, pts)
    gram = (S.T * w) @ np.conj(S)
    np.testing.assert_allclose(gram, np.eye(b.dimension), atol=1e-12)


@pytest.mark.parametrize("name", ["cp1-s1-12", "cp2-t2", "cp1-su2"])
def test_kernel_hermitian_positive_invariant(name, rng):
    s = scenario(name)
    b = s.basis(6)
    x = mg.random_point(s.model, rng, size=20)
    y = mg.random_point(s.model, rng, size=20)
    K = hardy.equivariant_kernel(b, x, y)
    np.testing.assert_allclose(K, np.conj(hardy.equivariant_kernel(b, y, x)), atol=1e-12 * np.max(np.abs(K)))
    assert np.all(hardy.equivariant_kernel(b, x, x).real >= 0)
    rule = lg.haar_quadrature(s.action.group, 4)
    for g in rule.nodes[::7]:
        Kg = hardy.equivariant_kernel(b, mg.act(s.action, g, x), mg.act(s.action, g, y))
        assert np.max(np.abs(Kg - K)) < 1e-10 * max(1.0, np.max(np.abs(K)))


@pytest.mark.parametrize("name", ["cp1-s1-12", "cp2-t2", "cp1-su2", "cp1-plain"])
def test_kernel_routes_agree(name, rng):
    s = scenario(name)
    k = 5
    x = mg.random_point(s.model, rng, size=15)
    y = mg.random_point(s.model, rng, size=15)
    a = hardy.equivariant_kernel(s.basis(k), x, y)
    c = hardy.equivariant_kernel_by_characters(s.action, s.nu, k, x, y)
    scale = np.sqrt(hardy.equivariant_kernel(s.basis(k), x, x).real * hardy.equivariant_kernel(s.basis(k), y, y).real)
    assert np.max(np.abs(a - c) / scale) < 1e-9
    phi = hardy.equivariant_kernel_by_characters(s.action, s.nu, k, x, y, haar="phi")
    np.testing.assert_allclose(phi, c * s.action.group.volume_G, rtol=1e-12)


def test_insufficient_rule_reported():
    s = scenario("cp2-t2")
    rule = lg.haar_quadrature(s.action.group, 2)
    with pytest.raises(ValueError, match="degree"):
        hardy.equivariant_kernel_by_characters(s.action, s.nu, 6, s.data.point, s.data.point, rule=rule)
    with pytest.raises(ValueError):
        hardy.equivariant_kernel_by_characters(s.action, s.nu, 2, s.data.point, s.data.point, haar="other")


@pytest.mark.parametrize("name", ["cp1-s1-12", "cp2-t2", "cp1-su2"])
def test_wrong_isotype_annihilated(name, rng):
    s = scenario(name)
    k = 3
    b = s.basis(k)
    other = lg.weight(s.action.group, tuple(c + 1 for c in s.nu.components))
    x = mg.random_point(s.model, rng, size=4)
    f = lambda pts: hardy.basis_values(b, pts)
    wrong = hardy.character_projector(s.action, other, k, f, x)
    right = hardy.character_projector(s.action, s.nu, k, f, x)
    assert np.max(np.abs(wrong)) < 1e-11
    np.testing.assert_allclose(right, hardy.basis_values(b, x), atol=1e-11)


@pytest.mark.parametrize("name", ["cp1-s1-12", "cp2-t2"])
def test_reproducing_and_idempotence(name, rng):
    s = scenario(name)
    k = 6
    b = s.basis(k)
    deg = int(max(b.levels))
    pts, w = hardy.sphere_quadrature(s.model, deg)
    x = mg.random_point(s.model, rng, size=3)
    y = mg.random_point(s.model, rng, size=3)
    Kxp = hardy.equivariant_kernel(b, x[:, None, :], pts[None, :, :])
    sv = hardy.basis_values(b, pts)
    np.testing.assert_allclose((Kxp * w) @ sv, hardy.basis_values(b, x), rtol=1e-8, atol=1e-10)
    Kpy = hardy.equivariant_kernel(b, pts[:, None, :], y[None, :, :])
    comp = (Kxp * w) @ Kpy
    np.testing.assert_allclose(comp, hardy.equivariant_kernel(b, x[:, None, :], y[None, :, :]), rtol=1e-8, atol=1e-10)


def test_basis_cache_roundtrip(tmp_path, monkeypatch):
    monkeypatch.setenv(hardy.CACHE_ENV, str(tmp_path))
    s = scenario("cp1-su2")
    b1 = hardy.isotype_basis(s.action, s.nu, 7)
    files = list(tmp_path.iterdir())
    assert len(files) == 1
    b2 = hardy.isotype_basis(s.action, s.nu, 7)
    np.testing.assert_array_equal(b1.multi_indices, b2.multi_indices)
    np.testing.assert_array_equal(b1.coefficients, b2.coefficients)


def test_level_restriction():
    s = scenario("cp2-t2")
    full = s.basis(4)
    lv = sorted(set(full.levels.tolist()))
    part = hardy.isotype_basis(s.action, s.nu, 4, levels=lv[:1])
    assert 0 < part.dimension < full.dimension


def test_level_range_bounds():
    s = scenario("cp1-s1-12")
    assert hardy.level_range(s.action, s.nu, 10) == (5, 10)
    with pytest.raises(ValueError):
        hardy.isotype_basis(s.action, s.nu, -1)


@settings(max_examples=25, deadline=None)
@given(k=st.integers(0, 40))
def test_cp2_dimension_is_k_plus_one(k):
    assert scenario("cp2-t2").basis(k).dimension == k + 1
