import numpy as np
import pytest

from szegolab import hardy
from szegolab import immersion as im
from szegolab import model_geometry as mg

from conftest import scenario

SWEEP = [64, 128, 256, 512, 1024]


@pytest.mark.parametrize("name", ["cp1-s1-12", "cp2-t2", "cp1-su2"])
def test_phi_norm_is_scaled_diagonal_kernel(name, rng):
    s = scenario(name)
    b = s.basis(10)
    alpha = s.model.d + (1 - s.action.group.rank) / 2
    for x in mg.random_point(s.model, rng, size=5):
        v = im.phi_map(b, x)
        diag = hardy.equivariant_kernel(b, x, x).real
        assert np.vdot(v, v).real == pytest.approx(diag * 10 ** (-2 * alpha), rel=1e-10)


def test_phi_entries_invariant_under_circle_phase(rng):
    s = scenario("cp2-t2")
    b = s.basis(6)
    x = mg.random_point(s.model, rng)
    a = np.abs(im.phi_map(b, x))
    np.testing.assert_allclose(np.abs(im.phi_map(b, np.exp(0.7j) * x)), a, atol=1e-13)
    # the normalized map descends to the quotient up to a unit phase
    f0 = im.normalized_map(b, x)
    f1 = im.normalized_map(b, mg.act(s.action, np.array([0.4, -1.1]), x))
    assert abs(np.vdot(f0, f1)) == pytest.approx(1, abs=1e-12)


def test_base_locus_rejected():
    s = scenario("cp1-s1-12")
    with pytest.raises(ValueError, match="base locus"):
        im.phi_map(s.basis(1), [0, 1])


@pytest.mark.parametrize("name", ["cp1-s1-12", "cp2-t2", "cp1-su2"])
def test_pullback_metric_hermitian_positive(name):
    s = scenario(name)
    P = im.pullback_metric(s.data, s.basis(128))
    assert np.linalg.norm(P - P.conj().T) < 1e-6 * np.linalg.norm(P)
    assert np.linalg.eigvalsh(0.5 * (P + P.conj().T)).min() > 0


def test_raw_variant_close_to_log():
    s = scenario("cp2-t2")
    b = s.basis(256)
    a = im.pullback_metric(s.data, b)
    r = im.pullback_metric(s.data, b, variant="raw")
    assert np.linalg.norm(a - r) < 0.05 * np.linalg.norm(a)
    with pytest.raises(ValueError):
        im.pullback_metric(s.data, b, variant="cubic")


@pytest.mark.parametrize("name", ["cp1-s1-12", "cp2-t2"])
def test_isometry_report_decreasing(name):
    s = scenario(name)
    rep = im.isometry_report(s.data, s.basis, SWEEP)
    assert rep.strictly_decreasing and rep.ratio_ok()
    assert rep.epsilon > 0.5
    assert rep.k_star == SWEEP[0]
    assert rep.summary()["k_star"] == SWEEP[0]


def test_isometry_report_needs_four_levels():
    s = scenario("cp1-s1-12")
    with pytest.raises(ValueError):
        im.isometry_report(s.data, s.basis, [64, 128])


@pytest.mark.parametrize("name", ["cp1-s1-12", "cp2-t2", "cp1-plain"])
def test_laplacian_approaches_round_eigenvalue(name):
    s = scenario(name)
    res = im.laplacian_report(s.data, s.basis, [128, 512])
    assert res[0].target == -2.0
    assert abs(res[-1].eigen_estimate + 2) < 0.05
    assert abs(res[-1].eigen_estimate + 2) <= abs(res[0].eigen_estimate + 2) + 1e-6


def test_target_eigenvalue_values():
    assert im.target_eigenvalue(scenario("cp2-t2").data) == -2.0
    assert im.target_eigenvalue(scenario("cp1-s1-12").data) == -2.0


def test_minimality_oracle():
    assert im.minimality_oracle(2, -2.0)
    assert not im.minimality_oracle(2, -1.2)
    assert im.minimality_oracle(2, -1.9)


def test_immersion_sample_fields():
    s = scenario("cp1-s1-12")
    sample = im.immersion_sample(s.data, s.basis(64))
    assert np.linalg.norm(sample.normalized_vector) == pytest.approx(1)
    assert sample.target_eigenvalue == -2.0
    assert sample.pullback_metric.shape == (1, 1)
