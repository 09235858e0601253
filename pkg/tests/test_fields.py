import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from finsler import fields as fl
from finsler import zoo
from finsler.sampling import sample_bundles
from finsler.specfile import VectorFieldSpec
from finsler.tensors import compute_bundle

from conftest import bundles

E1 = VectorFieldSpec.constant([1, 0, 0])
ZERO3 = VectorFieldSpec.constant([0, 0, 0])
RADIAL3 = VectorFieldSpec.from_strings(["-x1", "-x2", "-x3"], "radial")
RADIAL2 = VectorFieldSpec.from_strings(["-x1", "-x2"], "radial")


def test_field_evaluation_and_jacobian():
    vf = VectorFieldSpec.from_strings(["x1*x2", "exp(x1)", "sin(x3)"])
    B, dB = fl.field_at(vf, [0.5, 2.0, 0.3])
    np.testing.assert_allclose(B, [1.0, np.exp(0.5), np.sin(0.3)])
    want = np.array([[2.0, 0.5, 0], [np.exp(0.5), 0, 0], [0, 0, np.cos(0.3)]])
    np.testing.assert_allclose(dB, want, atol=1e-15)


def test_gradient_field():
    vf = VectorFieldSpec.gradient_of("x1^2*x2 + 0.5*x2^2", 2)
    B, dB = fl.field_at(vf, [1.5, -2.0])
    np.testing.assert_allclose(B, [2 * 1.5 * -2.0, 1.5**2 - 2.0])
    np.testing.assert_allclose(dB, [[-4.0, 3.0], [3.0, 1.0]], atol=1e-14)


@pytest.mark.parametrize("name", zoo.RIEMANNIAN)
def test_any_field_is_sc_on_riemannian(name):
    n = zoo.load(name).dim
    vf = VectorFieldSpec.from_strings(["x1 + 2", "exp(x2)", "x1*x3 + 1"][:n])
    r = fl.check_sc(vf, bundles(name))
    assert r.holds and r.residual_rel <= 1e-14


def test_constant_field_fails_sc_on_randers():
    r = fl.check_sc(E1, bundles("randers"))
    assert not r.holds and r.residual_rel > 1e-3
    assert r.residual_rel == max(v for _, v in r.per_sample)
    for key in ("B_sq", "B_0", "B_sq_F_sq_minus_B_0_sq"):
        assert len(r.extra[key]) == len(bundles("randers"))


def test_side_quantities_by_hand():
    b = bundles("randers")[0]
    B_sq, B_0, gap = fl.sc_side_quantities(np.array([1.0, 0, 0]), b)
    assert B_sq == pytest.approx(b.g[0, 0])
    assert B_0 == pytest.approx(b.g[0] @ b.y)
    assert gap == pytest.approx(B_sq * b.F**2 - B_0**2)


def test_zero_field():
    r = fl.check_sc(ZERO3, bundles("randers"))
    assert r.holds and r.zero_field
    c = fl.check_cc(VectorFieldSpec.gradient_of("1.0", 3), bundles("randers"))
    assert c.holds and c.zero_field


def test_cc_condition():
    assert fl.check_cc(VectorFieldSpec.gradient_of("x1*x2 + x3", 2 + 1), bundles("euclid")).holds
    c = fl.check_cc(VectorFieldSpec.gradient_of("x1 + 2*x2", 3), bundles("randers"))
    assert not c.holds
    sig0 = c.extra["sigma_0"]
    for b, s in zip(bundles("randers"), sig0):
        assert s == pytest.approx(b.y[0] + 2 * b.y[1])


def test_concurrent_field_on_flat_space():
    r = fl.check_concurrent(RADIAL3, bundles("euclid"))
    assert r.holds and r.residual_rel <= 1e-14


def test_concurrent_field_on_exp_metric():
    r = fl.check_concurrent(RADIAL2, bundles("exp-riemann"))
    assert not r.holds
    assert r.extra["max_vertical"] <= 1e-14
    # by hand: dB + B^h Gamma^i_hj + I = B^h Gamma^i_hj
    b = bundles("exp-riemann")[0]
    B = -b.x
    want = np.linalg.norm(np.einsum("h,ihj->ij", B, b.Gamma)) / (1 + np.sqrt(2))
    assert fl.horizontal_residual(B, -np.eye(2), b) == pytest.approx(want, rel=1e-12)


def test_concurrent_fails_on_randers_through_vertical_part():
    r = fl.check_concurrent(RADIAL3, bundles("randers"))
    assert not r.holds and r.extra["max_vertical"] > 1e-3


@pytest.mark.parametrize("name", zoo.RIEMANNIAN)
def test_nullspace_is_everything_on_riemannian(name):
    spec = zoo.load(name)
    ns = fl.find_sc_field(spec, np.zeros(spec.dim) + 0.1, 20, 42)
    assert ns.dim == spec.dim
    assert max(ns.singular_values) <= 1e-10 * ns.scale


@pytest.mark.parametrize("name", ["randers", "randers-perturbed", "quartic4"])
def test_nullspace_is_empty_on_non_riemannian(name):
    spec = zoo.load(name)
    x = np.array([(lo + hi) / 2 for lo, hi in zip(spec.sample_region.x_min, spec.sample_region.x_max)])
    ns = fl.find_sc_field(spec, x, 20, 42)
    assert ns.dim == 0
    assert min(ns.singular_values) >= 1e-3 * ns.scale


def test_nullspace_basis_solves_the_system():
    spec = zoo.load("product-quartic")
    x = np.zeros(3)
    ns = fl.find_sc_field(spec, x, 20, 42)
    assert ns.dim == 1
    v = ns.basis[0]
    assert abs(abs(v[0]) - 1) <= 1e-10
    A = fl.sc_system(sample_bundles(spec, 20, 42, x=x))
    assert np.linalg.norm(A @ v) <= ns.threshold * max(1.0, np.linalg.norm(A))
    r = fl.check_sc(VectorFieldSpec.constant(v), sample_bundles(spec, 20, 42, x=x))
    assert r.residual_rel <= ns.threshold


def test_nullspace_orthonormal_and_sorted():
    ns = fl.find_sc_field(zoo.load("euclid"), np.zeros(3), 5, 1)
    Bm = np.array(ns.basis)
    np.testing.assert_allclose(Bm @ Bm.T, np.eye(3), atol=1e-12)
    assert ns.singular_values == sorted(ns.singular_values, reverse=True)


def test_nullspace_needs_two_samples():
    with pytest.raises(ValueError):
        fl.find_sc_field(zoo.load("euclid"), np.zeros(3), 1)


def test_cc_nullspace_on_randers():
    ns = fl.find_cc_field(zoo.load("randers"), np.zeros(3), 20, 42)
    assert ns.dim == 0


def test_independence_generic():
    rep = fl.lemma1_independence(E1, bundles("euclid"))
    assert rep.precondition_ok and rep.independent
    assert min(rep.margins) > fl.INDEPENDENCE_THRESHOLD


def test_independence_collinear_sample():
    spec = zoo.load("euclid")
    b = compute_bundle(spec, np.zeros(3), [2.0, 0.0, 0.0])
    rep = fl.lemma1_independence(E1, [b])
    assert rep.dependent_samples == [0]
    assert rep.degenerate_samples == [0]
    assert rep.violations == [] and rep.notes
    assert rep.margins[0] <= 1e-12


def test_independence_precondition_failures():
    rep = fl.lemma1_independence(E1, bundles("randers"))
    assert not rep.precondition_ok and not rep.independent
    assert "SC-condition" in rep.precondition_failures[0]
    rep = fl.lemma1_independence(ZERO3, bundles("euclid"))
    assert any("B = 0" in f for f in rep.precondition_failures)


def test_independence_on_randers_nullspace_is_vacuous():
    ns = fl.find_sc_field(zoo.load("randers"), np.zeros(3), 20, 42)
    assert ns.basis == []  # no admissible field, nothing to assert


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 100.0), st.lists(st.floats(-1, 1), min_size=3, max_size=3).filter(
    lambda v: np.linalg.norm(v) > 0.05))
def test_sc_residual_is_scale_free(c, v):
    bs = bundles("randers", 10)
    a = fl.check_sc(VectorFieldSpec.constant(v), bs)
    s = fl.check_sc(VectorFieldSpec.constant([c * t for t in v]), bs)
    assert s.residual_rel == pytest.approx(a.residual_rel, rel=1e-9, abs=1e-15)
    assert s.holds == a.holds
    # raw contraction scales linearly
    b = bs[0]
    raw = np.abs(np.einsum("h,hij->ij", np.array(v), b.C_lo)).max()
    raw_c = np.abs(np.einsum("h,hij->ij", c * np.array(v), b.C_lo)).max()
    assert raw_c == pytest.approx(c * raw, rel=1e-12)


def test_concurrent_implies_sc(zoo_name):
    n = zoo.load(zoo_name).dim
    vf = VectorFieldSpec.from_strings([f"-x{i + 1}" for i in range(n)])
    conc = fl.check_concurrent(vf, bundles(zoo_name))
    if conc.holds:
        assert fl.check_sc(vf, bundles(zoo_name)).holds
