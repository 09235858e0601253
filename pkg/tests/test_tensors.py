import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from finsler import tensors as tn
from finsler import zoo
from finsler.errors import NotPositiveDefiniteError
from finsler.specfile import metric_from_text

from conftest import bundles

FIELDS = ("g", "g_inv", "l_lo", "h", "C_lo", "C_mixed", "C_mean", "G_spray", "N", "G_berwald",
          "Gamma", "C_hder", "C_hder0", "P", "P_lo", "P_mean", "T", "T2")


def rel(a, b):
    return float(np.linalg.norm(a - b)) / (1.0 + float(np.linalg.norm(b)))


def exp_levi_civita(x1):
    """Levi-Civita symbols of dx1^2 + e^{2 x1} dx2^2, indexed [i, j, k] = Gamma^i_jk."""
    G = np.zeros((2, 2, 2))
    G[0, 1, 1] = -math.exp(2 * x1)
    G[1, 0, 1] = G[1, 1, 0] = 1.0
    return G


def randers_metric(y, b):
    """g_ij of alpha + beta with alpha Euclidean, from the standard closed form."""
    a = np.linalg.norm(y)
    u = y / a
    F = a + b @ y
    return (F / a) * (np.eye(len(y)) - np.outer(u, u)) + np.outer(u + b, u + b)


def test_euclidean_metric_block():
    b = tn.compute_bundle(zoo.load("euclid"), [0.3, 0.1, -2], [1.0, -2.0, 0.5])
    np.testing.assert_allclose(b.g, np.eye(3), atol=1e-15)
    np.testing.assert_allclose(b.h @ b.y, 0.0, atol=1e-15)
    np.testing.assert_allclose(b.l_lo, b.y / np.linalg.norm(b.y), atol=1e-15)
    np.testing.assert_allclose(b.g @ b.g_inv, np.eye(3), atol=1e-12)


def test_riemannian_metric_is_fibre_independent():
    spec = zoo.load("exp-riemann")
    x = np.array([0.4, -0.2])
    for y in ([1, 0], [0.3, -2], [-1, 1]):
        b = tn.compute_bundle(spec, x, y)
        np.testing.assert_allclose(b.g, np.diag([1.0, math.exp(0.8)]), rtol=1e-14, atol=1e-14)


def test_randers_metric_against_closed_form_and_oracle():
    spec = zoo.load("randers")
    beta = np.array([0.1, 0.0, 0.0])
    for y in ([1, 0, 0], [0.3, -0.5, 0.8], [-1, 2, 0.1]):
        y = np.array(y, float)
        jet = tn.compute_bundle(spec, np.zeros(3), y)
        fd = tn.compute_bundle(spec, np.zeros(3), y, "fd")
        np.testing.assert_allclose(jet.g, randers_metric(y, beta), rtol=1e-13, atol=1e-14)
        assert np.max(np.abs(jet.g - fd.g) / (1 + np.abs(fd.g))) <= 1e-5


def test_randers_cartan_against_oracle():
    spec = zoo.load("randers")
    y = np.ones(3) / math.sqrt(3)
    jet = tn.compute_bundle(spec, np.zeros(3), y)
    fd = tn.compute_bundle(spec, np.zeros(3), y, "fd")
    assert np.max(np.abs(jet.C_lo - fd.C_lo) / (1 + np.abs(fd.C_lo))) <= 1e-5
    assert jet.C_norm2 > 0


def test_randers_cartan_by_differencing_the_closed_form_metric():
    # C_ijk = (1/2) d g_ij / d y^k, with g from the closed form differenced centrally
    spec = zoo.load("randers")
    beta = np.array([0.1, 0.0, 0.0])
    y = np.array([0.3, -0.5, 0.8])
    b = tn.compute_bundle(spec, np.zeros(3), y)
    h = 1e-5
    C = np.zeros((3, 3, 3))
    for k in range(3):
        e = np.eye(3)[k] * h
        C[:, :, k] = 0.25 * (randers_metric(y + e, beta) - randers_metric(y - e, beta)) / h
    np.testing.assert_allclose(b.C_lo, C, atol=1e-8)


@pytest.mark.parametrize("name", ["euclid", "exp-riemann"])
def test_riemannian_cartan_vanishes(name):
    for b in bundles(name):
        assert np.max(np.abs(b.C_lo)) <= 1e-12 and b.C_norm2 <= 1e-24
        assert np.max(np.abs(b.P)) <= 1e-12
        assert np.max(np.abs(b.T)) <= 1e-12 and np.max(np.abs(b.T2)) <= 1e-12


def test_exp_metric_christoffel_symbols():
    for b in bundles("exp-riemann"):
        np.testing.assert_allclose(b.Gamma, exp_levi_civita(b.x[0]), atol=1e-6)


def test_exp_metric_spray_and_berwald():
    # Riemannian: G^i = (1/2) gamma^i_jk y^j y^k, N^i_j = gamma^i_jk y^k, G^i_jk = gamma^i_jk
    for b in bundles("exp-riemann", 10):
        gam = exp_levi_civita(b.x[0])
        np.testing.assert_allclose(b.G_spray, 0.5 * np.einsum("ijk,j,k->i", gam, b.y, b.y), atol=1e-12)
        np.testing.assert_allclose(b.N, np.einsum("ijk,k->ij", gam, b.y), atol=1e-12)
        np.testing.assert_allclose(b.G_berwald, gam, atol=1e-12)


@pytest.mark.parametrize("name", zoo.LOCALLY_MINKOWSKI)
def test_locally_minkowski_connections_vanish(name):
    for b in bundles(name, 10):
        for key in ("G_spray", "N", "G_berwald", "Gamma", "C_hder", "C_hder0", "P"):
            assert np.max(np.abs(getattr(b, key))) <= 1e-12, key


def test_spray_euler_relation(zoo_name):
    for b in bundles(zoo_name):
        assert np.linalg.norm(b.N @ b.y - 2 * b.G_spray) <= 1e-9 * (1 + np.linalg.norm(b.G_spray))


def test_connection_symmetries(zoo_name):
    for b in bundles(zoo_name):
        np.testing.assert_allclose(b.G_berwald, np.swapaxes(b.G_berwald, 1, 2), atol=1e-10)
        np.testing.assert_allclose(b.Gamma, np.swapaxes(b.Gamma, 1, 2), atol=1e-10)
        for perm in ((1, 0, 2, 3), (0, 2, 1, 3)):
            np.testing.assert_allclose(b.C_hder, np.transpose(b.C_hder, perm), atol=1e-10)


def test_cartan_identities(zoo_name):
    for b in bundles(zoo_name):
        scale = np.linalg.norm(b.C_lo) * np.linalg.norm(b.y)
        assert np.max(np.abs(b.C_lo @ b.y)) <= 1e-10 * max(scale, 1e-300) + 1e-15
        for perm in ((1, 0, 2), (0, 2, 1), (2, 1, 0), (1, 2, 0), (2, 0, 1)):
            np.testing.assert_allclose(b.C_lo, np.transpose(b.C_lo, perm), atol=1e-14)
        np.testing.assert_allclose(b.C_mixed, np.einsum("ir,rjk->ijk", b.g_inv, b.C_lo), atol=1e-14)
        assert b.C_norm2 >= 0


def test_homogeneity_identities(zoo_name):
    for b in bundles(zoo_name):
        assert abs(b.y @ b.g @ b.y - b.F**2) <= 1e-10 * b.F**2
        assert np.linalg.norm(b.h @ b.y) <= 1e-9 * (1 + np.linalg.norm(b.h)) * np.linalg.norm(b.y)
        assert abs(b.l_lo @ b.g_inv @ b.l_lo - 1) <= 1e-9


def test_angular_metric_from_second_derivative_of_F(zoo_name):
    spec = zoo.load(zoo_name)
    for b in bundles(zoo_name, 10):
        d = tn.jet_derivatives(spec, b.x, b.y)
        assert rel(b.h, b.F * d.Fyy) <= 1e-9


def test_t_tensor_identities(zoo_name):
    spec = zoo.load(zoo_name)
    for b in bundles(zoo_name):
        s = 1 + np.linalg.norm(b.T)
        assert np.max(np.abs(b.T @ b.y)) <= 1e-9 * s * np.linalg.norm(b.y)
        for perm in ((1, 0, 2, 3), (0, 2, 1, 3), (0, 1, 3, 2), (3, 1, 2, 0)):
            np.testing.assert_allclose(b.T, np.transpose(b.T, perm), atol=1e-9 * s)
        np.testing.assert_allclose(b.T2, b.T2.T, atol=1e-12 * s)
        np.testing.assert_allclose(b.T2, np.einsum("ijhk,hk->ij", b.T, b.g_inv), atol=1e-12 * s)
    for b in bundles(zoo_name, 5):
        d = tn.jet_derivatives(spec, b.x, b.y)
        t2 = tn.t2_explicit(d, b.C_lo, b.C_mixed, b.C_mean, b.l_lo, b.g_inv)
        assert rel(b.T2, t2) <= 1e-9


def test_quartic_violates_the_t_condition():
    for b in bundles("quartic4", 10):
        fd = tn.compute_bundle(zoo.load("quartic4"), b.x, b.y, "fd")
        assert np.linalg.norm(b.T) > 0.01 * (1 + np.linalg.norm(b.C_lo))
        assert rel(b.T, fd.T) <= 1e-4


def test_hv_curvature_assembly():
    # rebuild P from the stored pieces with an explicit loop
    b = bundles("randers-perturbed", 3)[0]
    n = b.n
    Cm0 = b.g_inv @ b.C_hder0.reshape(n, -1)
    Cm0 = Cm0.reshape(n, n, n)
    P = np.zeros((n,) * 4)
    for h in range(n):
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    P[h, i, j, k] = (b.C_hder[i, j, k, h] - b.C_hder[h, j, k, i]
                                     + sum(b.C_lo[h, j, r] * Cm0[r, i, k] - b.C_lo[i, j, r] * Cm0[r, h, k]
                                           for r in range(n)))
    np.testing.assert_allclose(b.P, P, atol=1e-14)
    np.testing.assert_allclose(b.P_lo, np.einsum("ijkh,h->ijk", b.C_hder, b.y), atol=1e-14)


def test_perturbed_randers_against_fd_pipeline():
    spec = zoo.load("randers-perturbed")
    for b in bundles("randers-perturbed", 5):
        fd = tn.compute_bundle(spec, b.x, b.y, "fd")
        assert np.max(np.abs(b.C_hder - fd.C_hder)) / (1 + np.max(np.abs(fd.C_hder))) <= 1e-4
        assert rel(b.P, fd.P) <= 1e-4
        assert np.linalg.norm(b.P) > 1e-6


def test_two_pipelines_agree_on_every_tensor(zoo_name):
    spec = zoo.load(zoo_name)
    for b in bundles(zoo_name, 3):
        fd = tn.compute_bundle(spec, b.x, b.y, "fd")
        for key in FIELDS:
            assert rel(getattr(b, key), getattr(fd, key)) <= 1e-4, key


def test_degenerate_metric_is_rejected():
    spec = metric_from_text('name = "lin"\ndim = 2\nF = "y1"')
    with pytest.raises(NotPositiveDefiniteError) as err:
        tn.compute_bundle(spec, [0, 0], [1, 1])
    assert err.value.min_eigenvalue == pytest.approx(0.0, abs=1e-12)


def test_unknown_pipeline():
    with pytest.raises(ValueError):
        tn.compute_bundle(zoo.load("euclid"), [0, 0, 0], [1, 0, 0], "symbolic")


def test_p_skew_diagnostic_is_finite(zoo_name):
    for b in bundles(zoo_name, 5):
        assert np.isfinite(tn.p_skew_residual(b))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=3, max_size=3).filter(lambda v: np.linalg.norm(v) > 0.1),
       st.floats(-0.5, 0.5))
def test_randers_closed_form_property(y, bval):
    spec = metric_from_text(f'name = "r"\ndim = 3\nF = "sqrt(y1^2 + y2^2 + y3^2) + {bval!r}*y2"')
    y = np.array(y)
    b = tn.compute_bundle(spec, np.zeros(3), y)
    np.testing.assert_allclose(b.g, randers_metric(y, np.array([0, bval, 0])), rtol=1e-11, atol=1e-12)
    # Randers metrics are C-reducible: C = (1/(n+1)) cyc(h, C_mean)
    s = b.C_mean
    model = (np.einsum("ij,k->ijk", b.h, s) + np.einsum("jk,i->ijk", b.h, s) + np.einsum("ki,j->ijk", b.h, s)) / 4
    np.testing.assert_allclose(b.C_lo, model, atol=1e-11 * (1 + np.abs(b.C_lo).max()))
