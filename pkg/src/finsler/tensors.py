"""Pointwise Finsler tensors at a support element (x, y).

Everything is assembled from the partial derivatives of the energy
E = F^2 / 2 collected in a :class:`DerivativeTable`.  The table comes either
from Taylor jets (exact to round-off) or from the finite-difference oracle;
the assembly code is shared, so comparing the two pipelines isolates the
derivative substrate.

Index conventions: arrays are dense, lower indices first in the order they
are written, so ``C_lo[i, j, k] = C_ijk``, ``C_mixed[i, j, k] = C^i_jk``,
``N[i, j] = N^i_j``, ``Gamma[i, j, k] = Gamma^i_jk``,
``C_hder[i, j, k, h] = C_ijk|h`` and ``P[h, i, j, k] = P_hijk``.  A
subscript 0 means contraction of the derivative index with y.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from finsler import jets
from finsler.errors import NotPositiveDefiniteError
from finsler.specfile import MetricSpec

PD_THRESHOLD = 1e-8  # min eigenvalue relative to the mean eigenvalue

_PATTERNS = ("y", "yy", "yyy", "yyyy", "x", "xy", "xyy", "xyyy")


@dataclass
class DerivativeTable:
    """Partials of E = F^2/2 (and of F itself for the jet pipeline)."""

    x: np.ndarray
    y: np.ndarray
    F: float
    E: float
    Ey: np.ndarray
    Eyy: np.ndarray
    Eyyy: np.ndarray
    Eyyyy: np.ndarray
    Ex: np.ndarray
    Exy: np.ndarray  # [a, b] = d_{x_a} d_{y_b} E
    Exyy: np.ndarray
    Exyyy: np.ndarray
    source: str = "jet"
    Fy: np.ndarray | None = None
    Fyy: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.x.size


def _from_coeffs(space: jets.JetSpace, c: np.ndarray, pattern: str) -> np.ndarray:
    pos, fac, shape = space.gather(pattern)
    return (c[pos] * fac).reshape(shape)


def jet_derivatives(spec: MetricSpec, x, y) -> DerivativeTable:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    J = jets.eval_jet(spec.expr, x, y, spec.params)
    E = (J * J) * 0.5
    t = {p: E.tensor(p) for p in _PATTERNS}
    return DerivativeTable(
        x, y, J.value, E.value, t["y"], t["yy"], t["yyy"], t["yyyy"], t["x"], t["xy"], t["xyy"], t["xyyy"],
        source="jet", Fy=J.tensor("y"), Fyy=J.tensor("yy"),
    )


def fd_derivatives(spec: MetricSpec, x, y, settings: jets.FDSettings = jets.FDSettings()) -> DerivativeTable:
    """Same table, every entry from :func:`finsler.jets.fd_derivatives`."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    space = jets.jet_space(n)
    which = [(e[:n], e[n:]) for e in space.monomials]
    d = jets.fd_derivatives(spec.expr, x, y, which, settings, spec.params)
    c = 0.5 * d / space.factorial  # Taylor-normalised coefficients of E
    t = {p: _from_coeffs(space, c, p) for p in _PATTERNS}
    E0 = float(c[0])
    return DerivativeTable(
        x, y, float(np.sqrt(2.0 * E0)), E0, t["y"], t["yy"], t["yyy"], t["yyyy"], t["x"], t["xy"], t["xyy"],
        t["xyyy"], source="fd",
    )


def derivatives(spec: MetricSpec, x, y, pipeline: str = "jet", settings: jets.FDSettings | None = None) -> DerivativeTable:
    if pipeline == "jet":
        return jet_derivatives(spec, x, y)
    if pipeline == "fd":
        return fd_derivatives(spec, x, y, settings or jets.FDSettings())
    raise ValueError(f"unknown pipeline {pipeline!r}")


def min_eigen_ratio(g: np.ndarray) -> tuple[float, float]:
    """(smallest eigenvalue, smallest / mean eigenvalue) of a symmetric matrix."""
    w = np.linalg.eigvalsh(0.5 * (g + g.T))
    mean = float(np.mean(np.abs(w)))
    return float(w[0]), (float(w[0]) / mean if mean > 0 else 0.0)


# --------------------------------------------------------------------------
# Blocks

def metric_block(d: DerivativeTable):
    """(g, g_inv, l_lo, h, F).  Raises if g is not positive-definite."""
    g = 0.5 * (d.Eyy + d.Eyy.T)
    lam, ratio = min_eigen_ratio(g)
    if not ratio > PD_THRESHOLD:
        raise NotPositiveDefiniteError("fundamental tensor is not positive-definite", lam)
    g_inv = np.linalg.inv(g)
    l_lo = d.Ey / d.F
    h = g - np.outer(l_lo, l_lo)
    return g, g_inv, l_lo, h, d.F


def cartan_block(d: DerivativeTable, g_inv: np.ndarray):
    """(C_lo, C_mixed, C_mean, C_norm2) with C_ijk = (1/2) d_k g_ij."""
    C_lo = 0.5 * d.Eyyy
    C_mixed = np.einsum("ir,rjk->ijk", g_inv, C_lo)
    C_mean = np.einsum("ijk,jk->i", C_lo, g_inv)
    C_norm2 = float(C_mean @ g_inv @ C_mean)
    return C_lo, C_mixed, C_mean, max(C_norm2, 0.0)


def _dginv(g_inv: np.ndarray, C_lo: np.ndarray) -> np.ndarray:
    # [i, l, j] = d_{y_j} g^{il} = -2 g^{ia} C_abj g^{bl}
    return -2.0 * np.einsum("ia,abj,bl->ilj", g_inv, C_lo, g_inv)


def spray_connections(d: DerivativeTable, g_inv: np.ndarray, C_lo: np.ndarray):
    """(G_spray, N, G_berwald, Gamma).

    G^i = (1/4) g^{il} (y^k d_k dot-d_l F^2 - d_l F^2); N and the Berwald
    coefficients are its first and second y-derivatives, expanded by the
    product rule so that only tabulated partials of E appear.
    """
    y = d.y
    A = y @ d.Exy - d.Ex  # A_l = y^k E_{x_k y_l} - E_{x_l}
    dA = d.Exy.T + np.einsum("k,klj->lj", y, d.Exyy) - d.Exy  # [l, j]
    ddA = (
        np.einsum("jlh->ljh", d.Exyy)
        + np.einsum("hlj->ljh", d.Exyy)
        + np.einsum("k,kljh->ljh", y, d.Exyyy)
        - d.Exyy
    )  # [l, j, h]
    D = 0.5 * d.Eyyyy  # d_r C_ijk
    dgi = _dginv(g_inv, C_lo)
    ddgi = -2.0 * (
        np.einsum("iah,abj,bl->iljh", dgi, C_lo, g_inv)
        + np.einsum("ia,abjh,bl->iljh", g_inv, D, g_inv)
        + np.einsum("ia,abj,blh->iljh", g_inv, C_lo, dgi)
    )
    G = 0.5 * g_inv @ A
    N = 0.5 * (np.einsum("ilj,l->ij", dgi, A) + g_inv @ dA)
    Gb = 0.5 * (
        np.einsum("iljh,l->ijh", ddgi, A)
        + np.einsum("ilj,lh->ijh", dgi, dA)
        + np.einsum("ilh,lj->ijh", dgi, dA)
        + np.einsum("il,ljh->ijh", g_inv, ddA)
    )
    # delta_j g_kr = d_{x_j} g_kr - N^s_j d_{y_s} g_kr
    dg = d.Exyy - 2.0 * np.einsum("sj,krs->jkr", N, C_lo)  # [j, k, r]
    Gamma = 0.5 * np.einsum(
        "ir,jkr->ijk", g_inv, dg + np.einsum("kjr->jkr", dg) - np.einsum("rjk->jkr", dg)
    )
    return G, N, Gb, Gamma


def delta_cartan(d: DerivativeTable, N: np.ndarray) -> np.ndarray:
    """[i, j, k, h] = delta_h C_ijk = d_{x_h} C_ijk - N^s_h d_{y_s} C_ijk."""
    dxC = 0.5 * np.einsum("hijk->ijkh", d.Exyyy)
    D = 0.5 * d.Eyyyy
    return dxC - np.einsum("sh,ijks->ijkh", N, D)


def cartan_h_derivative(d: DerivativeTable, C_lo: np.ndarray, N: np.ndarray, Gamma: np.ndarray):
    """(C_hder, C_hder0): horizontal Cartan covariant derivative of C_ijk."""
    C_hder = (
        delta_cartan(d, N)
        - np.einsum("mjk,mih->ijkh", C_lo, Gamma)
        - np.einsum("imk,mjh->ijkh", C_lo, Gamma)
        - np.einsum("ijm,mkh->ijkh", C_lo, Gamma)
    )
    C_hder0 = C_hder @ d.y
    return C_hder, C_hder0


def hv_curvature(C_lo: np.ndarray, C_hder: np.ndarray, C_hder0: np.ndarray, g_inv: np.ndarray):
    """(P, P_lo, P_mean).

    P_hijk = C_ijk|h - C_hjk|i + C_hjr C^r_ik|0 - C_ijr C^r_hk|0,
    P_ijk = C_ijk|0 and P_i = g^{jk} P_ijk.
    """
    Cm0 = np.einsum("rs,sik->rik", g_inv, C_hder0)
    P = (
        np.einsum("ijkh->hijk", C_hder)
        - np.einsum("hjki->hijk", C_hder)
        + np.einsum("hjr,rik->hijk", C_lo, Cm0)
        - np.einsum("ijr,rhk->hijk", C_lo, Cm0)
    )
    P_lo = C_hder0
    P_mean = np.einsum("ijk,jk->i", P_lo, g_inv)
    return P, P_lo, P_mean


def cartan_v_derivative(d: DerivativeTable, C_lo: np.ndarray, C_mixed: np.ndarray) -> np.ndarray:
    """[h, i, j, k] = C_hij|_k (vertical Cartan covariant derivative)."""
    D = 0.5 * d.Eyyyy
    return (
        D
        - np.einsum("mij,mhk->hijk", C_lo, C_mixed)
        - np.einsum("hmj,mik->hijk", C_lo, C_mixed)
        - np.einsum("him,mjk->hijk", C_lo, C_mixed)
    )


def t_tensor(d: DerivativeTable, C_lo: np.ndarray, C_mixed: np.ndarray, l_lo: np.ndarray, g_inv: np.ndarray):
    """(T, T2).

    T_hijk = F C_hij|_k + C_hij l_k + C_hik l_j + C_hjk l_i + C_ijk l_h and
    T_ij = T_ijhk g^hk.
    """
    Cv = cartan_v_derivative(d, C_lo, C_mixed)
    T = (
        d.F * Cv
        + np.einsum("hij,k->hijk", C_lo, l_lo)
        + np.einsum("hik,j->hijk", C_lo, l_lo)
        + np.einsum("hjk,i->hijk", C_lo, l_lo)
        + np.einsum("ijk,h->hijk", C_lo, l_lo)
    )
    T2 = np.einsum("ijhk,hk->ij", T, g_inv)
    return T, T2


def t2_explicit(d: DerivativeTable, C_lo, C_mixed, C_mean, l_lo, g_inv) -> np.ndarray:
    """F C_i|_j + l_i C_j + l_j C_i, computed without forming T."""
    D = 0.5 * d.Eyyyy
    dC_mean = np.einsum("iklj,kl->ij", D, g_inv) + np.einsum("ikl,klj->ij", C_lo, _dginv(g_inv, C_lo))
    C_i_vj = dC_mean - np.einsum("m,mij->ij", C_mean, C_mixed)
    return d.F * C_i_vj + np.outer(l_lo, C_mean) + np.outer(C_mean, l_lo)


# --------------------------------------------------------------------------
# Bundle

@dataclass
class TensorBundle:
    """All pointwise tensors at one support element."""

    x: np.ndarray
    y: np.ndarray
    F: float
    g: np.ndarray
    g_inv: np.ndarray
    l_lo: np.ndarray
    h: np.ndarray
    C_lo: np.ndarray
    C_mixed: np.ndarray
    C_mean: np.ndarray
    C_norm2: float
    G_spray: np.ndarray
    N: np.ndarray
    G_berwald: np.ndarray
    Gamma: np.ndarray
    C_hder: np.ndarray
    C_hder0: np.ndarray
    P: np.ndarray
    P_lo: np.ndarray
    P_mean: np.ndarray
    T: np.ndarray
    T2: np.ndarray
    min_eig: float
    source: str = "jet"

    @property
    def n(self) -> int:
        return self.x.size

    @property
    def l_up(self) -> np.ndarray:
        return self.y / self.F

    def arrays(self) -> dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self) if isinstance(getattr(self, f.name), np.ndarray)}


def bundle_from_table(d: DerivativeTable) -> TensorBundle:
    g, g_inv, l_lo, h, F = metric_block(d)
    C_lo, C_mixed, C_mean, C_norm2 = cartan_block(d, g_inv)
    G, N, Gb, Gamma = spray_connections(d, g_inv, C_lo)
    C_hder, C_hder0 = cartan_h_derivative(d, C_lo, N, Gamma)
    P, P_lo, P_mean = hv_curvature(C_lo, C_hder, C_hder0, g_inv)
    T, T2 = t_tensor(d, C_lo, C_mixed, l_lo, g_inv)
    return TensorBundle(
        d.x, d.y, F, g, g_inv, l_lo, h, C_lo, C_mixed, C_mean, C_norm2, G, N, Gb, Gamma,
        C_hder, C_hder0, P, P_lo, P_mean, T, T2, min_eigen_ratio(g)[0], d.source,
    )


def compute_bundle(spec: MetricSpec, x, y, pipeline: str = "jet", settings: jets.FDSettings | None = None) -> TensorBundle:
    """Every tensor at (x, y) through the chosen derivative pipeline."""
    return bundle_from_table(derivatives(spec, x, y, pipeline, settings))


def scale(t: np.ndarray) -> float:
    """Per-tensor scale used to normalise residuals: 1 + Frobenius norm."""
    return 1.0 + float(np.linalg.norm(t))


def p_skew_residual(b: TensorBundle) -> float:
    """Diagnostic: ||P_hijk + P_ihjk|| / scale(P); not an invariant of the construction."""
    return float(np.linalg.norm(b.P + np.einsum("hijk->ihjk", b.P))) / scale(b.P)
