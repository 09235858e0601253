"""Special Finsler space conditions evaluated over sampled tensor bundles.

Each check returns a :class:`ConditionVerdict`.  Equation-type conditions
(lhs = rhs) report ``||lhs - rhs|| / scale(lhs)``; vanishing-type conditions
(Riemannian, Landsberg, T-condition) report ``||X|| / scale(g)``.  Auxiliary
fields (r, t, K_h, a_k, b_k) are fitted per support element by linear least
squares with the structural constraints eliminated exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from finsler.errors import DegenerateError, DimensionError, FinslerError
from finsler.tensors import TensorBundle, scale

DEFAULT_TOL = 1e-6
DEGENERATE_ATOL = 1e-10

CONDITIONS = (
    "Riemannian",
    "C-reducible",
    "semi-C-reducible",
    "quasi-C-reducible",
    "C3-like",
    "Ch-recurrent",
    "P2-like",
    "P-reducible",
    "Landsberg",
    "T-condition",
)

TOL_KEYS = {
    "Riemannian": "riemannian",
    "C-reducible": "c_reducible",
    "semi-C-reducible": "semi_c_reducible",
    "quasi-C-reducible": "quasi_c_reducible",
    "C3-like": "c3_like",
    "Ch-recurrent": "ch_recurrent",
    "P2-like": "p2_like",
    "P-reducible": "p_reducible",
    "Landsberg": "landsberg",
    "T-condition": "t_condition",
}


@dataclass
class ConditionVerdict:
    condition: str
    residual_rel: float
    holds: bool
    degenerate: bool
    samples_used: int
    tol: float
    fitted: dict = field(default_factory=dict)
    dimension_warning: str | None = None
    notes: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "condition": self.condition,
            "residual_rel": self.residual_rel,
            "holds": self.holds,
            "degenerate": self.degenerate,
            "samples_used": self.samples_used,
            "tol": self.tol,
            "fitted": self.fitted,
            "dimension_warning": self.dimension_warning,
            "notes": list(self.notes),
        }


def _require(bundles: Sequence[TensorBundle]) -> int:
    if not bundles:
        raise FinslerError("at least one tensor bundle is required")
    return bundles[0].n


def is_zero(t: np.ndarray, b: TensorBundle) -> bool:
    return float(np.linalg.norm(t)) <= DEGENERATE_ATOL * scale(b.g)


def cartan_vanishes(b: TensorBundle) -> bool:
    return is_zero(b.C_lo, b)


def vanishing_residual(t: np.ndarray, b: TensorBundle) -> float:
    return float(np.linalg.norm(t)) / scale(b.g)


def equation_residual(lhs: np.ndarray, rhs: np.ndarray) -> float:
    return float(np.linalg.norm(lhs - rhs)) / scale(lhs)


def cyc(s: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Cyclic sum s_ij v_k + s_jk v_i + s_ki v_j."""
    return np.einsum("ij,k->ijk", s, v) + np.einsum("jk,i->ijk", s, v) + np.einsum("ki,j->ijk", s, v)


def _verdict(name, residuals, tol, degenerate, n_used, **kw) -> ConditionVerdict:
    res = max(residuals) if residuals else 0.0
    holds = bool(degenerate or res <= tol)
    return ConditionVerdict(name, float(res), holds, bool(degenerate), n_used, tol, **kw)


def _dim_check(n: int, minimum: int, name: str) -> None:
    if n < minimum:
        raise DimensionError(f"{name} is defined for dimension n >= {minimum}, got n = {n}")


def _dim_warning(n: int, minimum: int) -> str | None:
    return None if n >= minimum else f"condition stated for n >= {minimum}; evaluated at n = {n}"


# --------------------------------------------------------------------------

def is_riemannian(bundles: Sequence[TensorBundle], tol: float = DEFAULT_TOL) -> ConditionVerdict:
    _require(bundles)
    res = [vanishing_residual(b.C_lo, b) for b in bundles]
    return _verdict("Riemannian", res, tol, False, len(bundles))


def check_c_reducible(bundles, tol: float = DEFAULT_TOL) -> ConditionVerdict:
    n = _require(bundles)
    _dim_check(n, 3, "C-reducibility")
    res = [equation_residual(b.C_lo, cyc(b.h, b.C_mean) / (n + 1)) for b in bundles]
    degen = all(cartan_vanishes(b) for b in bundles)
    return _verdict("C-reducible", res, tol, degen, len(bundles))


def fit_semi_c_reducible(bundles, tol: float = DEFAULT_TOL) -> ConditionVerdict:
    """Fit r (and t = 1 - r) per support element.

    With t eliminated the model is linear in r:
    C - CCC/C^2 = r (cyc(h, C)/(n+1) - CCC/C^2).
    """
    n = _require(bundles)
    _dim_check(n, 3, "semi-C-reducibility")
    rs, ts, res, notes = [], [], [], []
    used = 0
    for b in bundles:
        if cartan_vanishes(b) or b.C_norm2 <= DEGENERATE_ATOL**2:
            if not cartan_vanishes(b):
                notes.append("C_i = 0 with C_ijk != 0 at a sample; cubic term undefined")
                res.append(1.0)
            continue
        used += 1
        ccc = np.einsum("i,j,k->ijk", b.C_mean, b.C_mean, b.C_mean) / b.C_norm2
        A = cyc(b.h, b.C_mean) / (n + 1) - ccc
        R = b.C_lo - ccc
        aa = float(np.sum(A * A))
        r = float(np.sum(A * R)) / aa if aa > 0 else 0.0
        t = 1.0 - r
        rs.append(r)
        ts.append(t)
        res.append(equation_residual(b.C_lo, r * cyc(b.h, b.C_mean) / (n + 1) + t * ccc))
    degen = used == 0 and not notes
    fitted = {} if degen else {"r": rs, "t": ts}
    return _verdict("semi-C-reducible", res, tol, degen, len(bundles), fitted=fitted, notes=notes)


def check_quasi_c_reducible(bundles, tol: float = DEFAULT_TOL, strict: bool = True) -> ConditionVerdict:
    """``strict=False`` evaluates below n = 3 with a dimension warning instead of raising."""
    n = _require(bundles)
    if strict:
        _dim_check(n, 3, "quasi-C-reducibility")
    res = [equation_residual(b.C_lo, cyc(b.h, b.C_mean)) for b in bundles]
    degen = all(cartan_vanishes(b) for b in bundles)
    return _verdict("quasi-C-reducible", res, tol, degen, len(bundles), dimension_warning=_dim_warning(n, 3))


def indicatory_basis(y: np.ndarray) -> np.ndarray:
    """Orthonormal (Euclidean) basis of {v : v . y = 0}, shape (n, n-1)."""
    _, _, vt = np.linalg.svd(y.reshape(1, -1))
    return vt[1:].T


def c3_design(b: TensorBundle, b_zero: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Design matrix (n^3, k) for C_ijk = cyc{h_ij a_k + C_i C_j b_k} and the basis Q."""
    Q = indicatory_basis(b.y)
    cc = np.outer(b.C_mean, b.C_mean)
    cols = [cyc(b.h, q).ravel() for q in Q.T]
    if not b_zero:
        cols += [cyc(cc, q).ravel() for q in Q.T]
    return np.stack(cols, axis=1), Q


def fit_c3_at(b: TensorBundle, b_zero: bool = False) -> tuple[np.ndarray, np.ndarray, float]:
    """(a_k, b_k, residual) at one support element, with a.y = b.y = 0."""
    M, Q = c3_design(b, b_zero)
    coef, *_ = np.linalg.lstsq(M, b.C_lo.ravel(), rcond=None)
    k = Q.shape[1]
    a = Q @ coef[:k]
    bb = np.zeros_like(a) if b_zero else Q @ coef[k:]
    return a, bb, equation_residual(b.C_lo, c3_model(b, a, bb))


def c3_model(b: TensorBundle, a: np.ndarray, bvec: np.ndarray) -> np.ndarray:
    return cyc(b.h, a) + cyc(np.outer(b.C_mean, b.C_mean), bvec)


def fit_c3_like(bundles, tol: float = DEFAULT_TOL, b_zero: bool = False) -> ConditionVerdict:
    n = _require(bundles)
    a_s, b_s, res = [], [], []
    for b in bundles:
        if cartan_vanishes(b):
            a_s.append([0.0] * n)
            b_s.append([0.0] * n)
            res.append(0.0)
            continue
        a, bb, r = fit_c3_at(b, b_zero)
        a_s.append(a.tolist())
        b_s.append(bb.tolist())
        res.append(r)
    degen = all(cartan_vanishes(b) for b in bundles)
    return _verdict("C3-like", res, tol, degen, len(bundles), fitted={"a": a_s, "b": b_s},
                    dimension_warning=_dim_warning(n, 4))


# --------------------------------------------------------------------------
# Three-dimensional Moor frame

@dataclass
class MoorFrame:
    l: np.ndarray
    m: np.ndarray
    nvec: np.ndarray
    H: float
    I: float
    J: float
    L: float
    C: float  # sqrt(C^2)

    def reconstruct(self) -> np.ndarray:
        """L C_ijk = H mmm - J cyc(mmn) + I cyc(mnn) + J nnn, divided by L."""
        m, n = self.m, self.nvec
        mmm = np.einsum("i,j,k->ijk", m, m, m)
        nnn = np.einsum("i,j,k->ijk", n, n, n)
        mmn = cyc(np.outer(m, m), n)
        mnn = cyc(np.outer(n, n), m)
        return (self.H * mmm - self.J * mmn + self.I * mnn + self.J * nnn) / self.L

    def printed_ab(self) -> tuple[np.ndarray, np.ndarray]:
        """The a_k, b_k coefficient vectors as printed for the 3D form."""
        a = (self.I * self.m + self.J / 3.0 * self.nvec) / self.L
        b = ((self.H / 3.0 - self.I) * self.m + 4.0 * self.J / 3.0 * self.nvec) / (self.L * self.C**2)
        return a, b


def moor_frame_3d(b: TensorBundle) -> MoorFrame:
    if b.n != 3:
        raise DimensionError(f"the Moor frame needs n = 3, got n = {b.n}")
    if cartan_vanishes(b) or b.C_norm2 <= DEGENERATE_ATOL**2:
        raise DegenerateError("C_i = 0: the Moor frame is undefined (metric is Riemannian)")
    gi = b.g_inv
    l = b.l_lo
    C = float(np.sqrt(b.C_norm2))
    m = b.C_mean / C
    l_up, m_up = gi @ l, gi @ m
    eps = np.zeros((3, 3, 3))
    eps[0, 1, 2] = eps[1, 2, 0] = eps[2, 0, 1] = 1.0
    eps[0, 2, 1] = eps[2, 1, 0] = eps[1, 0, 2] = -1.0
    nvec = np.sqrt(np.linalg.det(b.g)) * np.einsum("ijk,j,k->i", eps, l_up, m_up)
    n_up = gi @ nvec
    L = b.F
    H = L * float(np.einsum("ijk,i,j,k->", b.C_lo, m_up, m_up, m_up))
    I = L * float(np.einsum("ijk,i,j,k->", b.C_lo, m_up, n_up, n_up))
    J = L * float(np.einsum("ijk,i,j,k->", b.C_lo, n_up, n_up, n_up))
    return MoorFrame(l, m, nvec, H, I, J, L, C)


def frame_orthonormality(b: TensorBundle, f: MoorFrame) -> float:
    """Max deviation of the g^{-1} Gram matrix of (l, m, n) from the identity."""
    F = np.stack([f.l, f.m, f.nvec])
    return float(np.max(np.abs(F @ b.g_inv @ F.T - np.eye(3))))


def angular_frame_residual(b: TensorBundle, f: MoorFrame) -> float:
    """||h - (m m + n n)|| / scale(h)."""
    return equation_residual(b.h, np.outer(f.m, f.m) + np.outer(f.nvec, f.nvec))


# --------------------------------------------------------------------------
# Horizontal conditions

def fit_recurrence(b: TensorBundle) -> np.ndarray:
    """K_h minimising ||C_ijk|h - C_ijk K_h|| (one decoupled LSQ per h)."""
    cc = float(np.sum(b.C_lo * b.C_lo))
    return np.einsum("ijkh,ijk->h", b.C_hder, b.C_lo) / cc


def check_ch_recurrent(bundles, tol: float = DEFAULT_TOL) -> ConditionVerdict:
    _require(bundles)
    Ks, res, notes = [], [], []
    for b in bundles:
        if cartan_vanishes(b):
            res.append(0.0 if is_zero(b.C_hder, b) else 1.0)
            Ks.append(None)
            continue
        K = fit_recurrence(b)
        Ks.append(K.tolist())
        res.append(equation_residual(b.C_hder, np.einsum("ijk,h->ijkh", b.C_lo, K)))
    degen = all(cartan_vanishes(b) for b in bundles)
    if degen:
        notes.append("C vanishes: K_h undetermined (rank deficiency)")
    k_norm = max((float(np.linalg.norm(k)) for k in Ks if k is not None), default=0.0)
    return _verdict("Ch-recurrent", res, tol, degen, len(bundles), fitted={"K": Ks, "max_K_norm": k_norm},
                    notes=notes)


def p2_design(b: TensorBundle) -> np.ndarray:
    """Matrix M with (M K)_hijk = K_h C_ijk - K_i C_kjh."""
    n = b.n
    eye = np.eye(n)
    M = np.einsum("hm,ijk->hijkm", eye, b.C_lo) - np.einsum("im,kjh->hijkm", eye, b.C_lo)
    return M.reshape(n**4, n)


def fit_p2(b: TensorBundle) -> tuple[np.ndarray, float]:
    M = p2_design(b)
    K, *_ = np.linalg.lstsq(M, b.P.ravel(), rcond=None)
    return K, equation_residual(b.P, (M @ K).reshape(b.P.shape))


def check_p2_like(bundles, tol: float = DEFAULT_TOL) -> ConditionVerdict:
    _require(bundles)
    Ks, res = [], []
    degen_all = True
    for b in bundles:
        if cartan_vanishes(b) and is_zero(b.P, b):
            Ks.append(None)
            res.append(0.0)
            continue
        degen_all = False
        K, r = fit_p2(b)
        Ks.append(K.tolist())
        res.append(r)
    k_norm = max((float(np.linalg.norm(k)) for k in Ks if k is not None), default=0.0)
    return _verdict("P2-like", res, tol, degen_all, len(bundles), fitted={"K": Ks, "max_K_norm": k_norm})


def check_p_reducible_landsberg(bundles, tol: float = DEFAULT_TOL, landsberg_tol: float | None = None,
                                strict: bool = True):
    """(P-reducible verdict, Landsberg verdict)."""
    n = _require(bundles)
    if strict:
        _dim_check(n, 3, "P-reducibility")
    res_p = []
    degen_p = True
    for b in bundles:
        rhs = cyc(b.h, b.P_mean) / (n + 1)
        if not (is_zero(b.P_lo, b) and is_zero(rhs, b)):
            degen_p = False
        res_p.append(equation_residual(b.P_lo, rhs))
    gap = max(float(np.linalg.norm(b.P_mean - b.C_mean)) / scale(b.C_mean) for b in bundles)
    p_red = _verdict("P-reducible", res_p, tol, degen_p, len(bundles),
                     fitted={"P_mean_minus_C_mean": gap}, dimension_warning=_dim_warning(n, 3),
                     notes=["P_k taken as g^{ij} P_ijk; its distance from C_k is reported, not assumed"])
    return p_red, check_landsberg(bundles, tol if landsberg_tol is None else landsberg_tol)


def check_t_condition(bundles, tol: float = DEFAULT_TOL) -> ConditionVerdict:
    _require(bundles)
    res = [vanishing_residual(b.T, b) for b in bundles]
    degen = all(cartan_vanishes(b) for b in bundles)
    return _verdict("T-condition", res, tol, degen, len(bundles))


def classify(bundles, tolerances: dict | None = None) -> list[ConditionVerdict]:
    """Every condition in :data:`CONDITIONS` order; n < 3 skips the n >= 3 ones."""
    tolerances = tolerances or {}

    def tol(name):
        return float(tolerances.get(TOL_KEYS[name], DEFAULT_TOL))

    n = _require(bundles)
    out = [is_riemannian(bundles, tol("Riemannian"))]
    if n >= 3:
        out += [
            check_c_reducible(bundles, tol("C-reducible")),
            fit_semi_c_reducible(bundles, tol("semi-C-reducible")),
            check_quasi_c_reducible(bundles, tol("quasi-C-reducible")),
        ]
    out.append(fit_c3_like(bundles, tol("C3-like")))
    out.append(check_ch_recurrent(bundles, tol("Ch-recurrent")))
    out.append(check_p2_like(bundles, tol("P2-like")))
    if n >= 3:
        out.extend(check_p_reducible_landsberg(bundles, tol("P-reducible"), tol("Landsberg")))
    else:
        out.append(check_landsberg(bundles, tol("Landsberg")))
    out.append(check_t_condition(bundles, tol("T-condition")))
    return out


def check_landsberg(bundles, tol: float = DEFAULT_TOL) -> ConditionVerdict:
    _require(bundles)
    res = [vanishing_residual(b.P_lo, b) for b in bundles]
    return _verdict("Landsberg", res, tol, all(cartan_vanishes(b) for b in bundles), len(bundles))
