"""Vector-field conditions over sampled tensor bundles.

Fields depend on x only.  Values and first x-derivatives come from jets: a
component field is lifted over ``(x, 1)`` jets, a gradient field
``sigma_h = d sigma / d x^h`` takes the gradient and Hessian of sigma.

Residuals are relative: the SC residual divides ``|B^h C_hij|`` by
``||B|| * scale(C)`` so it does not depend on the length of B.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from finsler import jets
from finsler.errors import DimensionError, EmptyRegionError, FinslerError
from finsler.sampling import sample_bundles
from finsler.spaces import DEFAULT_TOL, cartan_vanishes
from finsler.specfile import MetricSpec, VectorFieldSpec
from finsler.tensors import TensorBundle, scale

ZERO_FIELD_ATOL = 1e-14
NULLSPACE_RTOL = 1e-8
NULLSPACE_ATOL = 1e-10
INDEPENDENCE_THRESHOLD = 1e-6


def field_at(vf: VectorFieldSpec, x) -> tuple[np.ndarray, np.ndarray]:
    """``(B, dB)`` at x with ``dB[i, j] = d_j B^i``."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if vf.dim != n:
        raise DimensionError(f"field {vf.name!r} has dimension {vf.dim}, chart has {n}")
    ones = np.ones(n)
    if vf.sigma is not None:
        J = jets.eval_jet(vf.sigma, x, ones, vf.params, jets.jet_space(n, 2, 2))
        return J.tensor("x"), J.tensor("xx")
    space = jets.jet_space(n, 1, 1)
    vals = np.empty(n)
    jac = np.empty((n, n))
    for i, comp in enumerate(vf.components):
        J = jets.eval_jet(comp, x, ones, vf.params, space)
        vals[i] = J.value
        jac[i] = J.tensor("x")
    return vals, jac


def field_values(vf: VectorFieldSpec, x) -> np.ndarray:
    return field_at(vf, x)[0]


@dataclass
class FieldCheckResult:
    condition: str
    residual_rel: float
    holds: bool
    per_sample: list[tuple[int, float]]
    tol: float
    extra: dict = field(default_factory=dict)
    zero_field: bool = False

    def as_dict(self) -> dict:
        return {
            "condition": self.condition,
            "residual_rel": self.residual_rel,
            "holds": self.holds,
            "tol": self.tol,
            "zero_field": self.zero_field,
            "per_sample": [[i, r] for i, r in self.per_sample],
            "extra": self.extra,
        }


def _result(condition, residuals, tol, extra, zero_field) -> FieldCheckResult:
    res = max(residuals) if residuals else 0.0
    return FieldCheckResult(condition, float(res), bool(res <= tol), list(enumerate(map(float, residuals))),
                            tol, extra, zero_field)


def _require(bundles: Sequence[TensorBundle], vf: VectorFieldSpec) -> None:
    if not bundles:
        raise FinslerError("at least one tensor bundle is required")
    if vf.dim != bundles[0].n:
        raise DimensionError(f"field {vf.name!r} has dimension {vf.dim}, metric has {bundles[0].n}")


def sc_residual(B: np.ndarray, b: TensorBundle) -> float:
    nb = float(np.linalg.norm(B))
    if nb <= ZERO_FIELD_ATOL:
        return 0.0
    return float(np.max(np.abs(np.einsum("h,hij->ij", B, b.C_lo)))) / (nb * scale(b.C_lo))


def sc_side_quantities(B: np.ndarray, b: TensorBundle) -> tuple[float, float, float]:
    """(B^2, B_0, B^2 F^2 - B_0^2) with B^2 = g_ij B^i B^j and B_0 = g_ij B^i y^j."""
    B_sq = float(B @ b.g @ B)
    B_0 = float(B @ b.g @ b.y)
    return B_sq, B_0, B_sq * b.F**2 - B_0**2


def check_sc(vf: VectorFieldSpec, bundles: Sequence[TensorBundle], tol: float = DEFAULT_TOL) -> FieldCheckResult:
    """B^h C_hij = 0 at every sample."""
    _require(bundles, vf)
    res, bsq, b0, gap = [], [], [], []
    zero = True
    for b in bundles:
        B = field_values(vf, b.x)
        zero &= float(np.linalg.norm(B)) <= ZERO_FIELD_ATOL
        res.append(sc_residual(B, b))
        s, z, d = sc_side_quantities(B, b)
        bsq.append(s)
        b0.append(z)
        gap.append(d)
    return _result("SC", res, tol, {"B_sq": bsq, "B_0": b0, "B_sq_F_sq_minus_B_0_sq": gap}, zero)


def check_cc(sigma_grad: VectorFieldSpec, bundles: Sequence[TensorBundle], tol: float = DEFAULT_TOL) -> FieldCheckResult:
    """sigma_h C^h_ij = 0 at every sample.

    The components are used as sigma_h pointwise; whether they form an exact
    gradient is not checked.
    """
    _require(bundles, sigma_grad)
    res, s0 = [], []
    zero = True
    for b in bundles:
        s = field_values(sigma_grad, b.x)
        ns = float(np.linalg.norm(s))
        zero &= ns <= ZERO_FIELD_ATOL
        if ns <= ZERO_FIELD_ATOL:
            res.append(0.0)
        else:
            t = np.einsum("h,hij->ij", s, b.C_mixed)
            res.append(float(np.max(np.abs(t))) / (ns * scale(b.C_mixed)))
        s0.append(float(s @ b.y))
    return _result("CC", res, tol, {"sigma_0": s0}, zero)


def horizontal_residual(B: np.ndarray, dB: np.ndarray, b: TensorBundle) -> float:
    """||d_j X^i + X^h Gamma^i_hj + delta^i_j|| / (1 + sqrt(n))."""
    n = B.size
    cov = dB + np.einsum("h,ihj->ij", B, b.Gamma)
    return float(np.linalg.norm(cov + np.eye(n))) / (1.0 + np.sqrt(n))


def check_concurrent(vf: VectorFieldSpec, bundles: Sequence[TensorBundle], tol: float = DEFAULT_TOL,
                     condition: str = "concurrent") -> FieldCheckResult:
    """X^i_|j = -delta^i_j together with X^h C_hij = 0.

    ``condition="C"`` reports the same pair under the C-condition label.
    """
    if condition not in ("concurrent", "C"):
        raise ValueError(f"unknown condition {condition!r}")
    _require(bundles, vf)
    res, hor, ver = [], [], []
    zero = True
    for b in bundles:
        B, dB = field_at(vf, b.x)
        zero &= float(np.linalg.norm(B)) <= ZERO_FIELD_ATOL
        h = horizontal_residual(B, dB, b)
        v = sc_residual(B, b)
        hor.append(h)
        ver.append(v)
        res.append(max(h, v))
    extra = {"horizontal": hor, "vertical": ver, "max_horizontal": max(hor), "max_vertical": max(ver)}
    return _result(condition, res, tol, extra, zero)


# --------------------------------------------------------------------------
# Nullspace search

@dataclass
class NullspaceResult:
    basis: list[np.ndarray]
    singular_values: list[float]
    threshold: float
    scale: float
    x: np.ndarray
    samples_used: int

    @property
    def dim(self) -> int:
        return len(self.basis)

    def as_dict(self) -> dict:
        return {
            "x": [float(v) for v in self.x],
            "basis": [[float(v) for v in b] for b in self.basis],
            "singular_values": [float(s) for s in self.singular_values],
            "threshold": self.threshold,
            "scale": self.scale,
            "samples_used": self.samples_used,
        }


def sc_system(bundles: Sequence[TensorBundle], attr: str = "C_lo") -> np.ndarray:
    """Rows C_hij(x, y_s) over all samples s and slots (i, j); columns h.

    ``attr="C_mixed"`` stacks C^h_ij instead (the CC-condition system).
    """
    n = bundles[0].n
    return np.concatenate([np.moveaxis(getattr(b, attr), 0, -1).reshape(n * n, n) for b in bundles])


def system_scale(bundles: Sequence[TensorBundle]) -> float:
    """sqrt(sum_s ||g_s||^2 / F_s^2): the natural size of a stacked Cartan system."""
    return float(np.sqrt(sum(float(np.sum(b.g * b.g)) / b.F**2 for b in bundles)))


def nullspace_from_bundles(bundles: Sequence[TensorBundle], threshold: float | None = None,
                           attr: str = "C_lo") -> NullspaceResult:
    if not bundles:
        raise EmptyRegionError("no admissible support elements for the nullspace search")
    A = sc_system(bundles, attr)
    _, s, vt = np.linalg.svd(A, full_matrices=True)
    n = bundles[0].n
    sv = np.zeros(n)
    sv[: s.size] = s
    sc = system_scale(bundles)
    if threshold is None:
        threshold = max(NULLSPACE_RTOL * float(sv[0]), NULLSPACE_ATOL * sc)
    basis = [vt[k].copy() for k in range(n) if sv[k] <= threshold]
    return NullspaceResult(basis, [float(v) for v in sv], float(threshold), sc, bundles[0].x.copy(), len(bundles))


def find_sc_field(spec: MetricSpec, x, y_samples: int = 20, seed: int = 42,
                  threshold: float | None = None) -> NullspaceResult:
    """Constant vectors B with B^h C_hij(x, y_s) = 0 for every sampled y_s.

    The default threshold is ``max(1e-8 * s_max, 1e-10 * scale)``; the absolute
    floor makes an identically zero system (Riemannian input) return the full
    space.
    """
    if y_samples < 2:
        raise ValueError("y_samples must be at least 2")
    bundles = sample_bundles(spec, y_samples, seed, x=x)
    return nullspace_from_bundles(bundles, threshold)


def find_cc_field(spec: MetricSpec, x, y_samples: int = 20, seed: int = 42,
                  threshold: float | None = None) -> NullspaceResult:
    """Constant covectors sigma_h with sigma_h C^h_ij(x, y_s) = 0 for every y_s."""
    if y_samples < 2:
        raise ValueError("y_samples must be at least 2")
    bundles = sample_bundles(spec, y_samples, seed, x=x)
    return nullspace_from_bundles(bundles, threshold, "C_mixed")


# --------------------------------------------------------------------------
# Independence of B and y

@dataclass
class IndependenceReport:
    precondition_ok: bool
    precondition_failures: list[str]
    margins: list[float]
    threshold: float
    dependent_samples: list[int]
    degenerate_samples: list[int]
    sc: FieldCheckResult | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def asserted_samples(self) -> list[int]:
        return [i for i in range(len(self.margins)) if i not in self.degenerate_samples]

    @property
    def violations(self) -> list[int]:
        """Dependent samples where the Cartan tensor is nonzero."""
        return [i for i in self.dependent_samples if i not in self.degenerate_samples]

    @property
    def independent(self) -> bool:
        return self.precondition_ok and not self.violations

    def as_dict(self) -> dict:
        return {
            "precondition_ok": self.precondition_ok,
            "precondition_failures": list(self.precondition_failures),
            "margins": list(self.margins),
            "min_margin": min(self.margins) if self.margins else None,
            "threshold": self.threshold,
            "dependent_samples": list(self.dependent_samples),
            "degenerate_samples": list(self.degenerate_samples),
            "violations": self.violations,
            "independent": self.independent,
            "sc": None if self.sc is None else self.sc.as_dict(),
            "notes": list(self.notes),
        }


def independence_margin(B: np.ndarray, y: np.ndarray) -> float:
    """Smallest singular value of the 2 x n matrix with unit rows B and y."""
    M = np.stack([B / np.linalg.norm(B), y / np.linalg.norm(y)])
    return float(np.linalg.svd(M, compute_uv=False)[-1])


def lemma1_independence(vf: VectorFieldSpec, bundles: Sequence[TensorBundle], sc_tol: float = DEFAULT_TOL,
                        threshold: float = INDEPENDENCE_THRESHOLD) -> IndependenceReport:
    """Check that a nonzero SC field is never parallel to y.

    Precondition failures (SC fails, B = 0 somewhere) are reported.  Samples
    where C vanishes are measured but not asserted: there every B is SC and y
    may be parallel to B.
    """
    _require(bundles, vf)
    sc = check_sc(vf, bundles, sc_tol)
    failures = []
    if not sc.holds:
        failures.append(f"SC-condition fails (residual {sc.residual_rel:.3g} > {sc_tol:g})")
    margins, dependent, degenerate = [], [], []
    zero_at = []
    for i, b in enumerate(bundles):
        B = field_values(vf, b.x)
        if cartan_vanishes(b):
            degenerate.append(i)
        if float(np.linalg.norm(B)) <= ZERO_FIELD_ATOL:
            zero_at.append(i)
            margins.append(0.0)
            continue
        m = independence_margin(B, b.y)
        margins.append(m)
        if m <= threshold:
            dependent.append(i)
    if zero_at:
        failures.append(f"B = 0 at {len(zero_at)} sample(s)")
    notes = []
    if degenerate:
        notes.append(f"C = 0 at {len(degenerate)} sample(s): independence measured but not asserted there")
    if any(i in degenerate for i in dependent):
        notes.append("B parallel to y at a sample with C = 0; the lemma's conclusion needs C != 0")
    return IndependenceReport(not failures, failures, margins, threshold, dependent, degenerate, sc, notes)
