"""Implication-consistency checks for the semi-concurrent field theorems.

Each theorem is an implication ``hypotheses (+ side conditions) => conclusion``.
:func:`run_theorem` evaluates every piece over sampled support elements and
classifies the run:

* ``vacuous`` when a hypothesis fails, or when the conclusion fails while a
  side condition is not clearly satisfied;
* ``implication-consistent`` when the hypotheses hold and so does the
  conclusion;
* ``violated`` when hypotheses and side conditions hold but the conclusion
  does not.

Intermediate proof steps are reported as residuals with a label saying
whether they hold unconditionally or only for special fields.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from finsler import fields as fl
from finsler import spaces as sp
from finsler import tensors as tn
from finsler.errors import DegenerateError, FinslerError, MissingFieldError
from finsler.sampling import generator_info, sample_bundles
from finsler.specfile import MetricSpec, VectorFieldSpec
from finsler.tensors import TensorBundle, p_skew_residual, scale

THEOREMS = ("T1", "T2", "T3", "T4", "T5", "T6", "C1", "L1")
VERDICTS = ("implication-consistent", "vacuous", "violated")
SIDE_MARGIN = 1e-3
IDENTITY_TOL = 1e-9
PIPELINE_TOL = 1e-4
PIPELINE_SAMPLES = 5
SCHEMA_VERSION = "1.0"

_CONCLUSIONS = {
    "T1": "Riemannian", "T2": "Riemannian", "T3": "Riemannian", "T4": "Riemannian",
    "T5": "Landsberg", "T6": "Riemannian <=> T = 0", "C1": "Riemannian <=> T_ij = 0",
    "L1": "B and y independent",
}
_HYPOTHESIS = {"T1": "quasi-C-reducible", "T2": "C3-like", "T3": "Ch-recurrent", "T4": "P2-like",
               "T5": "P-reducible"}


@dataclass
class SideCondition:
    """A scalar the implication needs to be nonzero (or zero)."""

    name: str
    value: float
    requirement: str  # "nonzero" | "zero"
    margin: float
    note: str = ""

    @property
    def status(self) -> str:
        if not math.isfinite(self.value):
            return "indeterminate"
        if self.requirement == "nonzero":
            return "ok" if abs(self.value) >= self.margin else "indeterminate"
        return "ok" if abs(self.value) <= self.margin else "fails"

    def as_dict(self) -> dict:
        return {"value": self.value, "requirement": self.requirement, "margin": self.margin,
                "status": self.status, "note": self.note}


@dataclass
class ProofStep:
    residual: float
    label: str  # "unconditional" | "hypothesis-dependent" | "diagnostic"
    note: str = ""

    def as_dict(self) -> dict:
        return {"residual": self.residual, "label": self.label, "note": self.note}


@dataclass
class TheoremReport:
    theorem_id: str
    conclusion: str
    hypothesis_residuals: dict[str, float]
    hypotheses_hold: dict[str, bool]
    side_conditions: dict[str, SideCondition]
    conclusion_residual: float
    conclusion_holds: bool
    verdict: str = "vacuous"
    reason: str = ""
    failed_hypotheses: list[str] = field(default_factory=list)
    proof_steps: dict[str, ProofStep] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    parts: dict[str, "TheoremReport"] = field(default_factory=dict)
    samples: dict = field(default_factory=dict)
    nullspace: dict | None = None

    def decide(self) -> "TheoremReport":
        """Fill in verdict, reason and failed hypotheses from the residuals."""
        self.failed_hypotheses = [k for k, ok in self.hypotheses_hold.items() if not ok]
        if self.failed_hypotheses:
            self.verdict = "vacuous"
            self.reason = "hypothesis fails: " + ", ".join(self.failed_hypotheses)
        elif self.conclusion_holds:
            self.verdict = "implication-consistent"
            self.reason = "hypotheses and conclusion hold"
        else:
            weak = [f"{k} {s.status}" for k, s in self.side_conditions.items() if s.status != "ok"]
            if weak:
                self.verdict = "vacuous"
                self.reason = "side condition " + ", ".join(weak)
            else:
                self.verdict = "violated"
                self.reason = "hypotheses and side conditions hold but the conclusion fails"
                broken = [k for k, st in self.proof_steps.items()
                          if st.label == "hypothesis-dependent" and not st.residual <= sp.DEFAULT_TOL]
                if broken:
                    self.notes.append("proof steps not satisfied by this field: " + "; ".join(broken))
        return self

    def as_dict(self) -> dict:
        return {
            "theorem_id": self.theorem_id,
            "conclusion": self.conclusion,
            "verdict": self.verdict,
            "reason": self.reason,
            "hypothesis_residuals": self.hypothesis_residuals,
            "hypotheses_hold": self.hypotheses_hold,
            "failed_hypotheses": list(self.failed_hypotheses),
            "side_conditions": {k: v.as_dict() for k, v in self.side_conditions.items()},
            "conclusion_residual": self.conclusion_residual,
            "conclusion_holds": self.conclusion_holds,
            "proof_steps": {k: v.as_dict() for k, v in self.proof_steps.items()},
            "notes": list(self.notes),
            "parts": {k: v.as_dict() for k, v in self.parts.items()},
            "samples": self.samples,
            "nullspace": self.nullspace,
        }


# --------------------------------------------------------------------------
# Bundle cache

_CACHE: dict[tuple, list[TensorBundle]] = {}
_CACHE_MAX = 64


def bundles_for(spec: MetricSpec, samples: int, seed: int, x=None) -> list[TensorBundle]:
    """Seeded bundles, memoised on the spec digest and sampling config."""
    key = (spec.digest(), samples, seed, None if x is None else tuple(float(v) for v in x))
    if key not in _CACHE:
        if len(_CACHE) >= _CACHE_MAX:
            _CACHE.pop(next(iter(_CACHE)))
        _CACHE[key] = sample_bundles(spec, samples, seed, x=x)
    return _CACHE[key]


def region_center(spec: MetricSpec) -> np.ndarray:
    r = spec.sample_region
    return 0.5 * (np.asarray(r.x_min) + np.asarray(r.x_max))


# --------------------------------------------------------------------------
# Helpers

def _tol(spec: MetricSpec, condition: str) -> float:
    return spec.tol(sp.TOL_KEYS[condition], sp.DEFAULT_TOL)


def _hyp(report_hyp: dict, report_ok: dict, name: str, residual: float, holds: bool) -> None:
    report_hyp[name] = float(residual)
    report_ok[name] = bool(holds)


def _min_or_nan(values) -> float:
    values = [v for v in values if math.isfinite(v)]
    return float(min(values)) if values else float("nan")


def _max_or_zero(values) -> float:
    return float(max(values)) if values else 0.0


def _field_vals(vf: VectorFieldSpec, bundles) -> list[np.ndarray]:
    return [fl.field_values(vf, b.x) for b in bundles]


def _riemannian(spec, bundles) -> sp.ConditionVerdict:
    return sp.is_riemannian(bundles, _tol(spec, "Riemannian"))


def _base(theorem_id: str, spec: MetricSpec, bundles, seed: int, vf: VectorFieldSpec | None) -> TheoremReport:
    rep = TheoremReport(theorem_id, _CONCLUSIONS[theorem_id], {}, {}, {}, 0.0, True)
    rep.samples = {"count": len(bundles), "seed": seed, "metric": spec.name,
                   "field": None if vf is None else vf.describe()}
    return rep


def _with_sc(rep: TheoremReport, spec: MetricSpec, vf: VectorFieldSpec, bundles) -> fl.FieldCheckResult:
    sc = fl.check_sc(vf, bundles, spec.tol("sc", sp.DEFAULT_TOL))
    _hyp(rep.hypothesis_residuals, rep.hypotheses_hold, "SC-condition", sc.residual_rel, sc.holds)
    if sc.zero_field:
        rep.notes.append("zero field: the SC-condition holds trivially")
    return sc


def _conclude_riemannian(rep: TheoremReport, spec, bundles) -> None:
    v = _riemannian(spec, bundles)
    rep.conclusion_residual = v.residual_rel
    rep.conclusion_holds = v.holds


def _contracted_bb_h_c(B, b: TensorBundle) -> np.ndarray:
    """B^i B^j h_ij C_k."""
    return float(B @ b.h @ B) * b.C_mean


# --------------------------------------------------------------------------
# Theorems

def _t1(spec, vf, bundles, seed):
    rep = _base("T1", spec, bundles, seed, vf)
    q = sp.check_quasi_c_reducible(bundles, _tol(spec, "quasi-C-reducible"), strict=False)
    _hyp(rep.hypothesis_residuals, rep.hypotheses_hold, "quasi-C-reducible", q.residual_rel, q.holds)
    if q.dimension_warning:
        rep.notes.append(q.dimension_warning)
    _with_sc(rep, spec, vf, bundles)
    steps = []
    for B, b in zip(_field_vals(vf, bundles), bundles):
        nb2 = max(float(B @ b.g @ B), np.finfo(float).tiny)
        steps.append(float(np.linalg.norm(_contracted_bb_h_c(B, b))) / (nb2 * scale(b.C_mean)))
    rep.proof_steps["B^i B^j h_ij C_k"] = ProofStep(
        _max_or_zero(steps), "hypothesis-dependent", "vanishes once both hypotheses hold")
    _conclude_riemannian(rep, spec, bundles)
    return rep.decide()


def _t2(spec, vf, bundles, seed):
    rep = _base("T2", spec, bundles, seed, vf)
    c3 = sp.fit_c3_like(bundles, _tol(spec, "C3-like"))
    _hyp(rep.hypothesis_residuals, rep.hypotheses_hold, "C3-like", c3.residual_rel, c3.holds)
    if c3.dimension_warning:
        rep.notes.append(c3.dimension_warning)
    _with_sc(rep, spec, vf, bundles)
    n = bundles[0].n
    if n != 3:
        rep.side_conditions["J"] = SideCondition("J", float("nan"), "zero", _tol(spec, "C3-like"),
                                                 f"the main scalar J is defined for n = 3 only (n = {n})")
    else:
        js, eq31, e1, bi = [], [], [], []
        for B, b in zip(_field_vals(vf, bundles), bundles):
            try:
                f = sp.moor_frame_3d(b)
            except DegenerateError:
                js.append(0.0)  # C = 0: every main scalar vanishes
                continue
            js.append(abs(f.J) / (abs(f.H) + abs(f.I) + abs(f.J)))
            a, _ = f.printed_ab()
            B_sq = float(B @ b.g @ B)
            denom = max(B_sq, np.finfo(float).tiny) * scale(b.C_mean)
            t31 = (np.einsum("i,j,ij->", B, B, b.h) * a + 2.0 * (B @ b.h) * (a @ B))
            eq31.append(float(np.linalg.norm(t31)) / denom)
            te1 = B_sq * f.I / (f.L * f.C) * b.C_mean + B_sq * f.J / f.L * f.nvec
            e1.append(float(np.linalg.norm(te1)) / denom)
            bi.append(abs(B_sq * f.I / (f.L * f.C)))
        rep.side_conditions["J"] = SideCondition("J", _max_or_zero(js), "zero", _tol(spec, "C3-like"),
                                                 "|J| / (|H| + |I| + |J|), worst sample")
        rep.proof_steps["B^i B^j (h_ij a_k + h_jk a_i + h_ki a_j)"] = ProofStep(
            _max_or_zero(eq31), "diagnostic", "a_k from the frame formula; evaluated, not asserted")
        rep.proof_steps["B^2 I/(L C) C_k + B^2 J/L n_k"] = ProofStep(
            _max_or_zero(e1), "diagnostic", "evaluated independently of the preceding step")
        if bi:
            rep.proof_steps["min |B^2 I/(L C)|"] = ProofStep(
                min(bi), "diagnostic", "C_k = 0 follows from the previous line only when this is nonzero")
            if min(bi) < SIDE_MARGIN:
                rep.notes.append("B^2 I/(L C) vanishes at a sample: with J = 0 the last proof step cannot force C_k = 0")
    _conclude_riemannian(rep, spec, bundles)
    return rep.decide()


def _bk_side(vals: list[float]) -> SideCondition:
    return SideCondition("1 + B^h K_h", _min_or_nan(vals), "nonzero", SIDE_MARGIN,
                         "min |1 + B^h K_h| over samples with C != 0")


def _ricci_steps(rep: TheoremReport, vf, bundles, names: tuple[str, str]) -> None:
    s3, s4 = [], []
    for B, b in zip(_field_vals(vf, bundles), bundles):
        BP = np.einsum("h,hijk->ijk", B, b.P)
        BC = np.einsum("h,ijkh->ijk", B, b.C_hder)
        s3.append(sp.equation_residual(BP, BC))
        s4.append(sp.equation_residual(BC, -b.C_lo))
    rep.proof_steps[names[0]] = ProofStep(
        _max_or_zero(s3), "hypothesis-dependent", "needs the horizontal derivative of B, not only the SC-condition")
    rep.proof_steps[names[1]] = ProofStep(
        _max_or_zero(s4), "hypothesis-dependent", "holds for concurrent-type fields (B^h_|j = -delta^h_j)")


def _t3(spec, vf, bundles, seed):
    rep = _base("T3", spec, bundles, seed, vf)
    ch = sp.check_ch_recurrent(bundles, _tol(spec, "Ch-recurrent"))
    _hyp(rep.hypothesis_residuals, rep.hypotheses_hold, "Ch-recurrent", ch.residual_rel, ch.holds)
    _with_sc(rep, spec, vf, bundles)
    side = []
    for B, b, K in zip(_field_vals(vf, bundles), bundles, ch.fitted["K"]):
        if K is not None:
            side.append(abs(1.0 + float(B @ np.asarray(K))))
    rep.side_conditions["1 + B^h K_h"] = _bk_side(side)
    _ricci_steps(rep, vf, bundles, ("B^h P_hijk - B^h C_ijk|h", "B^h C_ijk|h + C_ijk"))
    _conclude_riemannian(rep, spec, bundles)
    return rep.decide()


def _t4(spec, vf, bundles, seed):
    rep = _base("T4", spec, bundles, seed, vf)
    p2 = sp.check_p2_like(bundles, _tol(spec, "P2-like"))
    _hyp(rep.hypothesis_residuals, rep.hypotheses_hold, "P2-like", p2.residual_rel, p2.holds)
    _with_sc(rep, spec, vf, bundles)
    side = []
    for B, b, K in zip(_field_vals(vf, bundles), bundles, p2.fitted["K"]):
        if K is not None and not sp.cartan_vanishes(b):
            side.append(abs(1.0 + float(B @ np.asarray(K))))
    rep.side_conditions["1 + B^h K_h"] = _bk_side(side)
    _ricci_steps(rep, vf, bundles, ("B^h P_hijk - B^h C_ijk|h", "B^h C_ijk|h + C_ijk"))
    _conclude_riemannian(rep, spec, bundles)
    return rep.decide()


def _t5(spec, vf, bundles, seed):
    rep = _base("T5", spec, bundles, seed, vf)
    pr, lb = sp.check_p_reducible_landsberg(bundles, _tol(spec, "P-reducible"), _tol(spec, "Landsberg"),
                                            strict=False)
    _hyp(rep.hypothesis_residuals, rep.hypotheses_hold, "P-reducible", pr.residual_rel, pr.holds)
    if pr.dimension_warning:
        rep.notes.append(pr.dimension_warning)
    sc = _with_sc(rep, spec, vf, bundles)
    gaps, s49, s481 = [], [], []
    for B, b, g in zip(_field_vals(vf, bundles), bundles, sc.extra["B_sq_F_sq_minus_B_0_sq"]):
        B_sq = float(B @ b.g @ B)
        if B_sq > 0:
            gaps.append(g / (B_sq * b.F**2))
        denom = max(B_sq, np.finfo(float).tiny) * scale(b.C_mean)
        s49.append(float(np.linalg.norm(_contracted_bb_h_c(B, b))) / denom)
        s481.append(float(np.linalg.norm(g * b.C_mean)) / (denom * b.F**2))
    rep.side_conditions["B^2 F^2 - B_0^2"] = SideCondition(
        "B^2 F^2 - B_0^2", _min_or_nan(gaps), "nonzero", SIDE_MARGIN, "relative to B^2 F^2, worst sample")
    rep.proof_steps["B^i B^j h_ij C_k"] = ProofStep(_max_or_zero(s49), "hypothesis-dependent")
    rep.proof_steps["(B^2 F^2 - B_0^2) C_k"] = ProofStep(_max_or_zero(s481), "hypothesis-dependent")
    rep.conclusion_residual = lb.residual_rel
    rep.conclusion_holds = lb.holds
    return rep.decide()


def _t_iff(theorem_id, spec, sigma, bundles, seed, trace: bool):
    """Forward (Riemannian => T = 0) and converse (T = 0, CC, sigma_0 != 0 => C = 0)."""
    name = "T_ij" if trace else "T"
    tol_t = _tol(spec, "T-condition")

    def t_res(b):
        return sp.vanishing_residual(b.T2 if trace else b.T, b)

    t_vals = [t_res(b) for b in bundles]
    t_max = _max_or_zero(t_vals)

    fwd = _base(theorem_id, spec, bundles, seed, None)
    fwd.conclusion = f"{name} = 0"
    riem = _riemannian(spec, bundles)
    _hyp(fwd.hypothesis_residuals, fwd.hypotheses_hold, "Riemannian", riem.residual_rel, riem.holds)
    fwd.conclusion_residual = t_max
    fwd.conclusion_holds = t_max <= tol_t
    fwd.decide()

    conv = _base(theorem_id, spec, bundles, seed, sigma)
    conv.conclusion = "Riemannian"
    _hyp(conv.hypothesis_residuals, conv.hypotheses_hold, f"{name} = 0", t_max, t_max <= tol_t)
    cc = fl.check_cc(sigma, bundles, spec.tol("cc", sp.DEFAULT_TOL))
    _hyp(conv.hypothesis_residuals, conv.hypotheses_hold, "CC-condition", cc.residual_rel, cc.holds)
    ratios, steps = [], []
    for s, b, s0 in zip(_field_vals(sigma, bundles), bundles, cc.extra["sigma_0"]):
        ns = float(np.linalg.norm(s))
        ratios.append(abs(s0) / (ns * float(np.linalg.norm(b.y))) if ns > 0 else float("nan"))
        s_up = b.g_inv @ s
        if trace:
            lhs = np.einsum("i,ij->j", s_up, b.T2)
            rhs = s0 / b.F * b.C_mean
        else:
            lhs = np.einsum("h,hijk->ijk", s_up, b.T)
            rhs = s0 / b.F * b.C_lo
        steps.append(sp.equation_residual(lhs, rhs))
    conv.side_conditions["sigma_0"] = SideCondition(
        "sigma_0", _min_or_nan(ratios), "nonzero", SIDE_MARGIN, "|sigma_h y^h| / (|sigma| |y|), worst sample")
    label = "sigma^i T_ij - (sigma_0/F) C_j" if trace else "sigma^h T_hijk - (sigma_0/F) C_ijk"
    conv.proof_steps[label] = ProofStep(_max_or_zero(steps), "hypothesis-dependent", "exact when the CC-condition holds")
    _conclude_riemannian(conv, spec, bundles)
    conv.decide()

    rep = _base(theorem_id, spec, bundles, seed, sigma)
    rep.parts = {"forward": fwd, "converse": conv}
    for part, r in rep.parts.items():
        for k, v in r.hypothesis_residuals.items():
            rep.hypothesis_residuals[f"{part}: {k}"] = v
            rep.hypotheses_hold[f"{part}: {k}"] = r.hypotheses_hold[k]
        for k, v in r.side_conditions.items():
            rep.side_conditions[f"{part}: {k}"] = v
        for k, v in r.proof_steps.items():
            rep.proof_steps[f"{part}: {k}"] = v
    decided = [r for r in rep.parts.values() if r.verdict == "violated"] or \
              [r for r in rep.parts.values() if r.verdict == "implication-consistent"]
    if decided:
        lead = decided[0]
        rep.verdict = lead.verdict
        part = "forward" if lead is fwd else "converse"
        rep.reason = f"{part}: {lead.reason}"
    else:
        rep.verdict = "vacuous"
        rep.reason = "; ".join(f"{k}: {r.reason}" for k, r in rep.parts.items())
    rep.failed_hypotheses = [f"{k}: {h}" for k, r in rep.parts.items() for h in r.failed_hypotheses]
    lead = decided[0] if decided else fwd
    rep.conclusion_residual = lead.conclusion_residual
    rep.conclusion_holds = lead.conclusion_holds
    return rep


def _l1(spec, vf, bundles, seed):
    rep = _base("L1", spec, bundles, seed, vf)
    ind = fl.lemma1_independence(vf, bundles, spec.tol("sc", sp.DEFAULT_TOL))
    _hyp(rep.hypothesis_residuals, rep.hypotheses_hold, "SC-condition", ind.sc.residual_rel, ind.sc.holds)
    zero = any(f.startswith("B = 0") for f in ind.precondition_failures)
    _hyp(rep.hypothesis_residuals, rep.hypotheses_hold, "B != 0", 1.0 if zero else 0.0, not zero)
    # Where C = 0 every B is semi-concurrent, so B parallel to y there says
    # nothing about the lemma; such samples count against a hypothesis.
    degen_dep = [i for i in ind.dependent_samples if i in ind.degenerate_samples]
    _hyp(rep.hypothesis_residuals, rep.hypotheses_hold, "C != 0 where B is parallel to y",
         float(len(degen_dep)), not degen_dep)
    rep.notes.extend(ind.notes)
    rep.proof_steps["min independence margin"] = ProofStep(
        min(ind.margins) if ind.margins else float("nan"), "diagnostic",
        "smallest singular value of the unit-row matrix [B; y]")
    rep.conclusion_residual = len(ind.dependent_samples) / len(bundles)
    rep.conclusion_holds = not ind.dependent_samples
    rep.samples["dependent_samples"] = ind.dependent_samples
    rep.samples["degenerate_samples"] = ind.degenerate_samples
    rep.samples["margin_threshold"] = ind.threshold
    return rep.decide()


_RUNNERS = {"T1": _t1, "T2": _t2, "T3": _t3, "T4": _t4, "T5": _t5, "L1": _l1}


def _nullspace_report(theorem_id, spec, bundles, seed, ns: fl.NullspaceResult, kind: str) -> TheoremReport:
    """Report for a --find-field run whose nullspace came back empty."""
    rep = _base(theorem_id, spec, bundles, seed, None)
    cond = "SC-condition" if kind == "SC" else "CC-condition"
    hyp = _HYPOTHESIS.get(theorem_id)
    if hyp is not None:
        v = {
            "quasi-C-reducible": lambda: sp.check_quasi_c_reducible(bundles, _tol(spec, hyp), strict=False),
            "C3-like": lambda: sp.fit_c3_like(bundles, _tol(spec, hyp)),
            "Ch-recurrent": lambda: sp.check_ch_recurrent(bundles, _tol(spec, hyp)),
            "P2-like": lambda: sp.check_p2_like(bundles, _tol(spec, hyp)),
            "P-reducible": lambda: sp.check_p_reducible_landsberg(bundles, _tol(spec, hyp), strict=False)[0],
        }[hyp]()
        _hyp(rep.hypothesis_residuals, rep.hypotheses_hold, hyp, v.residual_rel, v.holds)
    smin = ns.singular_values[-1]
    _hyp(rep.hypothesis_residuals, rep.hypotheses_hold, cond, smin / ns.scale if ns.scale > 0 else float("nan"), False)
    if theorem_id == "T5":
        lb = sp.check_landsberg(bundles, _tol(spec, "Landsberg"))
        rep.conclusion_residual, rep.conclusion_holds = lb.residual_rel, lb.holds
    else:
        _conclude_riemannian(rep, spec, bundles)
    rep.decide()
    rep.reason = f"no field satisfies the {cond} at x (empty nullspace); " + rep.reason
    rep.notes.append(f"{cond} residual entry is the smallest singular value of the stacked system over its scale")
    rep.nullspace = ns.as_dict()
    return rep


def run_theorem(theorem_id: str, spec: MetricSpec, field: VectorFieldSpec | None = None,
                samples: int = 100, seed: int = 42, find_field: bool = False, x=None) -> TheoremReport:
    """Evaluate one theorem on ``spec`` with a supplied or searched field.

    ``field`` is the SC field for T1-T5 and L1, and the sigma gradient for T6
    and C1.  With ``find_field`` the chart point is pinned (to ``x`` or the
    region centre) and the field is taken from the nullspace search there.
    """
    if theorem_id not in THEOREMS:
        raise ValueError(f"unknown theorem id {theorem_id!r}; choose from {', '.join(THEOREMS)}")
    if field is None and not find_field:
        what = "a sigma field" if theorem_id in ("T6", "C1") else "a vector field"
        raise MissingFieldError(f"{theorem_id} needs {what} (or the field search)")
    if field is not None and field.dim != spec.dim:
        raise FinslerError(f"field {field.name!r} has dimension {field.dim}, metric has {spec.dim}")
    nullspace = None
    if find_field:
        x = region_center(spec) if x is None else np.asarray(x, dtype=float)
        bundles = bundles_for(spec, samples, seed, x)
        kind = "CC" if theorem_id in ("T6", "C1") else "SC"
        ns = fl.nullspace_from_bundles(bundles, attr="C_mixed" if kind == "CC" else "C_lo")
        if not ns.basis:
            return _nullspace_report(theorem_id, spec, bundles, seed, ns, kind)
        field = VectorFieldSpec.constant(ns.basis[0], name=f"{kind.lower()}-nullspace[0]")
        nullspace = ns.as_dict()
    else:
        bundles = bundles_for(spec, samples, seed, x)
    if theorem_id in ("T6", "C1"):
        rep = _t_iff(theorem_id, spec, field, bundles, seed, trace=theorem_id == "C1")
    else:
        rep = _RUNNERS[theorem_id](spec, field, bundles, seed)
    rep.nullspace = nullspace
    return rep


# --------------------------------------------------------------------------
# Identity suite

@dataclass
class IdentityResult:
    name: str
    max_residual: float
    tol: float
    asserted: bool = True
    note: str = ""

    @property
    def passed(self) -> bool:
        return (not self.asserted) or self.max_residual <= self.tol

    def as_dict(self) -> dict:
        return {"name": self.name, "max_residual": self.max_residual, "tol": self.tol,
                "asserted": self.asserted, "passed": self.passed, "note": self.note}


def _indicatory(t: np.ndarray, y: np.ndarray) -> float:
    return float(np.linalg.norm(np.tensordot(t, y, axes=([t.ndim - 1], [0])))) / (scale(t) * float(np.linalg.norm(y)))


def _asym(t: np.ndarray, axes: Sequence[tuple[int, ...]]) -> float:
    return max(float(np.max(np.abs(t - np.transpose(t, p)))) for p in axes) / scale(t)


def identity_suite(spec: MetricSpec, samples: int = 100, seed: int = 42,
                   pipeline_samples: int = PIPELINE_SAMPLES) -> list[IdentityResult]:
    """Unconditional identities at seeded samples; worst residual per identity.

    Two entries are diagnostics (not asserted): the distance of the trace
    P_k from C_k and the antisymmetry of the hv-curvature.
    """
    bundles = bundles_for(spec, samples, seed)
    rows: dict[str, list[float]] = {}

    def add(name, value):
        rows.setdefault(name, []).append(float(value))

    for b in bundles:
        d = tn.jet_derivatives(spec, b.x, b.y)
        add("h_ij = F d^2F/dy^i dy^j", sp.equation_residual(b.h, b.F * d.Fyy))
        add("h_ij = g_ij - l_i l_j", sp.equation_residual(b.h, b.g - np.outer(b.l_lo, b.l_lo)))
        add("g_ij y^i y^j = F^2", abs(float(b.y @ b.g @ b.y) - b.F**2) / b.F**2)
        add("g^ij l_i l_j = 1", abs(float(b.l_lo @ b.g_inv @ b.l_lo) - 1.0))
        add("h_ij y^j = 0", _indicatory(b.h, b.y))
        add("C_ijk y^k = 0", _indicatory(b.C_lo, b.y))
        add("C_ijk symmetric", _asym(b.C_lo, [(1, 0, 2), (0, 2, 1)]))
        add("N^i_j y^j = 2 G^i", sp.equation_residual(b.N @ b.y, 2.0 * b.G_spray))
        add("Gamma^i_jk symmetric", _asym(b.Gamma, [(0, 2, 1)]))
        add("T_hijk y^k = 0", _indicatory(b.T, b.y))
        add("T_hijk symmetric", _asym(b.T, [(1, 0, 2, 3), (0, 2, 1, 3), (0, 1, 3, 2)]))
        add("T_ij = F C_i|j + l_i C_j + l_j C_i",
            sp.equation_residual(b.T2, tn.t2_explicit(d, b.C_lo, b.C_mixed, b.C_mean, b.l_lo, b.g_inv)))
        if b.n == 3 and not sp.cartan_vanishes(b) and b.C_norm2 > sp.DEGENERATE_ATOL**2:
            f = sp.moor_frame_3d(b)
            add("h_ij = m_i m_j + n_i n_j", sp.angular_frame_residual(b, f))
            add("Moor frame orthonormal", sp.frame_orthonormality(b, f))
            add("C from (H, I, J) and frame", sp.equation_residual(b.C_lo, f.reconstruct()))
    out = [IdentityResult(k, max(v), IDENTITY_TOL) for k, v in rows.items()]
    for b in bundles[:pipeline_samples]:
        add("hv-curvature jet vs fd", sp.equation_residual(b.P, tn.compute_bundle(spec, b.x, b.y, "fd").P))
    if "hv-curvature jet vs fd" in rows:
        out.append(IdentityResult("hv-curvature jet vs fd", max(rows["hv-curvature jet vs fd"]), PIPELINE_TOL,
                                  note="same assembly code, independent derivative substrate"))
    gap = max(float(np.linalg.norm(b.P_mean - b.C_mean)) / scale(b.C_mean) for b in bundles)
    out.append(IdentityResult("P_k = C_k", gap, IDENTITY_TOL, asserted=False,
                              note="P_k = g^ij P_ijk; reported only"))
    out.append(IdentityResult("P_hijk antisymmetric in (h, i)", max(p_skew_residual(b) for b in bundles),
                              IDENTITY_TOL, asserted=False, note="reported only"))
    return out


# --------------------------------------------------------------------------
# Reports

def _clean(obj):
    """JSON-safe copy: arrays to lists, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def metric_block(spec: MetricSpec) -> dict:
    return {
        "name": spec.name,
        "dim": spec.dim,
        "F": spec.text,
        "params": dict(sorted(spec.params.items())),
        "sample_region": spec.sample_region.to_dict(),
        "tolerances": dict(sorted(spec.tolerances.items())),
        "digest": spec.digest(),
    }


def build_report(kind: str, spec: MetricSpec, results: dict, seed: int | None = None,
                 samples: int | None = None, field_spec: VectorFieldSpec | None = None, ok: bool = True) -> dict:
    """Schema-versioned report document."""
    return _clean({
        "schema_version": SCHEMA_VERSION,
        "kind": kind,
        "ok": ok,
        "metric": metric_block(spec),
        "field": None if field_spec is None else field_spec.describe(),
        "sampling": {"seed": seed, "samples": samples, "generator": generator_info()},
        "results": results,
    })


def dumps(report: dict) -> str:
    """Deterministic serialisation (sorted keys, fixed indentation)."""
    return json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n"


def schema() -> dict:
    from importlib import resources

    return json.loads(resources.files("finsler").joinpath("data/report.schema.json").read_text(encoding="utf-8"))
