"""Statistical regularity checks for a Finsler function.

At each sampled support element: F > 0, positive 1-homogeneity in y, and
positive-definiteness of g_ij = d^2 E / dy^i dy^j.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from finsler import expr as ex
from finsler import jets
from finsler.errors import DomainError, EmptyRegionError
from finsler.sampling import raw_samples
from finsler.specfile import MetricSpec
from finsler.tensors import PD_THRESHOLD, min_eigen_ratio

HOMOGENEITY_LAMBDAS = (0.5, 2.0, 3.7)
HOMOGENEITY_TOL = 1e-9


@dataclass
class CheckCount:
    passed: int = 0
    failed: int = 0

    @property
    def ok(self) -> bool:
        return self.failed == 0 and self.passed > 0

    def add(self, good: bool) -> None:
        if good:
            self.passed += 1
        else:
            self.failed += 1


@dataclass
class ValidationReport:
    name: str
    samples: int
    evaluated: int = 0
    positivity: CheckCount = field(default_factory=CheckCount)
    homogeneity: CheckCount = field(default_factory=CheckCount)
    positive_definite: CheckCount = field(default_factory=CheckCount)
    worst_homogeneity: float = 0.0
    min_eigenvalue: float = float("inf")
    min_eigen_ratio: float = float("inf")
    domain_errors: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return (
            self.evaluated == self.samples
            and self.positivity.ok
            and self.homogeneity.ok
            and self.positive_definite.ok
        )

    def as_dict(self) -> dict:
        def cc(c: CheckCount):
            return {"passed": c.passed, "failed": c.failed}

        return {
            "name": self.name,
            "samples": self.samples,
            "evaluated": self.evaluated,
            "ok": self.ok,
            "positivity": cc(self.positivity),
            "homogeneity": cc(self.homogeneity),
            "positive_definite": cc(self.positive_definite),
            "worst_homogeneity": self.worst_homogeneity,
            "min_eigenvalue": self.min_eigenvalue,
            "min_eigen_ratio": self.min_eigen_ratio,
            "domain_errors": self.domain_errors[:5],
        }


def validate_at(spec: MetricSpec, points, name: str | None = None) -> ValidationReport:
    """Run the three checks at explicit ``(x, y)`` pairs."""
    rep = ValidationReport(name or spec.name, len(points))
    for x, y in points:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        try:
            F = float(ex.evaluate(spec.expr, x, y, spec.params))
            scaled = [float(ex.evaluate(spec.expr, x, lam * y, spec.params)) for lam in HOMOGENEITY_LAMBDAS]
            J = jets.eval_jet(spec.expr, x, y, spec.params, jets.jet_space(spec.dim, 2, 0))
        except DomainError as exc:
            rep.domain_errors.append(str(exc))
            continue
        rep.evaluated += 1
        rep.positivity.add(F > 0)
        err = max(abs(s - lam * F) / max(abs(lam * F), np.finfo(float).tiny) for s, lam in zip(scaled, HOMOGENEITY_LAMBDAS))
        rep.worst_homogeneity = max(rep.worst_homogeneity, err)
        rep.homogeneity.add(err <= HOMOGENEITY_TOL)
        g = 0.5 * (J * J).tensor("yy")
        lam_min, ratio = min_eigen_ratio(g)
        rep.min_eigenvalue = min(rep.min_eigenvalue, lam_min)
        rep.min_eigen_ratio = min(rep.min_eigen_ratio, ratio)
        rep.positive_definite.add(ratio > PD_THRESHOLD)
    return rep


def validate_spec(spec: MetricSpec, samples: int = 100, seed: int = 42) -> ValidationReport:
    """Check the regularity conditions at ``samples`` seeded support elements."""
    rep = validate_at(spec, raw_samples(spec, samples, seed))
    if rep.evaluated == 0:
        raise EmptyRegionError(f"{spec.name}: F could not be evaluated at any sample ({rep.domain_errors[0]})")
    return rep
