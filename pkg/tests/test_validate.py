import numpy as np
import pytest

from finsler import zoo
from finsler.errors import EmptyRegionError
from finsler.specfile import metric_from_text
from finsler.validate import validate_at, validate_spec


def spec_of(F, dim=2, extra=""):
    return metric_from_text(f'name = "t"\ndim = {dim}\nF = "{F}"\n{extra}')


def test_euclidean_passes_with_unit_eigenvalue():
    rep = validate_spec(zoo.load("euclid"), 100, 42)
    assert rep.ok
    assert rep.positivity.passed == rep.homogeneity.passed == rep.positive_definite.passed == 100
    assert rep.min_eigenvalue == pytest.approx(1.0, abs=1e-12)


def test_linear_function_is_never_positive_definite():
    rep = validate_spec(spec_of("y1"), 50, 1)
    assert rep.positive_definite.passed == 0
    assert rep.positive_definite.failed == 50
    assert not rep.ok


def test_quartic_cone_and_axes():
    spec = zoo.load("quartic4")
    assert validate_spec(spec, 100, 3).ok
    axes = [(np.zeros(4), np.eye(4)[k]) for k in range(4)]
    rep = validate_at(spec, axes)
    assert rep.homogeneity.failed == 0
    assert rep.positive_definite.failed == 4


def test_non_homogeneous_function_fails():
    rep = validate_spec(spec_of("y1^2 + y2^2"), 20, 0)
    assert rep.homogeneity.failed == 20


def test_every_sample_outside_the_domain():
    with pytest.raises(EmptyRegionError):
        validate_spec(spec_of("sqrt(-y1^2 - y2^2 - 1)"), 10, 0)


def test_zoo_entries_validate(zoo_name):
    assert validate_spec(zoo.load(zoo_name), 50, 11).ok


@pytest.mark.parametrize("name", zoo.ZOO)
def test_scale_invariance(name):
    spec = zoo.load(name)
    a = validate_spec(spec, 40, 5)
    b = validate_spec(spec.scaled(3.0), 40, 5)
    for key in ("positivity", "homogeneity", "positive_definite"):
        assert a.as_dict()[key] == b.as_dict()[key]


def test_degenerate_scale_invariance():
    spec = spec_of("y1")
    a, b = validate_spec(spec, 20, 2), validate_spec(spec.scaled(3.0), 20, 2)
    assert a.as_dict()["positive_definite"] == b.as_dict()["positive_definite"]
