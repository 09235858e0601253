import pytest

from finsler import expr as ex
from finsler import zoo
from finsler.errors import ParseError, SpecError
from finsler.specfile import (
    MetricSpec,
    SampleRegion,
    VectorFieldSpec,
    field_from_text,
    load_field,
    load_metric,
    metric_from_text,
)

RANDERS = """
name = "r"
dim = 3
F = "sqrt(y1^2 + y2^2 + y3^2) + b*y1"

[params]
b = 0.1

[sample_region]
x_min = -2.0
x_max = [1.0, 2.0, 3.0]
y_signs = [1, 0, -1]
y_radius = 0.5

[tolerances]
c_reducible = 1e-7
"""


def test_full_document():
    spec = metric_from_text(RANDERS)
    assert spec.dim == 3 and spec.params == {"b": 0.1}
    assert spec.sample_region.x_min == (-2.0, -2.0, -2.0)
    assert spec.sample_region.x_max == (1.0, 2.0, 3.0)
    assert spec.sample_region.y_signs == (1, 0, -1)
    assert spec.tol("c_reducible", 1e-6) == 1e-7
    assert spec.F([0, 0, 0], [1, 0, 0]) == pytest.approx(1.1)


def test_defaults():
    spec = metric_from_text('name = "e"\ndim = 2\nF = "sqrt(y1^2 + y2^2)"')
    assert spec.sample_region == SampleRegion.default(2)
    assert spec.tolerances == {}


@pytest.mark.parametrize("text,needle", [
    ('dim = 2\nF = "y1"', "name"),
    ('name = "a"\nF = "y1"', "dim"),
    ('name = "a"\ndim = 1\nF = "y1"', "dim"),
    ('name = "a"\ndim = 2\nF = "y1"\ncolour = 1', "unknown keys"),
    ('name = "a"\ndim = 2\nF = "y1"\n[sample_region]\nx_min = 1.0\nx_max = 0.0', "x_min"),
    ('name = "a"\ndim = 2\nF = "y1"\n[sample_region]\ny_signs = [2, 0]', "y_signs"),
    ('name = "a"\ndim = 2\nF = "y1"\n[sample_region]\nx_min = [0.0]', "x_min"),
    ('name = "a"\ndim = 2\nF = "y1"\n[sample_region]\nz = 1', "sample_region"),
    ('name = "a"\ndim = 2\nF = "y1 = 2', "<string>"),
])
def test_structural_errors(text, needle):
    with pytest.raises(SpecError) as err:
        metric_from_text(text)
    assert needle in str(err.value)


def test_expression_errors_carry_origin_and_position():
    with pytest.raises(ParseError) as err:
        metric_from_text('name = "a"\ndim = 2\nF = "y1 + "', origin="bad.fml")
    assert err.value.column == 6
    assert str(err.value).startswith("bad.fml: F: line 1, column 6")


def test_unbound_parameter_is_a_parse_error():
    with pytest.raises(ParseError):
        metric_from_text('name = "a"\ndim = 2\nF = "y1 + c*y2"')


def test_index_beyond_dimension():
    with pytest.raises(ParseError):
        metric_from_text('name = "a"\ndim = 2\nF = "y3"')


def test_missing_file(tmp_path):
    with pytest.raises(SpecError) as err:
        load_metric(tmp_path / "nope.fml")
    assert "nope.fml" in str(err.value)


def test_digest_tracks_content():
    a = metric_from_text(RANDERS)
    b = metric_from_text(RANDERS.replace("b = 0.1", "b = 0.2"))
    assert a.digest() == metric_from_text(RANDERS).digest()
    assert a.digest() != b.digest()


def test_scaled_metric():
    spec = zoo.load("randers")
    s = spec.scaled(3.0)
    assert s.F([0, 0, 0], [0, 1, 0]) == pytest.approx(3.0)


def test_zoo_loads(zoo_name):
    spec = zoo.load(zoo_name)
    assert spec.name == zoo_name
    with pytest.raises(KeyError):
        zoo.load("no-such-metric")


def test_metric_spec_invariants():
    with pytest.raises(SpecError):
        MetricSpec("a", 1, ex.parse_metric("y1"))
    with pytest.raises(SpecError):
        MetricSpec("a", 2, ex.parse_metric("b*y1"))


# -- vector fields -------------------------------------------------------------

def test_component_field(tmp_path):
    p = tmp_path / "f.toml"
    p.write_text('name = "conc"\ncomponents = ["-x1", "-x2", "-a*x3"]\n[params]\na = 1.0\n')
    vf = load_field(p, 3)
    assert vf.dim == 3 and not vf.is_gradient and vf.name == "conc"
    assert vf.describe() == {"name": "conc", "components": ["-x1", "-x2", "-a * x3"]}


def test_sigma_field():
    vf = field_from_text('sigma = "x1^2 + x2"', dim=2)
    assert vf.is_gradient and vf.describe()["sigma"] == "x1^2 + x2"


@pytest.mark.parametrize("text,dim,exc", [
    ('components = ["x1", "y2"]', 2, ParseError),
    ('components = ["x1"]', 2, SpecError),
    ('components = ["x1", "x3"]', 2, ParseError),
    ('components = ["x1", "x2"]\nsigma = "x1"', 2, SpecError),
    ('name = "nothing"', 2, SpecError),
    ('sigma = "x1"', None, SpecError),
    ('sigma = "y1"', 2, ParseError),
])
def test_field_errors(text, dim, exc):
    with pytest.raises(exc):
        field_from_text(text, dim)


def test_constant_field_names():
    vf = VectorFieldSpec.constant([1, 0, -2])
    assert vf.name == "const(1,0,-2)"
    assert [ex.to_source(c) for c in vf.components] == ["1.0", "0.0", "-2.0"]


def test_exactly_one_of_components_or_sigma():
    with pytest.raises(SpecError):
        VectorFieldSpec(2)
    with pytest.raises(SpecError):
        VectorFieldSpec(2, (ex.Num(1.0), ex.Num(0.0)), sigma=ex.Var("x", 1))
