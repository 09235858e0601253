"""Bundled reference metrics ("the zoo")."""

from __future__ import annotations

from importlib import resources

from finsler.specfile import MetricSpec, metric_from_text

ZOO = ("euclid", "exp-riemann", "randers", "randers-perturbed", "quartic4")
# Fixtures outside the reference set: a product of a Euclidean line and a
# quartic Minkowski plane, non-Riemannian yet admitting the constant SC field e1.
EXTRAS = ("product-quartic",)
RIEMANNIAN = ("euclid", "exp-riemann")
LOCALLY_MINKOWSKI = ("euclid", "randers", "quartic4", "product-quartic")


def zoo_path(name: str):
    return resources.files(__name__).joinpath(f"{name}.fml")


def load(name: str) -> MetricSpec:
    if name not in ZOO + EXTRAS:
        raise KeyError(f"unknown zoo metric {name!r}; choose from {', '.join(ZOO + EXTRAS)}")
    text = zoo_path(name).read_text(encoding="utf-8")
    return metric_from_text(text, f"zoo:{name}")
