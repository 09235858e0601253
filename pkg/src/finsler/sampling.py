"""Seeded sampling of admissible support elements.

y is drawn uniformly on the Euclidean sphere of radius ``y_radius`` (normal
deviates, normalised), the sign mask of the sample region is applied, and
x is uniform in the chart box.  The generator is numpy's PCG64 seeded with
the user seed; its name and the numpy version go into every report.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from finsler.errors import DomainError, EmptyRegionError, NotPositiveDefiniteError
from finsler.specfile import MetricSpec

GENERATOR = "numpy.random.PCG64"
MAX_ATTEMPT_FACTOR = 50
WORKERS_ENV = "FINSLER_WORKERS"


def generator_info() -> dict:
    return {"algorithm": GENERATOR, "numpy": np.__version__}


def rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class SupportElement:
    x: np.ndarray
    y: np.ndarray
    F: float

    def as_dict(self) -> dict:
        return {"x": [float(v) for v in self.x], "y": [float(v) for v in self.y], "F": float(self.F)}


def draw_y(spec: MetricSpec, gen: np.random.Generator) -> np.ndarray:
    region = spec.sample_region
    y = gen.standard_normal(spec.dim)
    y *= region.y_radius / np.linalg.norm(y)
    signs = np.asarray(region.y_signs)
    return np.where(signs == 0, y, signs * np.abs(y))


def draw_x(spec: MetricSpec, gen: np.random.Generator) -> np.ndarray:
    region = spec.sample_region
    return gen.uniform(np.asarray(region.x_min), np.asarray(region.x_max))


def raw_samples(spec: MetricSpec, count: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """``count`` support elements from the region without any admissibility filter."""
    gen = rng(seed)
    out = []
    for _ in range(count):
        x = draw_x(spec, gen)
        out.append((x, draw_y(spec, gen)))
    return out


def default_workers() -> int:
    """Worker count from ``FINSLER_WORKERS`` (default 1: evaluate in-process)."""
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}") from None


def _try_bundle(args):
    from finsler.tensors import compute_bundle

    spec, x, y, pipeline = args
    try:
        b = compute_bundle(spec, x, y, pipeline)
    except (DomainError, NotPositiveDefiniteError):
        return None
    return b if b.F > 0 else None


def sample_bundles(spec: MetricSpec, count: int, seed: int, x=None, pipeline: str = "jet",
                   workers: int | None = None):
    """Admissible samples and their tensor bundles.

    Samples where F is undefined, F <= 0, or g fails the positive-definiteness
    threshold are rejected and redrawn.  ``x`` pins the chart point.
    Candidates are drawn in a fixed order and accepted in that order, so the
    result does not depend on ``workers``.
    """
    workers = default_workers() if workers is None else max(1, workers)
    gen = rng(seed)
    bundles = []
    drawn = 0
    limit = MAX_ATTEMPT_FACTOR * max(count, 1)
    pool = ProcessPoolExecutor(workers) if workers > 1 else None
    try:
        while len(bundles) < count and drawn < limit:
            batch = []
            for _ in range(min(count - len(bundles), limit - drawn)):
                xs = draw_x(spec, gen) if x is None else np.asarray(x, dtype=float)
                batch.append((spec, xs, draw_y(spec, gen), pipeline))
            drawn += len(batch)
            results = pool.map(_try_bundle, batch) if pool else map(_try_bundle, batch)
            bundles.extend(b for b in results if b is not None)
    finally:
        if pool:
            pool.shutdown()
    if not bundles:
        raise EmptyRegionError(f"{spec.name}: every sampled support element was rejected")
    return bundles[:count]
