"""Shared fixtures and oracle helpers for the test suite."""
from __future__ import annotations

import numpy as np
import pytest

from corraoi import CorrelationMatrix, WeightVector


def random_instance(rng: np.random.Generator, n: int, unit_diagonal: bool = True):
    """Dense random instance: entries Unif[0,1], diagonal 1, random weights."""
    entries = rng.random((n, n))
    if unit_diagonal:
        np.fill_diagonal(entries, 1.0)
    w = rng.uniform(0.2, 2.0, n)
    return CorrelationMatrix(entries), WeightVector(w / w.sum())


def grid_search_simplex_3(P, w, step=1e-3):
    """Brute-force minimizer of the weighted-age objective over the
    2-simplex at the given resolution; independent of the solver."""
    vals = np.arange(0.0, 1.0 + step / 2, step)
    p1, p2 = np.meshgrid(vals, vals, indexing="ij")
    mask = p1 + p2 <= 1.0 + 1e-12
    p1, p2 = p1[mask], p2[mask]
    pis = np.stack([p1, p2, 1.0 - p1 - p2], axis=1)
    d = pis @ P.entries  # row k: denominators under candidate k
    with np.errstate(divide="ignore"):
        objs = np.where(d > 0, w.values / np.maximum(d, 1e-300), np.inf).sum(axis=1)
    best = int(np.argmin(objs))
    return pis[best], float(objs[best])


@pytest.fixture(scope="session")
def base_rng():
    return np.random.default_rng(20240817)
