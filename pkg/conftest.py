"""
Shared pytest fixtures for the Veritest suite
"""
from pathlib import Path

import numpy as np
import pytest

from continuous_model import TypeDistribution
from figure_tables import green_laffont_environment
from finite_markov import Measure

FIXTURES = Path(__file__).resolve().parent / "fixtures"


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def fixtures_dir():
    return FIXTURES


@pytest.fixture
def gl_env():
    return green_laffont_environment()


@pytest.fixture
def uniform():
    return TypeDistribution.uniform()


@pytest.fixture
def hump():
    """Beta-like piecewise-linear density on [0, 1]."""
    return TypeDistribution.tabulated([0.0, 0.25, 0.5, 0.75, 1.0], [0.5, 1.2, 1.5, 1.2, 0.5])


@pytest.fixture
def make_measure(rng):
    """Random measure on a score set, optionally with null scores."""

    def make(scoreset, sparse=False):
        w = rng.dirichlet(np.ones(scoreset.size))
        if sparse:
            w = np.where(rng.uniform(size=w.size) < 0.3, 0.0, w)
            if w.sum() == 0.0:
                w[rng.integers(w.size)] = 1.0
            w = w / w.sum()
        return Measure(scoreset, w)

    return make
