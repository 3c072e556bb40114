"""Shared fixtures: default configuration, supercycle maps and cached pipelines."""
from __future__ import annotations

import pytest

from src.analysis.capture_set import CaptureSetBuilder
from src.analysis.extrema_engine import ExtremaEngine
from src.maps.unimodal_map import MapFamily
from src.orbits.orbit_finder import OrbitFinder
from src.utils.config_loader import get_default_config

# Logistic supercycle parameters, f^p(1/2) = 1/2
R3 = 3.83187405528331556841
R6 = 3.99758311825456726610


@pytest.fixture(scope="session")
def config():
    return get_default_config()


@pytest.fixture(scope="session")
def engine(config):
    return ExtremaEngine(config)


@pytest.fixture(scope="session")
def finder(config, engine):
    return OrbitFinder(config, engine)


@pytest.fixture(scope="session")
def builder(config, engine):
    return CaptureSetBuilder(config, engine)


@pytest.fixture(scope="session")
def logistic_r3():
    return MapFamily.logistic(R3)


@pytest.fixture(scope="session")
def logistic_r6():
    return MapFamily.logistic(R6)


@pytest.fixture(scope="session")
def captures_r3(finder, logistic_r3):
    return finder.resolve(logistic_r3)


@pytest.fixture(scope="session")
def captures_r6(finder, logistic_r6):
    return finder.resolve(logistic_r6)


@pytest.fixture
def quartic():
    """f(x) = 1 - (2x - 1)^4 as a custom polynomial map"""
    return MapFamily.custom([0.0, 8.0, -24.0, 32.0, -16.0], critical=0.5)
