"""
Shared fixtures.
"""
import numpy as np
import pytest

from src.experiments.families import bump
from src.geometry.harmonic import ExteriorHarmonic
from src.geometry.metric import RadialMetric
from src.schemas.models import FamilyKind, FamilySpec, GridSpec


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def dipole_harmonic():
    """Monopole m = 0.4 plus small degree 1 and 2 terms on |x| >= 1."""
    return ExteriorHarmonic.monopole(3, 0.4).with_terms([(1, 0, 0.05), (1, 2, -0.03), (2, 1, 0.02)])


@pytest.fixture
def schwarzschild_metric():
    return RadialMetric.schwarzschild_isotropic(3, 1.0, points_per_decade=128)


@pytest.fixture
def flat_metric():
    return RadialMetric.schwarzschild_isotropic(3, 0.0, points_per_decade=64)


@pytest.fixture
def bump_family():
    return FamilySpec(kind=FamilyKind.BUMP, amplitudes=[0.2])


@pytest.fixture
def bump_member(bump_family):
    return bump(3, 0.2, bump_family, GridSpec())
