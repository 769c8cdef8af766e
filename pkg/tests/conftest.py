"""
Shared pytest fixtures for tmdid tests.

The reference system is the two-story shear frame used throughout the
studies: 1 t floors, 12 and 10 kN/m stories, 0.1 kN*s/m damping and a
0.1 t TMD on the top story.
"""

import numpy as np
import pytest

from tmdid.core.models import SensorLayout
from tmdid.structure.matrices import StructureSpec, TmdSpec, assemble_matrices
from tmdid.structure.modal import modal_analysis, warburton_parameters

TS = 0.02
STORY_MASSES = (1000.0, 1000.0)
STORY_STIFFNESS = (12000.0, 10000.0)
STORY_DAMPING = (100.0, 100.0)
TMD_MASS = 100.0


@pytest.fixture
def two_story():
    """Bare two-story frame (SI units)."""
    return StructureSpec(
        story_masses=STORY_MASSES,
        story_damping=STORY_DAMPING,
        story_stiffness=STORY_STIFFNESS,
    )


@pytest.fixture
def tmd_spec(two_story):
    """Warburton-tuned TMD for the two-story frame."""
    modal = modal_analysis(assemble_matrices(two_story))
    return warburton_parameters(modal, TMD_MASS).tmd


@pytest.fixture
def two_story_tmd(two_story, tmd_spec):
    """Two-story frame with the tuned TMD on the top story."""
    return two_story.with_tmd(tmd_spec)


@pytest.fixture
def round_tmd():
    """TMD with rounded parameters (360 N/m, 51 N*s/m)."""
    return TmdSpec(mass=100.0, stiffness=360.0, damping=51.0)


@pytest.fixture
def accelerometers():
    """Accelerometers on both stories."""
    return SensorLayout.accelerometers([0, 1])


@pytest.fixture
def rng():
    """Seeded generator for test data."""
    return np.random.default_rng(1234)
