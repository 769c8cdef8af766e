"""Unit tests for structural matrix assembly."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from tmdid.core.models import ValidationError
from tmdid.structure.matrices import (
    StructureSpec,
    TmdSpec,
    assemble_matrices,
    stiffness_patterns,
)


class TestStructureSpec:
    """Tests for StructureSpec validation."""

    def test_dimensions(self, two_story, two_story_tmd):
        """Test story and DoF counts with and without TMD."""
        assert two_story.n_stories == 2
        assert two_story.n_dof == 2
        assert two_story_tmd.n_dof == 3
        assert two_story_tmd.top_dof == 1

    def test_default_influence(self, two_story, two_story_tmd):
        """Test the influence vector defaults to ones over every DoF."""
        assert two_story.influence == (1.0, 1.0)
        assert two_story_tmd.influence == (1.0, 1.0, 1.0)

    def test_length_mismatch(self):
        """Test mismatched story arrays are rejected."""
        with pytest.raises(ValidationError, match="dimension mismatch"):
            StructureSpec((1000.0,), (100.0, 100.0), (12000.0, 10000.0))

    @pytest.mark.parametrize(
        "masses,damping,stiffness",
        [
            ((0.0, 1000.0), (100.0, 100.0), (12000.0, 10000.0)),
            ((1000.0, 1000.0), (100.0, 100.0), (12000.0, -1.0)),
            ((1000.0, 1000.0), (-5.0, 100.0), (12000.0, 10000.0)),
        ],
    )
    def test_non_positive_values(self, masses, damping, stiffness):
        """Test non-physical values are rejected."""
        with pytest.raises(ValidationError):
            StructureSpec(masses, damping, stiffness)

    def test_influence_length(self):
        """Test the influence vector must cover every DoF."""
        with pytest.raises(ValidationError, match="influence"):
            StructureSpec((1000.0,), (100.0,), (12000.0,), influence=(1.0, 1.0))

    def test_tmd_validation(self):
        """Test TMD parameters must be positive."""
        with pytest.raises(ValidationError):
            TmdSpec(mass=0.0, stiffness=360.0, damping=51.0)

    def test_with_stiffness(self, two_story):
        """Test replacing the story stiffness keeps everything else."""
        damaged = two_story.with_stiffness([10800.0, 10000.0])
        assert damaged.story_stiffness == (10800.0, 10000.0)
        assert damaged.story_masses == two_story.story_masses


class TestAssembleMatrices:
    """Tests for assemble_matrices()."""

    def test_bare_frame(self, two_story):
        """Test K, C and M of the two-story frame."""
        mats = assemble_matrices(two_story)
        assert_allclose(mats.K, [[22000.0, -10000.0], [-10000.0, 10000.0]])
        assert_allclose(mats.C, [[200.0, -100.0], [-100.0, 100.0]])
        assert_allclose(mats.M, np.diag([1000.0, 1000.0]))

    def test_tmd_coupling(self, two_story, round_tmd):
        """Test the TMD couples to the top story only."""
        mats = assemble_matrices(two_story.with_tmd(round_tmd))
        assert_allclose(
            mats.K,
            [
                [22000.0, -10000.0, 0.0],
                [-10000.0, 10360.0, -360.0],
                [0.0, -360.0, 360.0],
            ],
        )
        assert_allclose(
            mats.C,
            [[200.0, -100.0, 0.0], [-100.0, 151.0, -51.0], [0.0, -51.0, 51.0]],
        )
        assert_allclose(np.diag(mats.M), [1000.0, 1000.0, 100.0])

    def test_symmetric(self, two_story_tmd):
        """Test every assembled matrix is symmetric."""
        mats = assemble_matrices(two_story_tmd)
        for matrix in (mats.K, mats.C, mats.M):
            assert_allclose(matrix, matrix.T)

    def test_single_story(self):
        """Test a one-story frame gives 1x1 matrices."""
        mats = assemble_matrices(StructureSpec((500.0,), (20.0,), (8000.0,)))
        assert mats.K.shape == (1, 1)
        assert mats.K[0, 0] == pytest.approx(8000.0)


class TestStiffnessPatterns:
    """Tests for stiffness_patterns()."""

    def test_patterns_rebuild_stiffness(self, two_story_tmd):
        """Test sum k_i * pattern_i plus the TMD part equals K."""
        mats = assemble_matrices(two_story_tmd)
        patterns = stiffness_patterns(two_story_tmd, [0, 1])
        assert patterns.shape == (2, 3, 3)
        k = np.asarray(two_story_tmd.story_stiffness)
        story_part = np.einsum("p,pij->ij", k, patterns)
        rest = mats.K - story_part
        k_d = two_story_tmd.tmd.stiffness
        assert_allclose(rest[1:, 1:], [[k_d, -k_d], [-k_d, k_d]], atol=1e-9)
        assert_allclose(rest[0], 0.0, atol=1e-9)

    def test_first_story_pattern(self, two_story):
        """Test the first story only loads the first DoF."""
        patterns = stiffness_patterns(two_story, [0])
        assert_allclose(patterns[0], [[1.0, 0.0], [0.0, 0.0]])
