"""
Mass, damping and stiffness matrices of a shear frame with optional TMD.

Stories form a chain fixed at the ground. A tuned mass damper, when
present, is an extra DoF coupled to the top story.
"""

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from tmdid.core.models import ValidationError


@dataclass(frozen=True)
class TmdSpec:
    """Tuned mass damper parameters (SI units)."""

    mass: float
    stiffness: float
    damping: float

    def __post_init__(self):
        for name in ("mass", "stiffness", "damping"):
            value = getattr(self, name)
            if not value > 0:
                raise ValidationError(f"TMD {name} must be > 0, got {value}")


@dataclass(frozen=True)
class StructureSpec:
    """n-story shear frame, optionally with a TMD on the top story.

    Attributes:
        story_masses: Floor masses [kg], bottom to top
        story_damping: Interstory viscous damping [N*s/m]
        story_stiffness: Interstory stiffness [N/m] (initial values)
        tmd: Optional TMD attached to the top story
        influence: Excitation influence vector, one entry per DoF
            (TMD included); defaults to all ones
    """

    story_masses: tuple[float, ...]
    story_damping: tuple[float, ...]
    story_stiffness: tuple[float, ...]
    tmd: Optional[TmdSpec] = None
    influence: tuple[float, ...] = field(default=())

    def __post_init__(self):
        masses = tuple(float(v) for v in self.story_masses)
        damping = tuple(float(v) for v in self.story_damping)
        stiffness = tuple(float(v) for v in self.story_stiffness)
        if not masses:
            raise ValidationError("structure needs at least one story")
        if not len(masses) == len(damping) == len(stiffness):
            raise ValidationError(
                f"dimension mismatch: {len(masses)} masses, {len(damping)} "
                f"dampings, {len(stiffness)} stiffnesses"
            )
        if any(not m > 0 for m in masses):
            raise ValidationError(f"all masses must be > 0, got {masses}")
        if any(not k > 0 for k in stiffness):
            raise ValidationError(f"all stiffnesses must be > 0, got {stiffness}")
        if any(c < 0 for c in damping):
            raise ValidationError(f"all dampings must be >= 0, got {damping}")

        object.__setattr__(self, "story_masses", masses)
        object.__setattr__(self, "story_damping", damping)
        object.__setattr__(self, "story_stiffness", stiffness)

        n_dof = len(masses) + (1 if self.tmd is not None else 0)
        influence = tuple(float(v) for v in self.influence) or (1.0,) * n_dof
        if len(influence) != n_dof:
            raise ValidationError(
                f"influence vector has {len(influence)} entries, expected {n_dof}"
            )
        object.__setattr__(self, "influence", influence)

    @property
    def n_stories(self) -> int:
        return len(self.story_masses)

    @property
    def n_dof(self) -> int:
        """Structural DoFs plus the TMD DoF when present."""
        return self.n_stories + (1 if self.tmd is not None else 0)

    @property
    def top_dof(self) -> int:
        return self.n_stories - 1

    def with_stiffness(self, stiffness: Sequence[float]) -> "StructureSpec":
        """Copy with new story stiffnesses."""
        return replace(self, story_stiffness=tuple(stiffness))

    def with_tmd(self, tmd: Optional[TmdSpec]) -> "StructureSpec":
        """Copy with a different (or no) TMD; the influence vector is reset."""
        return replace(self, tmd=tmd, influence=())


@dataclass(frozen=True)
class MatrixTriple:
    """Stiffness, damping and mass matrices of equal square dimension."""

    K: np.ndarray
    C: np.ndarray
    M: np.ndarray

    def __post_init__(self):
        shapes = {self.K.shape, self.C.shape, self.M.shape}
        if len(shapes) != 1:
            raise ValidationError(f"matrix shapes differ: {sorted(shapes)}")
        shape = shapes.pop()
        if len(shape) != 2 or shape[0] != shape[1]:
            raise ValidationError(f"matrices must be square, got {shape}")
        for name in ("K", "C", "M"):
            matrix = np.array(getattr(self, name), dtype=float)
            matrix.flags.writeable = False
            object.__setattr__(self, name, matrix)

    @property
    def n_dof(self) -> int:
        return self.M.shape[0]


def _chain(values: Sequence[float], n_dof: int) -> np.ndarray:
    """Tridiagonal chain matrix of story elements fixed at the ground."""
    matrix = np.zeros((n_dof, n_dof))
    for i, value in enumerate(values):
        matrix[i, i] += value
        if i > 0:
            matrix[i - 1, i - 1] += value
            matrix[i - 1, i] -= value
            matrix[i, i - 1] -= value
    return matrix


def _couple_tmd(matrix: np.ndarray, top: int, value: float) -> None:
    tmd = top + 1
    matrix[top, top] += value
    matrix[tmd, tmd] += value
    matrix[top, tmd] -= value
    matrix[tmd, top] -= value


def assemble_matrices(spec: StructureSpec) -> MatrixTriple:
    """
    Assemble K, C and M of the shear frame.

    The TMD row and column are appended after the stories when present.

    Args:
        spec: Structure definition

    Returns:
        MatrixTriple with exactly symmetric K, C and diagonal M
    """
    n = spec.n_dof
    K = _chain(spec.story_stiffness, n)
    C = _chain(spec.story_damping, n)
    M = np.diag(list(spec.story_masses) + ([spec.tmd.mass] if spec.tmd else []))
    if spec.tmd is not None:
        _couple_tmd(K, spec.top_dof, spec.tmd.stiffness)
        _couple_tmd(C, spec.top_dof, spec.tmd.damping)
    return MatrixTriple(K=K, C=C, M=M)


def stiffness_patterns(spec: StructureSpec, stories: Sequence[int]) -> np.ndarray:
    """
    Unit stiffness patterns of the given stories.

    K is linear in the story stiffnesses, so
    K(k) = K_rest + sum_j k[stories[j]] * patterns[j].

    Returns:
        Array of shape (len(stories), n_dof, n_dof)
    """
    n = spec.n_dof
    patterns = np.zeros((len(stories), n, n))
    for j, story in enumerate(stories):
        unit = np.zeros(spec.n_stories)
        unit[story] = 1.0
        patterns[j] = _chain(unit, n)
    return patterns
