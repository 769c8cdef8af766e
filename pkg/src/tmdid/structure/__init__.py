"""
Structural model: matrices, modal analysis and state-space form.
"""

from tmdid.structure.matrices import (
    MatrixTriple,
    StructureSpec,
    TmdSpec,
    assemble_matrices,
)
from tmdid.structure.modal import ModalProperties, modal_analysis, warburton_tune
from tmdid.structure.state_space import (
    ContinuousStateSpace,
    build_state_space,
    update_stiffness,
)

__all__ = [
    "MatrixTriple",
    "StructureSpec",
    "TmdSpec",
    "assemble_matrices",
    "ModalProperties",
    "modal_analysis",
    "warburton_tune",
    "ContinuousStateSpace",
    "build_state_space",
    "update_stiffness",
]
