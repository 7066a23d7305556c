"""Stages, detector labels and effective bases.

A network is a sequence of stages.  At stage n the system under
observation (SUO) lives in a small Hilbert space of dimension ``suo_dim``
and the apparatus is a register of ``register_rank`` detector qubits.
A register basis state is encoded as a single integer label whose set
bits name the detectors that signal: bit m-1 set means detector m fired,
so label 0 is the void state, label 3 is a coincidence of detectors 1
and 2, label 12 a coincidence of detectors 3 and 4, and so on.  One
integer per detector combination is what keeps coincidence bookkeeping
trivial.

Only the basis states actually reachable in an experiment are declared;
they form the ordered *effective basis* of the stage, and all matrices
and vectors downstream are indexed by position in that list.  The full
``suo_dim * 2**register_rank`` tensor basis is never materialized here
(the brute-force cross-check in :mod:`qdn.oracle` does that).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import BasisMismatchError, DeclarationError, InvalidDetectorError, InvalidLabelError

# Labels must stay native ints; rank 30 is far beyond any network of interest.
MAX_REGISTER_RANK = 30


def labstate_label(detectors) -> int:
    """Encode a set of signaling detectors as an integer label.

    Detector m contributes bit m-1, so the label is
    ``sum(2**(m-1) for m in detectors)``.  The empty set encodes the
    void state, label 0.
    """
    label = 0
    for m in detectors:
        if not isinstance(m, (int, np.integer)) or isinstance(m, bool) or m < 1:
            raise InvalidDetectorError(f"detector index must be a positive integer, got {m!r}")
        label |= 1 << (int(m) - 1)
    return label


def label_detectors(label: int) -> set[int]:
    """Decode a label back into the set of signaling detectors."""
    if label < 0:
        raise InvalidLabelError(f"labstate label must be non-negative, got {label}")
    label = int(label)
    detectors = set()
    m = 1
    while label:
        if label & 1:
            detectors.add(m)
        label >>= 1
        m += 1
    return detectors


@dataclass(frozen=True)
class BasisElement:
    """One effective basis state: SUO index paired with a register label.

    ``suo_index`` is 1-based.  ``label`` is the detector bit set described
    in the module docstring.
    """

    suo_index: int
    label: int

    def __post_init__(self):
        if self.suo_index < 1:
            raise DeclarationError(f"SUO index must be >= 1, got {self.suo_index}")
        if self.label < 0:
            raise InvalidLabelError(f"labstate label must be non-negative, got {self.label}")

    @property
    def detectors(self) -> set[int]:
        return label_detectors(self.label)

    def __str__(self):
        dets = ",".join(str(m) for m in sorted(self.detectors))
        return f"s{self.suo_index}@{{{dets}}}"


@dataclass(frozen=True)
class StageSpace:
    """The effective state space of one stage.

    The effective basis is an explicit ordered list; its order fixes the
    row/column conventions of every matrix built over this stage.
    """

    stage_index: int
    suo_dim: int
    register_rank: int
    effective_basis: tuple[BasisElement, ...]

    def __init__(self, stage_index, suo_dim, register_rank, effective_basis):
        if stage_index < 0:
            raise DeclarationError(f"stage index must be >= 0, got {stage_index}")
        if suo_dim < 1:
            raise DeclarationError(f"SUO dimension must be >= 1, got {suo_dim}")
        if register_rank < 0:
            raise DeclarationError(f"register rank must be >= 0, got {register_rank}")
        if register_rank > MAX_REGISTER_RANK:
            raise DeclarationError(
                f"register rank {register_rank} exceeds the supported cap of {MAX_REGISTER_RANK}"
            )
        basis = tuple(effective_basis)
        seen = set()
        for elem in basis:
            if elem.suo_index > suo_dim:
                raise DeclarationError(
                    f"{elem}: SUO index {elem.suo_index} exceeds dimension {suo_dim}"
                )
            if elem.label >= (1 << register_rank):
                raise DeclarationError(
                    f"{elem}: label {elem.label} exceeds register of rank {register_rank}"
                )
            if elem in seen:
                raise DeclarationError(f"duplicate basis element {elem} at stage {stage_index}")
            seen.add(elem)
        object.__setattr__(self, "stage_index", stage_index)
        object.__setattr__(self, "suo_dim", suo_dim)
        object.__setattr__(self, "register_rank", register_rank)
        object.__setattr__(self, "effective_basis", basis)

    @cached_property
    def _positions(self) -> dict[BasisElement, int]:
        return {elem: k for k, elem in enumerate(self.effective_basis)}

    @property
    def dim(self) -> int:
        """Effective dimension (length of the declared basis)."""
        return len(self.effective_basis)

    @property
    def register_dim(self) -> int:
        return 1 << self.register_rank

    def __contains__(self, element: BasisElement) -> bool:
        return element in self._positions


def basis_index(stage: StageSpace, element: BasisElement) -> int | None:
    """Position of ``element`` in the stage's effective basis, or None."""
    return stage._positions.get(element)


@dataclass
class EffectiveVector:
    """A state over a stage's effective basis.

    ``coefficients`` is aligned, entry by entry, with
    ``stage.effective_basis``.
    """

    stage: StageSpace
    coefficients: np.ndarray = field(repr=False)

    def __post_init__(self):
        coeffs = np.asarray(self.coefficients, dtype=complex)
        if coeffs.ndim != 1 or coeffs.shape[0] != self.stage.dim:
            raise DeclarationError(
                f"coefficient vector of length {coeffs.shape} does not match "
                f"effective basis of size {self.stage.dim}"
            )
        self.coefficients = coeffs

    def squared_norm(self) -> float:
        return float(np.real(np.vdot(self.coefficients, self.coefficients)))

    def norm(self) -> float:
        return float(np.linalg.norm(self.coefficients))

    def coefficient(self, element: BasisElement) -> complex:
        pos = basis_index(self.stage, element)
        if pos is None:
            raise BasisMismatchError(f"{element} is not in the effective basis of stage {self.stage.stage_index}")
        return complex(self.coefficients[pos])
