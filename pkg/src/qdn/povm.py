"""Kraus operators, POVM elements and outcome rates.

Given the total realized evolution of a network, the block of rows that
lands on a given final register label A is the generalized Kraus
operator for outcome A; ``E^A = M^A+ M^A`` is the corresponding POVM
element over the *initial* effective basis, and the probability of
outcome A from a normalized initial state psi is ``psi^+ E^A psi``.

Because every combination of signaling detectors owns exactly one
label, the label-to-probability table is the primitive result;
coincidence rates and single-detector marginals are read off it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BasisMismatchError, NormalizationError
from .evolution import TransitionMatrix
from .exprs import Binding
from .registry import EffectiveVector, label_detectors, labstate_label

# Hermiticity of M+M holds to rounding; anything worse is a bug upstream.
_HERMITICITY_TOL = 1e-12
_IMAG_RATE_TOL = 1e-10
_NORM_TOL = 1e-9


@dataclass
class KrausOperator:
    """Rows of the total evolution that land on one final label.

    ``suo_indices`` records which final SUO index each row belongs to,
    in row order; columns follow the initial effective basis.
    """

    final_label: int
    suo_indices: tuple[int, ...]
    matrix: np.ndarray = field(repr=False)


@dataclass
class PovmElement:
    """Positive operator over the initial effective basis for one outcome."""

    final_label: int
    matrix: np.ndarray = field(repr=False)

    @property
    def detectors(self) -> set[int]:
        return label_detectors(self.final_label)


@dataclass
class RateTable:
    """Outcome probabilities keyed by final register label."""

    rates: dict[int, float]
    binding: Binding
    network: str = ""
    stage_count: int = 0

    def probability(self, label: int) -> float:
        return self.rates.get(label, 0.0)

    def coincidence_rate(self, detectors) -> float:
        """Probability that exactly this set of detectors signals."""
        return self.probability(labstate_label(detectors))

    def detector_marginal(self, detector: int) -> float:
        """Total probability of outcomes in which ``detector`` signals."""
        bit = 1 << (detector - 1)
        return sum(p for label, p in self.rates.items() if label & bit)

    def total(self) -> float:
        return sum(self.rates.values())

    def nonzero(self, threshold: float = 0.0) -> dict[int, float]:
        return {label: p for label, p in sorted(self.rates.items()) if abs(p) > threshold}


def kraus_operators(total: TransitionMatrix) -> list[KrausOperator]:
    """Split the total evolution into per-label Kraus operators.

    Labels whose rows are all exactly zero are dropped; in networks of
    any size most labels never receive amplitude.
    """
    rows_by_label: dict[int, list[tuple[int, int]]] = {}
    for row, elem in enumerate(total.target.effective_basis):
        rows_by_label.setdefault(elem.label, []).append((elem.suo_index, row))
    operators = []
    for label in sorted(rows_by_label):
        pairs = rows_by_label[label]
        block = total.entries[[row for _i, row in pairs], :]
        if not np.any(block):
            continue
        operators.append(
            KrausOperator(
                final_label=label,
                suo_indices=tuple(i for i, _row in pairs),
                matrix=block,
            )
        )
    return operators


def povm_elements(kraus: list[KrausOperator]) -> list[PovmElement]:
    """Form ``E^A = M^A+ M^A`` for each Kraus operator."""
    elements = []
    for op in kraus:
        matrix = op.matrix.conj().T @ op.matrix
        defect = float(np.max(np.abs(matrix - matrix.conj().T))) if matrix.size else 0.0
        if defect > _HERMITICITY_TOL:
            raise ArithmeticError(
                f"POVM element for label {op.final_label} is not Hermitian (defect {defect})"
            )
        elements.append(PovmElement(final_label=op.final_label, matrix=matrix))
    return elements


def completeness_defect(povms: list[PovmElement]) -> float:
    """Largest entry magnitude of ``sum_A E^A - I`` over the initial basis."""
    if not povms:
        return 1.0
    dim = povms[0].matrix.shape[0]
    total = np.zeros((dim, dim), dtype=complex)
    for element in povms:
        if element.matrix.shape != (dim, dim):
            raise BasisMismatchError("POVM elements do not share one initial basis")
        total += element.matrix
    return float(np.max(np.abs(total - np.eye(dim))))


def outcome_rates(
    povms: list[PovmElement],
    psi0: EffectiveVector,
    *,
    normalize: bool = False,
    binding: Binding | None = None,
    network: str = "",
    stage_count: int = 0,
) -> RateTable:
    """Probability of each outcome label for initial state ``psi0``.

    ``psi0`` must be normalized to within 1e-9 unless ``normalize`` is
    set, in which case it is rescaled first.
    """
    coeffs = psi0.coefficients
    norm = float(np.linalg.norm(coeffs))
    if normalize:
        if norm == 0.0:
            raise NormalizationError(norm)
        coeffs = coeffs / norm
    elif abs(norm - 1.0) > _NORM_TOL:
        raise NormalizationError(norm)
    rates: dict[int, float] = {}
    for element in povms:
        if element.matrix.shape[0] != coeffs.shape[0]:
            raise BasisMismatchError(
                f"POVM element over {element.matrix.shape[0]} basis states cannot take "
                f"a state of length {coeffs.shape[0]}"
            )
        value = complex(coeffs.conj() @ element.matrix @ coeffs)
        if abs(value.imag) > _IMAG_RATE_TOL:
            raise ArithmeticError(
                f"rate for label {element.final_label} has imaginary part {value.imag}"
            )
        rates[element.final_label] = value.real
    return RateTable(
        rates=rates,
        binding=dict(binding) if binding else {},
        network=network,
        stage_count=stage_count,
    )


def positivity_defect(element: PovmElement) -> float:
    """How far below zero the smallest eigenvalue sits (0 when PSD)."""
    eigenvalues = np.linalg.eigvalsh(element.matrix)
    smallest = float(eigenvalues[0]) if eigenvalues.size else 0.0
    return max(0.0, -smallest)
