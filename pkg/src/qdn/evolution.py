"""Stage-to-stage semi-unitary evolution.

A :class:`StageMap` holds the transition rules from one stage's
effective basis into the next, with amplitudes kept symbolic.  Under a
parameter binding it realizes to a dense complex matrix (rows indexed
by the target effective basis, columns by the source), matrices compose
by ordinary multiplication, and semi-unitarity ``U^+ U = I`` is checked
numerically at bindings of interest.

Rule sets whose source effective dimension exceeds the target's are
rejected at construction: no norm-preserving linear map into a smaller
space exists, so such a network is wrong by construction rather than
merely failing a numeric check later.

Matrices are dense throughout.  The largest operator in scope is a few
hundred by a handful of entries, so sparse machinery would buy nothing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BasisMismatchError,
    DeclarationError,
    DimensionTheoremError,
    IncompleteMapError,
    StageMismatchError,
)
from .exprs import Add, AmpExpr, Binding, evaluate
from .registry import BasisElement, EffectiveVector, StageSpace, basis_index

RuleTerms = tuple[tuple[BasisElement, AmpExpr], ...]


def _merge_terms(terms) -> RuleTerms:
    """Sum duplicate targets, keeping first-occurrence order."""
    merged: dict[BasisElement, AmpExpr] = {}
    for target, amp in terms:
        if target in merged:
            merged[target] = Add(merged[target], amp)
        else:
            merged[target] = amp
    return tuple(merged.items())


@dataclass(frozen=True)
class StageMap:
    """Sparse rule set for the evolution from ``source`` to ``target``.

    ``rules`` maps each source basis element to its list of
    (target element, amplitude) terms.  Duplicate targets inside one
    rule are summed on registration, so generated rule fragments can be
    concatenated without pre-merging.  A map may be constructed with
    rules missing; that is only an error when it is realized.
    """

    source: StageSpace
    target: StageSpace
    rules: dict[BasisElement, RuleTerms] = field(default_factory=dict)

    def __init__(self, source: StageSpace, target: StageSpace, rules):
        if source.dim > target.dim:
            raise DimensionTheoremError(
                f"no semi-unitary map from stage {source.stage_index} "
                f"(effective dimension {source.dim}) into stage {target.stage_index} "
                f"(effective dimension {target.dim})"
            )
        cleaned: dict[BasisElement, RuleTerms] = {}
        for src, terms in dict(rules).items():
            if src not in source:
                raise DeclarationError(
                    f"rule source {src} is not in the effective basis of stage {source.stage_index}"
                )
            for tgt, _amp in terms:
                if tgt not in target:
                    raise DeclarationError(
                        f"rule target {tgt} is not in the effective basis of stage {target.stage_index}"
                    )
            cleaned[src] = _merge_terms(terms)
        object.__setattr__(self, "source", source)
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "rules", cleaned)

    def parameters(self) -> set[str]:
        names: set[str] = set()
        for terms in self.rules.values():
            for _tgt, amp in terms:
                names |= amp.parameters()
        return names


@dataclass
class TransitionMatrix:
    """A stage map realized at a binding, or a composition of such.

    ``entries[j, k]`` is the amplitude from the k-th source basis
    element to the j-th target basis element.
    """

    source: StageSpace
    target: StageSpace
    entries: np.ndarray = field(repr=False)


def rules_from_pairs(pairs) -> dict[BasisElement, list[tuple[BasisElement, AmpExpr]]]:
    """Collect (source, terms) pairs into a rule dict.

    Terms for a repeated source are an error: each source element gets
    exactly one rule.
    """
    rules: dict[BasisElement, list[tuple[BasisElement, AmpExpr]]] = {}
    for src, terms in pairs:
        if src in rules:
            raise DeclarationError(f"duplicate rule for source element {src}")
        rules[src] = list(terms)
    return rules


def realize(stage_map: StageMap, binding: Binding) -> TransitionMatrix:
    """Evaluate every rule amplitude and assemble the transition matrix."""
    source, target = stage_map.source, stage_map.target
    entries = np.zeros((target.dim, source.dim), dtype=complex)
    for col, src in enumerate(source.effective_basis):
        terms = stage_map.rules.get(src)
        if terms is None:
            raise IncompleteMapError(
                f"stage map {source.stage_index}->{target.stage_index} has no rule for {src}"
            )
        for tgt, amp in terms:
            entries[basis_index(target, tgt), col] += evaluate(amp, binding)
    return TransitionMatrix(source=source, target=target, entries=entries)


def semi_unitarity_defect(matrix: TransitionMatrix) -> float:
    """Largest entry magnitude of ``U^+ U - I`` over the source space."""
    u = matrix.entries
    gram = u.conj().T @ u
    return float(np.max(np.abs(gram - np.eye(matrix.source.dim))))


def compose(maps, binding: Binding) -> TransitionMatrix:
    """Realize a chain of stage maps and multiply them in stage order."""
    maps = list(maps)
    if not maps:
        raise StageMismatchError("cannot compose an empty list of stage maps")
    for earlier, later in zip(maps, maps[1:]):
        if earlier.target != later.source:
            raise StageMismatchError(
                f"stage map into stage {earlier.target.stage_index} is followed by a map "
                f"from stage {later.source.stage_index}"
            )
    total = realize(maps[0], binding).entries
    for stage_map in maps[1:]:
        total = realize(stage_map, binding).entries @ total
    return TransitionMatrix(source=maps[0].source, target=maps[-1].target, entries=total)


def apply(matrix: TransitionMatrix, state: EffectiveVector) -> EffectiveVector:
    """Evolve a state through a realized transition matrix."""
    if state.stage != matrix.source:
        raise BasisMismatchError(
            f"state over stage {state.stage.stage_index} cannot be evolved by a map "
            f"from stage {matrix.source.stage_index}"
        )
    return EffectiveVector(stage=matrix.target, coefficients=matrix.entries @ state.coefficients)
