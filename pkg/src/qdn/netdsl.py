"""The .qdn network description language.

A network file names the experiment, declares parameters, declares each
stage with its effective basis, gives the initial state, and lists the
transition rules between consecutive stages::

    network beamsplitter
    param alpha_re, alpha_im, beta_re, beta_im, theta

    stage 0 suo 1 rank 2
      basis @{1}
      basis @{2}
    stage 1 suo 1 rank 2
      basis @{1}
      basis @{2}

    init
      term (alpha_re + i*alpha_im) * @{1}
      term (beta_re + i*beta_im) * @{2}

    map 0 -> 1
      rule @{1} => cos(theta) * @{2} + i*sin(theta) * @{1}
      rule @{2} => i*sin(theta) * @{2} + cos(theta) * @{1}

A basis element is written ``s2@{1,3}``: SUO basis index 2, detectors 1
and 3 signaling.  The ``s`` prefix defaults to ``s1`` when omitted.
Amplitude expressions use ``+ - *``, parentheses, ``i``, ``pi``, numbers,
declared parameter names and the functions ``sin cos sqrt cis``.
Comments run from ``#`` to end of line.

The parser is a hand-written recursive descent over this line-oriented
grammar; every failure is reported as a :class:`Diagnostic` with a line
and column.  ``format_network`` renders a description back to source
text such that re-parsing reproduces the description exactly.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from .errors import DimensionTheoremError, QdnError
from .evolution import StageMap
from .exprs import (
    Add,
    AmpExpr,
    Call,
    ImagUnit,
    Lit,
    Mul,
    Neg,
    Param,
    format_expr,
    parameters_of,
)
from .registry import MAX_REGISTER_RANK, BasisElement, StageSpace

_FUNCTION_NAMES = ("sin", "cos", "sqrt", "cis")
_RESERVED_NAMES = ("i", "pi") + _FUNCTION_NAMES
_KEYWORDS = ("network", "param", "stage", "suo", "rank", "basis", "init", "term", "map", "rule")


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" or "warning"
    line: int
    column: int
    message: str

    def __str__(self):
        return f"{self.line}:{self.column}: {self.severity}: {self.message}"


class ParseError(QdnError):
    """Raised when a network description cannot be parsed or is invalid."""

    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))


@dataclass(frozen=True)
class SourcePositions:
    """Line/column info kept aside for diagnostics on parsed networks."""

    params: dict[str, tuple[int, int]]
    maps: dict[int, tuple[int, int]]


@dataclass
class NetworkDescription:
    """A parsed (or programmatically built) experiment.

    Stages are indexed consecutively from 0 and ``maps[k]`` evolves
    stage k into stage k+1.  Declaration order of basis elements fixes
    every matrix ordering downstream.
    """

    name: str
    parameters: tuple[str, ...]
    stages: tuple[StageSpace, ...]
    initial_state: tuple[tuple[BasisElement, AmpExpr], ...]
    maps: tuple[StageMap, ...]
    positions: SourcePositions | None = field(default=None, compare=False, repr=False)

    def used_parameters(self) -> set[str]:
        used: set[str] = set()
        for _elem, amp in self.initial_state:
            used |= parameters_of(amp)
        for stage_map in self.maps:
            used |= stage_map.parameters()
        return used


# ---------------------------------------------------------------------------
# Lexing


@dataclass(frozen=True)
class _Token:
    kind: str  # NAME NUMBER PUNCT
    text: str
    line: int
    column: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t]+)
  | (?P<comment>\#.*)
  | (?P<number>\d+(\.\d*)?([eE][+-]?\d+)?|\.\d+([eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>->|=>|[-+*@{}(),=])
    """,
    re.VERBOSE,
)


class _LineError(Exception):
    def __init__(self, diagnostic: Diagnostic):
        self.diagnostic = diagnostic


def _error(line: int, column: int, message: str) -> _LineError:
    return _LineError(Diagnostic("error", line, column, message))


def _tokenize_line(text: str, line_no: int) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            raise _error(line_no, pos + 1, f"unexpected character {text[pos]!r}")
        pos = match.end()
        if match.lastgroup == "number":
            tokens.append(_Token("NUMBER", match.group(), line_no, match.start() + 1))
        elif match.lastgroup == "name":
            tokens.append(_Token("NAME", match.group(), line_no, match.start() + 1))
        elif match.lastgroup == "punct":
            tokens.append(_Token("PUNCT", match.group(), line_no, match.start() + 1))
    return tokens


# ---------------------------------------------------------------------------
# Token-stream helpers


class _Cursor:
    def __init__(self, tokens: list[_Token], line: int):
        self.tokens = tokens
        self.line = line
        self.pos = 0

    def peek(self, offset: int = 0) -> _Token | None:
        k = self.pos + offset
        return self.tokens[k] if k < len(self.tokens) else None

    def next(self) -> _Token | None:
        token = self.peek()
        if token is not None:
            self.pos += 1
        return token

    def at_punct(self, text: str, offset: int = 0) -> bool:
        token = self.peek(offset)
        return token is not None and token.kind == "PUNCT" and token.text == text

    def expect_punct(self, text: str, what: str) -> _Token:
        token = self.next()
        if token is None:
            raise _error(self.line, self._end_column(), f"expected '{text}' {what}")
        if token.kind != "PUNCT" or token.text != text:
            raise _error(token.line, token.column, f"expected '{text}' {what}, got {token.text!r}")
        return token

    def expect_end(self):
        token = self.peek()
        if token is not None:
            raise _error(token.line, token.column, f"unexpected trailing {token.text!r}")

    def expect_int(self, what: str) -> int:
        token = self.next()
        if token is None:
            raise _error(self.line, self._end_column(), f"expected {what}")
        if token.kind != "NUMBER" or not token.text.isdigit():
            raise _error(token.line, token.column, f"expected {what}, got {token.text!r}")
        return int(token.text)

    def expect_name(self, what: str) -> _Token:
        token = self.next()
        if token is None:
            raise _error(self.line, self._end_column(), f"expected {what}")
        if token.kind != "NAME":
            raise _error(token.line, token.column, f"expected {what}, got {token.text!r}")
        return token

    def _end_column(self) -> int:
        if self.tokens:
            last = self.tokens[-1]
            return last.column + len(last.text)
        return 1


_SUO_PREFIX_RE = re.compile(r"^s(\d+)$")


def _starts_basis_element(cursor: _Cursor, offset: int = 0) -> bool:
    token = cursor.peek(offset)
    if token is None:
        return False
    if token.kind == "PUNCT" and token.text == "@":
        return True
    if token.kind == "NAME" and _SUO_PREFIX_RE.match(token.text):
        return cursor.at_punct("@", offset + 1)
    return False


# ---------------------------------------------------------------------------
# Expression parsing (shared surface syntax; also used for CLI values)


class _ExprParser:
    def __init__(self, cursor: _Cursor, parameters, implicit_mul: bool = False):
        self.cursor = cursor
        self.parameters = parameters  # None means any name is a parameter
        self.implicit_mul = implicit_mul

    def parse(self) -> AmpExpr:
        return self._sum()

    def _sum(self) -> AmpExpr:
        expr = self._product()
        while True:
            if self.cursor.at_punct("+") and not self._plus_splits_terms():
                self.cursor.next()
                expr = Add(expr, self._product())
            elif self.cursor.at_punct("-"):
                self.cursor.next()
                expr = Add(expr, Neg(self._product()))
            else:
                return expr

    def _plus_splits_terms(self) -> bool:
        # Inside rule lines a '+' right before "expr * elem" separates
        # rule terms; the sum loop never needs to look past the element
        # boundary because _product already stopped there.
        return False

    def _product(self) -> AmpExpr:
        expr = self._unary()
        while True:
            if self.cursor.at_punct("*"):
                if _starts_basis_element(self.cursor, 1):
                    return expr  # the '*' belongs to "expr * basiselem"
                self.cursor.next()
                expr = Mul(expr, self._unary())
            elif self.implicit_mul and self._at_atom_start():
                expr = Mul(expr, self._unary())
            else:
                return expr

    def _at_atom_start(self) -> bool:
        token = self.cursor.peek()
        if token is None:
            return False
        if token.kind in ("NUMBER", "NAME"):
            return True
        return token.kind == "PUNCT" and token.text == "("

    def _unary(self) -> AmpExpr:
        if self.cursor.at_punct("-"):
            self.cursor.next()
            return Neg(self._unary())
        return self._atom()

    def _atom(self) -> AmpExpr:
        token = self.cursor.next()
        if token is None:
            raise _error(self.cursor.line, self.cursor._end_column(), "expected an expression")
        if token.kind == "NUMBER":
            return Lit(float(token.text))
        if token.kind == "PUNCT" and token.text == "(":
            expr = self._sum()
            self.cursor.expect_punct(")", "to close the parenthesis")
            return expr
        if token.kind == "NAME":
            if _SUO_PREFIX_RE.match(token.text) and self.cursor.at_punct("@") or (
                token.text == "s" and self.cursor.at_punct("@")
            ):
                raise _error(
                    token.line,
                    token.column,
                    "expected an amplitude expression before the basis element",
                )
            if token.text == "i":
                return ImagUnit()
            if token.text == "pi":
                return Lit(math.pi)
            if token.text in _FUNCTION_NAMES:
                self.cursor.expect_punct("(", f"after function {token.text!r}")
                arg = self._sum()
                self.cursor.expect_punct(")", f"to close {token.text!r}")
                return Call(token.text, arg)
            if self.parameters is not None and token.text not in self.parameters:
                raise _error(token.line, token.column, f"undeclared parameter {token.text!r}")
            return Param(token.text)
        if token.kind == "PUNCT" and token.text == "@":
            raise _error(
                token.line, token.column, "expected an amplitude expression before the basis element"
            )
        raise _error(token.line, token.column, f"expected an expression, got {token.text!r}")


def parse_expression(text: str, parameters=None, implicit_mul: bool = True) -> AmpExpr:
    """Parse a standalone expression (used for CLI parameter values).

    ``parameters``: iterable of allowed parameter names, or None to
    allow any name.  With ``implicit_mul`` set, juxtaposition like
    ``2pi`` multiplies.
    """
    try:
        tokens = _tokenize_line(text, 1)
        cursor = _Cursor(tokens, 1)
        if not tokens:
            raise _error(1, 1, "expected an expression")
        expr = _ExprParser(
            cursor,
            set(parameters) if parameters is not None else None,
            implicit_mul=implicit_mul,
        ).parse()
        cursor.expect_end()
        return expr
    except _LineError as err:
        raise ParseError([err.diagnostic]) from None


# ---------------------------------------------------------------------------
# Network parsing


@dataclass
class _StageDraft:
    index: int
    suo_dim: int
    rank: int
    header: _Token
    elements: list[BasisElement] = field(default_factory=list)


@dataclass
class _MapDraft:
    source_index: int
    target_index: int
    header: _Token
    rules: list[tuple[BasisElement, list[tuple[BasisElement, AmpExpr]]]] = field(default_factory=list)
    rule_lines: dict[BasisElement, int] = field(default_factory=dict)


class _NetworkParser:
    def __init__(self, source: str):
        self.source = source
        self.diagnostics: list[Diagnostic] = []
        self.name: str | None = None
        self.parameters: list[str] = []
        self.param_positions: dict[str, tuple[int, int]] = {}
        self.stages: list[StageSpace] = []
        self.initial_state: list[tuple[BasisElement, AmpExpr]] = []
        self.map_drafts: dict[int, _MapDraft] = {}
        self.map_positions: dict[int, tuple[int, int]] = {}
        self.block: _StageDraft | _MapDraft | str | None = None

    def fail(self, diagnostic: Diagnostic):
        self.diagnostics.append(diagnostic)

    def parse(self) -> NetworkDescription:
        lines = self.source.splitlines()
        for line_no, raw in enumerate(lines, start=1):
            try:
                tokens = _tokenize_line(raw, line_no)
            except _LineError as err:
                self.fail(err.diagnostic)
                continue
            if not tokens:
                continue
            try:
                self._parse_line(_Cursor(tokens, line_no), tokens[0])
            except _LineError as err:
                self.fail(err.diagnostic)
        self._close_block()
        network = self._assemble(len(lines))
        errors = [d for d in self.diagnostics if d.severity == "error"]
        if errors:
            raise ParseError(errors)
        assert network is not None
        return network

    # -- line dispatch

    def _parse_line(self, cursor: _Cursor, head: _Token):
        if head.kind != "NAME" or head.text not in _KEYWORDS:
            raise _error(head.line, head.column, f"expected a declaration keyword, got {head.text!r}")
        keyword = head.text
        if keyword in ("basis", "term", "rule"):
            handler = {"basis": self._parse_basis, "term": self._parse_term, "rule": self._parse_rule}
            handler[keyword](cursor)
            return
        self._close_block()
        if self.name is None and keyword != "network":
            raise _error(head.line, head.column, "file must start with a 'network' declaration")
        cursor.next()  # consume the keyword
        if keyword == "network":
            self._parse_network_header(cursor, head)
        elif keyword == "param":
            self._parse_param(cursor)
        elif keyword == "stage":
            self._parse_stage_header(cursor, head)
        elif keyword == "init":
            cursor.expect_end()
            self.block = "init"
        elif keyword == "map":
            self._parse_map_header(cursor, head)
        else:
            raise _error(head.line, head.column, f"{keyword!r} cannot start a declaration")

    def _parse_network_header(self, cursor: _Cursor, head: _Token):
        if self.name is not None:
            raise _error(head.line, head.column, "duplicate 'network' declaration")
        self.name = cursor.expect_name("a network name").text
        cursor.expect_end()

    def _parse_param(self, cursor: _Cursor):
        while True:
            token = cursor.expect_name("a parameter name")
            if token.text in _RESERVED_NAMES:
                raise _error(token.line, token.column, f"parameter name {token.text!r} is reserved")
            if token.text in self.param_positions:
                first = self.param_positions[token.text]
                raise _error(
                    token.line,
                    token.column,
                    f"parameter {token.text!r} already declared at line {first[0]}",
                )
            self.parameters.append(token.text)
            self.param_positions[token.text] = (token.line, token.column)
            if cursor.at_punct(","):
                cursor.next()
                continue
            cursor.expect_end()
            return

    def _parse_stage_header(self, cursor: _Cursor, head: _Token):
        index = cursor.expect_int("a stage index")
        if index != len(self.stages):
            raise _error(
                head.line, head.column,
                f"expected stage {len(self.stages)}, got {index}; stages are numbered consecutively",
            )
        word = cursor.expect_name("'suo'")
        if word.text != "suo":
            raise _error(word.line, word.column, f"expected 'suo', got {word.text!r}")
        suo_dim = cursor.expect_int("the SUO dimension")
        if suo_dim < 1:
            raise _error(word.line, word.column, f"SUO dimension must be >= 1, got {suo_dim}")
        word = cursor.expect_name("'rank'")
        if word.text != "rank":
            raise _error(word.line, word.column, f"expected 'rank', got {word.text!r}")
        rank = cursor.expect_int("the register rank")
        if rank > MAX_REGISTER_RANK:
            raise _error(
                word.line, word.column,
                f"register rank {rank} exceeds the supported cap of {MAX_REGISTER_RANK}",
            )
        cursor.expect_end()
        self.block = _StageDraft(index=index, suo_dim=suo_dim, rank=rank, header=head)

    def _parse_map_header(self, cursor: _Cursor, head: _Token):
        source = cursor.expect_int("a source stage index")
        cursor.expect_punct("->", "between the stage indices")
        target = cursor.expect_int("a target stage index")
        cursor.expect_end()
        if target != source + 1:
            raise _error(
                head.line, head.column,
                f"maps connect consecutive stages; got {source} -> {target}",
            )
        for index in (source, target):
            if index >= len(self.stages):
                raise _error(head.line, head.column, f"stage {index} is not declared")
        if source in self.map_drafts:
            first = self.map_positions[source]
            raise _error(
                head.line, head.column,
                f"map {source} -> {target} already declared at line {first[0]}",
            )
        draft = _MapDraft(source_index=source, target_index=target, header=head)
        self.map_drafts[source] = draft
        self.map_positions[source] = (head.line, head.column)
        self.block = draft

    # -- block bodies

    def _parse_basis(self, cursor: _Cursor):
        head = cursor.next()
        if not isinstance(self.block, _StageDraft):
            raise _error(head.line, head.column, "'basis' line outside a stage block")
        draft = self.block
        element = self._parse_element(cursor, suo_dim=draft.suo_dim, rank=draft.rank)
        cursor.expect_end()
        if element in draft.elements:
            raise _error(head.line, head.column, f"duplicate basis element {element}")
        draft.elements.append(element)

    def _parse_term(self, cursor: _Cursor):
        head = cursor.next()
        if self.block != "init":
            raise _error(head.line, head.column, "'term' line outside the init block")
        if not self.stages:
            raise _error(head.line, head.column, "init requires stage 0 to be declared first")
        amp = self._parse_amplitude(cursor)
        cursor.expect_punct("*", "between the amplitude and the basis element")
        element = self._parse_declared_element(cursor, self.stages[0])
        cursor.expect_end()
        self.initial_state.append((element, amp))

    def _parse_rule(self, cursor: _Cursor):
        head = cursor.next()
        if not isinstance(self.block, _MapDraft):
            raise _error(head.line, head.column, "'rule' line outside a map block")
        draft = self.block
        source_stage = self.stages[draft.source_index]
        target_stage = self.stages[draft.target_index]
        source = self._parse_declared_element(cursor, source_stage)
        if source in draft.rule_lines:
            raise _error(
                head.line, head.column,
                f"duplicate rule for {source}: lines {draft.rule_lines[source]} and {head.line}",
            )
        cursor.expect_punct("=>", "after the rule source")
        terms = []
        while True:
            amp = self._parse_amplitude(cursor)
            cursor.expect_punct("*", "between the amplitude and the basis element")
            target = self._parse_declared_element(cursor, target_stage)
            terms.append((target, amp))
            if cursor.at_punct("+"):
                cursor.next()
                continue
            cursor.expect_end()
            break
        draft.rules.append((source, terms))
        draft.rule_lines[source] = head.line

    def _parse_amplitude(self, cursor: _Cursor) -> AmpExpr:
        return _ExprParser(cursor, set(self.parameters)).parse()

    def _parse_element(self, cursor: _Cursor, suo_dim: int, rank: int) -> BasisElement:
        suo_index = 1
        token = cursor.peek()
        if token is not None and token.kind == "NAME":
            match = _SUO_PREFIX_RE.match(token.text)
            if match is None:
                raise _error(token.line, token.column, f"expected a basis element, got {token.text!r}")
            suo_index = int(match.group(1))
            cursor.next()
            token = cursor.peek()
        at = cursor.expect_punct("@", "to introduce the detector set")
        cursor.expect_punct("{", "to open the detector set")
        detectors: set[int] = set()
        if not cursor.at_punct("}"):
            while True:
                det_token = cursor.peek()
                detector = cursor.expect_int("a detector index")
                if detector < 1:
                    raise _error(det_token.line, det_token.column, "detector indices start at 1")
                if detector in detectors:
                    raise _error(det_token.line, det_token.column, f"duplicate detector {detector}")
                detectors.add(detector)
                if cursor.at_punct(","):
                    cursor.next()
                    continue
                break
        cursor.expect_punct("}", "to close the detector set")
        if suo_index < 1 or suo_index > suo_dim:
            raise _error(at.line, at.column, f"SUO index {suo_index} exceeds dimension {suo_dim}")
        label = 0
        for m in detectors:
            label |= 1 << (m - 1)
        if label >= (1 << rank):
            raise _error(at.line, at.column, f"label {label} exceeds register of rank {rank}")
        return BasisElement(suo_index=suo_index, label=label)

    def _parse_declared_element(self, cursor: _Cursor, stage: StageSpace) -> BasisElement:
        token = cursor.peek()
        start = token if token is not None else _Token("PUNCT", "", cursor.line, cursor._end_column())
        element = self._parse_element(cursor, suo_dim=stage.suo_dim, rank=stage.register_rank)
        if element not in stage:
            raise _error(
                start.line, start.column,
                f"basis element {element} is not declared at stage {stage.stage_index}",
            )
        return element

    # -- assembly

    def _close_block(self):
        block, self.block = self.block, None
        if isinstance(block, _StageDraft):
            self.stages.append(
                StageSpace(
                    stage_index=block.index,
                    suo_dim=block.suo_dim,
                    register_rank=block.rank,
                    effective_basis=tuple(block.elements),
                )
            )

    def _assemble(self, line_count: int) -> NetworkDescription | None:
        if self.name is None:
            self.fail(Diagnostic("error", 1, 1, "expected a 'network' declaration"))
            return None
        if not self.stages:
            self.fail(Diagnostic("error", 1, 1, "network declares no stages"))
            return None
        maps: list[StageMap] = []
        for k in range(len(self.stages) - 1):
            draft = self.map_drafts.get(k)
            if draft is None:
                self.fail(Diagnostic("error", 1, 1, f"missing map {k} -> {k + 1}"))
                continue
            header = draft.header
            try:
                maps.append(
                    StageMap(
                        source=self.stages[draft.source_index],
                        target=self.stages[draft.target_index],
                        rules=dict(draft.rules),
                    )
                )
            except DimensionTheoremError as err:
                self.fail(Diagnostic("error", header.line, header.column, str(err)))
        if len(maps) != len(self.stages) - 1:
            return None
        return NetworkDescription(
            name=self.name,
            parameters=tuple(self.parameters),
            stages=tuple(self.stages),
            initial_state=tuple(self.initial_state),
            maps=tuple(maps),
            positions=SourcePositions(params=dict(self.param_positions), maps=dict(self.map_positions)),
        )


def parse_network(source_text: str) -> NetworkDescription:
    """Parse .qdn source into a validated NetworkDescription.

    Raises :class:`ParseError` carrying positioned diagnostics on any
    syntax or structural error.
    """
    return _NetworkParser(source_text).parse()


def validate(network: NetworkDescription) -> list[Diagnostic]:
    """Static checks beyond parsing.

    Returns error diagnostics for stage maps whose source effective
    dimension exceeds the target's (no semi-unitary map can exist) and
    warnings for declared parameters that no expression references.
    """
    diagnostics: list[Diagnostic] = []
    positions = network.positions
    for stage_map in network.maps:
        if stage_map.source.dim > stage_map.target.dim:
            line, column = (0, 0)
            if positions is not None:
                line, column = positions.maps.get(stage_map.source.stage_index, (0, 0))
            diagnostics.append(
                Diagnostic(
                    "error", line, column,
                    f"no semi-unitary map from stage {stage_map.source.stage_index} "
                    f"(effective dimension {stage_map.source.dim}) into stage "
                    f"{stage_map.target.stage_index} (effective dimension {stage_map.target.dim})",
                )
            )
    used = network.used_parameters()
    for name in network.parameters:
        if name not in used:
            line, column = (0, 0)
            if positions is not None:
                line, column = positions.params.get(name, (0, 0))
            diagnostics.append(
                Diagnostic("warning", line, column, f"parameter {name!r} is never used")
            )
    return diagnostics


# ---------------------------------------------------------------------------
# Pretty-printing


def format_element(element: BasisElement, stage: StageSpace) -> str:
    detectors = ",".join(str(m) for m in sorted(element.detectors))
    if stage.suo_dim == 1:
        return f"@{{{detectors}}}"
    return f"s{element.suo_index}@{{{detectors}}}"


def format_network(network: NetworkDescription) -> str:
    """Render a NetworkDescription as .qdn source.

    Parsing the output reproduces the description exactly (positions
    aside).
    """
    out = [f"network {network.name}"]
    if network.parameters:
        out.append("")
        out.append("param " + ", ".join(network.parameters))
    for stage in network.stages:
        out.append("")
        out.append(f"stage {stage.stage_index} suo {stage.suo_dim} rank {stage.register_rank}")
        for element in stage.effective_basis:
            out.append(f"  basis {format_element(element, stage)}")
    if network.initial_state:
        out.append("")
        out.append("init")
        stage0 = network.stages[0]
        for element, amp in network.initial_state:
            out.append(f"  term {format_expr(amp)} * {format_element(element, stage0)}")
    for stage_map in network.maps:
        out.append("")
        out.append(f"map {stage_map.source.stage_index} -> {stage_map.target.stage_index}")
        for source in stage_map.source.effective_basis:
            terms = stage_map.rules.get(source)
            if terms is None:
                continue
            rendered = " + ".join(
                f"{format_expr(amp)} * {format_element(target, stage_map.target)}"
                for target, amp in terms
            )
            out.append(f"  rule {format_element(source, stage_map.source)} => {rendered}")
    out.append("")
    return "\n".join(out)
