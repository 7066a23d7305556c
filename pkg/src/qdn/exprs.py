"""Amplitude expressions over named real parameters.

Transition amplitudes like ``i*r1*cis(phi1)`` are kept as small
expression trees so a network can be described once and then evaluated
on many parameter bindings.  Parameters are real-valued; the imaginary
unit enters only through the explicit ``I`` node, mirroring how
reflection phases are written.  ``cis(x)`` is ``exp(i*x)``.

There is no simplification and no symbolic algebra here: trees evaluate
numerically to complex numbers under a binding (a plain dict from
parameter name to float).  Python operators are overloaded so trees can
be written naturally::

    t1, r1, phi1 = Param("t1"), Param("r1"), Param("phi1")
    amp = I * r1 * cis(phi1)
    amp.evaluate({"r1": 0.6, "phi1": 0.0})   # 0.6j

``format_expr`` renders a tree in the same surface syntax the network
description language uses; parsing that text back (see
:mod:`qdn.netdsl`) reproduces the tree node for node, provided literals
are non-negative reals, which is all the parser itself can produce.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

from .errors import ExpressionDomainError, MissingBindingError

Binding = dict[str, float]

_FUNCTIONS = ("sin", "cos", "sqrt", "cis")

# Imaginary parts below this magnitude are treated as rounding noise when
# an operation needs a real argument.
_IMAG_TOL = 1e-12


class AmpExpr:
    """Base class for amplitude expression nodes."""

    def evaluate(self, binding: Binding) -> complex:
        return evaluate(self, binding)

    def parameters(self) -> set[str]:
        return parameters_of(self)

    def __add__(self, other):
        return Add(self, _coerce(other))

    def __radd__(self, other):
        return Add(_coerce(other), self)

    def __sub__(self, other):
        return Add(self, Neg(_coerce(other)))

    def __rsub__(self, other):
        return Add(_coerce(other), Neg(self))

    def __mul__(self, other):
        return Mul(self, _coerce(other))

    def __rmul__(self, other):
        return Mul(_coerce(other), self)

    def __neg__(self):
        return Neg(self)

    def __str__(self):
        return format_expr(self)


@dataclass(frozen=True)
class Lit(AmpExpr):
    """A complex literal (real in everything the parser produces)."""

    value: complex

    def __post_init__(self):
        object.__setattr__(self, "value", complex(self.value))


@dataclass(frozen=True)
class ImagUnit(AmpExpr):
    """The imaginary unit."""


@dataclass(frozen=True)
class Param(AmpExpr):
    """A named real-valued parameter."""

    name: str


@dataclass(frozen=True)
class Neg(AmpExpr):
    operand: AmpExpr


@dataclass(frozen=True)
class Add(AmpExpr):
    left: AmpExpr
    right: AmpExpr


@dataclass(frozen=True)
class Mul(AmpExpr):
    left: AmpExpr
    right: AmpExpr


@dataclass(frozen=True)
class Call(AmpExpr):
    """Application of one of sin, cos, sqrt, cis."""

    func: str
    arg: AmpExpr

    def __post_init__(self):
        if self.func not in _FUNCTIONS:
            raise ValueError(f"unknown function {self.func!r}")


I = ImagUnit()
PI = Lit(math.pi)


def _coerce(value) -> AmpExpr:
    if isinstance(value, AmpExpr):
        return value
    if isinstance(value, (int, float, complex)):
        return Lit(value)
    raise TypeError(f"cannot use {value!r} in an amplitude expression")


def sin(x) -> AmpExpr:
    return Call("sin", _coerce(x))


def cos(x) -> AmpExpr:
    return Call("cos", _coerce(x))


def sqrt(x) -> AmpExpr:
    return Call("sqrt", _coerce(x))


def cis(x) -> AmpExpr:
    """exp(i*x)."""
    return Call("cis", _coerce(x))


def _real_arg(value: complex, func: str) -> float:
    if abs(value.imag) > _IMAG_TOL * max(1.0, abs(value.real)):
        raise ExpressionDomainError(f"{func} expects a real argument, got {value!r}")
    return value.real


def evaluate(expr: AmpExpr, binding: Binding) -> complex:
    """Evaluate ``expr`` to a complex number under ``binding``.

    Raises :class:`MissingBindingError` naming the first unbound
    parameter encountered, and :class:`ExpressionDomainError` for the
    square root of a negative value.
    """
    match expr:
        case Lit(value):
            return value
        case ImagUnit():
            return 1j
        case Param(name):
            try:
                return complex(binding[name])
            except KeyError:
                raise MissingBindingError(name) from None
        case Neg(operand):
            return -evaluate(operand, binding)
        case Add(left, right):
            return evaluate(left, binding) + evaluate(right, binding)
        case Mul(left, right):
            return evaluate(left, binding) * evaluate(right, binding)
        case Call("sin", arg):
            return cmath.sin(evaluate(arg, binding))
        case Call("cos", arg):
            return cmath.cos(evaluate(arg, binding))
        case Call("cis", arg):
            return cmath.exp(1j * evaluate(arg, binding))
        case Call("sqrt", arg):
            value = _real_arg(evaluate(arg, binding), "sqrt")
            if value < 0:
                raise ExpressionDomainError(f"sqrt of negative value {value}")
            return complex(math.sqrt(value))
        case _:
            raise TypeError(f"not an amplitude expression: {expr!r}")


def parameters_of(expr: AmpExpr) -> set[str]:
    """The set of parameter names appearing anywhere in the tree."""
    match expr:
        case Lit() | ImagUnit():
            return set()
        case Param(name):
            return {name}
        case Neg(operand):
            return parameters_of(operand)
        case Add(left, right) | Mul(left, right):
            return parameters_of(left) | parameters_of(right)
        case Call(_, arg):
            return parameters_of(arg)
        case _:
            raise TypeError(f"not an amplitude expression: {expr!r}")


# Precedence levels for the formatter; parenthesize any operand whose
# own level is below what its position requires.
_LEVEL_ADD = 1
_LEVEL_MUL = 2
_LEVEL_UNARY = 3
_LEVEL_ATOM = 4


def _level(expr: AmpExpr) -> int:
    match expr:
        case Add():
            return _LEVEL_ADD
        case Mul():
            return _LEVEL_MUL
        case Neg():
            return _LEVEL_UNARY
        case _:
            return _LEVEL_ATOM


def _format_lit(value: complex) -> str:
    if value.imag != 0:
        raise ValueError(
            f"complex literal {value!r} has no surface syntax; build it from the i node"
        )
    real = value.real
    if real < 0:
        raise ValueError(
            f"negative literal {value!r} has no surface syntax; wrap a negation node"
        )
    if real == math.pi:
        return "pi"
    if real == int(real) and abs(real) < 1e16:
        return str(int(real))
    return repr(real)


def _format(expr: AmpExpr, minimum: int) -> str:
    match expr:
        case Lit(value):
            text = _format_lit(value)
        case ImagUnit():
            text = "i"
        case Param(name):
            text = name
        case Neg(operand):
            text = "-" + _format(operand, _LEVEL_UNARY)
        case Add(left, Neg(operand)):
            text = _format(left, _LEVEL_ADD) + " - " + _format(operand, _LEVEL_MUL)
        case Add(left, right):
            text = _format(left, _LEVEL_ADD) + " + " + _format(right, _LEVEL_MUL)
        case Mul(left, right):
            text = _format(left, _LEVEL_MUL) + "*" + _format(right, _LEVEL_UNARY)
        case Call(func, arg):
            text = f"{func}({_format(arg, _LEVEL_ADD)})"
        case _:
            raise TypeError(f"not an amplitude expression: {expr!r}")
    if _level(expr) < minimum:
        return f"({text})"
    return text


def format_expr(expr: AmpExpr) -> str:
    """Render a tree in the network description surface syntax."""
    return _format(expr, _LEVEL_ADD)
