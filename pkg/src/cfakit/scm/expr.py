"""Closed expression trees for structural mechanisms.

Mechanisms are built from a fixed vocabulary so that models can be written to
text, read back, and inspected for their parents without executing anything.

Examples
--------
>>> from cfakit.scm.expr import var, lt
>>> e = lt(var("U_Y"), 0.1 + 0.7 * var("D"))
>>> to_prefix(e)
'(lt U_Y (add 0.1 (mul 0.7 D)))'
"""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np
from scipy.special import expit as _expit

NARY = {"add", "mul", "min", "max", "or", "and"}
BINARY = {"sub", "lt"}
UNARY = {"expit"}
OPS = NARY | BINARY | UNARY
_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


class ExprError(ValueError):
    pass


@dataclass(frozen=True)
class Expr:
    op: str
    args: tuple = ()
    value: float | None = None
    name: str | None = None

    def __post_init__(self):
        if self.op == "const":
            if self.value is None or not np.isfinite(self.value):
                raise ExprError("constant needs a finite value")
        elif self.op == "var":
            if not self.name or not _IDENT.match(self.name):
                raise ExprError(f"bad identifier {self.name!r}")
        elif self.op in NARY:
            if len(self.args) < 2:
                raise ExprError(f"{self.op} takes at least two arguments")
        elif self.op in BINARY:
            if len(self.args) != 2:
                raise ExprError(f"{self.op} takes exactly two arguments")
        elif self.op in UNARY:
            if len(self.args) != 1:
                raise ExprError(f"{self.op} takes one argument")
        else:
            raise ExprError(f"unknown operator {self.op!r}")

    # operator sugar used by the scenario library
    def __add__(self, other):
        return Expr("add", (self, _lift(other)))

    def __radd__(self, other):
        return Expr("add", (_lift(other), self))

    def __sub__(self, other):
        return Expr("sub", (self, _lift(other)))

    def __rsub__(self, other):
        return Expr("sub", (_lift(other), self))

    def __mul__(self, other):
        return Expr("mul", (self, _lift(other)))

    def __rmul__(self, other):
        return Expr("mul", (_lift(other), self))

    def __neg__(self):
        return Expr("mul", (const(-1.0), self))

    def __repr__(self):
        return f"Expr({to_prefix(self)})"


def _lift(x):
    if isinstance(x, Expr):
        return x
    return const(x)


def const(v):
    return Expr("const", value=float(v))


def var(name):
    return Expr("var", name=name)


def lt(a, b):
    """Indicator 1(a < b); strict, so ties evaluate to 0."""
    return Expr("lt", (_lift(a), _lift(b)))


def expit(a):
    return Expr("expit", (_lift(a),))


def minimum(*args):
    return Expr("min", tuple(_lift(a) for a in args))


def maximum(*args):
    return Expr("max", tuple(_lift(a) for a in args))


def lor(*args):
    return Expr("or", tuple(_lift(a) for a in args))


def land(*args):
    return Expr("and", tuple(_lift(a) for a in args))


def variables(expr):
    """Set of identifiers referenced by ``expr``."""
    if expr.op == "var":
        return {expr.name}
    out = set()
    for a in expr.args:
        out |= variables(a)
    return out


def evaluate(expr, env):
    """Evaluate ``expr`` with numpy broadcasting over the arrays in ``env``."""
    op = expr.op
    if op == "const":
        return np.float64(expr.value)
    if op == "var":
        try:
            return env[expr.name]
        except KeyError:
            raise ExprError(f"unresolved variable {expr.name!r}") from None
    vals = [evaluate(a, env) for a in expr.args]
    if op == "add":
        out = vals[0]
        for v in vals[1:]:
            out = out + v
        return out
    if op == "mul":
        out = vals[0]
        for v in vals[1:]:
            out = out * v
        return out
    if op == "sub":
        return vals[0] - vals[1]
    if op == "lt":
        return np.less(vals[0], vals[1]).astype(np.float64)
    if op == "expit":
        return _expit(vals[0])
    if op == "min":
        return np.minimum.reduce(np.broadcast_arrays(*vals))
    if op == "max":
        return np.maximum.reduce(np.broadcast_arrays(*vals))
    if op == "or":
        out = vals[0] != 0
        for v in vals[1:]:
            out = out | (v != 0)
        return out.astype(np.float64)
    if op == "and":
        out = vals[0] != 0
        for v in vals[1:]:
            out = out & (v != 0)
        return out.astype(np.float64)
    raise ExprError(op)  # unreachable; constructor validates


def is_discrete(expr, discrete_vars):
    """Syntactic check that ``expr`` takes finitely many values.

    ``discrete_vars`` is the set of identifiers known to be discrete.
    """
    op = expr.op
    if op in ("lt", "or", "and", "const"):
        return True
    if op == "var":
        return expr.name in discrete_vars
    return all(is_discrete(a, discrete_vars) for a in expr.args)


# ------------------------------------------------------------ text format
def _fmt_number(v):
    r = repr(float(v))
    return r[:-2] if r.endswith(".0") else r


def to_prefix(expr):
    if expr.op == "const":
        return _fmt_number(expr.value)
    if expr.op == "var":
        return expr.name
    return "(" + " ".join([expr.op] + [to_prefix(a) for a in expr.args]) + ")"


_TOKEN = re.compile(r"\(|\)|[^\s()]+")


def parse_prefix(text):
    """Inverse of :func:`to_prefix`."""
    tokens = _TOKEN.findall(text)
    if not tokens:
        raise ExprError("empty expression")
    pos = 0

    def parse():
        nonlocal pos
        if pos >= len(tokens):
            raise ExprError("unexpected end of expression")
        tok = tokens[pos]
        pos += 1
        if tok == "(":
            if pos >= len(tokens):
                raise ExprError("unexpected end of expression")
            op = tokens[pos]
            pos += 1
            if op not in OPS:
                raise ExprError(f"unknown operator {op!r}")
            args = []
            while pos < len(tokens) and tokens[pos] != ")":
                args.append(parse())
            if pos >= len(tokens):
                raise ExprError("missing ')'")
            pos += 1
            return Expr(op, tuple(args))
        if tok == ")":
            raise ExprError("unexpected ')'")
        try:
            return const(float(tok))
        except ValueError:
            return var(tok)

    out = parse()
    if pos != len(tokens):
        raise ExprError("trailing tokens after expression")
    return out
