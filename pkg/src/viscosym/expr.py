"""Immutable symbolic expression kernel with exact rational arithmetic.

Expressions are canonical by construction: every constructor returns a sum
of products, flattened and sorted by a fixed total order on nodes, with
like terms merged, rational coefficients in lowest terms and zero terms
removed.  Supported nodes:

* rational constants (``Num``),
* symbols with a fixed kind: independent variable, dependent variable or
  parameter (``Sym``),
* jet variables, i.e. formal partial derivatives of a dependent variable
  indexed by a sorted multiset of independent variables (``Jet``),
* elementary functions sin, cos, exp, arctan and atan2 (``Func``); sqrt is
  represented as a power with exponent 1/2,
* opaque "arbitrary" functions with formal partial derivatives taken with
  respect to argument slots (``Unknown`` applied via ``UnknownFn``),
* rational powers (``Pow``), products (``Mul``) and sums (``Add``).

The trig simplification set is deliberately small: sin^2+cos^2 -> 1,
sin(0) -> 0, cos(0) -> 1, parity normalisation of sin/cos/arctan and
angle addition for syntactic sums.  That is enough to make rotation
flows and their group law close symbolically.

All values are immutable and hashable; every operation is a pure
function, so expressions can be shared freely across threads.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, fields as dataclass_fields
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Iterator, Mapping, Sequence, Union

__all__ = [
    "ExprError", "JetOrderError", "SubstitutionCycleError", "EvalError",
    "UnassignedSymbolError", "DomainEvalError",
    "Kind", "Expr", "Num", "Sym", "Jet", "Func", "UnknownFn", "Unknown",
    "Pow", "Mul", "Add",
    "ZERO", "ONE", "JET_ORDER_CAP", "ELEMENTARY_FUNCTIONS",
    "add", "mul", "pow_", "func", "neg", "sub", "div", "rational",
    "canonicalize", "to_text", "atoms", "contains",
    "diff_atom", "total_derivative", "substitute", "substitute_functions",
    "eval_numeric", "equals", "max_abs_sample", "reduce_quotients",
]

Rat = Union[int, Fraction]

JET_ORDER_CAP = 4
ELEMENTARY_FUNCTIONS = {"sin": 1, "cos": 1, "exp": 1, "arctan": 1, "atan2": 2}
_POW_EXPAND_LIMIT = 12


class ExprError(Exception):
    """Base error for the expression kernel."""


class JetOrderError(ExprError):
    """A jet variable would exceed the supported derivative order."""


class SubstitutionCycleError(ExprError):
    """The substitution map has a cyclic dependency between its keys."""


class EvalError(ExprError):
    """Numeric evaluation failed."""


class UnassignedSymbolError(EvalError):
    """A symbol required for numeric evaluation has no assigned value."""


class DomainEvalError(EvalError):
    """Numeric evaluation hit a domain error (division by zero, even root
    of a negative number, ...)."""


class Kind(Enum):
    INDEPENDENT = "independent"
    DEPENDENT = "dependent"
    PARAMETER = "parameter"


_KIND_RANK = {Kind.PARAMETER: 0, Kind.INDEPENDENT: 1, Kind.DEPENDENT: 2}


def rational(value: Rat) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    raise TypeError(f"expected int or Fraction, got {type(value).__name__}")


# ---------------------------------------------------------------------------
# Node types
# ---------------------------------------------------------------------------

class Expr:
    """Base class of all expression nodes; supports operator syntax."""

    __slots__ = ()

    def __add__(self, other):
        return add(self, _coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, _coerce(other))

    def __rsub__(self, other):
        return sub(_coerce(other), self)

    def __mul__(self, other):
        return mul(self, _coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, _coerce(other))

    def __rtruediv__(self, other):
        return div(_coerce(other), self)

    def __pow__(self, exponent):
        return pow_(self, exponent)

    def __neg__(self):
        return neg(self)

    def __str__(self) -> str:
        return to_text(self)

    def __repr__(self) -> str:
        return to_text(self)

    def is_zero(self) -> bool:
        return isinstance(self, Num) and self.value == 0


def _coerce(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, Fraction)):
        return Num(rational(value))
    raise TypeError(f"cannot coerce {type(value).__name__} to Expr")


def _cached_hash(self) -> int:
    h = self.__dict__.get("_chash")
    if h is None:
        h = hash((self.__class__.__name__,)
                 + tuple(getattr(self, n) for n in self.__class__._field_names))
        object.__setattr__(self, "_chash", h)
    return h


def _fast_eq(self, other) -> bool:
    if self is other:
        return True
    if self.__class__ is not other.__class__:
        return NotImplemented
    if _cached_hash(self) != _cached_hash(other):
        return False
    names = self.__class__._field_names
    return all(getattr(self, n) == getattr(other, n) for n in names)


def _node(cls):
    """Finish a node dataclass: cache hashes (trees are compared and hashed
    constantly during canonicalization) and short-circuit equality on them."""
    cls._field_names = tuple(fd.name for fd in dataclass_fields(cls))
    cls.__hash__ = _cached_hash
    cls.__eq__ = _fast_eq
    return cls


@_node
@dataclass(frozen=True)
class Num(Expr):
    value: Fraction

    def __post_init__(self):
        if not isinstance(self.value, Fraction):
            object.__setattr__(self, "value", rational(self.value))


@_node
@dataclass(frozen=True)
class Sym(Expr):
    """A named symbol.  ``pos`` fixes the ordering among peers of a kind
    (e.g. x < y < t for jet-index sorting)."""

    name: str
    kind: Kind
    pos: int = 0


@_node
@dataclass(frozen=True)
class Jet(Expr):
    """Formal derivative u_J of a dependent symbol, J a sorted multiset of
    independent variables.  Order is capped at JET_ORDER_CAP."""

    base: Sym
    indices: tuple[Sym, ...]

    def __post_init__(self):
        if self.base.kind is not Kind.DEPENDENT:
            raise ExprError(f"jet base {self.base.name!r} is not a dependent variable")
        if not self.indices:
            raise ExprError("jet needs at least one index")
        for ix in self.indices:
            if ix.kind is not Kind.INDEPENDENT:
                raise ExprError(f"jet index {ix.name!r} is not an independent variable")
        if len(self.indices) > JET_ORDER_CAP:
            raise JetOrderError(
                f"jet {self.base.name}_{''.join(i.name for i in self.indices)} "
                f"exceeds the order cap {JET_ORDER_CAP}")
        object.__setattr__(self, "indices",
                           tuple(sorted(self.indices, key=lambda s: (s.pos, s.name))))

    @property
    def order(self) -> int:
        return len(self.indices)


@_node
@dataclass(frozen=True)
class Func(Expr):
    """Elementary function application."""

    fn: str
    args: tuple[Expr, ...]

    def __post_init__(self):
        arity = ELEMENTARY_FUNCTIONS.get(self.fn)
        if arity is None:
            raise ExprError(f"unknown elementary function {self.fn!r}")
        if arity != len(self.args):
            raise ExprError(f"{self.fn} expects {arity} argument(s), got {len(self.args)}")


@dataclass(frozen=True)
class UnknownFn:
    """Identity of an opaque function; ``slots`` are the symbols naming its
    argument positions (used for derivative subscripts and bare mentions)."""

    name: str
    slots: tuple[Sym, ...]

    @property
    def arity(self) -> int:
        return len(self.slots)

    def __call__(self, *args: Expr) -> Expr:
        if args:
            return unknown(self, (), tuple(_coerce(a) for a in args))
        return unknown(self, (), tuple(self.slots))


@_node
@dataclass(frozen=True)
class Unknown(Expr):
    """Application of an opaque function, possibly formally differentiated.

    ``derivs`` is a sorted multiset of argument-slot indices; e.g. for F with
    slots (x, y, t), derivs (0, 0, 2) denotes d^3 F / dx^2 dt applied to args.
    """

    fn: UnknownFn
    derivs: tuple[int, ...]
    args: tuple[Expr, ...]

    def __post_init__(self):
        if len(self.args) != self.fn.arity:
            raise ExprError(f"{self.fn.name} expects {self.fn.arity} argument(s)")
        if any(not (0 <= d < self.fn.arity) for d in self.derivs):
            raise ExprError(f"derivative slot out of range for {self.fn.name}")
        object.__setattr__(self, "derivs", tuple(sorted(self.derivs)))


def unknown(fn: UnknownFn, derivs: Sequence[int], args: Sequence[Expr]) -> Unknown:
    return Unknown(fn, tuple(derivs), tuple(args))


@_node
@dataclass(frozen=True)
class Pow(Expr):
    """base**exp with a literal rational exponent, exp not in {0, 1}."""

    base: Expr
    exp: Fraction


@_node
@dataclass(frozen=True)
class Mul(Expr):
    """coeff * f1 * f2 * ...; factors sorted, bases pairwise distinct."""

    coeff: Fraction
    factors: tuple[Expr, ...]


@_node
@dataclass(frozen=True)
class Add(Expr):
    """t1 + t2 + ...; at least two terms, sorted, monomials pairwise distinct."""

    terms: tuple[Expr, ...]


ZERO = Num(Fraction(0))
ONE = Num(Fraction(1))


# ---------------------------------------------------------------------------
# Total order on canonical nodes
# ---------------------------------------------------------------------------

_RANK = {Num: 0, Sym: 1, Jet: 2, Unknown: 3, Func: 4, Pow: 5, Mul: 6, Add: 7}


@lru_cache(maxsize=None)
def _key(e: Expr):
    if isinstance(e, Num):
        return (0, e.value)
    if isinstance(e, Sym):
        return (1, _KIND_RANK[e.kind], e.pos, e.name)
    if isinstance(e, Jet):
        return (2, _key(e.base), len(e.indices), tuple(_key(i) for i in e.indices))
    if isinstance(e, Unknown):
        return (3, e.fn.name, len(e.derivs), e.derivs, tuple(_key(a) for a in e.args))
    if isinstance(e, Func):
        return (4, e.fn, tuple(_key(a) for a in e.args))
    if isinstance(e, Pow):
        return (5, _key(e.base), e.exp)
    if isinstance(e, Mul):
        return (6, tuple(_key(f) for f in e.factors), e.coeff)
    if isinstance(e, Add):
        return (7, tuple(_key(t) for t in e.terms))
    raise TypeError(f"not an Expr: {e!r}")


def _factor_key(factor: Expr):
    # sort x and x^2 adjacently: key on (base, exponent)
    if isinstance(factor, Pow):
        return (_key(factor.base), factor.exp)
    return (_key(factor), Fraction(1))


# ---------------------------------------------------------------------------
# Term/factor decomposition helpers
# ---------------------------------------------------------------------------

def _as_term(e: Expr) -> tuple[Fraction, tuple[Expr, ...]]:
    """Split a canonical non-Add expression into (coefficient, factor tuple)."""
    if isinstance(e, Num):
        return e.value, ()
    if isinstance(e, Mul):
        return e.coeff, e.factors
    return Fraction(1), (e,)


def _from_term(coeff: Fraction, factors: tuple[Expr, ...]) -> Expr:
    if coeff == 0:
        return ZERO
    if not factors:
        return Num(coeff)
    if coeff == 1 and len(factors) == 1:
        return factors[0]
    return Mul(coeff, factors)


def _terms(e: Expr) -> tuple[Expr, ...]:
    return e.terms if isinstance(e, Add) else (e,)


def _base_exp(factor: Expr) -> tuple[Expr, Fraction]:
    if isinstance(factor, Pow):
        return factor.base, factor.exp
    return factor, Fraction(1)


# ---------------------------------------------------------------------------
# Canonicalizing constructors
# ---------------------------------------------------------------------------

def add(*eargs: Expr) -> Expr:
    """Canonical sum of already-canonical expressions."""
    acc: dict[tuple[Expr, ...], Fraction] = {}
    for e in eargs:
        for term in _terms(_coerce(e)):
            coeff, factors = _as_term(term)
            if coeff == 0:
                continue
            newc = acc.get(factors, Fraction(0)) + coeff
            if newc == 0:
                acc.pop(factors, None)
            else:
                acc[factors] = newc
    _pythagorean_reduce(acc)
    return _rebuild_add(acc)


def _rebuild_add(acc: dict[tuple[Expr, ...], Fraction]) -> Expr:
    terms = [_from_term(c, f) for f, c in acc.items()]
    terms.sort(key=_key)
    if not terms:
        return ZERO
    if len(terms) == 1:
        return terms[0]
    return Add(tuple(terms))


def reduce_quotients(e: Expr) -> Expr:
    """Cancel sum-denominators across the top-level terms of a sum, e.g.
    x^2*(x^2+y^2)^-1 + y^2*(x^2+y^2)^-1 -> 1.

    This is deliberately not part of plain canonicalization (products of
    sums distribute through it constantly); callers checking identities of
    rational functions apply it explicitly.
    """
    e = _coerce(e)
    if not isinstance(e, Add):
        return e
    acc: dict[tuple[Expr, ...], Fraction] = {}
    _merge_into(acc, e)
    changed = True
    while changed:
        changed = _quotient_reduce(acc)
        if changed:
            _pythagorean_reduce(acc)
    return _rebuild_add(acc)


def _split_sin_sq(factors: tuple[Expr, ...]) -> Iterator[tuple[int, Expr]]:
    """Yield (position, angle) for each factor sin(angle)^n with integer n >= 2."""
    for i, fac in enumerate(factors):
        base, exp = _base_exp(fac)
        if (isinstance(base, Func) and base.fn == "sin"
                and exp.denominator == 1 and exp >= 2):
            yield i, base.args[0]


def _adjust_factor(factors: tuple[Expr, ...], pos: int, delta: int) -> tuple[Expr, ...]:
    """Add delta to the exponent of factors[pos], dropping it at exponent 0."""
    base, exp = _base_exp(factors[pos])
    newexp = exp + delta
    out = list(factors)
    if newexp == 0:
        del out[pos]
    elif newexp == 1:
        out[pos] = base
    else:
        out[pos] = Pow(base, newexp)
    out.sort(key=_factor_key)
    return tuple(out)


def _with_cos_sq(factors: tuple[Expr, ...], angle: Expr) -> tuple[Expr, ...]:
    """Multiply a monomial by cos(angle)^2."""
    cosbase = Func("cos", (angle,))
    out = list(factors)
    for i, fac in enumerate(out):
        base, exp = _base_exp(fac)
        if base == cosbase:
            out[i] = Pow(cosbase, exp + 2)
            break
    else:
        out.append(Pow(cosbase, Fraction(2)))
    out.sort(key=_factor_key)
    return tuple(out)


def _pythagorean_reduce(acc: dict[tuple[Expr, ...], Fraction]) -> None:
    """Rewrite c1*M*sin(w)^2 + c2*M*cos(w)^2 -> c2*M + (c1-c2)*M*sin(w)^2.

    Applied to the merged term map until no sin^2/cos^2 partner pair is left;
    each rewrite lowers the total trigonometric degree, so this terminates.
    """
    for factors in acc:
        if any(True for _ in _split_sin_sq(factors)):
            break
    else:
        return
    changed = True
    while changed:
        changed = False
        for factors in sorted(acc.keys(), key=lambda fs: tuple(map(_factor_key, fs))):
            if factors not in acc:
                continue
            for pos, angle in _split_sin_sq(factors):
                stripped = _adjust_factor(factors, pos, -2)
                partner = _with_cos_sq(stripped, angle)
                if partner not in acc:
                    continue
                c1 = acc.pop(factors)
                c2 = acc.pop(partner)
                for mono, c in ((stripped, c2), (factors, c1 - c2)):
                    if c == 0:
                        continue
                    merged = acc.get(mono, Fraction(0)) + c
                    if merged == 0:
                        acc.pop(mono, None)
                    else:
                        acc[mono] = merged
                changed = True
                break
            if changed:
                break


def _merge_into(acc: dict[tuple[Expr, ...], Fraction], term: Expr) -> None:
    for part in _terms(term):
        coeff, factors = _as_term(part)
        if coeff == 0:
            continue
        newc = acc.get(factors, Fraction(0)) + coeff
        if newc == 0:
            acc.pop(factors, None)
        else:
            acc[factors] = newc


def _quotient_reduce(acc: dict[tuple[Expr, ...], Fraction]) -> bool:
    """Cancel sum-denominators: terms sharing a factor S^(-k) with S a sum
    have their joint numerator divided by S, so e.g.
    x^2*(x^2+y^2)^-1 + y^2*(x^2+y^2)^-1 collapses to 1."""
    groups: dict[Expr, list[tuple[Expr, ...]]] = {}
    for factors in acc:
        for fac in factors:
            base, exp = _base_exp(fac)
            if isinstance(base, Add) and exp.denominator == 1 and exp < 0:
                groups.setdefault(fac, []).append(factors)
    for den_factor in sorted(groups, key=_factor_key):
        monos = groups[den_factor]
        base, exp = _base_exp(den_factor)
        numerator = [( [fc for fc in mono if fc != den_factor], acc[mono])
                     for mono in monos if mono in acc]
        if not numerator:
            continue
        divisor = [_as_term(term) for term in base.terms]
        quotient, remainder = _poly_divide(
            [(c, tuple(fs)) for fs, c in numerator], divisor)
        if quotient is None or not quotient:
            continue
        for mono in monos:
            acc.pop(mono, None)
        reduced_exp = exp + 1
        for coeff, factors in quotient:
            _merge_into(acc, mul(Num(coeff), _from_term(Fraction(1), factors) if factors else ONE,
                                 pow_(base, reduced_exp)))
        for coeff, factors in remainder:
            _merge_into(acc, mul(Num(coeff), _from_term(Fraction(1), factors) if factors else ONE,
                                 den_factor))
        return True
    return False


def _poly_divide(num: list[tuple[Fraction, tuple[Expr, ...]]],
                 den: list[tuple[Fraction, tuple[Expr, ...]]]):
    """Multivariate division with remainder over the factors seen as
    variables (graded-lex order); non-polynomial factors count as opaque
    variables.  Returns (quotient, remainder) as (coeff, factors) lists, or
    (None, None) when the inputs are too large to bother."""
    if len(num) > 400:
        return None, None
    varix: dict[Expr, int] = {}

    def splitvar(factor: Expr) -> tuple[Expr, int]:
        fbase, fexp = _base_exp(factor)
        if fexp.denominator == 1 and fexp > 0:
            return fbase, int(fexp)
        return factor, 1

    def tovec(factors: tuple[Expr, ...]) -> dict[int, int]:
        counts: dict[int, int] = {}
        for fac in factors:
            v, e = splitvar(fac)
            i = varix.setdefault(v, len(varix))
            counts[i] = counts.get(i, 0) + e
        return counts

    nraw = [(c, tovec(fs)) for c, fs in num]
    draw = [(c, tovec(fs)) for c, fs in den]
    nvars = len(varix)

    def tup(counts: dict[int, int]) -> tuple[int, ...]:
        return tuple(counts.get(i, 0) for i in range(nvars))

    big: dict[tuple[int, ...], Fraction] = {}
    for c, counts in nraw:
        key = tup(counts)
        big[key] = big.get(key, Fraction(0)) + c
    dpoly: dict[tuple[int, ...], Fraction] = {}
    for c, counts in draw:
        key = tup(counts)
        dpoly[key] = dpoly.get(key, Fraction(0)) + c

    def okey(vec: tuple[int, ...]):
        return (sum(vec), vec)

    dlead = max(dpoly, key=okey)
    dlc = dpoly[dlead]
    quotient: dict[tuple[int, ...], Fraction] = {}
    remainder: dict[tuple[int, ...], Fraction] = {}
    guard = 0
    while big:
        guard += 1
        if guard > 2000:
            return None, None
        nlead = max(big, key=okey)
        diff = tuple(nv - dv for nv, dv in zip(nlead, dlead))
        if any(dv < 0 for dv in diff):
            remainder[nlead] = big.pop(nlead)
            continue
        qc = big[nlead] / dlc
        quotient[diff] = quotient.get(diff, Fraction(0)) + qc
        for dkey, dc in dpoly.items():
            tkey = tuple(dv + dk for dv, dk in zip(diff, dkey))
            nc = big.get(tkey, Fraction(0)) - qc * dc
            if nc == 0:
                big.pop(tkey, None)
            else:
                big[tkey] = nc

    variables = [None] * nvars
    for v, i in varix.items():
        variables[i] = v

    def rebuild(poly: dict[tuple[int, ...], Fraction]):
        out = []
        for vec, c in poly.items():
            factors = []
            for i, e in enumerate(vec):
                if e:
                    fac = pow_(variables[i], Fraction(e))
                    out_coeff, fs = _as_term(fac)
                    c = c * out_coeff
                    factors.extend(fs)
            factors.sort(key=_factor_key)
            out.append((c, tuple(factors)))
        return out

    return rebuild(quotient), rebuild(remainder)


def mul(*eargs: Expr) -> Expr:
    """Canonical product; products of sums are fully distributed."""
    coeff = Fraction(1)
    powers: dict[Expr, Fraction] = {}
    sums: list[Expr] = []

    def feed(e: Expr):
        nonlocal coeff
        if isinstance(e, Num):
            coeff *= e.value
        elif isinstance(e, Mul):
            coeff *= e.coeff
            for fac in e.factors:
                feed(fac)
        elif isinstance(e, Add):
            sums.append(e)
        else:
            base, exp = _base_exp(e)
            powers[base] = powers.get(base, Fraction(0)) + exp

    for e in eargs:
        feed(_coerce(e))
    if coeff == 0:
        return ZERO

    factors: list[Expr] = []
    for base, exp in powers.items():
        merged = pow_(base, exp)
        if isinstance(merged, Num):
            coeff *= merged.value
        elif isinstance(merged, (Add, Mul)):
            sums.append(_coerce(merged))
        else:
            factors.append(merged)
    if coeff == 0:
        return ZERO
    factors.sort(key=_factor_key)
    core: Expr = _from_term(coeff, tuple(factors))
    for s in sums:
        core = _distribute(core, s)
    return core


def _distribute(e1: Expr, e2: Expr) -> Expr:
    parts = []
    for t1 in _terms(e1):
        for t2 in _terms(e2):
            c1, f1 = _as_term(t1)
            c2, f2 = _as_term(t2)
            parts.append(_mul_terms(c1 * c2, f1, f2))
    return add(*parts)


def _mul_terms(coeff: Fraction, f1: tuple[Expr, ...], f2: tuple[Expr, ...]) -> Expr:
    if not f1:
        return _from_term(coeff, f2)
    if not f2:
        return _from_term(coeff, f1)
    return mul(Num(coeff), _from_term(Fraction(1), f1), _from_term(Fraction(1), f2))


def _nth_root(n: int, q: int) -> int | None:
    """Exact nonnegative q-th root of n >= 0, or None."""
    if n < 0:
        return None
    if n in (0, 1):
        return n
    r = round(n ** (1.0 / q))
    for cand in (r - 1, r, r + 1):
        if cand >= 0 and cand ** q == n:
            return cand
    return None


def _rational_power(value: Fraction, exp: Fraction) -> Fraction | None:
    """value**exp as an exact Fraction, or None if irrational/undefined."""
    if exp.denominator == 1:
        if value == 0 and exp < 0:
            raise DomainEvalError("0 raised to a negative power")
        return value ** int(exp)
    v = value ** exp.numerator
    q = exp.denominator
    sign = 1
    if v < 0:
        if q % 2 == 0:
            return None
        sign, v = -1, -v
    num = _nth_root(v.numerator, q)
    den = _nth_root(v.denominator, q)
    if num is None or den is None:
        return None
    return Fraction(sign * num, den)


def pow_(base: Expr, exp: Rat | Fraction) -> Expr:
    """Canonical rational power."""
    base = _coerce(base)
    exp = rational(exp) if not isinstance(exp, Fraction) else exp
    if exp == 0:
        return ONE
    if exp == 1:
        return base
    if isinstance(base, Num):
        folded = _rational_power(base.value, exp)
        if folded is not None:
            return Num(folded)
        return Pow(base, exp)
    if isinstance(base, Pow):
        # merge (b^e1)^e2 -> b^(e1*e2) only when valid as a real function:
        # e2 integer always works; otherwise require |e1| <= 1 (no even-power
        # collapse such as (x^2)^(1/2) -> x).
        if exp.denominator == 1 or abs(base.exp) <= 1:
            return pow_(base.base, base.exp * exp)
        return Pow(base, exp)
    if isinstance(base, Mul):
        if exp.denominator == 1:
            parts = [Num(_rational_power(base.coeff, exp))]
            parts += [pow_(f, exp) for f in base.factors]
            return mul(*parts)
        if base.coeff > 0 and base.coeff != 1:
            root = _rational_power(base.coeff, exp)
            if root is not None:
                return mul(Num(root), pow_(Mul(Fraction(1), base.factors), exp))
        return Pow(base, exp)
    if isinstance(base, Add):
        if exp.denominator == 1 and 2 <= exp <= _POW_EXPAND_LIMIT:
            out: Expr = base
            for _ in range(int(exp) - 1):
                out = _distribute(out, base)
            return out
        return Pow(base, exp)
    return Pow(base, exp)


def _leading_sign(e: Expr) -> int:
    if isinstance(e, Num):
        return -1 if e.value < 0 else 1
    if isinstance(e, Mul):
        return -1 if e.coeff < 0 else 1
    if isinstance(e, Add):
        return _leading_sign(e.terms[0])
    return 1


def func(fn: str, *args: Expr) -> Expr:
    """Canonical elementary function application (sqrt maps to a power)."""
    cargs = tuple(_coerce(a) for a in args)
    if fn == "sqrt":
        if len(cargs) != 1:
            raise ExprError("sqrt expects 1 argument")
        return pow_(cargs[0], Fraction(1, 2))
    if fn not in ELEMENTARY_FUNCTIONS:
        raise ExprError(f"unknown elementary function {fn!r}")
    if fn in ("sin", "cos", "arctan") and _leading_sign(cargs[0]) < 0:
        inner = func(fn, mul(Num(Fraction(-1)), cargs[0]))
        return mul(Num(Fraction(-1)), inner) if fn != "cos" else inner
    if fn in ("sin", "cos") and isinstance(cargs[0], Add):
        head, tail = cargs[0].terms[0], add(*cargs[0].terms[1:])
        if fn == "sin":
            return add(mul(func("sin", head), func("cos", tail)),
                       mul(func("cos", head), func("sin", tail)))
        return add(mul(func("cos", head), func("cos", tail)),
                   mul(Num(Fraction(-1)), func("sin", head), func("sin", tail)))
    if cargs[0] == ZERO:
        if fn == "sin" or fn == "arctan":
            return ZERO
        if fn == "cos" or fn == "exp":
            return ONE
    return Func(fn, cargs)


def neg(e: Expr) -> Expr:
    return mul(Num(Fraction(-1)), e)


def sub(e1: Expr, e2: Expr) -> Expr:
    return add(e1, neg(_coerce(e2)))


def div(e1: Expr, e2: Expr) -> Expr:
    return mul(e1, pow_(_coerce(e2), Fraction(-1)))


def canonicalize(e: Expr) -> Expr:
    """Rebuild an expression bottom-up through the canonical constructors.

    Canonical-by-construction expressions are fixed points; this is also the
    safe entry for hand-assembled node trees.
    """
    if isinstance(e, (Num, Sym, Jet)):
        return e
    if isinstance(e, Func):
        return func(e.fn, *[canonicalize(a) for a in e.args])
    if isinstance(e, Unknown):
        return unknown(e.fn, e.derivs, tuple(canonicalize(a) for a in e.args))
    if isinstance(e, Pow):
        return pow_(canonicalize(e.base), e.exp)
    if isinstance(e, Mul):
        return mul(Num(e.coeff), *[canonicalize(f) for f in e.factors])
    if isinstance(e, Add):
        return add(*[canonicalize(t) for t in e.terms])
    raise TypeError(f"not an Expr: {e!r}")


# ---------------------------------------------------------------------------
# Traversal
# ---------------------------------------------------------------------------

def atoms(e: Expr) -> Iterator[Expr]:
    """Yield every Sym, Jet and Unknown occurring in e (deduplicated)."""
    seen: set[Expr] = set()

    def walk(node: Expr):
        if isinstance(node, (Sym, Jet, Unknown)):
            if node not in seen:
                seen.add(node)
                yield node
            if isinstance(node, Unknown):
                for arg in node.args:
                    yield from walk(arg)
        elif isinstance(node, Func):
            for arg in node.args:
                yield from walk(arg)
        elif isinstance(node, Pow):
            yield from walk(node.base)
        elif isinstance(node, Mul):
            for fac in node.factors:
                yield from walk(fac)
        elif isinstance(node, Add):
            for term in node.terms:
                yield from walk(term)

    yield from walk(e)


def contains(e: Expr, atom: Expr) -> bool:
    return any(a == atom for a in atoms(e))


def _rewrite_atoms(e: Expr, fn: Callable[[Expr], Expr | None],
                   descend_unknown_args: bool = True) -> Expr:
    """Replace atoms by fn(atom) (None keeps the atom), rebuilding canonically."""
    if isinstance(e, (Sym, Jet)):
        repl = fn(e)
        return e if repl is None else repl
    if isinstance(e, Num):
        return e
    if isinstance(e, Unknown):
        repl = fn(e)
        if repl is not None:
            return repl
        if not descend_unknown_args:
            return e
        return unknown(e.fn, e.derivs,
                       tuple(_rewrite_atoms(a, fn, descend_unknown_args) for a in e.args))
    if isinstance(e, Func):
        return func(e.fn, *[_rewrite_atoms(a, fn, descend_unknown_args) for a in e.args])
    if isinstance(e, Pow):
        return pow_(_rewrite_atoms(e.base, fn, descend_unknown_args), e.exp)
    if isinstance(e, Mul):
        return mul(Num(e.coeff),
                   *[_rewrite_atoms(f, fn, descend_unknown_args) for f in e.factors])
    if isinstance(e, Add):
        return add(*[_rewrite_atoms(t, fn, descend_unknown_args) for t in e.terms])
    raise TypeError(f"not an Expr: {e!r}")


# ---------------------------------------------------------------------------
# Derivatives
# ---------------------------------------------------------------------------

def _func_derivative(e: Func, dargs: list[Expr]) -> Expr:
    a = e.args
    if e.fn == "sin":
        return mul(func("cos", a[0]), dargs[0])
    if e.fn == "cos":
        return mul(Num(Fraction(-1)), func("sin", a[0]), dargs[0])
    if e.fn == "exp":
        return mul(func("exp", a[0]), dargs[0])
    if e.fn == "arctan":
        return mul(dargs[0], pow_(add(ONE, pow_(a[0], 2)), Fraction(-1)))
    if e.fn == "atan2":
        p, q = a
        num = sub(mul(q, dargs[0]), mul(p, dargs[1]))
        return mul(num, pow_(add(pow_(p, 2), pow_(q, 2)), Fraction(-1)))
    raise ExprError(f"no derivative rule for {e.fn}")


def _derive(e: Expr, datom: Callable[[Expr], Expr]) -> Expr:
    """Generic derivation: ``datom`` gives the derivative of Sym/Jet/Unknown."""
    if isinstance(e, Num):
        return ZERO
    if isinstance(e, (Sym, Jet, Unknown)):
        return datom(e)
    if isinstance(e, Func):
        dargs = [_derive(a, datom) for a in e.args]
        if all(d == ZERO for d in dargs):
            return ZERO
        return _func_derivative(e, dargs)
    if isinstance(e, Pow):
        db = _derive(e.base, datom)
        if db == ZERO:
            return ZERO
        return mul(Num(e.exp), pow_(e.base, e.exp - 1), db)
    if isinstance(e, Mul):
        parts = []
        for i, fac in enumerate(e.factors):
            dfac = _derive(fac, datom)
            if dfac == ZERO:
                continue
            rest = e.factors[:i] + e.factors[i + 1:]
            parts.append(mul(Num(e.coeff), _from_term(Fraction(1), rest) if rest else ONE, dfac))
        return add(*parts) if parts else ZERO
    if isinstance(e, Add):
        return add(*[_derive(t, datom) for t in e.terms])
    raise TypeError(f"not an Expr: {e!r}")


def diff_atom(e: Expr, atom: Expr) -> Expr:
    """Partial derivative treating every Sym and Jet as an independent
    coordinate; descends into elementary- and unknown-function arguments."""
    if not isinstance(atom, (Sym, Jet)):
        raise ExprError("diff_atom expects a Sym or Jet")

    def datom(node: Expr) -> Expr:
        if node == atom:
            return ONE
        if isinstance(node, Unknown):
            parts = []
            for i, arg in enumerate(node.args):
                darg = diff_atom(arg, atom)
                if darg == ZERO:
                    continue
                parts.append(mul(unknown(node.fn, node.derivs + (i,), node.args), darg))
            return add(*parts) if parts else ZERO
        return ZERO

    return _derive(e, datom)


def total_derivative(e: Expr, v: Sym) -> Expr:
    """Total derivative D_v: dependents pick up jets, jets gain an index,
    parameters are constants.  v must be an independent variable."""
    if not isinstance(v, Sym) or v.kind is not Kind.INDEPENDENT:
        raise ExprError("total derivative direction must be an independent variable")

    def datom(node: Expr) -> Expr:
        if isinstance(node, Sym):
            if node.kind is Kind.INDEPENDENT:
                return ONE if node == v else ZERO
            if node.kind is Kind.DEPENDENT:
                return Jet(node, (v,))
            return ZERO
        if isinstance(node, Jet):
            return Jet(node.base, node.indices + (v,))
        if isinstance(node, Unknown):
            parts = []
            for i, arg in enumerate(node.args):
                darg = total_derivative(arg, v)
                if darg == ZERO:
                    continue
                parts.append(mul(unknown(node.fn, node.derivs + (i,), node.args), darg))
            return add(*parts) if parts else ZERO
        raise TypeError(f"unexpected atom {node!r}")

    return _derive(e, datom)


# ---------------------------------------------------------------------------
# Substitution
# ---------------------------------------------------------------------------

def substitute(e: Expr, bindings: Mapping[Expr, Expr], *,
               descend_unknown_args: bool = True) -> Expr:
    """Simultaneous substitution of symbols/jets followed by canonicalization.

    Self-referencing bindings such as s -> s + d are fine (the substitution
    is one-pass), but a dependency cycle between two or more keys raises
    SubstitutionCycleError: such maps are almost always caller bugs.
    """
    table = {k: _coerce(v) for k, v in bindings.items()}
    for k in table:
        if not isinstance(k, (Sym, Jet)):
            raise ExprError("substitution keys must be symbols or jet variables")
    keyset = set(table)
    edges = {k: sorted((at for at in atoms(v) if at in keyset and at != k), key=_key)
             for k, v in table.items()}
    state: dict[Expr, int] = {}   # 1 = on stack, 2 = done

    def visit(node: Expr, trail: tuple[Expr, ...]):
        state[node] = 1
        for nxt in edges[node]:
            if state.get(nxt) == 1:
                path = " -> ".join(to_text(p) for p in trail + (node, nxt))
                raise SubstitutionCycleError(f"cyclic substitution: {path}")
            if state.get(nxt) != 2:
                visit(nxt, trail + (node,))
        state[node] = 2

    for k in table:
        if state.get(k) != 2:
            visit(k, ())
    return _rewrite_atoms(e, lambda at: table.get(at),
                          descend_unknown_args=descend_unknown_args)


def substitute_functions(e: Expr, bodies: Mapping[UnknownFn, Expr]) -> Expr:
    """Replace opaque functions by concrete expressions over their slots.

    Formal derivatives become real ones: an application differentiated along
    slots D with arguments (a_1, ..., a_n) maps to the body differentiated by
    the slot symbols per D, with slot symbols then replaced by the a_i.
    """
    def fn(atom: Expr) -> Expr | None:
        if not isinstance(atom, Unknown) or atom.fn not in bodies:
            return None
        body = _coerce(bodies[atom.fn])
        for slot_index in atom.derivs:
            body = diff_atom(body, atom.fn.slots[slot_index])
        args = tuple(_rewrite_atoms(a, fn) for a in atom.args)
        if tuple(atom.fn.slots) == args:
            return body
        return substitute(body, dict(zip(atom.fn.slots, args)))

    return _rewrite_atoms(e, fn)


# ---------------------------------------------------------------------------
# Numeric evaluation
# ---------------------------------------------------------------------------

_MATH_FN = {"sin": math.sin, "cos": math.cos, "exp": math.exp,
            "arctan": math.atan, "atan2": math.atan2}

_FD_STEPS = (6e-6, 1.8e-4, 1.2e-3, 6e-3)  # central-difference steps per order


def _resolve_assignment(assignment: Mapping) -> tuple[dict[Expr, float],
                                                      dict[UnknownFn, Callable]]:
    values: dict[Expr, float] = {}
    callables: dict[UnknownFn, Callable] = {}
    for k, v in assignment.items():
        if isinstance(k, UnknownFn):
            callables[k] = v
        elif isinstance(k, (Sym, Jet)):
            values[k] = float(v)
        else:
            raise ExprError(f"bad assignment key {k!r}")
    return values, callables


def _fd_unknown(fn_callable: Callable, derivs: tuple[int, ...],
                argvals: list[float]) -> float:
    """Nested central finite differences for formal derivatives of a callable."""
    if not derivs:
        return float(fn_callable(*argvals))
    slot, rest = derivs[0], derivs[1:]
    h = _FD_STEPS[min(len(derivs), len(_FD_STEPS)) - 1]
    hi = list(argvals)
    lo = list(argvals)
    hi[slot] += h
    lo[slot] -= h
    return (_fd_unknown(fn_callable, rest, hi) - _fd_unknown(fn_callable, rest, lo)) / (2 * h)


def eval_numeric(e: Expr, assignment: Mapping) -> float:
    """IEEE-double evaluation.  ``assignment`` maps Sym/Jet atoms to numbers
    and, optionally, UnknownFn identities to plain Python callables whose
    formal derivatives are approximated by central finite differences."""
    values, callables = _resolve_assignment(assignment)

    def ev(node: Expr) -> float:
        if isinstance(node, Num):
            return float(node.value)
        if isinstance(node, (Sym, Jet)):
            try:
                return values[node]
            except KeyError:
                raise UnassignedSymbolError(f"no value assigned to {to_text(node)}") from None
        if isinstance(node, Func):
            args = [ev(a) for a in node.args]
            return _MATH_FN[node.fn](*args)
        if isinstance(node, Unknown):
            fn_callable = callables.get(node.fn)
            if fn_callable is None:
                raise UnassignedSymbolError(
                    f"no callable registered for unknown function {node.fn.name}")
            return _fd_unknown(fn_callable, node.derivs, [ev(a) for a in node.args])
        if isinstance(node, Pow):
            base = ev(node.base)
            exp = node.exp
            if base == 0 and exp < 0:
                raise DomainEvalError("division by zero")
            if base < 0 and exp.denominator != 1:
                raise DomainEvalError(f"negative base {base!r} under rational power {exp}")
            return base ** float(exp) if exp.denominator != 1 else base ** int(exp)
        if isinstance(node, Mul):
            out = float(node.coeff)
            for fac in node.factors:
                out *= ev(fac)
            return out
        if isinstance(node, Add):
            return math.fsum(ev(t) for t in node.terms)
        raise TypeError(f"not an Expr: {node!r}")

    return ev(e)


def _random_polynomial(rng, slots: tuple[Sym, ...]) -> Expr:
    """Small random polynomial over the given slots (stand-in for unknowns)."""
    parts: list[Expr] = [Num(Fraction(rng.randint(-3, 3)))]
    for s in slots:
        parts.append(mul(Num(Fraction(rng.randint(-3, 3))), s))
        parts.append(mul(Num(Fraction(rng.randint(-2, 2))), pow_(s, 2)))
        parts.append(mul(Num(Fraction(rng.randint(-1, 1))), pow_(s, 3)))
    return add(*parts)


def max_abs_sample(e: Expr, *, seed: int = 42, points: int = 20,
                   lo: float = -2.0, hi: float = 2.0) -> float:
    """Max |e| over random assignments of its symbols in [lo, hi]; unknown
    functions are replaced by deterministic polynomial stand-ins first."""
    e = _coerce(e)
    rng = random.Random(seed)
    fns = sorted({at.fn for at in atoms(e) if isinstance(at, Unknown)},
                 key=lambda fn: fn.name)
    if fns:
        e = substitute_functions(e, {fn: _random_polynomial(rng, fn.slots) for fn in fns})
    syms = sorted((at for at in atoms(e) if isinstance(at, (Sym, Jet))), key=_key)
    worst = 0.0
    good = 0
    for _ in range(8 * points):
        assignment = {sm: rng.uniform(lo, hi) for sm in syms}
        try:
            val = eval_numeric(e, assignment)
        except DomainEvalError:
            continue
        worst = max(worst, abs(val))
        good += 1
        if good >= points:
            return worst
    raise EvalError("could not find enough valid sample points")


def equals(e1: Expr, e2: Expr, *, seed: int = 42, points: int = 24,
           tol: float = 1e-9, lo: float = -2.0, hi: float = 2.0) -> bool:
    """Structural equality of canonical forms, falling back to sampling the
    difference at random points in [lo, hi] per symbol (|diff| < tol at 20+
    valid points).  Unknown functions get deterministic polynomial stand-ins."""
    diff = sub(_coerce(e1), _coerce(e2))
    if diff == ZERO:
        return True
    return max_abs_sample(diff, seed=seed, points=max(points, 20), lo=lo, hi=hi) < tol


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------

def _exp_text(exp: Fraction) -> str:
    if exp.denominator == 1:
        return f"^{exp.numerator}"
    return f"^({exp.numerator}/{exp.denominator})"


def _factor_text(factor: Expr) -> str:
    base, exp = _base_exp(factor)
    if exp.denominator == 2:
        inner = f"sqrt({to_text(base)})"
        return inner if exp == Fraction(1, 2) else inner + _exp_text(exp * 2)
    btext = to_text(base)
    if isinstance(base, (Add, Mul)) or (isinstance(base, Num) and base.value < 0):
        btext = f"({btext})"
    return btext if exp == 1 else btext + _exp_text(exp)


def _term_text(term: Expr) -> tuple[int, str]:
    """Return (sign, unsigned text) for a canonical non-Add term."""
    coeff, factors = _as_term(term)
    sign = -1 if coeff < 0 else 1
    coeff = abs(coeff)
    if not factors:
        return sign, str(coeff)
    parts = [] if coeff == 1 else [str(coeff)]
    parts += [_factor_text(f) for f in factors]
    return sign, "*".join(parts)


def to_text(e: Expr) -> str:
    """Render an expression in the grammar accepted by the parser."""
    if isinstance(e, Num):
        return str(e.value)
    if isinstance(e, Sym):
        return e.name
    if isinstance(e, Jet):
        return e.base.name + "_" + "".join(i.name for i in e.indices)
    if isinstance(e, Func):
        return f"{e.fn}({', '.join(to_text(a) for a in e.args)})"
    if isinstance(e, Unknown):
        name = e.fn.name
        if e.derivs:
            name += "_" + "".join(e.fn.slots[i].name for i in e.derivs)
        if e.args == tuple(e.fn.slots):
            return name
        return f"{name}({', '.join(to_text(a) for a in e.args)})"
    if isinstance(e, Pow):
        return _factor_text(e)
    if isinstance(e, Mul):
        sign, text = _term_text(e)
        return ("-" if sign < 0 else "") + text
    if isinstance(e, Add):
        sign, text = _term_text(e.terms[0])
        out = ("-" if sign < 0 else "") + text
        for term in e.terms[1:]:
            sign, text = _term_text(term)
            out += (" - " if sign < 0 else " + ") + text
        return out
    raise TypeError(f"not an Expr: {e!r}")
