"""Similarity charts from characteristic equations, chain-rule reduction of
the viscoelastic equation to two variables, and the audit of the published
reduced-equation table.

The supported chart catalog: constant-coefficient combinations
c1*X1 + c2*X2 + c3*X3 (two independent linear invariants), pure rotations
c4*X4 (xi = x^2 + y^2, eta = t), and rotation-plus-time-translation
c4*X4 + c3*X3 (xi = x^2 + y^2, eta = atan2(y, x) + (c4/c3)*t).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .expr import (Add, Expr, ExprError, Func, Jet, Kind, Mul, Num, Pow, Sym,
                   Unknown, UnknownFn, ZERO, _rewrite_atoms, add, atoms,
                   diff_atom, eval_numeric, func, mul, pow_, reduce_quotients,
                   sub, substitute, substitute_functions, to_text,
                   total_derivative, unknown)
from .linalg import solve_exact
from .spaces import (a as A_SYM, b as B_SYM, base_space, eta as ETA,
                     reduced_space, xi as XI, h as H_DEP, g as G_DEP,
                     t, u, f, x, y)
from .vector_fields import Generator, PDEInstance, viscoelastic_pde

__all__ = [
    "SimilarityChart", "ReducedPDE", "ReductionReport",
    "UnsupportedGeneratorError", "ReductionError",
    "characteristic_invariants", "reduce_pde", "verify_reduction",
    "published_reduction_rows", "audit_reduction_table", "ReductionAuditRow",
]

_CATALOG = ("constant-coefficient combinations c1*X1 + c2*X2 + c3*X3 (not all "
            "zero), pure rotations c4*X4, and c4*X4 + c3*X3 with c3 != 0; "
            "u- and f-components must vanish")


class UnsupportedGeneratorError(ExprError):
    def __init__(self, why: str):
        super().__init__(f"unsupported generator ({why}); supported: {_CATALOG}")


class ReductionError(ExprError):
    """The reduced residual could not be expressed in (xi, eta) alone."""


H_FN = UnknownFn("h", (XI, ETA))
G_FN = UnknownFn("g", (XI, ETA))


@dataclass(frozen=True)
class SimilarityChart:
    """Invariant coordinates of a generator, with u = h(xi, eta) and
    f = g(xi, eta).

    Construction checks V(xi) = V(eta) = 0 symbolically and that the map
    (x, y, t) -> (xi, eta) has rank 2 at five sampled points.
    """

    generator: Generator
    xi: Expr
    eta: Expr
    kind: str                         # "linear" | "rotation"
    u_subst: Expr = None              # type: ignore[assignment]
    f_subst: Expr = None              # type: ignore[assignment]

    def __post_init__(self):
        for name, inv in (("xi", self.xi), ("eta", self.eta)):
            applied = reduce_quotients(self.generator.apply(inv))
            if applied != ZERO:
                raise ExprError(f"{name} is not invariant: V({name}) = {to_text(applied)}")
        self._check_rank()
        object.__setattr__(self, "u_subst", unknown(H_FN, (), (self.xi, self.eta)))
        object.__setattr__(self, "f_subst", unknown(G_FN, (), (self.xi, self.eta)))

    def _check_rank(self, seed: int = 7, points: int = 5):
        rows = [[diff_atom(inv, v) for v in (x, y, t)] for inv in (self.xi, self.eta)]
        rng = np.random.default_rng(seed)
        for _ in range(points):
            # positive box: keeps clear of the rotation-chart axis and branch cut
            px, py, pt = rng.uniform(0.5, 2.0, size=3)
            jac = np.array([[eval_numeric(e, {x: px, y: py, t: pt}) for e in row]
                            for row in rows])
            if np.linalg.svd(jac, compute_uv=False)[1] <= 1e-9:
                raise ExprError("the invariant map does not have rank 2")

    def point(self, px: float, py: float, pt: float) -> tuple[float, float]:
        assignment = {x: px, y: py, t: pt}
        return (eval_numeric(self.xi, assignment), eval_numeric(self.eta, assignment))


def _constant_of(e: Expr) -> Fraction | None:
    if isinstance(e, Num):
        return e.value
    return None


def characteristic_invariants(v: Generator) -> SimilarityChart:
    """Two functionally independent invariants of a catalog generator.

    Constant-coefficient case: coordinate functions whose coefficient
    vanishes are preferred, in the order x, y, t; the list is completed by
    differences x_i - (k_i/k_j) x_j for coefficient pairs, until two
    independent linear forms are found.
    """
    if v.is_zero():
        raise UnsupportedGeneratorError("the zero field has no similarity chart")
    if v.phi1 != ZERO or v.phi2 != ZERO:
        raise UnsupportedGeneratorError("nonzero u- or f-component")

    ks = tuple(_constant_of(coeff) for coeff in (v.xi1, v.xi2, v.xi3))
    if all(k is not None for k in ks):
        forms = _invariant_linear_forms(ks)
        return SimilarityChart(v, forms[0], forms[1], "linear")

    # rotation pattern: xi1 = c4*y, xi2 = -c4*x, xi3 = c3
    c4 = _constant_of(diff_atom(v.xi1, y))
    c3 = _constant_of(v.xi3)
    if (c4 is None or c3 is None or c4 == 0
            or sub(v.xi1, mul(Num(c4), y)) != ZERO
            or sub(v.xi2, mul(Num(-c4), x)) != ZERO):
        raise UnsupportedGeneratorError("coefficients outside the chart catalog")
    radial = add(pow_(x, 2), pow_(y, 2))
    if c3 == 0:
        return SimilarityChart(v, radial, t, "rotation")
    angular = add(func("atan2", y, x), mul(Num(c4 / c3), t))
    return SimilarityChart(v, radial, angular, "rotation")


def _invariant_linear_forms(ks: tuple[Fraction, Fraction, Fraction]) -> list[Expr]:
    coords = (x, y, t)
    forms: list[tuple[Expr, tuple[Fraction, ...]]] = []

    def try_add(form: Expr, vec: tuple[Fraction, ...]):
        if len(forms) == 2:
            return
        if forms:
            (_, prev) = forms[0]
            # 2x3 rank check via the three 2x2 minors
            if all(prev[i] * vec[j] - prev[j] * vec[i] == 0
                   for i in range(3) for j in range(i + 1, 3)):
                return
        forms.append((form, vec))

    for i, coord in enumerate(coords):
        if ks[i] == 0:
            vec = tuple(Fraction(int(j == i)) for j in range(3))
            try_add(coord, vec)
    for i in range(3):
        for j in range(i + 1, 3):
            if ks[i] != 0 and ks[j] != 0:
                ratio = ks[i] / ks[j]
                form = sub(coords[i], mul(Num(ratio), coords[j]))
                vec = tuple(Fraction(1) if m == i else (-ratio if m == j else Fraction(0))
                            for m in range(3))
                try_add(form, vec)
    if len(forms) != 2:
        raise UnsupportedGeneratorError("could not build two independent invariants")
    return [form for form, _ in forms]


# ---------------------------------------------------------------------------
# Chain-rule reduction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReducedPDE:
    """Reduced residual over (xi, eta): construction asserts that no base
    coordinate (x, y, t) or base unknown (u, f) survived the rewrite."""

    residual: Expr
    chart: SimilarityChart | None = None

    def __post_init__(self):
        leftovers = [to_text(atom) for atom in atoms(self.residual)
                     if _is_base_atom(atom)]
        if leftovers:
            raise ReductionError(
                f"residual still mentions base-space quantities: {', '.join(leftovers)}")


def _is_base_atom(atom: Expr) -> bool:
    if isinstance(atom, Sym):
        return atom in (x, y, t, u, f)
    if isinstance(atom, Jet):
        return atom.base in (u, f)
    return False


def reduce_pde(pde: PDEInstance, chart: SimilarityChart) -> ReducedPDE:
    """Substitute u = h(xi, eta), f = g(xi, eta) into the residual, expand all
    derivatives by the chain rule and rewrite the result over (xi, eta)."""
    bindings: dict[Expr, Expr] = {u: chart.u_subst, f: chart.f_subst}
    for atom in atoms(pde.residual):
        if isinstance(atom, Jet) and atom.base == u:
            expr = chart.u_subst
            for ix in atom.indices:
                expr = total_derivative(expr, ix)
            bindings[atom] = expr
    mixed = substitute(pde.residual, bindings)
    named = _name_reduced_jets(mixed, chart)
    if chart.kind == "linear":
        reduced = _rewrite_linear(named, chart)
    else:
        reduced = _rewrite_rotation(named, chart)
    return ReducedPDE(reduced, chart)


def _name_reduced_jets(e: Expr, chart: SimilarityChart) -> Expr:
    """Turn h/g applications at the chart arguments into reduced-space jets."""
    args = (chart.xi, chart.eta)
    deps = {H_FN: H_DEP, G_FN: G_DEP}
    slots = (XI, ETA)

    def fn(atom: Expr) -> Expr | None:
        if isinstance(atom, Unknown) and atom.fn in deps and atom.args == args:
            dep = deps[atom.fn]
            if not atom.derivs:
                return dep
            return Jet(dep, tuple(slots[i] for i in atom.derivs))
        return None

    return _rewrite_atoms(e, fn)


def _rewrite_linear(e: Expr, chart: SimilarityChart) -> Expr:
    rows = []
    for inv in (chart.xi, chart.eta):
        row = []
        for coord in (x, y, t):
            val = _constant_of(diff_atom(inv, coord))
            if val is None:
                raise ReductionError("linear chart has non-constant gradient")
            row.append(val)
        rows.append(row)
    completion = None
    for k in range(3):
        unit = [Fraction(int(j == k)) for j in range(3)]
        det = _det3(rows + [unit])
        if det != 0:
            completion = unit
            break
    matrix = rows + [completion]
    spare = Sym("zeta", Kind.PARAMETER, 98)
    new_coords = (XI, ETA, spare)
    bindings: dict[Expr, Expr] = {}
    transposed = _transpose(matrix)
    for idx, coord in enumerate((x, y, t)):
        rhs = [Fraction(int(r == idx)) for r in range(3)]
        # solve M^T col = e_idx, i.e. col is row idx of M^-1:
        # coord = sum_r col[r] * (xi, eta, zeta)[r]
        col = solve_exact(transposed, rhs)
        bindings[coord] = add(*[mul(Num(col[r]), new_coords[r]) for r in range(3)])
    out = substitute(e, bindings)
    if any(atom == spare for atom in atoms(out)):
        raise ReductionError("residual depends on a non-invariant direction")
    return out


def _transpose(m):
    return [list(col) for col in zip(*m)]


def _det3(m) -> Fraction:
    return (m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]))


def _rewrite_rotation(e: Expr, chart: SimilarityChart) -> Expr:
    if chart.eta == t:
        e = substitute(e, {t: ETA})
    elif any(atom == t for atom in atoms(e)):
        raise ReductionError("residual unexpectedly depends on t")
    e = _eliminate_square(e, y, sub(XI, pow_(x, 2)))
    bad = [to_text(atom) for atom in atoms(e) if atom in (x, y)]
    if bad:
        raise ReductionError(f"residual still mentions {', '.join(bad)}")
    return e


def _eliminate_square(e: Expr, var: Sym, replacement: Expr) -> Expr:
    """Rewrite var^(2k+r) -> replacement^k * var^r throughout, including in
    power bases, so x^2 + y^2 style invariants can be collapsed."""
    def walk(node: Expr) -> Expr:
        if isinstance(node, Pow):
            base = walk(node.base)
            exp = node.exp
            if base == var and exp.denominator == 1:
                k, r = divmod(int(exp), 2)
                return mul(pow_(replacement, k), pow_(var, r))
            return pow_(base, exp)
        if isinstance(node, Mul):
            return mul(Num(node.coeff), *[walk(fc) for fc in node.factors])
        if isinstance(node, Add):
            return add(*[walk(tm) for tm in node.terms])
        if isinstance(node, Unknown):
            return unknown(node.fn, node.derivs, tuple(walk(ag) for ag in node.args))
        if isinstance(node, Func):
            return func(node.fn, *[walk(ag) for ag in node.args])
        return node

    return walk(e)


# ---------------------------------------------------------------------------
# Numeric verification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReductionReport:
    max_discrepancy: float
    seed: int
    n_functions: int
    n_points: int
    tol: float
    passed: bool


def _random_body(rng) -> Expr:
    """Random bivariate polynomial over (xi, eta), dense through degree 4."""
    parts = []
    for i in range(5):
        for j in range(5 - i):
            coeff = int(rng.integers(-3, 4))
            if coeff:
                parts.append(mul(Num(Fraction(coeff)), pow_(XI, i), pow_(ETA, j)))
    parts.append(Num(Fraction(1)))   # keep it nonzero
    return add(*parts)


def verify_reduction(pde: PDEInstance, chart: SimilarityChart,
                     reduced: ReducedPDE | Expr, *, seed: int = 0,
                     n_functions: int = 10, n_points: int = 20,
                     tol: float = 1e-7) -> ReductionReport:
    """Numeric cross-check of a reduction candidate.

    For random polynomial h, g: evaluate the original residual with
    u = h(xi(x,y,t), eta(x,y,t)), f = g(...) (all derivatives by the chain
    rule) at random base points, and the candidate residual at the mapped
    (xi, eta) points; report the largest absolute discrepancy.
    """
    candidate = reduced.residual if isinstance(reduced, ReducedPDE) else reduced
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_functions):
        hbody = _random_body(rng)
        gbody = _random_body(rng)
        u_expr = substitute_functions(chart.u_subst, {H_FN: hbody})
        f_expr = substitute_functions(chart.f_subst, {G_FN: gbody})
        bindings: dict[Expr, Expr] = {u: u_expr, f: f_expr}
        for atom in atoms(pde.residual):
            if isinstance(atom, Jet) and atom.base == u:
                expr = u_expr
                for ix in atom.indices:
                    expr = total_derivative(expr, ix)
                bindings[atom] = expr
        original = substitute(pde.residual, bindings)

        red_bindings: dict[Expr, Expr] = {}
        for atom in atoms(candidate):
            if isinstance(atom, Sym) and atom in (H_DEP, G_DEP):
                red_bindings[atom] = hbody if atom == H_DEP else gbody
            elif isinstance(atom, Jet) and atom.base in (H_DEP, G_DEP):
                expr = hbody if atom.base == H_DEP else gbody
                for ix in atom.indices:
                    expr = diff_atom(expr, ix)
                red_bindings[atom] = expr
        reduced_expr = substitute(candidate, red_bindings)

        for _ in range(n_points):
            px, py, pt = rng.uniform(0.6, 2.0, size=3)
            pa, pb = rng.uniform(0.5, 2.0, size=2)
            lhs = eval_numeric(original, {x: px, y: py, t: pt, A_SYM: pa, B_SYM: pb})
            cxi, ceta = chart.point(px, py, pt)
            rhs = eval_numeric(reduced_expr, {XI: cxi, ETA: ceta, A_SYM: pa, B_SYM: pb})
            worst = max(worst, abs(lhs - rhs))
    return ReductionReport(worst, seed, n_functions, n_points, tol, worst < tol)


# ---------------------------------------------------------------------------
# Published-table audit
# ---------------------------------------------------------------------------

_PUBLISHED_ROWS = (
    ("X1", "y", "t",
     "h_etaeta - a*h_xixieta - a*h_etaetaeta - b*h_xixi - b*h_etaeta - g"),
    ("X2", "x", "t",
     "h_etaeta - a*h_xixieta - a*h_etaetaeta - b*h_xixi - b*h_etaeta - g"),
    ("X3", "x", "y",
     "h_etaeta - a*h_xixieta - a*h_etaetaeta - b*h_xixi - b*h_etaeta - g"),
    ("X1 + X3", "x - t", "y",
     "h_xixi + a*h_xixieta + a*h_etaetaxi + a*h_xixixi"
     " - b*h_xixi - b*h_etaeta - b*h_xixi - g"),
    ("X2 + X3", "x", "y - t",
     "h_etaeta + a*h_xixieta + a*h_etaetaeta + a*h_etaetaeta"
     " - b*h_xixi - b*h_xixi - b*h_etaeta - b*h_etaeta - g"),
)


def published_similarity_rows() -> tuple[tuple[str, Expr, Expr], ...]:
    """The published similarity-variable rows: (generator, xi, eta); the
    dependent-variable columns are u = h(xi, eta) and f = g(xi, eta) in
    every row."""
    sp = base_space()
    return tuple((label, sp.parse(xi_text), sp.parse(eta_text))
                 for label, xi_text, eta_text, _ in _PUBLISHED_ROWS)


def published_reduction_rows() -> tuple[tuple[str, Expr], ...]:
    """The five published reduced equations (rows 1-3 are printed
    identically), parsed over (xi, eta)."""
    sp = reduced_space()
    return tuple((label, sp.parse(text)) for label, _, _, text in _PUBLISHED_ROWS)


@dataclass(frozen=True)
class ReductionAuditRow:
    row: int
    generator: str
    derived: Expr
    published: Expr
    match: bool
    diff_terms: tuple[str, ...]


def audit_reduction_table(pde: PDEInstance | None = None) -> list[ReductionAuditRow]:
    """Compare the tool's chain-rule reductions against the published rows,
    term by term, in the published chart orientation (so differences are
    real discrepancies, not coordinate relabelings)."""
    from .vector_fields import parse_basis_combination
    if pde is None:
        pde = viscoelastic_pde()
    rows = published_reduction_rows()
    charts = published_similarity_rows()
    out = []
    for i, ((label, published), (_, chart_xi, chart_eta)) in \
            enumerate(zip(rows, charts), start=1):
        chart = SimilarityChart(parse_basis_combination(label),
                                chart_xi, chart_eta, "linear")
        derived = reduce_pde(pde, chart).residual
        delta = sub(derived, published)
        terms = delta.terms if isinstance(delta, Add) else ((delta,) if delta != ZERO else ())
        out.append(ReductionAuditRow(
            i, label, derived, published, delta == ZERO,
            tuple(to_text(term) for term in terms)))
    return out
