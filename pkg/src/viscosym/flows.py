"""Closed-form one-parameter flows of affine base-space generators and
sampled trajectory emission.

The supported coefficient structure is affine in (x, y, t): translations,
the (x, y)-rotation and their combinations.  A rotation component is
exponentiated exactly about its fixed center; everything else integrates to
polynomials in the flow parameter.  u- and f-components are ignored: the
flow lives on the base space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .expr import (Expr, ExprError, Kind, Num, Sym, ZERO, _rewrite_atoms,
                   add, diff_atom, eval_numeric, func, mul, sub, substitute,
                   to_text)
from .spaces import eps as EPS
from .spaces import t, x, y
from .vector_fields import Generator

_DELTA = Sym("delta", Kind.PARAMETER, 97)   # second parameter for the group law

__all__ = ["FlowMap", "FlowSample", "NonAffineError", "flow_map", "sample_flow",
           "samples_to_csv"]


class NonAffineError(ExprError):
    """Flow maps exist in closed form only for affine (x, y, t)-coefficients."""


@dataclass(frozen=True)
class FlowMap:
    """Exact flow (x(eps), y(eps), t(eps)) of a generator; eps = 0 is the
    identity and composition adds parameters (checked at construction using
    the kernel's trig rewrites)."""

    generator: Generator
    x_eps: Expr
    y_eps: Expr
    t_eps: Expr

    def __post_init__(self):
        for coord, comp in zip((x, y, t), self.components):
            if substitute(comp, {EPS: ZERO}) != coord:
                raise ExprError("flow is not the identity at eps = 0")
        composed = self.compose(self, _DELTA)
        added = tuple(substitute(c, {EPS: add(EPS, _DELTA)}) for c in self.components)
        if composed != added:
            raise ExprError("flow violates the composition law")

    @property
    def components(self) -> tuple[Expr, Expr, Expr]:
        return (self.x_eps, self.y_eps, self.t_eps)

    def at(self, seed: Sequence[float], eps_value: float) -> tuple[float, float, float]:
        assignment = {x: seed[0], y: seed[1], t: seed[2], EPS: eps_value}
        return tuple(eval_numeric(comp, assignment) for comp in self.components)

    def compose(self, other: "FlowMap", second_param: Expr) -> tuple[Expr, Expr, Expr]:
        """Components of self_eps after other_{second_param}: a simultaneous
        coordinate substitution (the map's components mention each other, so
        this bypasses the public substitute's cycle guard)."""
        inner = dict(zip((x, y, t),
                         (substitute(c, {EPS: second_param}) for c in other.components)))
        return tuple(_rewrite_atoms(c, inner.get) for c in self.components)


def _affine_parts(coeff: Expr, label: str) -> tuple[Fraction, Fraction, Fraction, Fraction]:
    """Split a coefficient into constants (kx, ky, kt, k0); error if not
    affine with rational coefficients."""
    parts = []
    rest = coeff
    for coord in (x, y, t):
        grad = diff_atom(coeff, coord)
        if not isinstance(grad, Num):
            raise NonAffineError(f"{label} is not affine in (x, y, t): {to_text(coeff)}")
        parts.append(grad.value)
        rest = sub(rest, mul(grad, coord))
    if not isinstance(rest, Num):
        raise NonAffineError(f"{label} has non-constant part {to_text(rest)}")
    parts.append(rest.value)
    return tuple(parts)


def flow_map(v: Generator) -> FlowMap:
    """Exact exponential of the affine system attached to the generator."""
    rows = [_affine_parts(coeff, name)
            for coeff, name in ((v.xi1, "xi1"), (v.xi2, "xi2"), (v.xi3, "xi3"))]
    lin = [[rows[i][j] for j in range(3)] for i in range(3)]
    const = [rows[i][3] for i in range(3)]

    # rotation component: linear part must be w * (y d/dx - x d/dy)
    w = lin[0][1]
    rotation_pattern = [[Fraction(0), w, Fraction(0)],
                        [-w, Fraction(0), Fraction(0)],
                        [Fraction(0), Fraction(0), Fraction(0)]]
    if lin != rotation_pattern:
        raise NonAffineError(
            "unsupported linear part; the closed-form catalog covers "
            "translations and c4*(y d/dx - x d/dy) rotations")

    t_flow = add(t, mul(Num(const[2]), EPS))
    if w == 0:
        return FlowMap(v, add(x, mul(Num(const[0]), EPS)),
                       add(y, mul(Num(const[1]), EPS)), t_flow)

    # dz/deps = w J z + b has the fixed point p = (b2/w, -b1/w); the flow is
    # p + R(w eps) (z - p) with R the clockwise rotation block.
    px = const[1] / w
    py = -const[0] / w
    cos_we = func("cos", mul(Num(w), EPS))
    sin_we = func("sin", mul(Num(w), EPS))
    dx = sub(x, Num(px))
    dy = sub(y, Num(py))
    x_flow = add(Num(px), mul(cos_we, dx), mul(sin_we, dy))
    y_flow = add(Num(py), mul(cos_we, dy), mul(Num(Fraction(-1)), sin_we, dx))
    return FlowMap(v, x_flow, y_flow, t_flow)


@dataclass(frozen=True)
class FlowSample:
    seed_id: int
    eps: float
    x: float
    y: float
    t: float | None   # None in the (x, y)-projection mode


def sample_flow(fm: FlowMap, seeds: Sequence[Sequence[float]],
                eps_range: tuple[float, float, int], *,
                project_xy: bool = False) -> list[FlowSample]:
    """Sample each seed along the flow at n parameter values uniformly in
    [lo, hi]; ``project_xy`` drops the t-column (the plane projection)."""
    seeds = list(seeds)
    if not seeds:
        raise ExprError("empty seed list")
    lo, hi, n = eps_range
    if n < 2:
        raise ExprError("eps sampling needs n >= 2")
    if not (lo < hi):
        raise ExprError("eps range needs lo < hi")
    out = []
    for seed_id, seed in enumerate(seeds):
        for k in range(n):
            eps_value = lo + (hi - lo) * k / (n - 1)
            px, py, pt = fm.at(seed, eps_value)
            out.append(FlowSample(seed_id, eps_value, px, py,
                                  None if project_xy else pt))
    return out


def samples_to_csv(samples: Iterable[FlowSample]) -> str:
    """Fixed column order: seed_id, eps, x, y, t (t omitted when projected)."""
    samples = list(samples)
    projected = samples and samples[0].t is None
    header = "seed_id,eps,x,y" if projected else "seed_id,eps,x,y,t"
    lines = [header]
    for sample in samples:
        row = [str(sample.seed_id), repr(sample.eps), repr(sample.x), repr(sample.y)]
        if not projected:
            row.append(repr(sample.t))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"
