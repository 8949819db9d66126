"""Implicit differential equations as zero-level sets.

A first-order equation lives in TM as the common zero set of functions
psi^a(x, v); a second-order one lives in T(TM).  Symmetries and constants of
the motion are decided modulo the ideal <psi^a> by three tiers: direct
substitution of solved constraints, a bounded-degree multiplier ansatz, and
Newton sampling on the zero set.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field

import numpy as np
import sympy as sp

from . import geometry as geo
from ._linalg import generic_rank
from .geometry import Chart, KForm, VectorField
from .symexpr import (DEFAULT_SEED, NumericDomainError, _random_rational, _real,
                      compile_expr, instantiate_functions, is_zero, normalize,
                      rationalize, substitute)

DEGREE_CAP = 4
NEWTON_ITERATIONS = 50
NEWTON_TOL = 1e-12
SAMPLE_POINTS = 12
MAX_UNKNOWNS = 240


class SamplingFailed(RuntimeError):
    pass


@dataclass(frozen=True)
class ImplicitODE:
    chart: Chart
    constraints: tuple
    order: str = "first"

    def __post_init__(self):
        if not self.constraints:
            raise ValueError("an implicit equation needs at least one level function")
        if self.order not in ("first", "second"):
            raise ValueError("order must be 'first' or 'second'")
        for c in self.constraints:
            if not (sp.sympify(c).free_symbols & set(self.chart.coords)):
                raise ValueError(f"level function {c} is constant")
        if self.chart.base is None:
            raise ValueError("an implicit equation lives on a tangent chart")

    @property
    def base(self) -> Chart:
        return self.chart.base


@dataclass(frozen=True)
class IdealVerdict:
    """Outcome of a membership test f in <g_1, ..., g_k>."""

    status: str  # member | not_member | probable_member
    tier: str
    multipliers: tuple | None = None
    witness: dict | None = None

    @property
    def member(self) -> bool:
        return self.status == "member"

    @property
    def vanishes(self) -> bool:
        return self.status in ("member", "probable_member")

    def to_dict(self):
        d = {"status": self.status, "tier": self.tier}
        if self.multipliers is not None:
            d["multipliers"] = [str(m) for m in self.multipliers]
        if self.witness is not None:
            d["witness"] = self.witness
        return d


@dataclass(frozen=True)
class SymmetryVerdict:
    status: str  # symmetry | not_symmetry | inconclusive
    multipliers: sp.Matrix | None
    residuals: tuple
    tiers: tuple = ()

    def to_dict(self):
        d = {"status": self.status, "tiers": list(self.tiers),
             "residuals": [str(r) for r in self.residuals]}
        if self.multipliers is not None:
            d["multipliers"] = [[str(e) for e in row] for row in self.multipliers.tolist()]
        return d


# ---------------------------------------------------------------------------
# solving constraints for coordinates


def _known_nonzero(c, assumptions) -> bool:
    c = normalize(c)
    if c.is_Number:
        return c != 0
    if c.is_positive or c.is_negative:
        return True
    facts = [normalize(a.expr) for a in assumptions]
    factors = sp.Mul.make_args(sp.factor(c))
    for f in factors:
        base = f.base if f.is_Pow and f.exp.is_Integer and f.exp > 0 else f
        if base.is_Number and base != 0:
            continue
        if base.is_positive or base.is_negative:
            continue
        if not any(is_zero(base - a).proved_zero or is_zero(base + a).proved_zero for a in facts):
            return False
    return True


def solve_linear(gens, variables, assumptions=()) -> tuple[dict, list]:
    """Solve as many generators as possible for one variable each.

    A generator is used when it is affine in some unsolved variable with a
    coefficient that cannot vanish on the domain.  Returns the solution map
    and the generators left implicit.
    """
    sol: dict = {}
    rest = []
    pending = [normalize(g) for g in gens]
    progress = True
    while pending and progress:
        progress = False
        left = []
        for g in pending:
            g = normalize(substitute(g, sol)) if sol else g
            if g == 0:
                progress = True
                continue
            done = False
            for x in variables:
                if x in sol or not g.has(x):
                    continue
                num = sp.fraction(sp.together(g))[0]
                if not num.is_polynomial(x) or sp.degree(num, x) != 1:
                    continue
                coeff = sp.expand(num).coeff(x, 1)
                if coeff.has(x) or not _known_nonzero(coeff, assumptions):
                    continue
                value = normalize(-(sp.expand(num) - coeff * x) / coeff)
                sol = {k: normalize(substitute(v, {x: value})) for k, v in sol.items()}
                sol[x] = value
                done = progress = True
                break
            if not done:
                left.append(g)
        pending = left
    rest = pending
    return sol, rest


# ---------------------------------------------------------------------------
# numerical helpers


def manifold_points(gens, variables, assumptions=(), seed: int = DEFAULT_SEED,
                    count: int = SAMPLE_POINTS, extra=()):
    """Seeded points on the zero set of ``gens`` (Newton with least-norm steps).

    Returns pairs (point, values of ``extra``); abstract functions are
    instantiated consistently across all expressions.
    """
    rng = random.Random(seed)
    all_exprs = list(gens) + [a.expr for a in assumptions] + list(extra)
    inst = instantiate_functions([sp.sympify(e) for e in all_exprs], rng)
    k, m = len(gens), len(assumptions)
    g_exprs, a_exprs, x_exprs = inst[:k], inst[k:k + m], inst[k + m:]
    gs = [compile_expr(g, variables) for g in g_exprs]
    jac = [[compile_expr(sp.diff(g, v), variables) for v in variables] for g in g_exprs]
    conds = [compile_expr(a, variables) for a in a_exprs]
    extras = [compile_expr(e, variables) for e in x_exprs]
    pts = []
    for _ in range(40 * count):
        x = np.array([float(_random_rational(rng, bool(v.is_positive))) for v in variables])
        try:
            for _it in range(NEWTON_ITERATIONS):
                F = np.array([_real(g(x)) for g in gs], dtype=float)
                if np.max(np.abs(F), initial=0.0) < NEWTON_TOL:
                    break
                J = np.array([[_real(d(x)) for d in row] for row in jac], dtype=float)
                step = np.linalg.lstsq(J, -F, rcond=None)[0]
                x = x + step
            F = np.array([_real(g(x)) for g in gs], dtype=float)
            if np.max(np.abs(F), initial=0.0) > 1e-10:
                continue
            if not all(a.holds(_real(c(x))) for a, c in zip(assumptions, conds)):
                continue
            if any(v.is_positive and xi <= 0 for v, xi in zip(variables, x)):
                continue
            vals = [_real(e(x)) for e in extras]
        except (ZeroDivisionError, NumericDomainError, OverflowError, ValueError,
                np.linalg.LinAlgError):
            continue
        if not all(np.isfinite(vals)):
            continue
        pts.append((x, vals))
        if len(pts) >= count:
            return pts
    if not pts:
        raise SamplingFailed("no on-manifold sample point found")
    return pts


def _monomials(variables, degree):
    out = [sp.S.One]
    for d in range(1, degree + 1):
        out.extend(sp.Mul(*c) for c in itertools.combinations_with_replacement(variables, d))
    return out


def _ansatz(f, gens, variables, assumptions, seed, degree_cap):
    """Search polynomial multipliers lambda_a with f = sum lambda_a g_a."""
    rng = random.Random(seed ^ 0x5A5A)
    for degree in range(degree_cap + 1):
        monos = _monomials(variables, degree)
        unknowns = len(monos) * len(gens)
        if unknowns > MAX_UNKNOWNS:
            break
        cols = [m * g for g in gens for m in monos]
        exprs = instantiate_functions([f] + cols + [a.expr for a in assumptions], rng)
        fvars = sorted(set().union(set(), *(e.free_symbols for e in exprs)), key=str)
        comp = [compile_expr(e, fvars) for e in exprs]
        na = len(assumptions)
        rows, rhs = [], []
        tries = 0
        while len(rows) < unknowns + 8 and tries < 100 * (unknowns + 8):
            tries += 1
            x = [float(_random_rational(rng, bool(v.is_positive))) for v in fvars]
            try:
                vals = [_real(c(x)) for c in comp]
            except (ZeroDivisionError, NumericDomainError, OverflowError, ValueError):
                continue
            if na and not all(a.holds(v) for a, v in zip(assumptions, vals[-na:])):
                continue
            vals = vals[: len(vals) - na]
            if not all(np.isfinite(vals)):
                continue
            rows.append(vals[1:])
            rhs.append(vals[0])
        if len(rows) < unknowns:
            continue
        A, b = np.array(rows), np.array(rhs)
        coef, *_ = np.linalg.lstsq(A, b, rcond=None)
        if np.max(np.abs(A @ coef - b), initial=0.0) > 1e-7 * max(1.0, np.max(np.abs(b))):
            continue
        c = [rationalize(x, 10**4) for x in coef]
        lam = []
        for i in range(len(gens)):
            lam.append(normalize(sum((ci * m for ci, m in zip(c[i * len(monos):(i + 1) * len(monos)], monos)),
                                     sp.S.Zero)))
        resid = normalize(f - sum((l * g for l, g in zip(lam, gens)), sp.S.Zero))
        if is_zero(resid, seed=seed, assumptions=assumptions).proved_zero:
            return tuple(lam)
    return None


def in_ideal(f, gens, variables=None, assumptions=(), seed: int = DEFAULT_SEED,
             degree_cap: int = DEGREE_CAP) -> IdealVerdict:
    """Decide whether ``f`` vanishes modulo the ideal generated by ``gens``."""
    f = normalize(f)
    gens = [normalize(g) for g in gens]
    if variables is None:
        variables = sorted(set().union(f.free_symbols, *(g.free_symbols for g in gens)), key=str)
    if f == 0:
        return IdealVerdict("member", "substitution", tuple(sp.S.Zero for _ in gens))
    sol, rest = solve_linear(gens, variables, assumptions)
    reduced = normalize(substitute(f, sol)) if sol else f
    sub_assump = tuple(type(a)(normalize(substitute(a.expr, sol)), a.kind) for a in assumptions) if sol else tuple(assumptions)
    if reduced == 0 and not rest:
        return IdealVerdict("member", "substitution")
    if not rest:
        v = is_zero(reduced, seed=seed, assumptions=sub_assump)
        if v.nonzero:
            return IdealVerdict("not_member", "substitution", witness=dict(v.witness or ()))
        if v.proved_zero:
            return IdealVerdict("member", "substitution")
    lam = _ansatz(f, gens, [x for x in variables if any(g.has(x) for g in gens)],
                  assumptions, seed, degree_cap)
    if lam is not None:
        return IdealVerdict("member", "ansatz", lam)
    target = reduced if sol else f
    remaining = rest if sol else gens
    if reduced == 0:
        return IdealVerdict("member", "substitution")
    svars = sorted(set().union(target.free_symbols, *(g.free_symbols for g in remaining),
                               *(a.expr.free_symbols for a in sub_assump)), key=str)
    pts = manifold_points(remaining, svars, sub_assump, seed, extra=[target])
    for x, (val,) in pts:
        if abs(val) > 1e-8:
            return IdealVerdict("not_member", "sampling",
                                witness={str(v): float(xi) for v, xi in zip(svars, x)})
    return IdealVerdict("probable_member", "sampling")


# ---------------------------------------------------------------------------
# operations on implicit equations


def check_constant_of_motion(Z: ImplicitODE, f, assumptions=None, seed: int = DEFAULT_SEED) -> IdealVerdict:
    """Decide (d_N f)|_Z = 0 for f on the base manifold."""
    assumptions = Z.chart.assumptions if assumptions is None else assumptions
    dNf = geo.total_field(Z.chart)(f)
    return in_ideal(dNf, Z.constraints, list(Z.chart.coords), assumptions, seed)


def check_symmetry(Z: ImplicitODE, X: VectorField, seed: int = DEFAULT_SEED) -> SymmetryVerdict:
    """L_{X^(N)} psi^a = A^a_b psi^b for the lifted field."""
    if Z.order == "second":
        XN = geo.tangent_lift(geo.tangent_lift(X, Z.base), Z.chart)
    else:
        XN = geo.tangent_lift(X, Z.chart)
    assumptions = Z.chart.assumptions
    coords = list(Z.chart.coords)
    gens = [normalize(g) for g in Z.constraints]
    rows, residuals, tiers, status = [], [], [], "symmetry"
    for psi in gens:
        lx = normalize(XN(psi))
        residuals.append(lx)
        v = in_ideal(lx, gens, coords, assumptions, seed)
        tiers.append(v.tier)
        lam = v.multipliers
        if v.member and lam is None:
            lam = _ansatz(lx, gens, [x for x in coords if any(g.has(x) for g in gens)],
                          assumptions, seed, 2)
        rows.append(list(lam) if lam is not None else None)
        if v.status == "not_member":
            status = "not_symmetry"
        elif v.status == "probable_member" and status == "symmetry":
            status = "inconclusive"
    A = None
    if status == "symmetry" and all(r is not None for r in rows):
        A = sp.Matrix(rows)
    return SymmetryVerdict(status, A, tuple(residuals), tuple(tiers))


def graph_of(X: VectorField, T: Chart | None = None) -> ImplicitODE:
    """The explicit equation v^a = X^a(x) as an implicit one."""
    T = T or X.chart.tangent()
    return ImplicitODE(T, tuple(normalize(v - c) for v, c in zip(T.velocities, X.components)))


@dataclass(frozen=True)
class LagrangianCheck:
    isotropic: bool
    full_rank: bool
    pullback: KForm = field(compare=False)
    rank: int = 0

    @property
    def lagrangian(self) -> bool:
        return self.isotropic and self.full_rank

    def to_dict(self):
        return {"lagrangian": self.lagrangian, "isotropic": self.isotropic,
                "full_rank": self.full_rank, "rank": self.rank}


def check_lagrangian_submanifold(omega: KForm, params: Chart, images: dict,
                                 seed: int = DEFAULT_SEED) -> LagrangianCheck:
    """Pullback of ``omega`` along the parametrised map and its Jacobian rank.

    ``images`` maps every coordinate of ``omega``'s chart to an expression in
    the parameter coordinates.
    """
    n = params.dim
    if 2 * n != omega.chart.dim:
        raise ValueError("a Lagrangian submanifold needs half the ambient dimension")
    pulled = geo.pullback(omega, params, images)
    iso = all(is_zero(c, seed=seed, assumptions=params.assumptions).proved_zero
              for c in pulled.coeffs.values())
    J = sp.Matrix([[sp.diff(images[c], p) for p in params.coords] for c in omega.chart.coords])
    info = generic_rank(J, params.assumptions, seed)
    return LagrangianCheck(iso, info.rank == n, pulled, info.rank)
