"""Constraint algorithms for singular Lagrangians.

The Hamiltonian side runs the Dirac-Bergmann iteration on T*Q with the
canonical bracket; the Lagrangian side runs the presymplectic algorithm for
i_D omega_L = dE_L on TQ.  Every step is appended to a transcript kept in the
ledger.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field

import numpy as np
import sympy as sp

from . import geometry as geo
from ._linalg import (RankInfo, generic_rank, kernel_basis, left_kernel,
                      principal_pivots, solve_pivot)
from .geometry import Chart, VectorField
from .implicit import _known_nonzero, in_ideal, solve_linear
from .lagrangian import LagrangianSystem, vertical_kernel
from .symexpr import (NumericDomainError, _random_rational, _real, compile_expr,
                      instantiate_functions, is_zero, normalize, rationalize,
                      substitute, symbol, to_text)

MAX_ITERATIONS = 10


class ConstraintError(RuntimeError):
    def __init__(self, message, ledger=None):
        super().__init__(message)
        self.ledger = ledger


class NoFixedPoint(ConstraintError):
    pass


class Inconsistent(ConstraintError):
    pass


class NotProjectable(ValueError):
    pass


@dataclass
class ConstraintLedger:
    system: LagrangianSystem
    transcript: list = field(default_factory=list)
    # Hamiltonian side
    cotangent: Chart | None = None
    momenta_map: dict = field(default_factory=dict)
    primary: list = field(default_factory=list)
    generations: list = field(default_factory=list)
    normal_form: bool = False
    H0: sp.Expr | None = None
    first_class: list = field(default_factory=list)
    first_class_primary: list = field(default_factory=list)
    second_class: list = field(default_factory=list)
    bracket_matrix: sp.Matrix | None = None
    dirac_inverse: sp.Matrix | None = None
    multipliers: dict = field(default_factory=dict)
    lifted: dict = field(default_factory=dict)
    lifted_tangency: dict = field(default_factory=dict)
    # Lagrangian side
    kernel: list = field(default_factory=list)
    kernel_vertical: list = field(default_factory=list)
    type_II: bool | None = None
    lagrangian_generations: list = field(default_factory=list)
    final_constraints: list = field(default_factory=list)
    solutions: VectorField | None = None
    solution_multipliers: list = field(default_factory=list)
    defect: VectorField | None = None
    second_order: VectorField | None = None
    vertical_symmetries: list = field(default_factory=list)

    @property
    def hamiltonian_constraints(self) -> list:
        return [c for g in self.generations for c in g]

    @property
    def counts(self) -> list:
        return [len(g) for g in self.generations]

    @property
    def lagrangian_counts(self) -> list:
        return [len(g) for g in self.lagrangian_generations]

    def log(self, step, **info):
        self.transcript.append({"step": step, **{k: _jsonable(v) for k, v in info.items()}})

    def to_dict(self):
        d = {"transcript": self.transcript}
        if self.cotangent is not None:
            d["hamiltonian"] = {
                "primary": [to_text(c) for c in self.primary],
                "generations": [[to_text(c) for c in g] for g in self.generations],
                "counts": self.counts,
                "normal_form": self.normal_form,
                "H0": to_text(self.H0) if self.H0 is not None else None,
                "first_class": [to_text(c) for c in self.first_class],
                "first_class_primary": [to_text(c) for c in self.first_class_primary],
                "second_class": [to_text(c) for c in self.second_class],
                "dirac_inverse": _jsonable(self.dirac_inverse),
                "multipliers": {k: [str(s) for s in v] for k, v in self.multipliers.items()},
                "lifted": {k: _field_dict(v) for k, v in self.lifted.items()},
                "lifted_tangency": {k: v for k, v in self.lifted_tangency.items()},
            }
        if self.type_II is not None:
            d["lagrangian"] = {
                "kernel": [_field_dict(k) for k in self.kernel],
                "kernel_vertical": [_field_dict(k) for k in self.kernel_vertical],
                "type_II": self.type_II,
                "generations": [[to_text(c) for c in g] for g in self.lagrangian_generations],
                "counts": self.lagrangian_counts,
                "final_constraints": [to_text(c) for c in self.final_constraints],
                "solutions": _field_dict(self.solutions) if self.solutions is not None else None,
                "multipliers": [str(s) for s in self.solution_multipliers],
                "defect": _field_dict(self.defect) if self.defect is not None else None,
                "second_order": _field_dict(self.second_order) if self.second_order is not None else None,
            }
        return d


def _field_dict(X: VectorField) -> dict:
    return {str(c): to_text(e) for c, e in zip(X.chart.coords, X.components) if e != 0}


def _jsonable(v):
    if isinstance(v, sp.MatrixBase):
        return [[to_text(e) for e in row] for row in v.tolist()]
    if isinstance(v, sp.Basic):
        return to_text(v)
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    return v


# ---------------------------------------------------------------------------
# helpers


def clean_constraint(e, assumptions=()):
    """Drop factors that cannot vanish and repeated factors.

    Returns 0 for an identically vanishing expression and 1 when every factor
    is known nonzero (an inconsistent constraint).
    """
    e = normalize(e)
    if e == 0:
        return sp.S.Zero
    num = sp.fraction(sp.together(e))[0]
    _, factors = sp.factor_list(num)
    keep = [b for b, _ in factors if not _known_nonzero(b, assumptions)]
    if not keep:
        return sp.S.One
    out = normalize(sp.Mul(*keep))
    lead = sp.Poly(out, *sorted(out.free_symbols, key=str)).LC() if out.is_polynomial() else 1
    if lead.is_Number and lead < 0:
        out = normalize(-out)
    return out


def _independent(existing, new, coords, assumptions, seed) -> bool:
    rows = [[sp.diff(c, x) for x in coords] for c in existing + [new]]
    J = sp.Matrix(rows)
    r_new = generic_rank(J, assumptions, seed).rank
    if not existing:
        return r_new == 1
    r_old = generic_rank(sp.Matrix(rows[:-1]), assumptions, seed).rank
    return r_new > r_old


def _reduce(exprs, sol):
    if not sol:
        return [normalize(e) for e in exprs]
    return [normalize(substitute(e, sol)) for e in exprs]


def _reduce_matrix(M: sp.Matrix, sol) -> sp.Matrix:
    return M.applyfunc(lambda e: normalize(substitute(e, sol)) if sol else normalize(e))


def _weak_zero(e, gens, assumptions, seed):
    e = normalize(e)
    if e == 0:
        return "member"
    if not gens:
        v = is_zero(e, seed=seed, assumptions=assumptions)
        return {"proved_zero": "member", "probably_zero": "probable_member"}.get(v.status, "not_member")
    return in_ideal(e, gens, None, assumptions, seed).status


# ---------------------------------------------------------------------------
# kernels


def kernel_decomposition(sys: LagrangianSystem, ledger: ConstraintLedger | None = None) -> dict:
    """Bases of ker omega_L and ker^V omega_L and the type II verdict."""
    W = sys.omega.matrix()
    info = generic_rank(W, sys.assumptions, sys.seed)
    if info.warnings:
        sys.warnings.extend(info.warnings)
    ks = kernel_basis(W, info, sys.assumptions, sys.seed) if info.rank < W.rows else []
    kernel = [VectorField(sys.T, tuple(k)).normalized() for k in ks]
    for K in kernel:
        res = geo._interior(K, sys.omega)
        if not sys.zeros(res.coeffs.values()).vanishes:
            raise ArithmeticError("kernel field failed i_K omega_L = 0")
    vertical = vertical_kernel(sys) if not sys.regular else []
    n = sys.N
    type_II = True
    if vertical:
        Smat = sp.Matrix([[K.components[a] for K in kernel] for a in range(n)])
        base = generic_rank(Smat, sys.assumptions, sys.seed).rank if kernel else 0
        for V in vertical:
            target = sp.Matrix(V.components[n:])
            aug = Smat.row_join(target) if kernel else target
            if generic_rank(aug, sys.assumptions, sys.seed).rank > base:
                type_II = False
                break
    out = {"kernel": kernel, "kernel_vertical": vertical, "type_II": type_II, "rank": info.rank}
    if ledger is not None:
        ledger.kernel, ledger.kernel_vertical, ledger.type_II = kernel, vertical, type_II
        ledger.log("kernel", rank=info.rank, kernel=[_field_dict(k) for k in kernel],
                   vertical=[_field_dict(k) for k in vertical], type_II=type_II)
    return out


# ---------------------------------------------------------------------------
# primary constraints


def _quadratic(sys) -> bool:
    return all(not sp.sympify(e).has(*sys.v) for e in sys.hessian)


def _normal_form_primaries(sys: LagrangianSystem, P: Chart):
    """p_sigma - f_sigma(q, p_b) by a linear solve on the Hessian pivots."""
    n = sys.N
    p = P.momenta
    v = sys.v
    pi = [sys.theta.coeffs.get((a,), sp.S.Zero) for a in range(n)]
    info = sys.rank_info
    rows, cols = list(info.rows), list(info.cols)
    zero_v = {x: 0 for x in v}
    sol = {}
    if rows:
        A = sys.hessian.extract(rows, cols)
        free = [j for j in range(n) if j not in cols]
        rhs = sp.Matrix([p[r] - pi[r].subs(zero_v) - sum(sys.hessian[r, j] * v[j] for j in free)
                         for r in rows])
        vc = A.LUsolve(rhs)
        sol = {v[c]: normalize(x) for c, x in zip(cols, vc)}
    prim = []
    for s in range(n):
        if s in rows:
            continue
        phi = normalize(p[s] - substitute(pi[s], sol))
        if any(phi.has(x) for x in v):
            raise ArithmeticError("momentum relation depends on velocities")
        prim.append(phi)
    vel = {x: sol.get(x, sp.S.Zero) for x in v}
    H0 = normalize(substitute(sys.energy, vel))
    if any(H0.has(x) for x in v):
        raise ArithmeticError("energy does not descend to the momentum image")
    return prim, H0


def _parameters(sys):
    coords = set(sys.T.coords)
    syms = set().union(sys.L.free_symbols, *(a.expr.free_symbols for a in sys.assumptions))
    return sorted(syms - coords, key=str)


def _ansatz_primaries(sys: LagrangianSystem, P: Chart, count: int):
    """Polynomial relations R(params, p) = 0 on the momentum image."""
    n = sys.N
    p = list(P.momenta)
    pi = [sys.theta.coeffs.get((a,), sp.S.Zero) for a in range(n)]
    params = _parameters(sys)
    rng = random.Random(sys.seed)
    variables = sorted(set(sys.T.coords) | set(params), key=str)
    exprs = instantiate_functions(pi + [a.expr for a in sys.assumptions], rng)
    comp = [compile_expr(e, variables) for e in exprs]
    na = len(sys.assumptions)
    for pdeg, cdeg in [(1, 0), (2, 0), (1, 1), (2, 1), (2, 2)]:
        pm = [sp.Mul(*c) for d in range(pdeg + 1)
              for c in itertools.combinations_with_replacement(p, d)]
        cm = [sp.Mul(*c) for d in range(cdeg + 1)
              for c in itertools.combinations_with_replacement(params, d)]
        if cdeg == 0:
            cm = [sp.S.One] + ([x**2 for x in params] if pdeg == 2 else [])
        monos = [c * m for m in pm for c in cm]
        monos = sorted(set(monos), key=lambda m: (sp.Poly(m, *p).total_degree() if p else 0, sp.default_sort_key(m)))
        mcomp = [compile_expr(m, p + params) for m in monos]
        rows = []
        tries = 0
        while len(rows) < 3 * len(monos) and tries < 100 * len(monos):
            tries += 1
            x = [float(_random_rational(rng, bool(s.is_positive))) for s in variables]
            try:
                vals = [_real(c(x)) for c in comp]
                if na and not all(a.holds(vv) for a, vv in zip(sys.assumptions, vals[n:])):
                    continue
                env = vals[:n] + [x[variables.index(s)] for s in params]
                rows.append([_real(m(env)) for m in mcomp])
            except (ZeroDivisionError, NumericDomainError, OverflowError, ValueError):
                continue
        A = np.array(rows, dtype=float)
        A = A / np.maximum(np.abs(A).max(axis=0), 1.0)
        _, s, vt = np.linalg.svd(A)
        null = [vt[i] for i in range(len(s)) if s[i] < 1e-9 * s[0]] + \
            [vt[i] for i in range(len(s), vt.shape[0])]
        if len(null) != count:
            continue
        out = []
        scale = np.maximum(np.abs(np.array(rows)).max(axis=0), 1.0)
        for vec in null:
            vec = vec / scale
            j = int(np.argmax(np.abs(vec) > 1e-8 * np.abs(vec).max()))
            vec = vec / vec[j]
            coeffs = [rationalize(c, 1000) for c in vec]
            rel = normalize(sum((c * m for c, m in zip(coeffs, monos)), sp.S.Zero))
            subs = dict(zip(p, pi))
            if not sys.zero(substitute(rel, subs)).proved_zero:
                break
            num = sp.fraction(sp.together(rel))[0]
            num = sp.Poly(num, *p, *params).primitive()[1].as_expr()
            first = sp.Poly(num, *p).terms()[-1][1] if p else 1
            out.append(normalize(-num if sp.sympify(first).could_extract_minus_sign() else num))
        if len(out) == count:
            return out
    raise ArithmeticError("no polynomial relation found for the momentum image")


def primary_constraints(sys: LagrangianSystem, P: Chart | None = None):
    """Primary constraints and the energy on the momentum image."""
    P = P or sys.Q.cotangent()
    if _quadratic(sys):
        prim, H0 = _normal_form_primaries(sys, P)
        return prim, H0, True
    count = sys.N - sys.rank
    prim = _ansatz_primaries(sys, P, count)
    if not sys.zero(sys.energy).proved_zero:
        raise ArithmeticError("energy could not be expressed on the momentum image")
    return prim, sp.S.Zero, False


# ---------------------------------------------------------------------------
# Hamiltonian side


def _brackets(fs, gs, P):
    return sp.Matrix(len(fs), len(gs), lambda i, j: geo.canonical_bracket(fs[i], gs[j], P))


def hamiltonian_algorithm(sys: LagrangianSystem, ledger: ConstraintLedger | None = None,
                          max_iterations: int = MAX_ITERATIONS) -> ConstraintLedger:
    ledger = ledger or ConstraintLedger(sys)
    P = sys.Q.cotangent()
    ledger.cotangent = P
    ledger.momenta_map = {pa: sys.theta.coeffs.get((a,), sp.S.Zero) for a, pa in enumerate(P.momenta)}
    prim, H0, nf = primary_constraints(sys, P)
    ledger.primary, ledger.H0, ledger.normal_form = prim, H0, nf
    ledger.generations = [list(prim)]
    ledger.log("primary", constraints=prim, H0=H0, normal_form=nf)
    assumptions, seed = sys.assumptions, sys.seed
    coords = list(P.coords)
    nprim = len(prim)
    for it in range(1, max_iterations + 1):
        allc = ledger.hamiltonian_constraints
        sol, rest = solve_linear(allc, coords, assumptions)
        B = _reduce_matrix(_brackets(allc, prim, P), sol)
        h = sp.Matrix(_reduce([geo.canonical_bracket(c, H0, P) for c in allc], sol))
        info = generic_rank(B, assumptions, seed) if any(e != 0 for e in B) else RankInfo(0, (), ())
        ks = left_kernel(B, assumptions, seed) if info.rank < B.rows else []
        if info.rank == 0:
            ks = [sp.eye(len(allc))[i, :] for i in range(len(allc))]
        new = []
        for k in ks:
            chi = normalize(substitute((k * h)[0, 0], sol)) if sol else normalize((k * h)[0, 0])
            chi = clean_constraint(chi, assumptions)
            if chi == 0:
                continue
            if chi == 1:
                ledger.log("inconsistent", generation=it, value=chi)
                raise Inconsistent("a consistency condition reduces to a nonzero constant", ledger)
            if _weak_zero(chi, allc + new, assumptions, seed) in ("member", "probable_member"):
                continue
            if not _independent(allc + new, chi, coords, assumptions, seed):
                ledger.log("dependent", generation=it, constraint=chi)
                continue
            new.append(chi)
        ledger.log("iteration", generation=it, bracket_rank=info.rank, new=new)
        if not new:
            break
        ledger.generations.append(new)
    else:
        raise NoFixedPoint("constraint iteration hit the cap", ledger)
    _classify(ledger, P, nprim)
    _lift_fields(ledger, P)
    return ledger


def _classify(ledger: ConstraintLedger, P: Chart, nprim: int):
    sys = ledger.system
    assumptions, seed = sys.assumptions, sys.seed
    allc = ledger.hamiltonian_constraints
    coords = list(P.coords)
    sol, _ = solve_linear(allc, coords, assumptions)
    B = _reduce_matrix(_brackets(allc, allc, P), sol)
    ledger.bracket_matrix = B
    second = principal_pivots(B, assumptions, seed) if any(e != 0 for e in B) else []
    second = sorted(second)
    ledger.second_class = [allc[i] for i in second]
    if second:
        M = B.extract(second, second)
        ledger.dirac_inverse = M.inv(method="LU").applyfunc(
            lambda e: normalize(substitute(e, sol)) if sol else normalize(e))
    else:
        ledger.dirac_inverse = sp.zeros(0, 0)
    info = generic_rank(B, assumptions, seed) if second else RankInfo(0, (), ())
    ks = kernel_basis(B, info, assumptions, seed) if info.rank < B.rows else []
    first, first_primary = [], []
    for k in ks:
        combo = normalize(sum((k[i] * allc[i] for i in range(len(allc))), sp.S.Zero))
        first.append(combo)
        if all(k[i] == 0 for i in range(nprim, len(allc))):
            first_primary.append(combo)
    ledger.first_class, ledger.first_class_primary = first, first_primary
    ledger.log("classify", second_class=ledger.second_class, first_class=first,
               first_class_primary=first_primary, bracket_rank=len(second))


def _lift_fields(ledger: ConstraintLedger, P: Chart):
    """Lifted dynamics on T*Q with free multipliers, and their tangency."""
    sys = ledger.system
    H = ledger.H0
    theta = ledger.second_class
    C = ledger.dirac_inverse
    XH = geo.canonical_hamiltonian_field(H, P)
    base = XH
    for i, ti in enumerate(theta):
        bi = geo.canonical_bracket(ti, H, P)
        for j, tj in enumerate(theta):
            if C[i, j] != 0:
                base = base + geo.canonical_hamiltonian_field(tj, P).scale(bi * C[i, j])
    fp = ledger.first_class_primary
    fs = [c for c in ledger.first_class if c not in fp]
    u = [symbol(f"mu_{i + 1}") for i in range(len(fp))]
    w = [symbol(f"nu_{i + 1}") for i in range(len(fs))]
    ledger.multipliers = {"primary_first_class": u, "secondary_first_class": w}
    final = base
    for ui, c in zip(u, fp):
        final = final + geo.canonical_hamiltonian_field(c, P).scale(ui)
    glob = final
    for wi, c in zip(w, fs):
        glob = glob + geo.canonical_hamiltonian_field(c, P).scale(wi)
    allc = ledger.hamiltonian_constraints
    sol, _ = solve_linear(allc, list(P.coords), sys.assumptions)
    ledger.lifted = {"final": final.normalized(), "global": glob.normalized()}
    for name, X in ledger.lifted.items():
        status = [_weak_zero(X(c), allc, sys.assumptions, sys.seed) for c in allc]
        ledger.lifted_tangency[name] = ("member" if all(s == "member" for s in status) else
                                        "not_member" if "not_member" in status else "probable_member")
    ledger.log("lifted", fields={k: _field_dict(v) for k, v in ledger.lifted.items()},
               tangency=ledger.lifted_tangency)


# ---------------------------------------------------------------------------
# Lagrangian side


def lagrangian_algorithm(sys: LagrangianSystem, ledger: ConstraintLedger | None = None,
                         max_iterations: int = MAX_ITERATIONS) -> ConstraintLedger:
    ledger = ledger or ConstraintLedger(sys)
    if ledger.type_II is None:
        kernel_decomposition(sys, ledger)
    assumptions, seed = sys.assumptions, sys.seed
    coords = list(sys.T.coords)
    W = sys.omega.matrix()
    dE = sp.Matrix(geo.d_function(sys.T, sys.energy).vector())
    kernel = ledger.kernel
    first = []
    for K in kernel:
        psi = clean_constraint(K(sys.energy), assumptions)
        if psi == 1:
            raise Inconsistent("L_K E_L is a nonvanishing function", ledger)
        if psi != 0 and not first or (psi != 0 and _weak_zero(psi, first, assumptions, seed) == "not_member"):
            if _independent(first, psi, coords, assumptions, seed):
                first.append(psi)
    ledger.lagrangian_generations = [first] if first else []
    ledger.log("lagrangian_first_generation", constraints=first)
    cs = [symbol(f"k_{i + 1}") for i in range(len(kernel))]
    info = generic_rank(W, assumptions, seed)
    constraints = list(first)
    for it in range(1, max_iterations + 1):
        sol, _ = solve_linear(constraints, coords, assumptions)
        Dp = solve_pivot(W, -dE, info)
        Dp = VectorField(sys.T, tuple(_reduce(list(Dp), sol)))
        Ks = [VectorField(sys.T, tuple(_reduce(list(K.components), sol))) for K in kernel]
        if not constraints:
            break
        A = sp.Matrix([[normalize(substitute(K(c), sol)) for K in Ks] for c in constraints]) if Ks else sp.zeros(len(constraints), 0)
        b = sp.Matrix([normalize(substitute(-Dp(c), sol)) for c in constraints])
        new = []
        if A.cols and any(e != 0 for e in A):
            ainfo = generic_rank(A, assumptions, seed)
            lk = left_kernel(A, assumptions, seed) if ainfo.rank < A.rows else []
        else:
            lk = [sp.eye(len(constraints))[i, :] for i in range(len(constraints))]
        for k in lk:
            psi = clean_constraint(normalize(substitute((k * b)[0, 0], sol)), assumptions)
            if psi == 0:
                continue
            if psi == 1:
                raise Inconsistent("tangency condition reduces to a nonzero constant", ledger)
            if _weak_zero(psi, constraints + new, assumptions, seed) != "not_member":
                continue
            if _independent(constraints + new, psi, coords, assumptions, seed):
                new.append(psi)
        ledger.log("lagrangian_iteration", generation=it, new=new)
        if not new:
            break
        ledger.lagrangian_generations.append(new)
        constraints.extend(new)
    else:
        raise NoFixedPoint("Lagrangian constraint iteration hit the cap", ledger)
    ledger.final_constraints = constraints
    sol, _ = solve_linear(constraints, coords, assumptions)
    # tangency of D_p + c_k K_k: solve for as many c_k as possible
    family = Dp
    for c, K in zip(cs, Ks):
        family = family + K.scale(c)
    if constraints and Ks:
        A = sp.Matrix([[normalize(substitute(K(c), sol)) for K in Ks] for c in constraints])
        b = sp.Matrix([normalize(substitute(-Dp(c), sol)) for c in constraints])
        if any(e != 0 for e in A):
            ainfo = generic_rank(A, assumptions, seed)
            part = solve_pivot(A, b, ainfo)
            nul = kernel_basis(A, ainfo, assumptions, seed, clear=False)
            free = [cs[j] for j in range(len(cs)) if j not in ainfo.cols]
            cvals = part + sum((n * s for n, s in zip(nul, free)), sp.zeros(len(cs), 1))
            family = Dp
            for cv, K in zip(cvals, Ks):
                family = family + K.scale(cv)
            cs = free
    family = VectorField(sys.T, tuple(_reduce(list(family.components), sol)))
    ledger.solutions = family
    ledger.solution_multipliers = [c for c in cs if family.components and any(e.has(c) for e in family.components)]
    S = sys.soldering
    defect = S(family) - S.liouville
    ledger.defect = VectorField(sys.T, tuple(_reduce(list(defect.components), sol)))
    ledger.vertical_symmetries = [V for V in ledger.kernel_vertical
                                  if all(_weak_zero(V(c), constraints, assumptions, seed) == "member"
                                         for c in constraints)]
    ledger.log("lagrangian_solutions", family=_field_dict(family),
               multipliers=ledger.solution_multipliers, defect=_field_dict(ledger.defect))
    if ledger.type_II and not constraints:
        ledger.second_order = _second_order_global(ledger)
        ledger.log("second_order", field=_field_dict(ledger.second_order))
    elif sys.regular:
        ledger.second_order = sys.dynamics
    return ledger


def _second_order_global(ledger: ConstraintLedger) -> VectorField:
    """D + K with S(K) = Delta - S(D) on all TQ (type II, no constraints)."""
    sys = ledger.system
    n = sys.N
    D = ledger.solutions
    cs = ledger.solution_multipliers
    target = [normalize(v - D.components[a]) for a, v in enumerate(sys.v)]
    # the q-components of D are affine in the multipliers
    A = sp.Matrix([[sp.diff(D.components[a], c) for c in cs] for a in range(n)])
    rhs = sp.Matrix([normalize(sys.v[a] - D.components[a].subs({c: 0 for c in cs})) for a in range(n)])
    del target
    if not cs:
        return D
    info = generic_rank(A, sys.assumptions, sys.seed)
    sol = solve_pivot(A, rhs, info)
    fixed = {cs[j]: sol[j] for j in info.cols}
    return D.subs(fixed).normalized()


def analyze(sys: LagrangianSystem, max_iterations: int = MAX_ITERATIONS) -> ConstraintLedger:
    ledger = ConstraintLedger(sys)
    kernel_decomposition(sys, ledger)
    if not sys.regular:
        hamiltonian_algorithm(sys, ledger, max_iterations)
    lagrangian_algorithm(sys, ledger, max_iterations)
    return ledger


# ---------------------------------------------------------------------------
# bridges between the pictures


def legendre_pullback(ledger: ConstraintLedger, f):
    """Phi_L^* f: substitute momenta by dL/dv."""
    return normalize(substitute(f, ledger.momenta_map))


def k_operator(ledger: ConstraintLedger, f):
    """K(f) = Phi^*(df/dq^j) v^j + Phi^*(df/dp_j) dL/dq^j."""
    sys = ledger.system
    P = ledger.cotangent
    q, p = P.positions, P.momenta
    out = sum((legendre_pullback(ledger, sp.diff(f, qj)) * vj for qj, vj in zip(q, sys.v)), sp.S.Zero)
    out += sum((legendre_pullback(ledger, sp.diff(f, pj)) * sp.diff(sys.L, qj)
                for qj, pj in zip(q, p)), sp.S.Zero)
    return normalize(out)


def bridge_relations(ledger: ConstraintLedger) -> dict:
    """Checks K(phi_sigma) = Phi^*{phi_sigma, H0} and first-class images."""
    sys = ledger.system
    P = ledger.cotangent
    out = {}
    for i, phi in enumerate(ledger.primary):
        lhs = k_operator(ledger, phi)
        rhs = legendre_pullback(ledger, geo.canonical_bracket(phi, ledger.H0, P))
        out[f"K(primary_{i + 1})"] = sys.zero(lhs - rhs)
    for i, phi in enumerate(ledger.first_class_primary):
        psi = k_operator(ledger, phi)
        out[f"first_class_{i + 1}_vertical"] = sys.zeros([V(psi) for V in ledger.kernel_vertical])
    return out


def projectable(ledger: ConstraintLedger, D: VectorField, Y: VectorField) -> dict:
    """L_D Phi^*f = Phi^*(L_Y f) on coordinate functions of T*Q, modulo P'."""
    sys = ledger.system
    P = ledger.cotangent
    gens = ledger.final_constraints
    Yc = _on_cotangent(Y, P)
    out = {}
    for c in P.coords:
        lhs = D(legendre_pullback(ledger, c))
        rhs = legendre_pullback(ledger, Yc(c))
        out[str(c)] = _weak_zero(lhs - rhs, gens, sys.assumptions, sys.seed)
    return out


def _on_cotangent(Y: VectorField, P: Chart) -> VectorField:
    if Y.chart.coords == P.coords:
        return Y
    if Y.chart.coords == P.base.coords:
        return VectorField(P, tuple(Y.components) + (sp.S.Zero,) * P.base.dim)
    raise geo.ChartMismatch("projected field must live on Q or T*Q")


def section_checks(ledger: ConstraintLedger, section: dict, Dt: VectorField) -> dict:
    """Tangency to Sigma, the second-order condition and i_D omega_L = dE_L on Sigma."""
    sys = ledger.system
    gens = list(ledger.final_constraints) + [normalize(v - e) for v, e in section.items()]
    a, s = sys.assumptions, sys.seed

    def weak_all(exprs):
        st = [_weak_zero(e, gens, a, s) for e in exprs]
        if all(x == "member" for x in st):
            return "member"
        return "not_member" if "not_member" in st else "probable_member"

    S = sys.soldering
    res = geo._interior(Dt, sys.omega) - geo.d_function(sys.T, sys.energy)
    return {
        "tangent": weak_all([Dt(g) for g in gens]),
        "second_order": weak_all((S(Dt) - S.liouville).components),
        "equation": weak_all(res.normalized().coeffs.values()),
    }


def second_order_section(ledger: ConstraintLedger, D: VectorField, Y: VectorField) -> dict:
    """Section sigma: M' -> P' through the projected velocities and the lift of Y."""
    sys = ledger.system
    n = sys.N
    proj = projectable(ledger, D, Y)
    if any(v == "not_member" for v in proj.values()):
        raise NotProjectable(f"D does not project onto Y: {proj}")
    Yq = [sp.sympify(Y.components[a]) for a in range(n)]
    if any(e.has(*ledger.cotangent.momenta) for e in Yq):
        Yq = [legendre_pullback(ledger, e) for e in Yq]
    if any(e.has(*sys.v) for e in Yq):
        raise NotProjectable("projected velocities depend on the fibre")
    section = {v: normalize(e) for v, e in zip(sys.v, Yq)}
    base = VectorField(sys.Q, tuple(Yq))
    acc = [normalize(base(e)) for e in Yq]
    Dt = VectorField(sys.T, tuple(Yq) + tuple(acc)).normalized()
    checks = section_checks(ledger, section, Dt)
    ledger.log("section", section=section, lifted=_field_dict(Dt), checks=checks)
    return {"section": section, "lifted": Dt, "checks": checks, "projectable": proj}
