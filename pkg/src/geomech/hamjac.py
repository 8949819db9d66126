"""Time-independent Hamilton-Jacobi theory on a cotangent chart.

A candidate W(q; u) may contain quadrature-defined functions: abstract
one-argument functions whose first derivative is given by a rule, e.g.
W = k*y + Wt(x) with Wt'(x) = sqrt(2*(E - V(x)) - k^2).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import sympy as sp

from . import geometry as geo
from ._linalg import generic_rank
from .geometry import Chart, VectorField
from .implicit import in_ideal
from .symexpr import (DEFAULT_SEED, PROVED_ZERO, ZeroVerdict, all_zero, is_zero,
                      normalize, substitute, to_text)


class UncertifiedCandidate(ValueError):
    pass


class NotAdapted(ValueError):
    pass


@dataclass(frozen=True)
class HJCandidate:
    Q: Chart
    W: sp.Expr
    parameters: tuple
    energy: sp.Expr
    assumptions: tuple = ()
    rules: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if len(self.parameters) > self.Q.dim:
            raise ValueError("more parameters than coordinates")

    @property
    def all_assumptions(self):
        return tuple(self.Q.assumptions) + tuple(self.assumptions)

    def expand_rules(self, e):
        """Replace derivatives of quadrature-defined functions by their rules."""
        if not self.rules:
            return e

        def is_rule(x):
            return isinstance(x, sp.Derivative) and getattr(x.expr, "func", None) in self.rules

        def rewrite(x):
            rule = self.rules[x.expr.func]
            arg = x.expr.args[0]
            out = rule(arg)
            order = sum(n for _, n in x.variable_count)
            t = sp.Dummy("t")
            body = rule(t)
            for _ in range(order - 1):
                body = sp.diff(body, t)
            return body.subs(t, arg) if order > 1 else out

        return e.replace(is_rule, rewrite)

    def gradient(self) -> list:
        return [normalize(self.expand_rules(sp.diff(self.W, q))) for q in self.Q.coords]


def _momenta_subs(P: Chart, cand: HJCandidate) -> dict:
    return dict(zip(P.momenta, cand.gradient()))


def hj_residual(H, cand: HJCandidate, P: Chart | None = None):
    """H(q, dW) - E, normalized."""
    P = P or cand.Q.cotangent()
    return normalize(cand.expand_rules(substitute(H, _momenta_subs(P, cand)) - cand.energy))


@dataclass
class HJCertificate:
    complete: bool
    partial: bool
    checks: dict
    certified: bool

    def to_dict(self):
        return {"complete": self.complete, "partial": self.partial, "certified": self.certified,
                "checks": {k: v.to_dict() for k, v in self.checks.items()}}


def complete_integral_check(H, cand: HJCandidate, P: Chart | None = None,
                            seed: int = DEFAULT_SEED) -> HJCertificate:
    P = P or cand.Q.cotangent()
    A = cand.all_assumptions
    n = cand.Q.dim
    res = hj_residual(H, cand, P)
    checks = {"residual": is_zero(res, seed=seed, assumptions=A)}
    grad = cand.gradient()
    if cand.parameters:
        M = sp.Matrix(n, len(cand.parameters),
                      lambda a, b: normalize(cand.expand_rules(sp.diff(grad[a], cand.parameters[b]))))
        rank = generic_rank(M, A, seed)
        full = rank.rank == min(M.shape)
        checks["transversality"] = ZeroVerdict("proved_nonzero") if full else ZeroVerdict("proved_zero")
    f = [normalize(p - g) for p, g in zip(P.momenta, grad)]
    subs = dict(zip(P.momenta, grad))
    inv = []
    for i in range(n):
        for j in range(i + 1, n):
            inv.append(cand.expand_rules(geo.canonical_bracket(f[i], f[j], P)))
    checks["involution"] = all_zero(inv, seed=seed, assumptions=A) if inv else PROVED_ZERO
    flow = [cand.expand_rules(substitute(cand.expand_rules(geo.canonical_bracket(fj, H, P)), subs))
            for fj in f]
    checks["tangency"] = all_zero([cand.expand_rules(e) for e in flow], seed=seed, assumptions=A)
    complete = len(cand.parameters) == n
    ok = (checks["residual"].vanishes and checks["involution"].vanishes and checks["tangency"].vanishes
          and checks.get("transversality", ZeroVerdict("proved_nonzero")).nonzero)
    return HJCertificate(complete and ok, not complete and ok, checks, ok)


def characteristics(H, cand: HJCandidate, values: Mapping, P: Chart | None = None,
                    seed: int = DEFAULT_SEED):
    """Base field dq/dt = dH/dp at p = dW and the momentum reconstruction map."""
    P = P or cand.Q.cotangent()
    if not is_zero(hj_residual(H, cand, P), seed=seed, assumptions=cand.all_assumptions).vanishes:
        raise UncertifiedCandidate("W does not solve the HJ equation")
    subs = _momenta_subs(P, cand)
    vals = dict(values)
    comps = [normalize(substitute(substitute(sp.diff(H, p), subs), vals)) for p in P.momenta]
    mom = {p: normalize(substitute(g, vals)) for p, g in subs.items()}
    return VectorField(cand.Q, tuple(comps)), mom


def canonical_lift(X0: VectorField, P: Chart) -> VectorField:
    """X^a d/dq^a - p_b (d_a X^b) d/dp_a."""
    q, p = P.positions, P.momenta
    comps = list(X0.components) + [normalize(-sum(p[b] * sp.diff(X0.components[b], q[a])
                                                   for b in range(len(q))))
                                   for a in range(len(q))]
    return VectorField(P, tuple(comps))


@dataclass
class HJSymmetryCertificate:
    charge: sp.Expr
    field: VectorField
    conserved: ZeroVerdict
    hamiltonian: ZeroVerdict

    @property
    def certified(self) -> bool:
        return self.conserved.vanishes and self.hamiltonian.vanishes

    def to_dict(self):
        return {"charge": to_text(self.charge), "certified": self.certified,
                "conserved": self.conserved.to_dict(), "hamiltonian": self.hamiltonian.to_dict()}


def check_hj_symmetry(H, X0: VectorField, f=0, P: Chart | None = None,
                      seed: int = DEFAULT_SEED) -> HJSymmetryCertificate:
    """F = i_{X0~} theta_Q + f and {F, H} = 0."""
    P = P or X0.chart.cotangent()
    Xt = canonical_lift(X0, P)
    F = normalize(sum(p * c for p, c in zip(P.momenta, X0.components)) + f)
    X = (Xt + geo.canonical_hamiltonian_field(f, P)).normalized()
    A = P.assumptions
    cons = is_zero(geo.canonical_bracket(F, H, P), seed=seed, assumptions=A)
    ham = all_zero((X - geo.canonical_hamiltonian_field(F, P)).components, seed=seed, assumptions=A)
    return HJSymmetryCertificate(F, X, cons, ham)


@dataclass
class GeneralizedHJCertificate:
    lagrangian: bool
    independent: bool
    involution: list
    commutants: list
    certified: bool

    def to_dict(self):
        return {"lagrangian": self.lagrangian, "independent": self.independent,
                "involution": self.involution, "certified": self.certified,
                "commutants": [v.to_dict() for v in self.commutants]}


def generalized_hj_check(H, E, constraints, commutants=(), P: Chart | None = None,
                         seed: int = DEFAULT_SEED) -> GeneralizedHJCertificate:
    """Is {H = E, g_j = a_j} a Lagrangian submanifold, and do the commutants commute with H?"""
    P = P or _cotangent_of(H, constraints)
    A = P.assumptions
    levels = [sp.sympify(H) - E] + [sp.sympify(g) - sp.Symbol(f"a_{j + 1}", real=True)
                                     for j, g in enumerate(constraints)]
    n = P.base.dim
    J = sp.Matrix([[sp.diff(g, x) for x in P.coords] for g in levels])
    independent = generic_rank(J, A, seed).rank == len(levels)
    inv = []
    for i in range(len(levels)):
        for j in range(i + 1, len(levels)):
            b = geo.canonical_bracket(levels[i], levels[j], P)
            inv.append(in_ideal(b, levels, list(P.coords) + [sp.Symbol(f"a_{k + 1}", real=True)
                                                           for k in range(len(constraints))],
                                A, seed).status)
    lag = len(levels) == n and independent and all(s == "member" for s in inv)
    com = [is_zero(geo.canonical_bracket(c, H, P), seed=seed, assumptions=A) for c in commutants]
    return GeneralizedHJCertificate(lag, independent, inv, com, lag and all(v.vanishes for v in com))


def _cotangent_of(H, constraints):
    raise ValueError("a cotangent chart is required")


@dataclass
class Reduction:
    chart: Chart
    cotangent: Chart
    cyclic: sp.Symbol
    k: sp.Symbol
    H_adapted: sp.Expr
    H_reduced: sp.Expr
    old_to_new: dict
    new_to_old: dict
    momenta: dict

    def reduced_candidate(self, Wt, parameters=(), energy=None, assumptions=(), rules=None):
        """HJ candidate for the reduced problem on the remaining coordinates."""
        rest = [c for c in self.chart.coords if c != self.cyclic]
        Qr = Chart(tuple(rest), assumptions=self.chart.assumptions)
        return HJCandidate(Qr, Wt, tuple(parameters), energy, tuple(assumptions), rules or {})

    def recompose(self, Wt):
        """W = a*k + Wt expressed in the original coordinates."""
        return normalize(substitute(self.cyclic * self.k + Wt, self.new_to_old))


def separate_cyclic(H, P: Chart, X0: VectorField, chart: Chart, old_to_new: Mapping,
                    k: sp.Symbol | None = None, new_to_old: Mapping | None = None,
                    seed: int = DEFAULT_SEED) -> Reduction:
    """Reduce H by a cyclic coordinate of an adapted chart.

    ``old_to_new`` gives the original coordinates as functions of the adapted
    ones (x = a + alpha q, ...); the first adapted coordinate is the cyclic one.
    """
    Q = P.base
    old = list(Q.coords)
    new = list(chart.coords)
    X = [sp.sympify(old_to_new[c]) for c in old]
    J = sp.Matrix(len(old), len(new), lambda i, j: sp.diff(X[i], new[j]))
    X0n = J.inv(method="LU") * sp.Matrix([substitute(c, old_to_new) for c in X0.components])
    target = [1] + [0] * (len(new) - 1)
    if not all_zero([a - b for a, b in zip(X0n, target)], seed=seed, assumptions=chart.assumptions).vanishes:
        raise NotAdapted("pushforward of X0 is not the first adapted coordinate field")
    cert = check_hj_symmetry(H, X0, 0, P, seed)
    if not cert.certified:
        raise NotAdapted("X0 is not a symmetry of H")
    Pn = chart.cotangent()
    pn = sp.Matrix(Pn.momenta)
    p_old = (J.T.inv(method="LU") * pn).applyfunc(normalize)
    mom = dict(zip(P.momenta, p_old))
    Hn = normalize(substitute(H, {**{c: X[i] for i, c in enumerate(old)}, **mom}))
    k = k if k is not None else sp.Symbol("k", real=True)
    Hr = normalize(substitute(Hn, {Pn.momenta[0]: k}))
    if Hr.has(new[0]):
        raise NotAdapted("reduced Hamiltonian depends on the cyclic coordinate")
    if new_to_old is None:
        sol = sp.solve([sp.Eq(c, e) for c, e in zip(old, X)], new, dict=True)
        if len(sol) != 1:
            raise NotAdapted("adapted chart map is not invertible in closed form")
        new_to_old = {s: normalize(e) for s, e in sol[0].items()}
    return Reduction(chart, Pn, new[0], k, Hn, Hr, {c: X[i] for i, c in enumerate(old)},
                     dict(new_to_old), mom)


def recomposition_check(H, P: Chart, red: Reduction, Wt, energy, rules=None,
                        seed: int = DEFAULT_SEED) -> ZeroVerdict:
    """Residual of a k + Wt against H equals the reduced residual after the chart change."""
    rules = rules or {}
    W = red.recompose(Wt)
    full = HJCandidate(P.base, W, (), energy, (), rules)
    r_full = substitute(hj_residual(H, full, P), red.old_to_new)
    reduced = red.reduced_candidate(Wt, (), energy, (), rules)
    Pr = reduced.Q.cotangent()
    Hr = red.H_reduced.subs(dict(zip([m for m in red.cotangent.momenta[1:]], Pr.momenta)),
                            simultaneous=True)
    r_red = hj_residual(Hr, reduced, Pr)
    return is_zero(full.expand_rules(r_full) - r_red, seed=seed, assumptions=red.chart.assumptions)
