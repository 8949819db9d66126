"""Noether certification for Lagrangian dynamics.

A candidate symmetry is a vector field with a gauge function u.  The
certificate records each defining residual with its zero-test verdict, so a
failed certificate says which relation broke.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass

import numpy as np
import sympy as sp

from . import geometry as geo
from .geometry import BASE, VectorField
from .implicit import in_ideal
from .lagrangian import LagrangianSystem, NotRegular
from .symexpr import (NumericDomainError, PROVED_ZERO, ZeroVerdict, _random_rational,
                      _real, compile_expr, instantiate_functions, normalize, rationalize)

KINDS = ("newtonian", "general", "newtonoid")
CERTIFIED = "certified"
MODULO_SAMPLING = "certified_modulo_sampling"
NOT_CERTIFIED = "not_certified"


class NotInvariant(ValueError):
    pass


class LedgerMissing(ValueError):
    pass


@dataclass(frozen=True)
class SymmetryCandidate:
    X: VectorField
    u: sp.Expr = sp.S.Zero
    kind: str = "newtonian"
    name: str = ""
    checks: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown symmetry kind {self.kind!r}")
        object.__setattr__(self, "u", sp.sympify(self.u))
        if self.kind == "newtonian" and self.X.chart.role != BASE:
            raise ValueError("a Newtonian candidate is a vector field on Q")


@dataclass(frozen=True)
class NoetherCertificate:
    verdict: str
    charge: sp.Expr
    checks: tuple  # ((name, ZeroVerdict), ...)
    mandatory: tuple
    field: VectorField
    gauge: sp.Expr = sp.S.Zero
    diagnosis: tuple = ()
    name: str = ""

    @property
    def check_map(self) -> dict:
        return dict(self.checks)

    @property
    def failing(self) -> list:
        return [n for n, v in self.checks if n in self.mandatory and v.nonzero]

    @property
    def certified(self) -> bool:
        return self.verdict == CERTIFIED

    def to_dict(self):
        from .symexpr import to_text
        return {
            "name": self.name,
            "verdict": self.verdict,
            "charge": to_text(self.charge),
            "gauge": to_text(self.gauge),
            "checks": {n: v.to_dict() for n, v in self.checks},
            "mandatory": list(self.mandatory),
            "failing": self.failing,
            "diagnosis": list(self.diagnosis),
        }


def _verdict(checks, mandatory) -> str:
    vs = [v for n, v in checks if n in mandatory]
    if any(v.nonzero for v in vs):
        return NOT_CERTIFIED
    if all(v.proved_zero for v in vs):
        return CERTIFIED
    return MODULO_SAMPLING


def _components(obj) -> list:
    if isinstance(obj, VectorField):
        return list(obj.components)
    if isinstance(obj, geo.KForm):
        return list(obj.coeffs.values())
    return [obj]


def _require_regular(sys: LagrangianSystem):
    if not sys.regular:
        raise NotRegular("Noether certification on TQ needs a regular Lagrangian")


def _charge_checks(sys: LagrangianSystem, X: VectorField, phi, D: VectorField):
    """Hamiltonicity, commutator, energy invariance and conservation."""
    iw = geo._interior(X, sys.omega)
    ham = (iw - geo.d_function(sys.T, phi)).normalized()
    return [
        ("hamiltonicity", sys.zeros(_components(ham))),
        ("commutator", sys.zeros(X.bracket(D).components)),
        ("energy_invariance", sys.zero(X(sys.energy))),
        ("conservation", sys.zero(D(phi))),
    ], iw


def _diagnose(sys, checks, phi, iw) -> list:
    out = []
    status = dict(checks)
    if normalize(phi) == 0:
        out.append("degenerate charge: phi vanishes identically")
    if "lagrangian_condition" in status and status["lagrangian_condition"].nonzero:
        out.append("X is not a symmetry of the Lagrangian for this gauge")
    if status["hamiltonicity"].nonzero:
        closed = sys.zeros(_components(geo._d(iw)))
        if closed.nonzero:
            out.append("i_X omega_L is not closed, hence not exact")
        else:
            out.append("i_X omega_L is closed but differs from d phi")
    if "gauge_basic" in status and status["gauge_basic"].nonzero:
        out.append("gauge u depends on the velocities")
    return out


def check_newtonian(sys: LagrangianSystem, c: SymmetryCandidate) -> NoetherCertificate:
    """Point symmetry test L_{X^(N)} L = L_D u and the charge it yields."""
    _require_regular(sys)
    D = sys.dynamics
    X = c.X if c.X.chart.role != BASE else geo.tangent_lift(c.X, sys.T)
    u = c.u
    checks = []
    mandatory = ["lagrangian_condition", "hamiltonicity", "commutator",
                 "energy_invariance", "conservation"]
    if c.kind == "newtonian":
        checks.append(("gauge_basic", sys.zeros([sp.diff(u, v) for v in sys.v])))
        mandatory.insert(0, "gauge_basic")
    checks.append(("lagrangian_condition", sys.zero(X(sys.L) - D(u))))
    phi = normalize(geo._interior(X, sys.theta).scalar - u)
    more, iw = _charge_checks(sys, X, phi, D)
    checks.extend(more)
    return NoetherCertificate(_verdict(checks, mandatory), phi, tuple(checks), tuple(mandatory),
                              X, u, tuple(_diagnose(sys, checks, phi, iw)), c.name)


def newtonoid_projection(X: VectorField, D: VectorField) -> VectorField:
    """X^(D) = X + S([D, X])."""
    S = geo.SolderingData(D.chart)
    return (X + S(D.bracket(X))).normalized()


def _on_tangent(sys, X: VectorField) -> VectorField:
    return geo.tangent_lift(X, sys.T) if X.chart.role == BASE else X


def check_newtonoid(sys: LagrangianSystem, c: SymmetryCandidate) -> NoetherCertificate:
    """Both lines of the Newtonoid symmetry condition, then the charge."""
    _require_regular(sys)
    D = sys.dynamics
    X = _on_tangent(sys, c.X)
    u = c.u
    S = sys.soldering
    G = geo.generic_second_order(sys.T, prefix="_acc_")
    XG = newtonoid_projection(X, G)
    XD = newtonoid_projection(X, D)
    vertical = [sp.diff(u, v) - S(VectorField.coordinate(sys.T, sys.N + a).bracket(XD))(sys.L)
                for a, v in enumerate(sys.v)]
    checks = [
        ("lagrangian_condition", sys.zero(XG(sys.L) - G(u))),
        ("vertical_condition", sys.zeros(vertical)),
    ]
    phi = normalize(geo._interior(XD, sys.theta).scalar - u)
    more, iw = _charge_checks(sys, XD, phi, D)
    checks.extend(more)
    mandatory = tuple(n for n, _ in checks)
    return NoetherCertificate(_verdict(checks, mandatory), phi, tuple(checks), mandatory,
                              XD, u, tuple(_diagnose(sys, checks, phi, iw)), c.name)


def inverse_noether(sys: LagrangianSystem, phi, name: str = "") -> SymmetryCandidate:
    """The omega_L-Hamiltonian field of a constant of the motion and its gauge."""
    _require_regular(sys)
    D = sys.dynamics
    phi = normalize(phi)
    inv = sys.zero(D(phi))
    if not inv.vanishes:
        raise NotInvariant(f"L_D phi does not vanish: {inv.status}")
    X = sys.hamiltonian_field(phi)
    u = normalize(geo._interior(X, sys.theta).scalar - phi)
    du = geo.d_function(sys.T, u)
    checks = (
        ("invariance", inv),
        ("lagrangian_condition", sys.zero(X(sys.L) - D(u))),
        ("commutator", sys.zeros(X.bracket(D).components)),
        ("gauge_exactness", sys.zeros(_components((du - geo._lie_form(X, sys.theta)).normalized()))),
    )
    return SymmetryCandidate(X, u, "newtonoid", name, checks)


# ---------------------------------------------------------------------------
# Lie algebra of charges


@dataclass(frozen=True)
class ClosureTable:
    charges: tuple
    brackets: sp.Matrix  # entry (a, b) is {phi_a, phi_b}
    identities: tuple  # ((a, b, ZeroVerdict), ...)
    structure_constants: tuple | None  # c[a][b][k] with {phi_a, phi_b} = c_ab^k phi_k (+ central)
    central: tuple | None = None

    @property
    def closes(self) -> bool:
        return self.structure_constants is not None

    @property
    def identities_hold(self) -> bool:
        return all(v.proved_zero for *_, v in self.identities)

    def to_dict(self):
        from .symexpr import to_text
        d = {"charges": [to_text(c) for c in self.charges],
             "brackets": [[to_text(e) for e in row] for row in self.brackets.tolist()],
             "identities": [{"a": a, "b": b, **v.to_dict()} for a, b, v in self.identities],
             "closes": self.closes}
        if self.closes:
            d["structure_constants"] = [[[str(x) for x in row] for row in plane]
                                        for plane in self.structure_constants]
            d["central"] = [[str(x) for x in row] for row in self.central]
        return d


def fit_linear(target, basis, assumptions=(), seed: int = 0, constant: bool = True):
    """Exact rational coefficients with target = sum c_k basis_k (+ c_0), or None."""
    funcs = list(basis) + ([sp.S.One] if constant else [])
    rng = random.Random(seed)
    exprs = instantiate_functions([sp.sympify(target)] + [sp.sympify(b) for b in funcs]
                                  + [a.expr for a in assumptions], rng)
    variables = sorted(set().union(set(), *(e.free_symbols for e in exprs)), key=str)
    comp = [compile_expr(e, variables) for e in exprs]
    na, nb = len(assumptions), len(funcs)
    rows, rhs = [], []
    tries = 0
    while len(rows) < nb + 6 and tries < 200 * (nb + 6):
        tries += 1
        x = [float(_random_rational(rng, bool(v.is_positive))) for v in variables]
        try:
            vals = [_real(c(x)) for c in comp]
        except (ZeroDivisionError, NumericDomainError, OverflowError, ValueError):
            continue
        if na and not all(a.holds(v) for a, v in zip(assumptions, vals[len(vals) - na:])):
            continue
        vals = vals[: 1 + nb]
        if not np.all(np.isfinite(vals)):
            continue
        rhs.append(vals[0])
        rows.append(vals[1:])
    if len(rows) < nb:
        return None
    A, b = np.array(rows, dtype=float), np.array(rhs, dtype=float)
    coef, *_ = np.linalg.lstsq(A, b, rcond=None)
    coeffs = [rationalize(c, 10**4) for c in coef]
    resid = normalize(sp.sympify(target) - sum((c * f for c, f in zip(coeffs, funcs)), sp.S.Zero))
    if resid != 0:
        return None
    return coeffs


def bracket_closure(sys: LagrangianSystem, certs) -> ClosureTable:
    """Pairwise charge brackets and the identity i_[Xa,Xb] omega_L = d{phi_b, phi_a}."""
    _require_regular(sys)
    phis = [c.charge for c in certs]
    fields = [c.field for c in certs]
    k = len(phis)
    B = sp.zeros(k, k)
    idents = []
    for a in range(k):
        for b in range(a + 1, k):
            B[a, b] = sys.bracket(phis[a], phis[b])
            B[b, a] = normalize(-B[a, b])
    for a in range(k):
        for b in range(a + 1, k):
            lhs = geo._interior(fields[a].bracket(fields[b]), sys.omega)
            rhs = geo.d_function(sys.T, B[b, a])
            idents.append((a, b, sys.zeros(_components((lhs - rhs).normalized()))))
    consts = [[[sp.S.Zero] * k for _ in range(k)] for _ in range(k)]
    central = [[sp.S.Zero] * k for _ in range(k)]
    closes = True
    for a in range(k):
        for b in range(a + 1, k):
            if B[a, b] == 0:
                continue
            fit = fit_linear(B[a, b], phis, sys.assumptions, sys.seed)
            if fit is None:
                closes = False
                break
            for j in range(k):
                consts[a][b][j] = fit[j]
                consts[b][a][j] = -fit[j]
            central[a][b], central[b][a] = fit[k], -fit[k]
        if not closes:
            break
    if not closes:
        return ClosureTable(tuple(phis), B, tuple(idents), None, None)
    return ClosureTable(tuple(phis), B, tuple(idents),
                        tuple(tuple(tuple(r) for r in plane) for plane in consts),
                        tuple(tuple(r) for r in central))


def find_gauge(sys: LagrangianSystem, X: VectorField, degree: int = 2):
    """Search u polynomial in the velocities with L_X L = L_D u (regular case).

    Coefficients are unknown functions of nothing (pure numbers) times
    monomials in (q, v) up to ``degree``; returns u or None.
    """
    X = _on_tangent(sys, X)
    D = sys.dynamics
    coords = list(sys.T.coords)
    monos = [sp.S.One]
    for d in range(1, degree + 1):
        monos.extend(sp.Mul(*c) for c in itertools.combinations_with_replacement(coords, d))
    target = normalize(X(sys.L))
    basis = [normalize(D(m)) for m in monos]
    fit = fit_linear(target, basis, sys.assumptions, sys.seed, constant=False)
    if fit is None:
        return None
    return normalize(sum((c * m for c, m in zip(fit, monos)), sp.S.Zero))


# ---------------------------------------------------------------------------
# singular Lagrangians


def check_singular_noether(ledger, c: SymmetryCandidate) -> NoetherCertificate:
    """Noether test for a singular Lagrangian against a constraint ledger.

    The symmetry condition is required for a second-order field with free
    acceleration symbols; the charge relations are then checked on the final
    constraint manifold for the ledger's solution family.
    """
    if ledger is None or getattr(ledger, "second_order", None) is None:
        raise LedgerMissing("a constraint ledger with a second-order solution family is required")
    sys = ledger.system
    X = _on_tangent(sys, c.X)
    u = c.u
    G = geo.generic_second_order(sys.T, prefix="_acc_")
    XG = newtonoid_projection(X, G)
    D = ledger.second_order
    XD = newtonoid_projection(X, D)
    F = normalize(geo._interior(XG, sys.theta).scalar - u)
    gens = list(ledger.final_constraints)
    assumptions = sys.assumptions

    def weak(exprs):
        worst = PROVED_ZERO
        for e in exprs:
            e = normalize(e)
            if e == 0:
                continue
            if gens:
                iv = in_ideal(e, gens, None, assumptions, sys.seed)
                v = {"member": PROVED_ZERO, "probable_member": ZeroVerdict("probably_zero")}.get(
                    iv.status, ZeroVerdict("proved_nonzero", tuple((k, str(x)) for k, x in (iv.witness or {}).items())))
            else:
                v = sys.zero(e)
            if v.nonzero:
                return v
            if not v.proved_zero:
                worst = v
        return worst

    iw = geo._interior(XD, sys.omega)
    checks = [
        ("lagrangian_condition", sys.zero(XG(sys.L) - G(u))),
        ("charge_independent_of_gamma", sys.zeros([sp.diff(F, a) for a in G.components[sys.N:]])),
        ("kernel_invariance", weak([K(F) for K in ledger.vertical_symmetries])),
        ("hamiltonicity", weak(_components((iw - geo.d_function(sys.T, F)).normalized()))),
        ("energy_invariance", weak([XD(sys.energy)])),
        ("charge_invariance", weak([XD(F)])),
        ("conservation", weak([D(F)])),
    ]
    mandatory = tuple(n for n, _ in checks)
    return NoetherCertificate(_verdict(checks, mandatory), F, tuple(checks), mandatory,
                              XD, u, tuple(_diagnose(sys, checks, F, iw)), c.name)
