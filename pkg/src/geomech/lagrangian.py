"""Euler-Lagrange package on a tangent chart.

``build`` computes the Cartan 1-form, the Lagrangian 2-form, the energy and
the Hessian of a Lagrangian, and decides its rank at a generic point.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import sympy as sp

from . import geometry as geo
from ._linalg import RankInfo, generic_rank, kernel_basis
from .geometry import Chart, KForm, VectorField
from .symexpr import DEFAULT_SEED, ZeroVerdict, all_zero, is_zero, normalize


class NotRegular(ValueError):
    pass


class NotFiberSolvable(ValueError):
    pass


@dataclass
class LagrangianSystem:
    Q: Chart
    T: Chart
    L: sp.Expr
    theta: KForm
    omega: KForm
    energy: sp.Expr
    hessian: sp.Matrix
    rank_info: RankInfo
    seed: int = DEFAULT_SEED
    warnings: list = field(default_factory=list)
    _dynamics: VectorField | None = None
    _omega_inverse: sp.Matrix | None = None

    @property
    def N(self) -> int:
        return self.Q.dim

    @property
    def rank(self) -> int:
        return self.rank_info.rank

    @property
    def regular(self) -> bool:
        return self.rank == self.N

    @property
    def q(self):
        return self.T.positions

    @property
    def v(self):
        return self.T.velocities

    @property
    def assumptions(self):
        return self.T.assumptions

    def zero(self, e) -> ZeroVerdict:
        return is_zero(e, seed=self.seed, assumptions=self.assumptions)

    def zeros(self, exprs) -> ZeroVerdict:
        return all_zero(exprs, seed=self.seed, assumptions=self.assumptions)

    @property
    def soldering(self) -> geo.SolderingData:
        return geo.SolderingData(self.T)

    def accelerations(self) -> list:
        """Solve H_ks a^k = dL/dq^s - d2L/dv^s dq^k v^k."""
        if not self.regular:
            raise NotRegular("Lagrangian is singular")
        rhs = sp.Matrix([sp.diff(self.L, qs) - sum(sp.diff(self.L, vs, qk) * vk
                                                  for qk, vk in zip(self.q, self.v))
                         for qs, vs in zip(self.q, self.v)])
        sol = self.hessian.LUsolve(rhs)
        return [normalize(a) for a in sol]

    @property
    def dynamics(self) -> VectorField:
        if self._dynamics is None:
            self._dynamics = geo.second_order_field(self.T, self.accelerations())
        return self._dynamics

    def omega_inverse(self) -> sp.Matrix:
        """Inverse of the coefficient matrix of omega_L (regular case).

        With omega_L = F_ab dq^a^dq^b/2 + H_ab dq^a^dv^b the matrix is
        [[F, H], [-H, 0]] and its inverse is [[0, -H^-1], [H^-1, H^-1 F H^-1]].
        """
        if self._omega_inverse is None:
            if not self.regular:
                raise NotRegular("omega_L is degenerate")
            n = self.N
            W = self.omega.matrix()
            F = W[:n, :n]
            Hinv = self.hessian.inv(method="LU").applyfunc(normalize)
            top = sp.zeros(n, n).row_join(-Hinv)
            bottom = Hinv.row_join((Hinv * F * Hinv).applyfunc(normalize))
            self._omega_inverse = top.col_join(bottom)
        return self._omega_inverse

    def hamiltonian_field(self, f) -> VectorField:
        """X_f with i_{X_f} omega_L = df."""
        return geo.hamiltonian_field(f, self.omega, self.omega_inverse())

    def bracket(self, f, g) -> sp.Expr:
        """Poisson bracket {f, g} = omega_L(X_f, X_g)."""
        Winv = self.omega_inverse()
        df = sp.Matrix([[sp.diff(f, x) for x in self.T.coords]])
        dg = sp.Matrix([sp.diff(g, x) for x in self.T.coords])
        return normalize(-(df * Winv * dg)[0, 0])


def _cartan_form(L, T: Chart) -> KForm:
    return KForm(T, 1, {(a,): sp.diff(L, v) for a, v in enumerate(T.velocities)})


def build(L, Q: Chart, T: Chart | None = None, seed: int = DEFAULT_SEED) -> LagrangianSystem:
    T = T or Q.tangent()
    L = sp.sympify(L)
    theta = _cartan_form(L, T).normalized()
    omega = (-geo._d(theta)).normalized()
    delta = geo.SolderingData(T).liouville
    energy = normalize(delta(L) - L)
    v = T.velocities
    H = sp.Matrix(len(v), len(v), lambda i, j: normalize(sp.diff(L, v[i], v[j])))
    info = generic_rank(H, T.assumptions, seed)
    sys = LagrangianSystem(Q, T, L, theta, omega, energy, H, info, seed)
    sys.warnings.extend(info.warnings)
    return sys


def solve_second_order_field(sys: LagrangianSystem) -> VectorField:
    return sys.dynamics


def euler_lagrange_residual(sys: LagrangianSystem, D: VectorField) -> KForm:
    """L_D theta_L - dL."""
    dL = geo.d_function(sys.T, sys.L)
    return (geo._lie_form(D, sys.theta) - dL).normalized()


def check_euler_lagrange(sys: LagrangianSystem, D: VectorField) -> dict:
    res = euler_lagrange_residual(sys, D)
    verdict = sys.zeros(res.coeffs.values())
    return {"admissible": verdict.proved_zero, "verdict": verdict, "residual": res}


def dynamics_residual(sys: LagrangianSystem, D: VectorField) -> KForm:
    """i_D omega_L - dE_L."""
    return (geo._interior(D, sys.omega) - geo.d_function(sys.T, sys.energy)).normalized()


@dataclass
class LegendreMap:
    momenta: dict
    cotangent: Chart
    velocities: dict | None = None
    hamiltonian: sp.Expr | None = None
    pullback_check: ZeroVerdict | None = None
    solvable: bool = False


def _quadratic_in(L, v) -> bool:
    try:
        poly = sp.Poly(sp.expand(L), *v)
    except sp.PolynomialError:
        return False
    if not all(c.free_symbols.isdisjoint(v) for c in poly.coeffs()):
        return False
    return poly.total_degree() <= 2


def legendre(sys: LagrangianSystem, P: Chart | None = None) -> LegendreMap:
    """Fiber derivative p_a = dL/dv^a, inverted when L is quadratic and regular."""
    P = P or sys.Q.cotangent()
    p = P.momenta
    mom = {pa: sys.theta.coeffs.get((a,), sp.S.Zero) for a, pa in enumerate(p)}
    out = LegendreMap(mom, P)
    if not sys.regular or not _quadratic_in(sys.L, sys.v):
        return out
    rhs = sp.Matrix([pa - mom[pa].subs({v: 0 for v in sys.v}) for pa in p])
    vel = sys.hessian.LUsolve(rhs)
    out.velocities = {v: normalize(e) for v, e in zip(sys.v, vel)}
    out.hamiltonian = normalize(sys.energy.subs(out.velocities, simultaneous=True))
    mapping = {**{q: q for q in sys.q}, **{pa: mom[pa] for pa in p}}
    pulled = geo.pullback(geo.canonical_form(P), sys.T, mapping)
    out.pullback_check = sys.zeros((pulled - sys.omega).coeffs.values())
    out.solvable = True
    return out


def classify_null(L, Q: Chart, T: Chart | None = None, seed: int = DEFAULT_SEED) -> dict:
    """Split L into a pure potential, a gauge term and a residual by v-degree."""
    T = T or Q.tangent()
    L = sp.sympify(L)
    zero_v = {v: 0 for v in T.velocities}
    f = normalize(L.subs(zero_v))
    alpha = KForm(Q, 1, {(a,): normalize(sp.diff(L, v).subs(zero_v))
                         for a, v in enumerate(T.velocities)})
    gauge = sum((alpha.coeffs.get((a,), 0) * v for a, v in enumerate(T.velocities)), sp.S.Zero)
    residual = normalize(L - f - gauge)
    d_alpha = geo.exterior_derivative(alpha) if Q.dim >= 2 else None
    closed = all_zero(d_alpha.coeffs.values(), seed=seed) if d_alpha is not None else ZeroVerdict("proved_zero")
    sys = build(L, Q, T, seed)
    null = sys.zeros(sys.omega.coeffs.values())
    return {"pure_potential": f, "gauge": alpha, "alpha_closed": closed,
            "residual": residual, "residual_verdict": is_zero(residual, seed=seed),
            "null": null}


def vertical_kernel(sys: LagrangianSystem) -> list[VectorField]:
    """Basis of A^j d/dv^j with A^j H_js = 0."""
    ks = kernel_basis(sys.hessian, sys.rank_info, sys.assumptions, sys.seed)
    n = sys.N
    return [VectorField(sys.T, (sp.S.Zero,) * n + tuple(k)) for k in ks]
