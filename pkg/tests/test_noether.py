import pytest
import sympy as sp

from geomech import constraints as cs
from geomech import geometry as geo
from geomech import lagrangian as lg
from geomech import noether as nt
from geomech.geometry import Chart, VectorField
from geomech.symexpr import Assumption, is_zero, symbol


@pytest.fixture(scope="module")
def osc():
    Q = Chart.from_names(["q1", "q2"])
    T = Q.tangent()
    q1, q2, v1, v2 = T.coords
    return (Q, T, lg.build((v1**2 + v2**2 - q1**2 - q2**2) / 2, Q, T),
            lg.build(v1 * v2 - q1 * q2, Q, T))


def test_radial_rotation_charge():
    Q = Chart.from_names(["x", "y"])
    T = Q.tangent()
    x, y, vx, vy = T.coords
    V = sp.Function("V", real=True)
    s = lg.build((vx**2 + vy**2) / 2 - V(sp.sqrt(x**2 + y**2)), Q, T)
    c = nt.check_newtonian(s, nt.SymmetryCandidate(VectorField(Q, (y, -x))))
    assert c.certified
    assert sp.expand(c.charge - (y * vx - x * vy)) == 0
    assert all(v.proved_zero for _, v in c.checks)


def test_squeezing_fails_for_first_lagrangian(osc):
    Q, T, L, _ = osc
    q1, q2, v1, v2 = T.coords
    X = VectorField(Q, (q1, -q2))
    c = nt.check_newtonian(L, nt.SymmetryCandidate(X, q1 * v1 - q2 * v2))
    assert c.verdict == nt.NOT_CERTIFIED
    assert c.charge == 0
    assert "hamiltonicity" in c.failing
    # d(i_X omega_L) != 0: the squeezing is not omega_L-Hamiltonian
    XN = geo.tangent_lift(X, T)
    dI = geo.exterior_derivative(geo.interior(XN, L.omega))
    assert dI.zero_verdict().nonzero
    # L_X theta_L = 2(v1 dq1 - v2 dq2)
    lt = geo.lie_derivative(XN, L.theta)
    assert lt.vector() == [2 * v1, -2 * v2, 0, 0]


def test_squeezing_certified_for_alternative_lagrangian(osc):
    Q, T, _, L2 = osc
    q1, q2, v1, v2 = T.coords
    c = nt.check_newtonian(L2, nt.SymmetryCandidate(VectorField(Q, (q1, -q2))))
    assert c.certified
    assert sp.expand(c.charge - (v2 * q1 - v1 * q2)) == 0


def test_newtonian_requires_base_field(osc):
    _, T, L, _ = osc
    with pytest.raises(ValueError):
        nt.SymmetryCandidate(VectorField.coordinate(T, 0), kind="newtonian")


@pytest.mark.parametrize("phi", ["v1*v2 + q1*q2", "(v1**2 - v2**2 + q1**2 - q2**2)/2"])
def test_newtonoid_round_trip(osc, phi):
    _, T, L, _ = osc
    f = sp.sympify(phi, locals={str(c): c for c in T.coords})
    cand = nt.inverse_noether(L, f)
    assert cand.kind == "newtonoid"
    cert = nt.check_newtonoid(L, cand)
    assert cert.certified
    assert is_zero(cert.charge - f).proved_zero


def test_sign_flipped_second_newtonoid_charge_is_not_invariant(osc):
    _, T, L, _ = osc
    q1, q2, v1, v2 = T.coords
    with pytest.raises(nt.NotInvariant):
        nt.inverse_noether(L, (v1**2 - v2**2 - q1**2 + q2**2) / 2)


def test_newtonoid_projection_is_newtonoid(osc):
    _, T, L, _ = osc
    D = L.dynamics
    X = nt.newtonoid_projection(VectorField.coordinate(T, 2), D)
    S = L.soldering
    assert S(X.bracket(D)).normalized().components == (0,) * 4


def test_angular_momentum_closure():
    Q = Chart.from_names(["q1", "q2", "q3"])
    T = Q.tangent()
    q, v = Q.coords, T.velocities
    s = lg.build(sum(a**2 - b**2 for a, b in zip(v, q)) / 2, Q, T)
    eps = sp.LeviCivita
    certs = [nt.check_newtonian(s, nt.SymmetryCandidate(
        VectorField(Q, tuple(sum(eps(j, a, b) * q[a] for a in range(3)) for b in range(3)))))
        for j in range(3)]
    assert all(c.certified for c in certs)
    tab = nt.bracket_closure(s, certs)
    assert tab.closes and tab.identities_hold
    for a in range(3):
        for b in range(3):
            for c in range(3):
                assert tab.structure_constants[a][b][c] == eps(a, b, c)


def test_fit_linear():
    x, y = sp.symbols("x y", real=True)
    assert nt.fit_linear(3 * x - y + 2, [x, y]) == [3, -1, 2]
    assert nt.fit_linear(x * y, [x, y]) is None


def test_gauge_search_for_squeezing(osc):
    Q, T, L, _ = osc
    q1, q2, v1, v2 = T.coords
    X = VectorField(Q, (q1, -q2))
    u = nt.find_gauge(L, X)
    assert u is not None
    XN = geo.tangent_lift(X, T)
    assert is_zero(XN(L.L) - L.dynamics(u)).proved_zero
    # the expected gauge q1 v1 - q2 v2 differs from the found one by a constant of motion
    assert is_zero(L.dynamics(u - (q1 * v1 - q2 * v2))).proved_zero


def test_kepler_runge_lenz_both_signs():
    Q = Chart.from_names(["x", "y"], assumptions=())
    T = Q.tangent()
    x, y, vx, vy = T.coords
    r = sp.sqrt(x**2 + y**2)
    Tn = Chart(T.coords, T.role, T.base, (Assumption(x**2 + y**2, "positive"),))
    for c in (1, -1):
        s = lg.build((vx**2 + vy**2) / 2 + c / r, Q, Tn)
        Rx = ((vx**2 + vy**2) - c / r) * x - (x * vx + y * vy) * vx
        cert = nt.check_newtonoid(s, nt.inverse_noether(s, Rx))
        assert cert.certified


@pytest.fixture(scope="module")
def monopole_ledger():
    Q = Chart.from_names(["r", "th", "ph", "ps"], positive=["r"])
    r, th, ph, ps = Q.coords
    Q = Chart(Q.coords, assumptions=(Assumption(sp.sin(th), "nonzero"),))
    T = Q.tangent()
    lam = symbol("lam")
    vr, vth, vph, vps = T.velocities
    L = (vr**2 + r**2 * vth**2 + r**2 * sp.sin(th)**2 * vph**2) / 2 + lam * (vps + sp.cos(th) * vph)
    return cs.analyze(lg.build(L, Q, T)), lam


def _cartesian_J(T, lam):
    r, th, ph, ps, vr, vth, vph, vps = T.coords
    X = [r * sp.sin(th) * sp.cos(ph), r * sp.sin(th) * sp.sin(ph), r * sp.cos(th)]
    V = [sum(sp.diff(Xi, c) * w for c, w in zip(T.coords[:4], T.velocities)) for Xi in X]
    eps = sp.LeviCivita
    return [sum(eps(a, b, c) * X[b] * V[c] for b in range(3) for c in range(3)) + lam * X[a] / r
            for a in range(3)]


def test_singular_noether_monopole_rotations(monopole_ledger):
    led, lam = monopole_ledger
    Q, T = led.system.Q, led.system.T
    r, th, ph, ps = Q.coords
    J = _cartesian_J(T, lam)
    Xz = VectorField(Q, (0, 0, 1, 0))
    Xx = VectorField(Q, (0, -sp.sin(ph), -sp.cos(th) * sp.cos(ph) / sp.sin(th), sp.cos(ph) / sp.sin(th)))
    for X, Jc in ((Xz, J[2]), (Xx, J[0])):
        cert = nt.check_singular_noether(led, nt.SymmetryCandidate(X))
        assert cert.certified
        assert is_zero(cert.charge - Jc, assumptions=T.assumptions).vanishes


def test_singular_noether_needs_ledger(monopole_ledger):
    led, _ = monopole_ledger
    with pytest.raises(nt.LedgerMissing):
        nt.check_singular_noether(None, nt.SymmetryCandidate(VectorField(led.system.Q, (0, 0, 1, 0))))
