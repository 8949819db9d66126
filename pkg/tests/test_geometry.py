import pytest
import sympy as sp

from geomech import geometry as geo
from geomech.geometry import Chart, ChartMismatch, DegenerateForm, KForm, VectorField


@pytest.fixture(scope="module")
def R2():
    Q = Chart.from_names(["q1", "q2"])
    return Q, Q.tangent(), Q.cotangent()


def test_derived_names():
    Q = Chart.from_names(["x", "q", "th"])
    assert [str(c) for c in Q.tangent().velocities] == ["vx", "v", "vth"]
    assert [str(c) for c in Q.cotangent().momenta] == ["px", "p", "pth"]


def test_chart_collisions_rejected():
    with pytest.raises(ValueError):
        Chart.from_names(["x", "x"])


def test_bracket_of_rotations():
    Q = Chart.from_names(["q1", "q2", "q3"])
    q = Q.coords
    eps = sp.LeviCivita
    X = [VectorField(Q, tuple(sum(eps(j, a, b) * q[a] for a in range(3)) for b in range(3)))
         for j in range(3)]
    # [X, Y] = XY - YX gives the opposite sign of the structure constants
    assert X[0].bracket(X[1]).normalized().components == (-X[2]).components


def test_chart_mismatch(R2):
    Q, T, _ = R2
    with pytest.raises(ChartMismatch):
        VectorField.coordinate(Q, 0) + VectorField.coordinate(T, 0)


def test_wedge_and_interior(R2):
    Q, _, _ = R2
    dq1, dq2 = KForm.dx(Q, Q.coords[0]), KForm.dx(Q, Q.coords[1])
    w = geo.wedge(dq1, dq2)
    assert w.coeffs == {(0, 1): 1}
    assert geo.wedge(dq2, dq1).coeffs == {(0, 1): -1}
    X = VectorField(Q, (1, 0))
    assert geo.interior(X, w).vector() == [0, 1]


def test_canonical_hamiltonian_field(R2):
    _, _, P = R2
    q1, q2, p1, p2 = P.coords
    H = (p1**2 + p2**2 + q1**2 + q2**2) / 2
    X = geo.canonical_hamiltonian_field(H, P)
    assert X.components == (p1, p2, -q1, -q2)
    w = geo.canonical_form(P)
    Y = geo.hamiltonian_field(H, w)
    assert Y.components == X.components
    assert geo.interior(X, w).normalized().coeffs == geo.d_function(P, H).coeffs


def test_poisson_bracket_sign(R2):
    _, _, P = R2
    q1, q2, p1, p2 = P.coords
    assert geo.canonical_bracket(q1, p1, P) == 1
    w = KForm(P, 2, {(0, 2): 2, (1, 3): 1})
    assert geo.poisson_bracket(q1, p1, w) == sp.Rational(1, 2)


def test_degenerate_form_detected(R2):
    _, T, _ = R2
    w = KForm(T, 2, {(0, 2): 1})
    with pytest.raises(DegenerateForm):
        geo.poisson_bracket(T.coords[0], T.coords[1], w)


def test_tangent_lift(R2):
    Q, T, _ = R2
    q1, q2, v1, v2 = T.coords
    X = VectorField(Q, (Q.coords[1], -Q.coords[0]))
    assert geo.tangent_lift(X, T).components == (q2, -q1, v2, -v1)


def test_dN_of_function_is_total_derivative(R2):
    Q, T, _ = R2
    q1, q2 = Q.coords
    f = q1**2 * q2
    w = geo.dN(KForm.function(Q, f), T)
    assert sp.expand(w.scalar - geo.total_field(T)(f)) == 0


def test_lift_symplectic_of_dq_wedge(R2):
    Q, T, _ = R2
    w = geo.wedge(KForm.dx(Q, Q.coords[0]), KForm.dx(Q, Q.coords[1]))
    lifted = geo.lift_symplectic(w, T)
    assert lifted.degree == 2
    assert lifted.coeffs == {(0, 3): 1, (1, 2): -1}


def test_pullback_of_dx_along_polar():
    P = Chart.from_names(["r", "th"], positive=["r"])
    C = Chart.from_names(["x", "y"])
    r, th = P.coords
    w = KForm.dx(C, C.coords[0])
    pb = geo.pullback(w, P, {C.coords[0]: r * sp.cos(th), C.coords[1]: r * sp.sin(th)})
    assert pb.vector() == [sp.cos(th), -r * sp.sin(th)]


def test_soldering_liouville(R2):
    _, T, _ = R2
    S = geo.SolderingData(T)
    assert S(S.liouville).components == (0, 0, 0, 0)
    D = geo.generic_second_order(T)
    assert (S(D) - S.liouville).normalized().components == (0, 0, 0, 0)
    assert S.matrix() ** 2 == sp.zeros(4, 4)


def test_liouville_one_form(R2):
    _, _, P = R2
    theta = geo.liouville_one_form(P)
    assert (geo.exterior_derivative(theta) + geo.canonical_form(P)).normalized().coeffs == {}
