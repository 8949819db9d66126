import pytest
import sympy as sp

from geomech import hamjac as hj
from geomech.geometry import Chart, VectorField
from geomech.symexpr import Assumption, is_zero, symbol

V = sp.Function("V", real=True)
Wt = sp.Function("Wt", real=True)


@pytest.fixture(scope="module")
def plane():
    Q = Chart.from_names(["x", "y"])
    P = Q.cotangent()
    return Q, P


def _oscillator():
    Q = Chart.from_names(["q"])
    P = Q.cotangent()
    q, p = P.coords
    E = symbol("E", positive=True)
    return Q, P, q, p, E, (q**2 + p**2) / 2


def test_oscillator_complete_integral():
    Q, P, q, p, E, H = _oscillator()
    W = E * sp.asin(q / sp.sqrt(2 * E)) + q * sp.sqrt(2 * E - q**2) / 2
    # independent oracle: direct differentiation and simplification
    assert sp.simplify((sp.diff(W, q)**2 + q**2) / 2 - E) == 0
    cand = hj.HJCandidate(Q, W, (E,), E, (Assumption(2 * E - q**2, "positive"),))
    cert = hj.complete_integral_check(H, cand, P)
    assert cert.complete and cert.certified
    assert cert.checks["residual"].proved_zero
    base, mom = hj.characteristics(H, cand, {E: 1}, P)
    assert is_zero(base.components[0] - sp.sqrt(2 - q**2)).vanishes


def test_oscillator_without_half_factor_is_not_a_solution():
    Q, P, q, p, E, H = _oscillator()
    W = E * sp.asin(q / sp.sqrt(2 * E)) + q * sp.sqrt(2 * E - q**2)
    assert sp.simplify((sp.diff(W, q)**2 + q**2) / 2 - E) != 0
    cand = hj.HJCandidate(Q, W, (E,), E, (Assumption(2 * E - q**2, "positive"),))
    assert hj.complete_integral_check(H, cand, P).checks["residual"].nonzero
    with pytest.raises(hj.UncertifiedCandidate):
        hj.characteristics(H, cand, {E: 1}, P)


def test_cyclic_coordinate_complete_integral(plane):
    Q, P = plane
    x, y, px, py = P.coords
    k, E = symbol("k"), symbol("E")
    H = (px**2 + py**2) / 2 + V(x)
    rad = 2 * (E - V(x)) - k**2
    cand = hj.HJCandidate(Q, k * y + Wt(x), (k, E), E, (Assumption(rad, "positive"),),
                          {Wt: lambda s: sp.sqrt(2 * (E - V(s)) - k**2)})
    cert = hj.complete_integral_check(H, cand, P)
    assert cert.complete and cert.certified
    base, mom = hj.characteristics(H, cand, {}, P)
    assert base.components[1] == k
    assert mom[py] == k


def test_partial_integral_is_flagged(plane):
    Q, P = plane
    x, y, px, py = P.coords
    H = (px**2 + py**2) / 2
    k = symbol("k")
    cand = hj.HJCandidate(Q, k * x + k * y, (k,), k**2)
    cert = hj.complete_integral_check(H, cand, P)
    assert cert.partial and not cert.complete


def test_translation_symmetry_and_reduction(plane):
    Q, P = plane
    x, y, px, py = P.coords
    k, E = symbol("k"), symbol("E")
    H = (px**2 + py**2) / 2 + V(x - y)
    X0 = VectorField(Q, (1, 1))
    cert = hj.check_hj_symmetry(H, X0, 0, P)
    assert cert.certified and cert.charge == px + py
    C = Chart.from_names(["a", "q"])
    a, q = C.coords
    red = hj.separate_cyclic(H, P, X0, C, {x: a + q, y: a - q}, k)
    pa, pq = red.cotangent.momenta
    assert is_zero(red.H_adapted - (((pq + pa)**2 / 4 + (pq - pa)**2 / 4) / 2 + V(2 * q))).proved_zero
    assert is_zero(red.H_reduced - (((pq + k)**2 / 4 + (pq - k)**2 / 4) / 2 + V(2 * q))).proved_zero
    assert hj.recomposition_check(H, P, red, Wt(q), E).proved_zero
    assert sp.simplify(red.recompose(Wt(q)) - (k * (x + y) / 2 + Wt((x - y) / 2))) == 0


def test_general_adapted_chart_family(plane):
    Q, P = plane
    x, y, px, py = P.coords
    k, E = symbol("k"), symbol("E")
    al, be = symbol("alpha"), symbol("beta")
    H = (px**2 + py**2) / 2 + V(x - y)
    C = Chart(Chart.from_names(["a", "q"]).coords, assumptions=(Assumption(be - al, "nonzero"),))
    a, q = C.coords
    red = hj.separate_cyclic(H, P, VectorField(Q, (1, 1)), C, {x: a + al * q, y: a + be * q}, k)
    p = red.cotangent.momenta[1]
    family = (((be * k - p) / (be - al))**2 + ((p - al * k) / (be - al))**2) / 2
    assert is_zero(red.H_reduced - family - V((al - be) * q), assumptions=C.assumptions).proved_zero
    assert hj.recomposition_check(H, P, red, Wt(q), E).proved_zero


def test_random_linear_adapted_charts(plane, rng):
    Q, P = plane
    x, y, px, py = P.coords
    k, E = symbol("k"), symbol("E")
    H = (px**2 + py**2) / 2 + V(x - y)
    C = Chart.from_names(["a", "q"])
    a, q = C.coords
    for _ in range(5):
        al, be = rng.sample(range(-6, 7), 2)
        red = hj.separate_cyclic(H, P, VectorField(Q, (1, 1)), C, {x: a + al * q, y: a + be * q}, k)
        assert hj.recomposition_check(H, P, red, Wt(q), E).proved_zero


def test_non_adapted_chart_rejected(plane):
    Q, P = plane
    x, y, px, py = P.coords
    H = (px**2 + py**2) / 2 + V(x - y)
    C = Chart.from_names(["a", "q"])
    a, q = C.coords
    with pytest.raises(hj.NotAdapted):
        hj.separate_cyclic(H, P, VectorField(Q, (1, 1)), C, {x: q + a, y: q - a})


def test_radial_rotation_charge(plane):
    Q, P = plane
    x, y, px, py = P.coords
    H = (px**2 + py**2) / 2 + V(sp.sqrt(x**2 + y**2))
    cert = hj.check_hj_symmetry(H, VectorField(Q, (y, -x)), 0, P)
    assert cert.certified
    assert sp.expand(cert.charge - (y * px - x * py)) == 0


def test_oscillator_commutants():
    Q = Chart.from_names(["q1", "q2"])
    P = Q.cotangent()
    q1, q2, p1, p2 = P.coords
    E = symbol("E")
    H = (q1**2 + q2**2 + p1**2 + p2**2) / 2
    u = [(q1 * q2 + p1 * p2) / 2, (q1 * p2 - q2 * p1) / 2, (q1**2 + p1**2 - q2**2 - p2**2) / 2]
    for j in range(3):
        others = [u[i] for i in range(3) if i != j]
        cert = hj.generalized_hj_check(H, E, [u[j]], others, P)
        assert cert.lagrangian and cert.certified
        assert all(v.proved_zero for v in cert.commutants)


def test_generalized_needs_half_dimension():
    Q = Chart.from_names(["q1", "q2"])
    P = Q.cotangent()
    q1, q2, p1, p2 = P.coords
    cert = hj.generalized_hj_check((p1**2 + p2**2) / 2, symbol("E"), [], [], P)
    assert not cert.lagrangian
