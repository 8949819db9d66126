"""Randomized identity checks; every suite runs CASES seeded cases."""

import itertools
import math
import random

import numpy as np
import sympy as sp

from geomech import geometry as geo
from geomech import lagrangian as lg
from geomech import numint as ni
from geomech.geometry import Chart, KForm, VectorField

CASES = 200
SEED = 0x5EED


def rand_expr(rng, xs, degree=2, terms=3, transcendental=True):
    """Random polynomial with an occasional transcendental factor."""
    out = sp.S.Zero
    for _ in range(terms):
        m = sp.Integer(rng.randint(-4, 4))
        for _ in range(rng.randint(0, degree)):
            m *= rng.choice(xs)
        r = rng.random() if transcendental else 1.0
        if r < 0.15:
            m *= sp.sin(rng.choice(xs))
        elif r < 0.25:
            m *= sp.exp(rng.choice(xs))
        out += m
    return out


def rand_form(rng, chart, degree):
    idx = list(itertools.combinations(range(chart.dim), degree))
    return KForm(chart, degree, {I: rand_expr(rng, chart.coords) for I in idx if rng.random() < 0.7})


def rand_field(rng, chart, degree=2, transcendental=True):
    return VectorField(chart, tuple(rand_expr(rng, chart.coords, degree, transcendental=transcendental)
                                    for _ in chart.coords))


def run(check):
    rng = random.Random(SEED)
    done = 0
    for case in range(CASES):
        check(rng, case)
        done += 1
    assert done >= 200


def proved(exprs):
    return all(sp.sympify(e) == 0 or geo.normalize(e) == 0 for e in exprs)


R3 = Chart.from_names(["x", "y", "z"])
R2 = Chart.from_names(["q1", "q2"])
T2 = R2.tangent()


def test_d_squared_vanishes():
    def check(rng, case):
        chart = R3 if case % 2 else T2
        w = rand_form(rng, chart, rng.randint(0, 2))
        dd = geo._d(geo._d(w))
        assert proved(dd.coeffs.values()), (case, w)
    run(check)


def test_cartan_identity():
    def check(rng, case):
        w = rand_form(rng, R3, rng.randint(0, 3))
        X = rand_field(rng, R3, 1)
        diff = geo._lie_form(X, w) - geo.cartan_lie(X, w)
        assert proved(diff.coeffs.values()), (case, X, w)
    run(check)


def test_lift_bracket_identities():
    def check(rng, case):
        X, Y = rand_field(rng, R2, 2, False), rand_field(rng, R2, 2, False)
        XT, YT = geo.tangent_lift(X, T2), geo.tangent_lift(Y, T2)
        XV, YV = geo.vertical_lift(X, T2), geo.vertical_lift(Y, T2)
        XY = X.bracket(Y)
        assert proved((XT.bracket(YT) - geo.tangent_lift(XY, T2)).components), case
        assert proved((XT.bracket(YV) - geo.vertical_lift(XY, T2)).components), case
        assert proved(XV.bracket(YV).components), case
    run(check)


def test_soldering_identities():
    S = geo.SolderingData(T2)
    delta = S.liouville
    coord_fields = [VectorField.coordinate(T2, j) for j in range(T2.dim)]
    # L_Delta S = -S is a fixed identity; evaluate it once per case on random fields
    lie_delta = S.lie(delta)

    def check(rng, case):
        A, B = rand_field(rng, T2), rand_field(rng, T2)
        # (i) Delta in Ker S
        assert proved(S(delta).components)
        # (ii) Im S in Ker S, and Ker S is vertical, i.e. Im S
        assert proved(S(S(A)).components), case
        V = VectorField(T2, (0, 0) + A.components[2:])
        assert proved(S(V).components), case
        # (iii) L_Delta S = -S, applied to A through the coordinate basis
        lhs = sum((lie_delta[j].scale(A.components[j]) for j in range(T2.dim)),
                  VectorField.zero(T2))
        assert proved((lhs + S(A)).components), case
        assert len(coord_fields) == T2.dim
        # (iv) Nijenhuis torsion vanishes
        assert proved(S.nijenhuis(A, B).components), case
    run(check)


def test_cartan_form_contracts_to_vertical_derivative():
    def check(rng, case):
        L = rand_expr(rng, T2.coords, degree=3, terms=4)
        s = lg.build(L, R2, T2)
        A = rand_field(rng, T2)
        S = s.soldering
        lhs = geo.interior(A, s.theta).scalar
        rhs = S(A)(L)
        assert proved([lhs - rhs]), case
    run(check)


def test_hj_involution_for_arbitrary_generating_function():
    P = R2.cotangent()
    q1, q2, p1, p2 = P.coords

    def check(rng, case):
        W = rand_expr(rng, [q1, q2], degree=3, terms=4)
        if case % 3 == 0:
            W += sp.sqrt(q1**2 + 1) * rng.randint(1, 3)
        f1, f2 = p1 - sp.diff(W, q1), p2 - sp.diff(W, q2)
        assert geo.canonical_bracket(f1, f2, P) == 0, (case, W)
    run(check)


def test_integrator_scaling_band():
    Q = Chart.from_names(["q"])
    T = Q.tangent()
    q, v = T.coords
    w = sp.Symbol("w", positive=True)
    D = lg.build((v**2 - w**2 * q**2) / 2, Q, T).dynamics

    def check(rng, case):
        om = rng.uniform(0.5, 2.0)
        q0, v0 = rng.uniform(-1, 1), rng.uniform(-1, 1)
        if abs(q0) + abs(v0) < 0.2:
            q0 += 0.5
        t1 = rng.uniform(1.0, 2 * math.pi)
        Dw = D.subs({w: om})
        exact = np.array([q0 * math.cos(om * t1) + v0 / om * math.sin(om * t1),
                          -q0 * om * math.sin(om * t1) + v0 * math.cos(om * t1)])
        n = rng.choice([20, 30, 40])
        errs = []
        for steps in (n, 2 * n):
            tr = ni.integrate(Dw, [q0, v0], (0, t1), step=t1 / steps)
            errs.append(np.max(np.abs(tr.final - exact)))
        assert 8 <= errs[0] / errs[1] <= 64, (case, errs)
    run(check)
