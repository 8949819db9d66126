"""Numerical cross-checks: integral curves, drift of conserved quantities,
and the classical action along boundary-value solutions."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import sympy as sp

from .geometry import Chart, VectorField
from .symexpr import NumericDomainError, compile_expr, normalize

SINGULAR_THRESHOLD = 1e-8
SHOOTING_ITERATIONS = 100
SHOOTING_TOL = 1e-10

# Dormand-Prince 5(4) tableau
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
_B4 = np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])


class SingularRegion(ArithmeticError):
    pass


class StepUnderflow(ArithmeticError):
    pass


class ShootingFailed(ArithmeticError):
    pass


class _Singular(Exception):
    pass


@dataclass
class Trajectory:
    chart: Chart
    t: np.ndarray
    x: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.x.shape[1] != self.chart.dim:
            raise ValueError("state dimension does not match chart")
        if np.any(np.diff(self.t) <= 0):
            raise ValueError("time grid must be strictly increasing")

    @property
    def final(self) -> np.ndarray:
        return self.x[-1]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [str(c) for c in self.chart.coords])
            for t, row in zip(self.t, self.x):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in row])


class CompiledField:
    """Float evaluator for a vector field, watching its denominators."""

    def __init__(self, X: VectorField, extra: Sequence = ()):
        self.chart = X.chart
        coords = list(X.chart.coords)
        comps = [normalize(c) for c in X.components] + [sp.sympify(e) for e in extra]
        self.funcs = [compile_expr(c, coords) for c in comps]
        dens = set()
        for c in comps:
            d = sp.fraction(sp.together(c))[1]
            if not d.is_Number:
                dens.update(f for f in sp.Mul.make_args(sp.factor(d)) if not f.is_Number)
        self.dens = [compile_expr(d, coords) for d in sorted(dens, key=sp.default_sort_key)]

    def __call__(self, x) -> np.ndarray:
        try:
            for d in self.dens:
                if abs(d(x)) < SINGULAR_THRESHOLD:
                    raise _Singular
            return np.array([f(x) for f in self.funcs], dtype=float)
        except (ZeroDivisionError, NumericDomainError, ValueError, OverflowError):
            raise _Singular


def _step(f, x, h):
    k = []
    for i in range(7):
        xi = x + h * sum((a * kk for a, kk in zip(_A[i], k)), np.zeros_like(x))
        k.append(f(xi))
    k = np.array(k)
    x5 = x + h * (_B5 @ k)
    x4 = x + h * (_B4 @ k)
    return x5, x5 - x4


def _integrate(f, x0, t0, t1, tol, h0, fixed, h_min=1e-12, max_steps=10**6):
    t, x = t0, np.array(x0, dtype=float)
    ts, xs = [t], [x.copy()]
    h = h0 if h0 else min(0.01, (t1 - t0) / 10)
    rejected = 0
    steps = 0
    while t < t1 - 1e-15 * max(1.0, abs(t1)):
        h = min(h, t1 - t)
        try:
            xn, err = _step(f, x, h)
        except _Singular:
            if fixed:
                raise SingularRegion(f"excluded set reached near t={t}")
            h /= 4
            rejected += 1
            if h < h_min:
                raise SingularRegion(f"excluded set reached near t={t}")
            continue
        if fixed:
            t, x = t + h, xn
            ts.append(t)
            xs.append(x.copy())
            continue
        scale = tol * (1.0 + np.maximum(np.abs(x), np.abs(xn)))
        e = float(np.max(np.abs(err) / scale)) if err.size else 0.0
        if e <= 1.0:
            t, x = t + h, xn
            ts.append(t)
            xs.append(x.copy())
            steps += 1
            if steps > max_steps:
                raise StepUnderflow("step budget exhausted")
        else:
            rejected += 1
        h *= min(5.0, max(0.2, 0.9 * (e if e > 0 else 1e-10) ** -0.2))
        if h < h_min:
            raise StepUnderflow(f"step size underflow at t={t}")
    return np.array(ts), np.array(xs), rejected


def integrate(X: VectorField, x0, t_span, tol: float = 1e-10, step: float | None = None,
              seed: int | None = None) -> Trajectory:
    """Dormand-Prince 5(4); adaptive unless ``step`` fixes the step size."""
    t0, t1 = map(float, t_span)
    f = CompiledField(X)
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (X.chart.dim,):
        raise ValueError("initial state has wrong dimension")
    try:
        f(x0)
    except _Singular:
        raise SingularRegion("initial state lies in an excluded set")
    fixed = step is not None
    ts, xs, rej = _integrate(f, x0, t0, t1, tol, step, fixed)
    meta = {"method": "dopri5", "policy": "fixed" if fixed else "adaptive", "tol": tol,
            "step": step, "rejected": rej, "seed": seed}
    return Trajectory(X.chart, ts, xs, meta)


def verify_along(traj: Trajectory, quantities) -> dict:
    """max |f(x(t)) - f(x(0))| over the grid for each quantity."""
    coords = list(traj.chart.coords)
    items = quantities.items() if isinstance(quantities, Mapping) else \
        ((str(q), q) for q in quantities)
    out = {}
    for name, q in items:
        g = compile_expr(sp.sympify(q), coords)
        vals = np.array([float(g(x)) for x in traj.x])
        out[name] = float(np.max(np.abs(vals - vals[0])))
    return out


def _flow(sys, state, t1, tol, with_action=True):
    D = sys.dynamics
    extra = [sys.L] if with_action else []
    f = CompiledField(D, extra)
    y0 = np.concatenate([state, np.zeros(len(extra))])
    _, ys, _ = _integrate(f, y0, 0.0, t1, tol, None, False)
    return ys[-1]


def shoot(sys, q0, q1, t1, v_guess=None, tol: float = 1e-12,
          iterations: int = SHOOTING_ITERATIONS, target: float = SHOOTING_TOL):
    """Initial velocity with q(t1) = q1 by damped Newton on the endpoint map."""
    n = sys.N
    q0, q1 = np.asarray(q0, float), np.asarray(q1, float)
    v = np.asarray(v_guess, float) if v_guess is not None else (q1 - q0) / t1

    def miss(v):
        return _flow(sys, np.concatenate([q0, v]), t1, tol, False)[:n] - q1

    r = miss(v)
    for it in range(iterations):
        if np.max(np.abs(r)) < target:
            return v, it
        J = np.zeros((n, n))
        eps = 1e-7
        for j in range(n):
            dv = np.zeros(n)
            dv[j] = eps
            J[:, j] = (miss(v + dv) - miss(v - dv)) / (2 * eps)
        try:
            delta = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            raise ShootingFailed("singular endpoint Jacobian")
        lam = 1.0
        while lam > 1e-4:
            rn = miss(v + lam * delta)
            if np.max(np.abs(rn)) < np.max(np.abs(r)):
                break
            lam /= 2
        v, r = v + lam * delta, rn
    if np.max(np.abs(r)) < target:
        return v, iterations
    raise ShootingFailed(f"no convergence, residual {np.max(np.abs(r))}")


def principal_function_check(sys, q0, q1, t1, S_claimed, bindings: Mapping | None = None,
                             tol: float = 1e-12) -> dict:
    """Quadrature of L along the boundary-value solution vs the claimed S."""
    v0, its = shoot(sys, q0, q1, t1, tol=tol)
    y = _flow(sys, np.concatenate([np.asarray(q0, float), v0]), t1, tol, True)
    action = float(y[-1])
    claimed = float(sp.sympify(S_claimed).subs(dict(bindings or {})).evalf(30)) \
        if isinstance(S_claimed, sp.Basic) else float(S_claimed)
    return {"action": action, "claimed": claimed, "residual": abs(action - claimed),
            "initial_velocity": [float(a) for a in v0], "iterations": its}
