import sympy as sp

from geomech import geometry as geo
from geomech.geometry import Chart, VectorField
from geomech.implicit import (ImplicitODE, check_constant_of_motion, check_lagrangian_submanifold,
                              check_symmetry, graph_of, in_ideal, manifold_points, solve_linear)
from geomech.symexpr import symbol

alpha = symbol("alpha")
ft = sp.Function("ft", real=True)


def _plane():
    M = Chart.from_names(["x1", "x2"])
    T = M.tangent()
    return M, T


def test_constant_of_motion_on_level_set_with_pinned_coordinate():
    _, T = _plane()
    x1, x2, v1, v2 = T.coords
    Z = ImplicitODE(T, (x2, v1, v2 - alpha))
    assert check_constant_of_motion(Z, ft(x1)).member
    # d_N f(x2) = alpha f'(x2) does not vanish on Z
    assert check_constant_of_motion(Z, ft(x2)).status == "not_member"


def test_constant_of_motion_without_pinned_coordinate():
    _, T = _plane()
    x1, x2, v1, v2 = T.coords
    Z = ImplicitODE(T, (v1, v2 - alpha))
    assert check_constant_of_motion(Z, ft(x1)).member
    assert check_constant_of_motion(Z, ft(x2)).status == "not_member"


def test_sphere_geodesic_level_set():
    M = Chart.from_names(["x", "y", "z"])
    T = M.tangent()
    x, y, z, vx, vy, vz = T.coords
    Z = ImplicitODE(T, (x**2 + y**2 + z**2 - 1, x * vx + y * vy + z * vz))
    assert check_constant_of_motion(Z, x**2 + y**2 + z**2).member
    assert check_constant_of_motion(Z, x).status == "not_member"


def test_translation_symmetry_of_uniform_motion():
    R = Chart.from_names(["x"])
    T = R.tangent()
    Z = ImplicitODE(T, (T.coords[1] - 1,))
    v = check_symmetry(Z, VectorField(R, (1,)))
    assert v.status == "symmetry"


def test_dilation_is_not_symmetry_of_uniform_motion():
    R = Chart.from_names(["x"])
    T = R.tangent()
    Z = ImplicitODE(T, (T.coords[1] - 1,))
    assert check_symmetry(Z, VectorField(R, (R.coords[0],))).status == "not_symmetry"


def test_rotation_symmetry_of_circle_flow():
    M, T = _plane()
    x1, x2, v1, v2 = T.coords
    Z = graph_of(VectorField(M, (-M.coords[1], M.coords[0])), T)
    assert check_symmetry(Z, VectorField(M, (M.coords[1], -M.coords[0]))).status == "symmetry"


def test_in_ideal_with_multipliers():
    x, y = sp.symbols("x y", real=True)
    v = in_ideal(x**2 * y + x * y**2, [x, y], [x, y])
    assert v.member
    assert in_ideal(x + 1, [x * y], [x, y]).status == "not_member"


def test_solve_linear_and_points():
    x, y, z = sp.symbols("x y z", real=True)
    sol, rest = solve_linear([x - y, z + 2 * y - 1], [x, y, z])
    assert not rest
    assert all(sp.simplify(e.subs(sol)) == 0 for e in [x - y, z + 2 * y - 1])
    pts = manifold_points([x**2 + y**2 - 1], [x, y], count=5, extra=[x * y])
    assert len(pts) == 5
    for pt, (xy,) in pts:
        assert abs(pt[0]**2 + pt[1]**2 - 1) < 1e-10
        assert abs(xy - pt[0] * pt[1]) < 1e-12


def test_hamiltonian_graph_is_lagrangian():
    # implicit graph v = dH/dp, w = -dH/dq inside T(T*Q) with the lifted form
    Q = Chart.from_names(["q"])
    P = Q.cotangent()
    TP = P.tangent()
    q, p, v, w = TP.coords
    H = (p**2 + q**4) / 2 + q * p
    omega = geo.lift_symplectic(geo.canonical_form(P), TP)
    params = Chart.from_names(["s", "t"])
    s, t = params.coords
    sub = {q: s, p: t}
    images = {q: s, p: t, v: sp.diff(H, p).subs(sub), w: -sp.diff(H, q).subs(sub)}
    chk = check_lagrangian_submanifold(omega, params, images)
    assert chk.lagrangian
    bad = dict(images)
    bad[w] = sp.diff(H, q).subs(sub)
    assert not check_lagrangian_submanifold(omega, params, bad).isotropic


def test_member_with_polynomial_multiplier():
    _, T = _plane()
    x1, x2, v1, v2 = T.coords
    Z = ImplicitODE(T, (x1 * v1 - x2 * v2,))
    assert check_constant_of_motion(Z, (x1**2 - x2**2) / 2).member
