"""Charts, vector fields and differential forms in coordinates.

Everything is chart-local.  A :class:`Chart` is an ordered tuple of sympy
symbols with a bundle role; tangent and cotangent charts keep a link to their
base chart.  Forms store coefficients on strictly increasing index tuples.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import sympy as sp

from .symexpr import Assumption, all_zero, is_zero, normalize, symbol

BASE = "base"
TANGENT = "tangent"
COTANGENT = "cotangent"
TANGENT_TANGENT = "tangent_of_tangent"
TANGENT_COTANGENT = "tangent_of_cotangent"


class ChartMismatch(ValueError):
    pass


class DegenerateForm(ValueError):
    pass


def _derived_name(name: str, prefix: str, taken: set[str]) -> str:
    m = re.fullmatch(r"[qp](\d*)", name)
    if m:
        cand = prefix + m.group(1)
    elif prefix == "w" and name.startswith("p"):
        cand = "w" + name[1:]
    else:
        cand = prefix + name
    if cand in taken:
        cand = prefix + "_" + name
    while cand in taken:
        cand = "d" + cand
    return cand


@dataclass(frozen=True)
class Chart:
    coords: tuple
    role: str = BASE
    base: "Chart | None" = None
    assumptions: tuple = ()

    def __post_init__(self):
        names = [str(c) for c in self.coords]
        if len(set(names)) != len(names):
            raise ValueError(f"coordinate names collide: {names}")
        if self.base is not None:
            if len(self.coords) != 2 * self.base.dim:
                raise ValueError("derived chart has wrong dimension")

    @classmethod
    def from_names(cls, names: Sequence[str], positive: Iterable[str] = (),
                   assumptions: Iterable[Assumption] = ()) -> "Chart":
        pos = set(positive)
        return cls(tuple(symbol(n, n in pos) for n in names), BASE, None, tuple(assumptions))

    @property
    def dim(self) -> int:
        return len(self.coords)

    @cached_property
    def index(self) -> dict:
        return {c: i for i, c in enumerate(self.coords)}

    @cached_property
    def names(self) -> dict:
        return {str(c): c for c in self.coords}

    def __getitem__(self, name: str) -> sp.Symbol:
        return self.names[name]

    def tangent(self, names: Sequence[str] | None = None) -> "Chart":
        """TM chart (x, v) over this chart."""
        taken = {str(c) for c in self.coords}
        if names is None:
            names = []
            for c in self.coords:
                prefix = "w" if self.role == COTANGENT and c in self.momenta else "v"
                n = _derived_name(str(c), prefix, taken)
                taken.add(n)
                names.append(n)
        vel = tuple(symbol(n) for n in names)
        role = {BASE: TANGENT, TANGENT: TANGENT_TANGENT,
                COTANGENT: TANGENT_COTANGENT}.get(self.role, TANGENT)
        return Chart(self.coords + vel, role, self, self.assumptions)

    def cotangent(self, names: Sequence[str] | None = None) -> "Chart":
        """T*Q chart (q, p) over this chart."""
        taken = {str(c) for c in self.coords}
        if names is None:
            names = []
            for c in self.coords:
                n = _derived_name(str(c), "p", taken)
                taken.add(n)
                names.append(n)
        mom = tuple(symbol(n) for n in names)
        return Chart(self.coords + mom, COTANGENT, self, self.assumptions)

    # views on derived charts
    @property
    def positions(self) -> tuple:
        return self.coords[: self.base.dim] if self.base is not None else self.coords

    @property
    def velocities(self) -> tuple:
        if self.base is None or self.role == COTANGENT:
            raise ValueError("not a tangent chart")
        return self.coords[self.base.dim:]

    @property
    def momenta(self) -> tuple:
        if self.role != COTANGENT:
            return ()
        return self.coords[self.base.dim:]

    def check(self, other: "Chart"):
        if other.coords != self.coords:
            raise ChartMismatch(f"chart mismatch: {self.coords} vs {other.coords}")

    def zero_test(self, e, **kw):
        return is_zero(e, assumptions=self.assumptions, **kw)


# ---------------------------------------------------------------------------
# vector fields


@dataclass(frozen=True)
class VectorField:
    chart: Chart
    components: tuple

    def __post_init__(self):
        if len(self.components) != self.chart.dim:
            raise ValueError("component count must equal chart dimension")
        object.__setattr__(self, "components", tuple(sp.sympify(c) for c in self.components))

    @classmethod
    def from_map(cls, chart: Chart, comps: Mapping) -> "VectorField":
        out = [sp.S.Zero] * chart.dim
        for k, v in comps.items():
            key = chart[k] if isinstance(k, str) else k
            out[chart.index[key]] = sp.sympify(v)
        return cls(chart, tuple(out))

    @classmethod
    def zero(cls, chart: Chart) -> "VectorField":
        return cls(chart, (sp.S.Zero,) * chart.dim)

    @classmethod
    def coordinate(cls, chart: Chart, i: int) -> "VectorField":
        comps = [sp.S.Zero] * chart.dim
        comps[i] = sp.S.One
        return cls(chart, tuple(comps))

    def __getitem__(self, coord):
        if isinstance(coord, str):
            coord = self.chart[coord]
        if isinstance(coord, int):
            return self.components[coord]
        return self.components[self.chart.index[coord]]

    def __call__(self, f) -> sp.Expr:
        """Directional derivative X(f)."""
        f = sp.sympify(f)
        return sp.Add(*[c * sp.diff(f, x) for c, x in zip(self.components, self.chart.coords) if c != 0])

    def __add__(self, other):
        self.chart.check(other.chart)
        return VectorField(self.chart, tuple(a + b for a, b in zip(self.components, other.components)))

    def __sub__(self, other):
        self.chart.check(other.chart)
        return VectorField(self.chart, tuple(a - b for a, b in zip(self.components, other.components)))

    def __neg__(self):
        return VectorField(self.chart, tuple(-a for a in self.components))

    def scale(self, f) -> "VectorField":
        return VectorField(self.chart, tuple(f * a for a in self.components))

    def __rmul__(self, f):
        return self.scale(f)

    def bracket(self, other: "VectorField") -> "VectorField":
        self.chart.check(other.chart)
        return VectorField(self.chart, tuple(self(b) - other(a) for a, b in
                                             zip(self.components, other.components)))

    def normalized(self) -> "VectorField":
        return VectorField(self.chart, tuple(normalize(c) for c in self.components))

    def subs(self, bindings) -> "VectorField":
        return VectorField(self.chart, tuple(sp.sympify(c).subs(bindings, simultaneous=True)
                                             for c in self.components))

    def zero_verdict(self, **kw):
        return all_zero(self.components, assumptions=self.chart.assumptions, **kw)

    def terms(self):
        return {str(x): c for x, c in zip(self.chart.coords, self.components) if c != 0}


def bracket(X: VectorField, Y: VectorField) -> VectorField:
    return X.bracket(Y).normalized()


# ---------------------------------------------------------------------------
# forms


def _sort_sign(idx: Sequence[int]):
    """Sort an index tuple, returning (sign, sorted) or (0, None) on repeats."""
    if len(set(idx)) != len(idx):
        return 0, None
    idx = list(idx)
    sign = 1
    for i in range(len(idx)):
        for j in range(len(idx) - 1 - i):
            if idx[j] > idx[j + 1]:
                idx[j], idx[j + 1] = idx[j + 1], idx[j]
                sign = -sign
    return sign, tuple(idx)


class KForm:
    """A differential k-form with coefficients on increasing index tuples."""

    __slots__ = ("chart", "degree", "coeffs")

    def __init__(self, chart: Chart, degree: int, coeffs: Mapping | None = None):
        if degree > chart.dim or degree < 0:
            raise ValueError("degree out of range")
        self.chart = chart
        self.degree = degree
        clean = {}
        for k, v in (coeffs or {}).items():
            k = tuple(k)
            if len(k) != degree or list(k) != sorted(set(k)):
                raise ValueError(f"index tuple {k} is not strictly increasing of length {degree}")
            v = sp.sympify(v)
            if v != 0:
                clean[k] = v
        self.coeffs = clean

    # constructors
    @classmethod
    def function(cls, chart: Chart, f) -> "KForm":
        return cls(chart, 0, {(): f})

    @classmethod
    def dx(cls, chart: Chart, coord) -> "KForm":
        if isinstance(coord, str):
            coord = chart[coord]
        return cls(chart, 1, {(chart.index[coord],): 1})

    @classmethod
    def one_form(cls, chart: Chart, comps: Mapping) -> "KForm":
        out = {}
        for k, v in comps.items():
            key = chart[k] if isinstance(k, str) else k
            out[(chart.index[key],)] = v
        return cls(chart, 1, out)

    @classmethod
    def from_matrix(cls, chart: Chart, M) -> "KForm":
        """2-form sum_{i<j} M[i,j] dx^i ^ dx^j."""
        n = chart.dim
        return cls(chart, 2, {(i, j): M[i, j] for i in range(n) for j in range(i + 1, n)})

    @property
    def scalar(self):
        if self.degree != 0:
            raise ValueError("not a 0-form")
        return self.coeffs.get((), sp.S.Zero)

    def component(self, idx: Sequence[int]):
        sign, key = _sort_sign(idx)
        if sign == 0:
            return sp.S.Zero
        return sign * self.coeffs.get(key, sp.S.Zero)

    def matrix(self) -> sp.Matrix:
        if self.degree != 2:
            raise ValueError("matrix() needs a 2-form")
        n = self.chart.dim
        M = sp.zeros(n, n)
        for (i, j), c in self.coeffs.items():
            M[i, j] = c
            M[j, i] = -c
        return M

    def vector(self) -> list:
        if self.degree != 1:
            raise ValueError("vector() needs a 1-form")
        return [self.coeffs.get((i,), sp.S.Zero) for i in range(self.chart.dim)]

    def _combine(self, other, sign):
        self.chart.check(other.chart)
        if self.degree != other.degree:
            raise ValueError("degree mismatch")
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out.get(k, 0) + sign * v
        return KForm(self.chart, self.degree, out)

    def __add__(self, other):
        return self._combine(other, 1)

    def __sub__(self, other):
        return self._combine(other, -1)

    def __neg__(self):
        return KForm(self.chart, self.degree, {k: -v for k, v in self.coeffs.items()})

    def scale(self, f) -> "KForm":
        return KForm(self.chart, self.degree, {k: f * v for k, v in self.coeffs.items()})

    def __rmul__(self, f):
        return self.scale(f)

    def normalized(self) -> "KForm":
        return KForm(self.chart, self.degree, {k: normalize(v) for k, v in self.coeffs.items()})

    def subs(self, bindings) -> "KForm":
        return KForm(self.chart, self.degree,
                     {k: sp.sympify(v).subs(bindings, simultaneous=True) for k, v in self.coeffs.items()})

    def zero_verdict(self, **kw):
        return all_zero(self.coeffs.values(), assumptions=self.chart.assumptions, **kw)

    def terms(self) -> dict:
        """Readable map like {'dq1^dv1': coeff}."""
        names = [str(c) for c in self.chart.coords]
        if self.degree == 0:
            return {"1": self.scalar}
        return {"^".join("d" + names[i] for i in k): v for k, v in sorted(self.coeffs.items())}

    def __repr__(self):
        return f"KForm({self.degree}, {self.terms()})"


def wedge(a: KForm, b: KForm) -> KForm:
    a.chart.check(b.chart)
    out = {}
    for I, x in a.coeffs.items():
        for J, y in b.coeffs.items():
            sign, K = _sort_sign(I + J)
            if sign:
                out[K] = out.get(K, 0) + sign * x * y
    return KForm(a.chart, a.degree + b.degree, out)


def _d(w: KForm) -> KForm:
    if w.degree >= w.chart.dim:
        return KForm(w.chart, w.degree)
    out = {}
    for I, c in w.coeffs.items():
        for j, x in enumerate(w.chart.coords):
            dc = sp.diff(c, x)
            if dc == 0:
                continue
            sign, K = _sort_sign((j,) + I)
            if sign:
                out[K] = out.get(K, 0) + sign * dc
    return KForm(w.chart, w.degree + 1, out)


def exterior_derivative(w: KForm) -> KForm:
    return _d(w).normalized()


def _interior(X: VectorField, w: KForm) -> KForm:
    X.chart.check(w.chart)
    if w.degree == 0:
        return KForm(w.chart, 0)
    out = {}
    for I, c in w.coeffs.items():
        for pos, i in enumerate(I):
            xi = X.components[i]
            if xi == 0:
                continue
            J = I[:pos] + I[pos + 1:]
            out[J] = out.get(J, 0) + (-1) ** pos * xi * c
    return KForm(w.chart, w.degree - 1, out)


def interior(X: VectorField, w: KForm) -> KForm:
    return _interior(X, w).normalized()


def _lie_form(X: VectorField, w: KForm) -> KForm:
    """Lie derivative from the coordinate formula, independent of Cartan."""
    X.chart.check(w.chart)
    coords = w.chart.coords
    out = {}
    for J, c in w.coeffs.items():
        xc = X(c)
        if xc != 0:
            out[J] = out.get(J, 0) + xc
        for slot, j in enumerate(J):
            for i, x in enumerate(coords):
                dX = sp.diff(X.components[j], x)
                if dX == 0:
                    continue
                sign, K = _sort_sign(J[:slot] + (i,) + J[slot + 1:])
                if sign:
                    out[K] = out.get(K, 0) + sign * c * dX
    return KForm(w.chart, w.degree, out)


def lie_derivative(X: VectorField, T):
    if isinstance(T, VectorField):
        return bracket(X, T)
    if isinstance(T, KForm):
        return _lie_form(X, T).normalized()
    return normalize(X(T))


def cartan_lie(X: VectorField, w: KForm) -> KForm:
    """L_X w assembled as i_X d w + d i_X w."""
    if w.degree == w.chart.dim:
        return _d(_interior(X, w)).normalized()
    a = _interior(X, _d(w))
    if w.degree == 0:
        return a.normalized()
    return (a + _d(_interior(X, w))).normalized()


def d_function(chart: Chart, f) -> KForm:
    return _d(KForm.function(chart, f))


def pullback(w: KForm, source: Chart, mapping: Mapping) -> KForm:
    """Pull back ``w`` along coords_target = mapping[coord](source coords)."""
    images = [sp.sympify(mapping[c]) for c in w.chart.coords]
    subs = dict(zip(w.chart.coords, images))
    dimages = [d_function(source, f) for f in images]
    out = KForm(source, w.degree)
    for I, c in w.coeffs.items():
        term = KForm.function(source, sp.sympify(c).subs(subs, simultaneous=True))
        for i in I:
            term = wedge(term, dimages[i])
        out = out + term
    return out.normalized()


def to_tangent(w: KForm, T: Chart) -> KForm:
    """Pull a form on M back to TM along the bundle projection."""
    if T.base is None or T.base.coords != w.chart.coords:
        raise ChartMismatch("target is not the tangent chart of the form's chart")
    return KForm(T, w.degree, w.coeffs)


# ---------------------------------------------------------------------------
# tangent bundle constructions


def tangent_lift(X: VectorField, T: Chart | None = None) -> VectorField:
    """X^(N) = X^a d/dx^a + (v^b d_b X^a) d/dv^a."""
    T = T or X.chart.tangent()
    Q = X.chart
    if T.base is None or T.base.coords != Q.coords:
        raise ChartMismatch("tangent chart does not sit over the field's chart")
    vel = T.velocities
    lifted = [sp.Add(*[v * sp.diff(a, q) for v, q in zip(vel, Q.coords)]) for a in X.components]
    return VectorField(T, tuple(X.components) + tuple(lifted)).normalized()


def vertical_lift(X: VectorField, T: Chart | None = None) -> VectorField:
    T = T or X.chart.tangent()
    return VectorField(T, (sp.S.Zero,) * X.chart.dim + tuple(X.components))


def total_field(T: Chart) -> VectorField:
    """v^a d/dx^a: the second-order field with zero acceleration."""
    n = T.base.dim
    return VectorField(T, tuple(T.velocities) + (sp.S.Zero,) * n)


def iN(w: KForm, T: Chart | None = None) -> KForm:
    T = T or w.chart.tangent()
    return interior(total_field(T), to_tangent(w, T))


def dN(w: KForm, T: Chart | None = None) -> KForm:
    """d_N = i_N d + d i_N, mapping forms on M to forms on TM."""
    T = T or w.chart.tangent()
    lifted = to_tangent(w, T)
    N = total_field(T)
    if lifted.degree == T.dim:
        return _d(_interior(N, lifted)).normalized()
    a = _interior(N, _d(lifted))
    if w.degree == 0:
        return a.normalized()
    return (a + _d(_interior(N, lifted))).normalized()


def lift_symplectic(w: KForm, T: Chart | None = None) -> KForm:
    return dN(w, T)


def second_order_field(T: Chart, accelerations: Sequence) -> VectorField:
    return VectorField(T, tuple(T.velocities) + tuple(accelerations))


def generic_second_order(T: Chart, prefix: str = "a_") -> VectorField:
    """Second-order field with fresh acceleration symbols."""
    acc = tuple(symbol(prefix + str(v)) for v in T.velocities)
    return second_order_field(T, acc)


class SolderingData:
    """Soldering tensor S = dx^a (x) d/dv^a and Liouville field on a tangent chart."""

    def __init__(self, T: Chart):
        if T.base is None or T.role == COTANGENT:
            raise ValueError("soldering data needs a tangent chart")
        self.chart = T
        self.n = T.base.dim

    def __call__(self, X: VectorField) -> VectorField:
        n = self.n
        return VectorField(self.chart, (sp.S.Zero,) * n + tuple(X.components[:n]))

    def dual(self, w: KForm) -> KForm:
        """S*(w): the 1-form w_{v^a} dx^a."""
        comps = w.vector()
        return KForm(self.chart, 1, {(a,): comps[self.n + a] for a in range(self.n)})

    @property
    def liouville(self) -> VectorField:
        return VectorField(self.chart, (sp.S.Zero,) * self.n + tuple(self.chart.velocities))

    def matrix(self) -> sp.Matrix:
        n = self.n
        M = sp.zeros(2 * n, 2 * n)
        for a in range(n):
            M[n + a, a] = 1
        return M

    def lie(self, X: VectorField) -> list[VectorField]:
        """(L_X S) evaluated on coordinate fields: [X, S d_j] - S [X, d_j]."""
        out = []
        for j in range(self.chart.dim):
            E = VectorField.coordinate(self.chart, j)
            out.append((X.bracket(self(E)) - self(X.bracket(E))).normalized())
        return out

    def nijenhuis(self, A: VectorField, B: VectorField) -> VectorField:
        S = self
        t1 = S(S(A.bracket(B)) - S(A).bracket(B) - A.bracket(S(B)))
        return (t1 + S(A).bracket(S(B))).normalized()


# ---------------------------------------------------------------------------
# symplectic structures


def hamiltonian_field(f, w: KForm, inverse: sp.Matrix | None = None) -> VectorField:
    """X_f with i_{X_f} w = df."""
    M = w.matrix()
    Minv = inverse if inverse is not None else M.inv(method="LU")
    df = sp.Matrix([sp.diff(f, x) for x in w.chart.coords])
    X = -Minv * df
    return VectorField(w.chart, tuple(X)).normalized()


def _check_nondegenerate(w: KForm):
    M = w.matrix()
    det = M.det(method="berkowitz")
    v = w.chart.zero_test(det)
    if v.proved_zero:
        raise DegenerateForm("symplectic form is degenerate")
    return M


def poisson_bracket(f, g, w: KForm) -> sp.Expr:
    """{f, g} = w(X_f, X_g) = -df . W^{-1} . dg for the coefficient matrix W."""
    if is_canonical(w):
        return canonical_bracket(f, g, w.chart)
    M = _check_nondegenerate(w)
    Minv = M.inv(method="LU")
    df = sp.Matrix([[sp.diff(f, x) for x in w.chart.coords]])
    dg = sp.Matrix([sp.diff(g, x) for x in w.chart.coords])
    return normalize(-(df * Minv * dg)[0, 0])


def canonical_form(chart: Chart) -> KForm:
    """omega_Q = dq^a ^ dp_a on a cotangent chart."""
    n = chart.base.dim
    return KForm(chart, 2, {(a, n + a): 1 for a in range(n)})


def is_canonical(w: KForm) -> bool:
    ch = w.chart
    if ch.role != COTANGENT or w.degree != 2:
        return False
    n = ch.base.dim
    return w.coeffs == {(a, n + a): sp.S.One for a in range(n)}


def canonical_bracket(f, g, chart: Chart) -> sp.Expr:
    n = chart.base.dim
    q, p = chart.coords[:n], chart.coords[n:]
    return normalize(sp.Add(*[sp.diff(f, q[a]) * sp.diff(g, p[a]) - sp.diff(f, p[a]) * sp.diff(g, q[a])
                              for a in range(n)]))


def canonical_hamiltonian_field(f, chart: Chart) -> VectorField:
    n = chart.base.dim
    q, p = chart.coords[:n], chart.coords[n:]
    return VectorField(chart, tuple(sp.diff(f, x) for x in p) + tuple(-sp.diff(f, x) for x in q)).normalized()


def liouville_one_form(chart: Chart) -> KForm:
    """theta_Q = p_a dq^a."""
    n = chart.base.dim
    return KForm(chart, 1, {(a,): chart.coords[n + a] for a in range(n)})
