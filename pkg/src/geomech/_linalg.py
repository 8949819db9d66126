"""Generic-point linear algebra on symbolic matrices.

Ranks are found numerically at seeded random points and then confirmed
symbolically: a nonzero pivot minor and exact kernel vectors.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

import mpmath
import numpy as np
import sympy as sp

from .symexpr import (DEFAULT_SEED, NONZERO_THRESHOLD, EvaluationDomainExhausted, NumericDomainError,
                      _random_rational, _real, compile_expr, instantiate_functions,
                      is_zero, normalize)


@dataclass
class RankInfo:
    rank: int
    rows: tuple
    cols: tuple
    status: str = "proved"
    warnings: list = field(default_factory=list)


def numeric_samples(M: sp.Matrix, assumptions=(), seed: int = DEFAULT_SEED, count: int = 3):
    """Evaluate M (floats) at ``count`` random points obeying the assumptions."""
    rng = random.Random(seed)
    entries = list(M)
    exprs = instantiate_functions(entries + [a.expr for a in assumptions], rng)
    ents, conds = exprs[: len(entries)], exprs[len(entries):]
    variables = sorted(set().union(set(), *(sp.sympify(e).free_symbols for e in exprs)), key=str)
    fs = [compile_expr(e, variables) for e in ents]
    gs = [compile_expr(c, variables) for c in conds]
    out = []
    for _ in range(400 * count):
        vals = [float(_random_rational(rng, bool(v.is_positive))) for v in variables]
        try:
            if not all(a.holds(_real(g(vals))) for a, g in zip(assumptions, gs)):
                continue
            arr = np.array([_real(f(vals)) for f in fs], dtype=float).reshape(M.shape)
        except (ZeroDivisionError, NumericDomainError, OverflowError, ValueError):
            continue
        if not np.all(np.isfinite(arr)):
            continue
        out.append(arr)
        if len(out) >= count:
            return out
    raise EvaluationDomainExhausted("no valid sample point for matrix evaluation")


def _pivots(A: np.ndarray, tol: float = 1e-8):
    """Greedy column-ordered elimination returning pivot rows and columns."""
    A = A.astype(float).copy()
    m, n = A.shape
    scale = max(1.0, float(np.abs(A).max()) if A.size else 1.0)
    used_rows, rows, cols = set(), [], []
    for j in range(n):
        cand = [(abs(A[i, j]), -i) for i in range(m) if i not in used_rows]
        if not cand:
            break
        best, negi = max(cand)
        if best <= tol * scale:
            continue
        i = -negi
        used_rows.add(i)
        rows.append(i)
        cols.append(j)
        for k in range(m):
            if k not in used_rows:
                A[k, :] -= A[k, j] / A[i, j] * A[i, :]
    return rows, cols


def generic_rank(M: sp.Matrix, assumptions=(), seed: int = DEFAULT_SEED) -> RankInfo:
    if M.rows == 0 or M.cols == 0:
        return RankInfo(0, (), ())
    if all(normalize(e) == 0 for e in M):
        return RankInfo(0, (), ())
    best = None
    for A in numeric_samples(M, assumptions, seed):
        rows, cols = _pivots(A)
        if best is None or len(rows) > len(best[0]):
            best = (rows, cols)
    rows, cols = best
    info = RankInfo(len(rows), tuple(sorted(rows)), tuple(cols))
    minor = M.extract(list(info.rows), list(info.cols))
    if not minor_nonzero(minor, assumptions, seed):
        info.status = "probable"
        info.warnings.append("rank_unstable: pivot minor did not certify nonzero")
    return info


def minor_nonzero(M: sp.Matrix, assumptions=(), seed: int = DEFAULT_SEED,
                  n_points: int = 16) -> bool:
    """True when det M is nonzero at some admissible rational point (40 digits)."""
    if M.rows == 0:
        return True
    rng = random.Random(seed)
    entries = list(M)
    exprs = instantiate_functions(entries + [a.expr for a in assumptions], rng)
    ents, conds = exprs[: len(entries)], exprs[len(entries):]
    variables = sorted(set().union(set(), *(sp.sympify(e).free_symbols for e in exprs)), key=str)
    with mpmath.workdps(40):
        fs = [compile_expr(e, variables, precise=True) for e in ents]
        gs = [compile_expr(c, variables, precise=True) for c in conds]
        good = 0
        for _ in range(100 * n_points):
            pt = [_random_rational(rng, bool(v.is_positive)) for v in variables]
            vals = [mpmath.mpf(r.p) / r.q for r in pt]
            try:
                if not all(a.holds(_real(g(vals))) for a, g in zip(assumptions, gs)):
                    continue
                A = mpmath.matrix(M.rows, M.cols)
                for k, f in enumerate(fs):
                    A[k // M.cols, k % M.cols] = _real(f(vals))
                det = mpmath.det(A)
            except (ZeroDivisionError, NumericDomainError, OverflowError, ValueError):
                continue
            if abs(det) > NONZERO_THRESHOLD:
                return True
            good += 1
            if good >= n_points:
                break
    return False


def _atomize(exprs):
    """Replace radicals and function applications by fresh symbols."""
    table: dict = {}

    def sym(a):
        if a not in table:
            table[a] = sp.Dummy(f"t{len(table)}")
        return table[a]

    def visit(e):
        e = sp.sympify(e)
        if e.is_Atom:
            return e
        if e.is_Pow and e.exp.is_Rational and not e.exp.is_Integer:
            base = visit(e.base)
            return sym(base ** sp.Rational(1, e.exp.q)) ** e.exp.p
        if e.is_Pow and not e.exp.is_Integer:
            return sym(e)
        if e.is_Add or e.is_Mul or e.is_Pow:
            return e.func(*[visit(a) for a in e.args])
        return sym(e)

    out = [visit(e) for e in exprs]
    back = {v: k for k, v in table.items()}
    return out, back


def exact_solve(A: sp.Matrix, B: sp.Matrix) -> sp.Matrix:
    """A^{-1} B over the fraction field generated by the entries."""
    from sympy.polys.matrices import DomainMatrix
    entries, back = _atomize(list(A) + list(B))
    Aa = sp.Matrix(A.rows, A.cols, entries[: len(A)])
    Ba = sp.Matrix(B.rows, B.cols, entries[len(A):])
    dA, dB = DomainMatrix.from_Matrix(Aa), DomainMatrix.from_Matrix(Ba)
    K = dA.domain.unify(dB.domain)
    if not K.is_Field:
        K = K.get_field()
    X = dA.convert_to(K).lu_solve(dB.convert_to(K)).to_Matrix()
    return X.applyfunc(lambda e: normalize(sp.sympify(e).xreplace(back)))


def kernel_basis(M: sp.Matrix, info: RankInfo | None = None, assumptions=(),
                 seed: int = DEFAULT_SEED, clear: bool = True) -> list[sp.Matrix]:
    """Right kernel at a generic point, one vector per non-pivot column."""
    info = info or generic_rank(M, assumptions, seed)
    n = M.cols
    free = [j for j in range(n) if j not in info.cols]
    out = []
    if info.rank:
        A = M.extract(list(info.rows), list(info.cols))
    for j in free:
        k = sp.zeros(n, 1)
        k[j] = 1
        if info.rank:
            x = exact_solve(A, -M.extract(list(info.rows), [j]))
            for c, val in zip(info.cols, x):
                k[c] = val
        if clear:
            k = clear_denominators(k)
        out.append(k)
    for k in out:
        for e in M * k:
            v = is_zero(e, seed=seed, assumptions=assumptions)
            if v.nonzero:
                raise ArithmeticError("kernel vector failed verification")
            if not v.proved_zero and "rank_unstable: kernel probably zero" not in info.warnings:
                info.status = "probable"
                info.warnings.append("rank_unstable: kernel probably zero")
    return out


def left_kernel(M: sp.Matrix, assumptions=(), seed: int = DEFAULT_SEED, clear: bool = True):
    return [k.T for k in kernel_basis(M.T, None, assumptions, seed, clear)]


def clear_denominators(k: sp.Matrix) -> sp.Matrix:
    dens = [sp.fraction(sp.together(e))[1] for e in k]
    lcm = sp.S.One
    for d in dens:
        lcm = sp.lcm(lcm, d)
    if lcm == 1:
        return k
    return k.applyfunc(lambda e: normalize(e * lcm))


def solve_pivot(M: sp.Matrix, rhs: sp.Matrix, info: RankInfo) -> sp.Matrix:
    """Particular solution of M x = rhs using only pivot rows/columns."""
    n = M.cols
    x = sp.zeros(n, 1)
    if info.rank == 0:
        return x
    A = M.extract(list(info.rows), list(info.cols))
    b = rhs.extract(list(info.rows), [0])
    sol = exact_solve(A, b)
    for c, val in zip(info.cols, sol):
        x[c] = val
    return x


def principal_pivots(M: sp.Matrix, assumptions=(), seed: int = DEFAULT_SEED):
    """Greedy principal pivot set for an antisymmetric matrix (discovery order)."""
    n = M.rows
    if n == 0:
        return []
    A = numeric_samples(M, assumptions, seed, count=1)[0]
    chosen: list[int] = []
    for i in range(n):
        if i in chosen:
            continue
        for j in range(i + 1, n):
            if j in chosen:
                continue
            S = chosen + [i, j]
            sub = A[np.ix_(S, S)]
            if np.linalg.matrix_rank(sub, tol=1e-8 * max(1.0, np.abs(A).max())) == len(S):
                chosen = S
                break
    return chosen
