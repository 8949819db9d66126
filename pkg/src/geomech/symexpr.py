"""Symbolic expression kernel.

Expressions are plain sympy objects.  This module adds the pieces the rest of
the package relies on: a small recursive-descent parser for the problem-file
grammar, a printer that emits the same grammar, a canonical normal form, and
a two-tier zero test (normal form first, then seeded random evaluation).
"""

from __future__ import annotations

import math
import random
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

import mpmath
import sympy as sp
from sympy.core.function import AppliedUndef
from sympy.printing.precedence import PRECEDENCE
from sympy.printing.str import StrPrinter

Expr = sp.Expr

DEFAULT_SEED = 0x6D656368
DEFAULT_POINTS = 16
NONZERO_THRESHOLD = 1e-9
ZERO_THRESHOLD = 1e-12

FUNCTIONS: dict[str, Callable] = {
    "sin": sp.sin,
    "cos": sp.cos,
    "tan": sp.tan,
    "exp": sp.exp,
    "log": sp.log,
    "sqrt": sp.sqrt,
    "asin": sp.asin,
}


class ParseError(ValueError):
    """Syntax error carrying the byte offset of the offending token."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte {offset}")
        self.offset = offset


class EvaluationDomainExhausted(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# symbols and assumptions


def symbol(name: str, positive: bool = False) -> sp.Symbol:
    if positive:
        return sp.Symbol(name, positive=True)
    return sp.Symbol(name, real=True)


@dataclass(frozen=True)
class Assumption:
    """Domain restriction: ``expr != 0`` or ``expr > 0``."""

    expr: Expr
    kind: str = "nonzero"

    def holds(self, value) -> bool:
        if self.kind == "positive":
            return value > 1e-9
        return abs(value) > 1e-6


# ---------------------------------------------------------------------------
# parser

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*/^(),]))"
)


class _Parser:
    def __init__(self, source: str, symbols: Mapping[str, sp.Symbol],
                 functions: Mapping[str, int]):
        self.src = source
        self.symbols = symbols
        self.functions = functions
        self.tokens = []
        pos = 0
        raw = source.encode()
        while pos < len(source):
            m = _TOKEN.match(source, pos)
            if m is None or m.end() == pos:
                if source[pos:].strip() == "":
                    break
                off = len(source[:pos].encode()) + (len(source[pos:]) - len(source[pos:].lstrip()))
                raise ParseError(f"unexpected character {source[pos:].lstrip()[:1]!r}", off)
            kind = m.lastgroup
            start = m.start(kind)
            self.tokens.append((kind, m.group(kind), len(source[:start].encode())))
            pos = m.end()
        self.tokens.append(("end", "", len(raw)))
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text):
        tok = self.take()
        if tok[1] != text or tok[0] == "end":
            raise ParseError(f"expected {text!r}", tok[2])
        return tok

    def parse(self):
        e = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ParseError(f"unexpected token {tok[1]!r}", tok[2])
        return e

    def expr(self):
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            e = e + rhs if op == "+" else e - rhs
        return e

    def term(self):
        e = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.factor()
            e = e * rhs if op == "*" else e / rhs
        return e

    def factor(self, exponent=False):
        if self.peek()[1] == "-" and self.peek()[0] == "op":
            self.take()
            return -self.factor(exponent)
        if self.peek()[1] == "+" and self.peek()[0] == "op":
            self.take()
            return self.factor(exponent)
        b = self.base(exponent)
        if self.peek()[1] == "^" and self.peek()[0] == "op":
            self.take()
            return sp.Pow(b, self.factor(True))
        return b

    def base(self, exponent=False):
        kind, text, off = self.take()
        # n/m folds to a literal except next to "^": x^2/2 is (x^2)/2, 2/3^2 is 2/9
        if kind == "num" and not exponent:
            nxt = self.tokens[self.i]
            after = self.tokens[self.i + 1] if self.i + 1 < len(self.tokens) else None
            then = self.tokens[self.i + 2] if self.i + 2 < len(self.tokens) else None
            if (nxt[1] == "/" and after is not None and after[0] == "num"
                    and (then is None or then[1] != "^")):
                self.i += 2
                return sp.Rational(int(text), int(after[1]))
        if kind == "num":
            return sp.Integer(int(text))
        if kind == "name":
            if self.peek()[1] == "(":
                return self.call(text, off)
            if text in self.functions or text in FUNCTIONS:
                raise ParseError(f"function {text!r} used without arguments", off)
            if text in self.symbols:
                return self.symbols[text]
            return symbol(text)
        if text == "(":
            e = self.expr()
            self.expect(")")
            return e
        raise ParseError(f"unexpected token {text!r}" if text else "unexpected end of input", off)

    def call(self, name, off):
        self.expect("(")
        args = [self.expr()]
        while self.peek()[1] == ",":
            self.take()
            args.append(self.expr())
        self.expect(")")
        if name in FUNCTIONS:
            if len(args) != 1:
                raise ParseError(f"{name} takes one argument", off)
            return FUNCTIONS[name](args[0])
        if name == "diff":
            if len(args) < 2 or not all(isinstance(a, sp.Symbol) for a in args[1:]):
                raise ParseError("diff expects an expression and symbols", off)
            return sp.Derivative(args[0], *args[1:])
        if name in self.functions:
            arity = self.functions[name]
            if arity is not None and arity != len(args):
                raise ParseError(f"{name} expects {arity} arguments", off)
            return sp.Function(name, real=True)(*args)
        raise ParseError(f"unknown function {name!r}", off)


def parse(source: str, symbols: Mapping[str, sp.Symbol] | None = None,
          functions: Mapping[str, int] | None = None) -> Expr:
    """Parse text in the expression grammar into a (non-normalized) tree.

    ``symbols`` maps names to pre-built symbols (e.g. ones declared positive);
    other names become real symbols.  ``functions`` declares abstract function
    names (name -> arity) such as a potential ``V``.  ``diff(f, x)`` denotes
    a partial derivative.
    """
    return _Parser(source, symbols or {}, functions or {}).parse()


# ---------------------------------------------------------------------------
# printer


class _GrammarPrinter(StrPrinter):
    def _print_Pow(self, expr, rational=False):
        b, e = expr.args
        if e is sp.S.Half:
            return f"sqrt({self._print(b)})"
        if e == -sp.S.Half:
            return f"1/sqrt({self._print(b)})"
        if e.is_Rational and e.is_negative:
            return f"1/{self._print(sp.Pow(b, -e, evaluate=False))}"
        bs = self.parenthesize(b, PRECEDENCE["Pow"])
        if e.is_Integer and e >= 0:
            return f"{bs}^{e}"
        return f"{bs}^({self._print(e)})"

    def _print_Rational(self, expr):
        return f"{expr.p}/{expr.q}"

    def _print_Derivative(self, expr):
        args = [self._print(expr.expr)]
        for v, n in expr.variable_count:
            args.extend([self._print(v)] * int(n))
        return "diff(" + ", ".join(args) + ")"

    def _print_Exp1(self, expr):
        return "exp(1)"


_PRINTER = _GrammarPrinter({"order": "none"})


def to_text(e: Expr) -> str:
    """Print in the parser's grammar (``^`` for powers)."""
    return _PRINTER.doprint(sp.sympify(e))


# ---------------------------------------------------------------------------
# normalization


def _pythagorean(e: Expr) -> Expr:
    """Rewrite sin(u)^n (|n| >= 2) through sin^2 = 1 - cos^2."""

    def is_sin_power(x):
        return (x.is_Pow and isinstance(x.base, sp.sin) and x.exp.is_Integer
                and abs(x.exp) >= 2)

    def rewrite(x):
        n = int(x.exp)
        c = sp.cos(x.base.args[0])
        m = abs(n)
        r = (1 - c**2) ** (m // 2) * x.base ** (m % 2)
        return r if n > 0 else 1 / r

    return e.replace(is_sin_power, rewrite)


def _split_radicals(e: Expr) -> Expr:
    """(n/d)^r -> n^r / d^r when d is provably positive."""

    def is_candidate(x):
        return x.is_Pow and x.exp.is_Rational and not x.exp.is_Integer and x.base.is_Add

    def rewrite(x):
        n, d = sp.fraction(sp.together(x.base))
        if d != 1 and d.is_positive:
            return sp.Pow(sp.expand(n), x.exp) / sp.Pow(d, x.exp)
        return x

    return e.replace(is_candidate, rewrite)


def _prepare(e: Expr) -> Expr:
    e = e.replace(lambda x: isinstance(x, sp.tan),
                  lambda x: sp.sin(x.args[0]) / sp.cos(x.args[0]))
    if e.has(sp.Subs):
        e = e.replace(lambda x: isinstance(x, sp.Subs), lambda x: x.doit())
    return _split_radicals(e)


def _is_polynomial(e: Expr) -> bool:
    for x in sp.preorder_traversal(e):
        if x.is_Pow:
            if not (x.exp.is_Integer and x.exp >= 0):
                return False
        elif not (x.is_Add or x.is_Mul or x.is_Symbol or x.is_Rational):
            return False
    return True


def normalize(e) -> Expr:
    """Canonical form: expanded numerator over expanded denominator."""
    e = sp.sympify(e)
    if e.is_Number or e.is_Symbol:
        return e
    if _is_polynomial(e):
        return sp.expand(e)
    e = _prepare(e)
    prev = None
    for _ in range(6):
        if e == prev:
            break
        prev = e
        e = _pythagorean(sp.expand(e))
        n, d = sp.fraction(sp.cancel(sp.expand(e)))
        n = sp.expand(_pythagorean(n))
        d = sp.expand(_pythagorean(d))
        e = n / d
        e = _split_radicals(e)
    return e


def differentiate(e: Expr, x: sp.Symbol) -> Expr:
    return normalize(sp.diff(e, x))


def substitute(e: Expr, bindings: Mapping) -> Expr:
    """Simultaneous substitution followed by normalization."""
    if not bindings:
        return normalize(e)
    return normalize(sp.sympify(e).subs(dict(bindings), simultaneous=True))


# ---------------------------------------------------------------------------
# numeric evaluation by tree interpretation


class NumericDomainError(ArithmeticError):
    pass


def _real(v):
    if isinstance(v, (mpmath.mpc, complex)):
        if abs(v.imag) > 1e-30 * max(1.0, abs(v.real)):
            raise NumericDomainError("complex value")
        v = v.real
    return v


def _mp_sqrt(v):
    if v < 0:
        raise NumericDomainError("sqrt of negative")
    return mpmath.sqrt(v)


def _mp_log(v):
    if v <= 0:
        raise NumericDomainError("log of nonpositive")
    return mpmath.log(v)


def _mp_asin(v):
    if abs(v) > 1:
        raise NumericDomainError("asin outside [-1, 1]")
    return mpmath.asin(v)


def _f_sqrt(v):
    if v < 0:
        raise NumericDomainError("sqrt of negative")
    return math.sqrt(v)


def _f_log(v):
    if v <= 0:
        raise NumericDomainError("log of nonpositive")
    return math.log(v)


def _f_asin(v):
    if abs(v) > 1:
        raise NumericDomainError("asin outside [-1, 1]")
    return math.asin(v)


_MP_FUNCS = {sp.sin: mpmath.sin, sp.cos: mpmath.cos, sp.tan: mpmath.tan,
             sp.exp: mpmath.exp, sp.log: _mp_log, sp.asin: _mp_asin, sp.Abs: abs}
_F_FUNCS = {sp.sin: math.sin, sp.cos: math.cos, sp.tan: math.tan,
            sp.exp: math.exp, sp.log: _f_log, sp.asin: _f_asin, sp.Abs: abs}


def _mp_pow(b, e):
    if b == 0 and e < 0:
        raise ZeroDivisionError
    if b < 0 and not (e == int(e)):
        raise NumericDomainError("fractional power of negative")
    return b ** e


def _f_pow(b, e):
    if b == 0 and e < 0:
        raise ZeroDivisionError
    if b < 0 and not float(e).is_integer():
        raise NumericDomainError("fractional power of negative")
    return b ** e


def compile_expr(e: Expr, variables: Sequence[sp.Symbol], precise: bool = False):
    """Compile ``e`` into a callable ``f(values)`` by walking the tree once.

    Constant subtrees are folded.  With ``precise`` the evaluation uses
    mpmath numbers at the current working precision.
    """
    index = {v: i for i, v in enumerate(variables)}
    funcs = _MP_FUNCS if precise else _F_FUNCS
    conv = (lambda r: mpmath.mpf(r.p) / r.q) if precise else (lambda r: float(r.p) / r.q)
    power = _mp_pow if precise else _f_pow
    sqrt = _mp_sqrt if precise else _f_sqrt

    def build(node):
        if node.is_Rational:
            c = conv(node)
            return lambda x: c
        if node.has(sp.I):
            # sympy's principal branches (log of a negative) leave the real line
            def nonreal(x):
                raise NumericDomainError("non-real value")
            return nonreal
        if node.is_Number or node in (sp.pi, sp.E):
            c = mpmath.mpf(str(sp.N(node, 40))) if precise else float(node)
            return lambda x: c
        if node.is_Symbol:
            if node not in index:
                raise KeyError(f"unbound symbol {node}")
            i = index[node]
            return lambda x: x[i]
        if not node.free_symbols & set(index) and not node.has(AppliedUndef):
            try:
                c = conv(node) if node.is_Rational else (
                    mpmath.mpf(str(sp.N(node, 40))) if precise else float(node))
                return lambda x: c
            except (TypeError, ValueError):
                pass
        if node.is_Add:
            parts = [build(a) for a in node.args]

            def add(x, parts=parts):
                s = parts[0](x)
                for p in parts[1:]:
                    s = s + p(x)
                return s
            return add
        if node.is_Mul:
            parts = [build(a) for a in node.args]

            def mul(x, parts=parts):
                s = parts[0](x)
                for p in parts[1:]:
                    s = s * p(x)
                return s
            return mul
        if node.is_Pow:
            b = build(node.base)
            ex = node.exp
            if ex is sp.S.Half:
                return lambda x: sqrt(b(x))
            if ex.is_Integer:
                n = int(ex)
                if n < 0:
                    def inv(x):
                        v = b(x)
                        if v == 0:
                            raise ZeroDivisionError
                        return v ** n
                    return inv
                return lambda x: b(x) ** n
            ee = build(ex)
            return lambda x: power(b(x), ee(x))
        if node.func in funcs:
            f = funcs[node.func]
            a = build(node.args[0])
            return lambda x: f(a(x))
        raise TypeError(f"cannot evaluate node {node.func}")

    return build(sp.sympify(e))


# ---------------------------------------------------------------------------
# zero test


@dataclass(frozen=True)
class ZeroVerdict:
    status: str
    witness: tuple | None = None
    value: float | None = None

    @property
    def proved_zero(self) -> bool:
        return self.status == "proved_zero"

    @property
    def nonzero(self) -> bool:
        return self.status == "proved_nonzero"

    @property
    def vanishes(self) -> bool:
        return self.status in ("proved_zero", "probably_zero")

    def to_dict(self):
        d = {"status": self.status}
        if self.witness is not None:
            d["witness"] = {k: v for k, v in self.witness}
            d["value"] = self.value
        return d


PROVED_ZERO = ZeroVerdict("proved_zero")


def _random_rational(rng: random.Random, positive: bool) -> sp.Rational:
    den = rng.randint(1, 17)
    if positive:
        num = rng.randint(1, 3 * den)
    else:
        num = rng.randint(-3 * den, 3 * den)
    return sp.Rational(num, den)


def _random_function(rng: random.Random, arity: int) -> sp.Lambda:
    xs = sp.symbols(f"_a0:{arity}", real=True)

    def c():
        return sp.Rational(rng.randint(-9, 9), rng.randint(1, 5))

    body = c() + sp.Rational(rng.randint(1, 9), 4)
    for x in xs:
        body += c() * x + c() * x**2 / 3 + c() * x**3 / 7
    for i in range(arity):
        for j in range(i + 1, arity):
            body += c() * xs[i] * xs[j]
    body += sp.Rational(rng.randint(1, 9), 5) * sp.sin(sum(c() * x for x in xs) + c())
    return sp.Lambda(xs, body)


def instantiate_functions(exprs: Sequence[Expr], rng: random.Random) -> list[Expr]:
    """Replace abstract functions by random smooth concrete ones."""
    arity = {}
    for e in exprs:
        for a in sp.sympify(e).atoms(AppliedUndef):
            arity[a.func] = len(a.args)
    if not arity:
        return list(exprs)
    table = {f: _random_function(rng, arity[f]) for f in sorted(arity, key=str)}
    out = []
    for e in exprs:
        e = sp.sympify(e)
        for f, lam in table.items():
            e = e.replace(f, lam)
        out.append(e.doit())
    return out


@dataclass
class Sampler:
    """Seeded source of random rational points respecting domain assumptions."""

    seed: int = DEFAULT_SEED
    assumptions: tuple = ()
    positive: frozenset = frozenset()
    rng: random.Random = field(init=False)

    def __post_init__(self):
        self.rng = random.Random(self.seed)

    def point(self, variables):
        return {v: _random_rational(self.rng, v.is_positive or v in self.positive)
                for v in variables}


def is_zero(e, seed: int = DEFAULT_SEED, n_points: int = DEFAULT_POINTS,
            assumptions: Iterable[Assumption] = ()) -> ZeroVerdict:
    """Two-tier zero test.

    The normal form decides ``proved_zero``; otherwise the expression is
    evaluated at seeded random rational points that satisfy the domain
    assumptions and avoid singular or non-real values.
    """
    if n_points < 1:
        raise ValueError("n_points must be >= 1")
    e = normalize(e)
    if e == 0:
        return PROVED_ZERO
    if e.is_Number:
        return ZeroVerdict("proved_nonzero", (), float(e))
    return sample_zero(e, seed, n_points, tuple(assumptions))


def sample_zero(e: Expr, seed: int, n_points: int, assumptions: tuple) -> ZeroVerdict:
    rng = random.Random(seed)
    exprs = [e] + [a.expr for a in assumptions]
    exprs = instantiate_functions(exprs, rng)
    target, conds = exprs[0], exprs[1:]
    variables = sorted(set().union(*(sp.sympify(x).free_symbols for x in exprs)), key=str)
    with mpmath.workdps(40):
        f = compile_expr(target, variables, precise=True)
        gs = [compile_expr(c, variables, precise=True) for c in conds]
        good = 0
        worst = 0.0
        for _ in range(100 * n_points):
            pt = {v: _random_rational(rng, bool(v.is_positive)) for v in variables}
            vals = [mpmath.mpf(pt[v].p) / pt[v].q for v in variables]
            try:
                if not all(a.holds(_real(g(vals))) for a, g in zip(assumptions, gs)):
                    continue
                val = _real(f(vals))
            except (ZeroDivisionError, NumericDomainError, OverflowError, ValueError):
                continue
            if not mpmath.isfinite(val):
                continue
            good += 1
            if abs(val) > NONZERO_THRESHOLD:
                witness = tuple((str(v), str(pt[v])) for v in variables)
                return ZeroVerdict("proved_nonzero", witness, float(val))
            worst = max(worst, float(abs(val)))
            if good >= n_points:
                break
    if good == 0:
        raise EvaluationDomainExhausted("no valid sample point found")
    return ZeroVerdict("probably_zero", None, worst)


def all_zero(exprs: Iterable, **kw) -> ZeroVerdict:
    """Combine verdicts: nonzero wins, then probably, else proved."""
    worst = PROVED_ZERO
    for e in exprs:
        v = is_zero(e, **kw)
        if v.nonzero:
            return v
        if v.status == "probably_zero":
            worst = v
    return worst


def rationalize(x: float, max_den: int = 10**6) -> sp.Rational:
    fr = Fraction(x).limit_denominator(max_den)
    return sp.Rational(fr.numerator, fr.denominator)
