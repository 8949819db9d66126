"""Command-line front end: load a JSON problem file, run one command, report.

Exit codes: 0 success (possibly with sampling warnings), 1 a mandatory check
failed, 2 usage or problem-file error, 3 an iteration cap was hit.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import sympy as sp

from . import constraints as cons
from . import hamjac as hj
from . import lagrangian as lg
from . import noether as nt
from . import numint as ni
from .geometry import Chart, VectorField
from .symexpr import (DEFAULT_SEED, Assumption, ParseError, ZeroVerdict, is_zero, parse,
                      symbol, to_text)

COMMANDS = ("analyze", "noether", "constrain", "hj", "integrate")
TOP_KEYS = {"chart", "lagrangian", "hamiltonian", "symmetries", "hj", "constraints",
            "integrate", "options"}
EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_NONTERMINATION = 0, 1, 2, 3


class ProblemError(ValueError):
    def __init__(self, pointer: str, message: str):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer


@dataclass
class ProblemFile:
    path: str
    raw: dict
    Q: Chart
    T: Chart
    P: Chart
    symbols: dict
    functions: dict
    lagrangian: sp.Expr | None = None
    hamiltonian: sp.Expr | None = None
    options: dict = field(default_factory=dict)

    def expr(self, text, pointer: str):
        return _parse(text, self.symbols, self.functions, pointer)

    def field(self, comps, chart: Chart, pointer: str) -> VectorField:
        if not isinstance(comps, dict):
            raise ProblemError(pointer, "a vector field is an object {coordinate: expression}")
        names = {str(c) for c in chart.coords}
        for k in comps:
            if k not in names:
                raise ProblemError(f"{pointer}/{k}", f"unknown coordinate {k!r}")
        return VectorField(chart, tuple(self.expr(comps.get(str(c), "0"), f"{pointer}/{c}")
                                        for c in chart.coords))

    def chart_for(self, comps) -> Chart:
        names = set(comps)
        for ch in (self.Q, self.T, self.P):
            if names <= {str(c) for c in ch.coords}:
                return ch
        return self.T


def _parse(text, symbols, functions, pointer):
    if isinstance(text, (int, float)):
        return sp.nsimplify(text)
    if not isinstance(text, str):
        raise ProblemError(pointer, "expected an expression string")
    try:
        e = parse(text, symbols, functions)
    except ParseError as err:
        raise ProblemError(pointer, str(err))
    unknown = {str(s) for s in e.free_symbols} - set(symbols)
    if unknown:
        raise ProblemError(pointer, f"undeclared symbols {sorted(unknown)}")
    return e


def _names(obj, pointer, required=False):
    if obj is None:
        if required:
            raise ProblemError(pointer, "missing")
        return []
    if not isinstance(obj, list) or not all(isinstance(x, str) for x in obj):
        raise ProblemError(pointer, "expected a list of names")
    return obj


def load(path) -> ProblemFile:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ProblemError("", f"no such file {path}")
    except json.JSONDecodeError as err:
        raise ProblemError("", f"invalid JSON: {err}")
    return load_dict(raw, str(path))


def load_dict(raw: dict, path: str = "<memory>") -> ProblemFile:
    if not isinstance(raw, dict):
        raise ProblemError("", "top level must be an object")
    extra = set(raw) - TOP_KEYS
    if extra:
        raise ProblemError(f"/{sorted(extra)[0]}", "unknown top-level key")
    ch = raw.get("chart")
    if not isinstance(ch, dict):
        raise ProblemError("/chart", "missing chart")
    coords = _names(ch.get("coordinates"), "/chart/coordinates", True)
    positive = set(_names(ch.get("positive"), "/chart/positive"))
    params = _names(ch.get("parameters"), "/chart/parameters")
    pos_params = set(_names(ch.get("positive_parameters"), "/chart/positive_parameters"))
    functions = ch.get("functions", {})
    if not isinstance(functions, dict):
        raise ProblemError("/chart/functions", "expected {name: arity}")
    base = Chart.from_names(coords, positive)
    vel = _names(ch.get("velocities"), "/chart/velocities") or None
    mom = _names(ch.get("momenta"), "/chart/momenta") or None
    T0, P0 = base.tangent(vel), base.cotangent(mom)
    symbols = {str(c): c for c in T0.coords + P0.coords}
    for p in params + sorted(pos_params - set(params)):
        if p in symbols:
            raise ProblemError("/chart/parameters", f"parameter {p!r} collides with a coordinate")
        symbols[p] = symbol(p, p in pos_params)
    assumptions = []
    for i, a in enumerate(ch.get("assumptions", [])):
        ptr = f"/chart/assumptions/{i}"
        if not isinstance(a, dict) or "expr" not in a:
            raise ProblemError(ptr, "expected {expr, kind}")
        kind = a.get("kind", "nonzero")
        if kind not in ("nonzero", "positive"):
            raise ProblemError(f"{ptr}/kind", "kind is nonzero or positive")
        assumptions.append(Assumption(_parse(a["expr"], symbols, functions, f"{ptr}/expr"), kind))
    Q = Chart(base.coords, assumptions=tuple(assumptions))
    T, P = Q.tangent(vel), Q.cotangent(mom)
    opts = raw.get("options", {})
    if not isinstance(opts, dict):
        raise ProblemError("/options", "expected an object")
    prob = ProblemFile(path, raw, Q, T, P, symbols, functions, options=dict(opts))
    if "lagrangian" in raw:
        prob.lagrangian = prob.expr(raw["lagrangian"], "/lagrangian")
    if "hamiltonian" in raw:
        prob.hamiltonian = prob.expr(raw["hamiltonian"], "/hamiltonian")
    for i, s in enumerate(raw.get("symmetries", [])):
        if not isinstance(s, dict):
            raise ProblemError(f"/symmetries/{i}", "expected an object")
        if "field" in s:
            prob.field(s["field"], prob.chart_for(s["field"]), f"/symmetries/{i}/field")
        for key in ("gauge", "charge"):
            if key in s:
                prob.expr(s[key], f"/symmetries/{i}/{key}")
    return prob


# ---------------------------------------------------------------------------
# reports


@dataclass
class Report:
    command: str
    problem: str
    results: dict = field(default_factory=dict)
    verdicts: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    failed: list = field(default_factory=list)
    exit_code: int = EXIT_OK

    def verdict(self, name: str, v, mandatory: bool = True):
        status = v.status if isinstance(v, ZeroVerdict) else str(v)
        self.verdicts.append(name)
        if status in ("probably_zero", "probable_member", nt.MODULO_SAMPLING):
            self.warnings.append(f"{name}: certified modulo sampling")
        elif mandatory and status in ("proved_nonzero", "not_member", nt.NOT_CERTIFIED, "fail"):
            self.failed.append(name)

    @property
    def status(self) -> str:
        if self.exit_code == EXIT_NONTERMINATION:
            return "nontermination"
        if self.failed:
            return "failed"
        return "certified-modulo-sampling" if self.warnings else "ok"

    def finish(self):
        if self.exit_code == EXIT_OK and self.failed:
            self.exit_code = EXIT_FAILED
        return self

    def to_dict(self):
        return {"command": self.command, "problem": self.problem, "status": self.status,
                "exit_code": self.exit_code, "warnings": self.warnings, "failed": self.failed,
                "results": self.results}

    def to_text(self) -> str:
        lines = [f"{self.command} {self.problem}: {self.status}"]
        _text(self.results, lines, 1)
        for w in self.warnings:
            lines.append(f"warning: {w}")
        for f in self.failed:
            lines.append(f"FAILED: {f}")
        return "\n".join(lines)


def _text(obj, lines, depth):
    pad = "  " * depth
    if isinstance(obj, dict):
        for k, v in obj.items():
            if isinstance(v, (dict, list)) and v:
                lines.append(f"{pad}{k}:")
                _text(v, lines, depth + 1)
            else:
                lines.append(f"{pad}{k}: {v}")
    elif isinstance(obj, list):
        for v in obj:
            if isinstance(v, (dict, list)):
                lines.append(f"{pad}-")
                _text(v, lines, depth + 1)
            else:
                lines.append(f"{pad}- {v}")
    else:
        lines.append(f"{pad}{obj}")


def _field_dict(X: VectorField) -> dict:
    return {str(c): to_text(e) for c, e in zip(X.chart.coords, X.components) if e != 0}


def _form_dict(w) -> dict:
    names = [str(c) for c in w.chart.coords]
    return {"^".join(names[i] for i in idx): to_text(c) for idx, c in sorted(w.coeffs.items())}


# ---------------------------------------------------------------------------
# commands


def _system(prob: ProblemFile, seed: int) -> lg.LagrangianSystem:
    if prob.lagrangian is None:
        raise ProblemError("/lagrangian", "this command needs a Lagrangian")
    return lg.build(prob.lagrangian, prob.Q, prob.T, seed)


def cmd_analyze(prob, opts, rep: Report):
    sys_ = _system(prob, opts["seed"])
    r = {"regular": sys_.regular, "rank": sys_.rank, "theta_L": _form_dict(sys_.theta),
         "omega_L": _form_dict(sys_.omega), "energy": to_text(sys_.energy)}
    if sys_.warnings:
        rep.warnings.extend(sys_.warnings)
    if sys_.regular:
        r["dynamics"] = _field_dict(sys_.dynamics)
        leg = lg.legendre(sys_, prob.P)
        if leg.solvable:
            r["hamiltonian"] = to_text(leg.hamiltonian)
            rep.verdict("legendre_pullback", leg.pullback_check)
            if prob.hamiltonian is not None:
                v = is_zero(leg.hamiltonian - prob.hamiltonian, seed=opts["seed"],
                            assumptions=prob.Q.assumptions)
                r["hamiltonian_crosscheck"] = v.status
                rep.verdict("hamiltonian_crosscheck", v)
    else:
        k = cons.kernel_decomposition(sys_)
        r["kernel"] = [_field_dict(K) for K in k["kernel"]]
        r["kernel_vertical"] = [_field_dict(K) for K in k["kernel_vertical"]]
        r["type_II"] = k["type_II"]
    rep.results = r


def _candidate(prob, s, i):
    ptr = f"/symmetries/{i}"
    X = prob.field(s["field"], prob.chart_for(s["field"]), f"{ptr}/field")
    kind = s.get("kind", "newtonian" if X.chart is prob.Q else "general")
    if kind == "singular":
        kind = "general"
    if kind not in nt.KINDS:
        raise ProblemError(f"{ptr}/kind", f"unknown kind {kind!r}")
    u = prob.expr(s.get("gauge", "0"), f"{ptr}/gauge")
    return nt.SymmetryCandidate(X, u, kind, s.get("name", f"symmetry_{i}"))


def cmd_noether(prob, opts, rep: Report):
    sys_ = _system(prob, opts["seed"])
    syms = prob.raw.get("symmetries", [])
    out, certs = [], []
    ledger = None
    for i, s in enumerate(syms):
        name = s.get("name", f"symmetry_{i}")
        expect = s.get("expect", "certified")
        if "charge" in s:
            phi = prob.expr(s["charge"], f"/symmetries/{i}/charge")
            try:
                c = nt.inverse_noether(sys_, phi, name)
            except nt.NotInvariant as err:
                d = {"name": name, "verdict": nt.NOT_CERTIFIED, "diagnosis": [str(err)]}
                out.append(d)
                rep.verdict(name, "pass" if expect == nt.NOT_CERTIFIED else nt.NOT_CERTIFIED)
                continue
            cert = nt.check_newtonoid(sys_, c)
        else:
            c = _candidate(prob, s, i)
            if s.get("kind") == "singular" or not sys_.regular:
                if ledger is None:
                    ledger = cons.analyze(sys_, opts["max_iter"])
                cert = nt.check_singular_noether(ledger, c)
            elif c.kind == "newtonoid":
                cert = nt.check_newtonoid(sys_, c)
            else:
                cert = nt.check_newtonian(sys_, c)
        d = cert.to_dict()
        out.append(d)
        if expect == nt.NOT_CERTIFIED:
            rep.verdict(name, "pass" if cert.verdict == nt.NOT_CERTIFIED else "fail")
        else:
            rep.verdict(name, cert.verdict)
            if cert.verdict != nt.NOT_CERTIFIED and sys_.regular:
                certs.append(cert)
    rep.results = {"certificates": out}
    if len(certs) >= 2 and prob.raw.get("options", {}).get("closure", True):
        table = nt.bracket_closure(sys_, certs)
        rep.results["closure"] = table.to_dict()
        for a, b, v in table.identities:
            rep.verdict(f"closure_identity_{a}_{b}", v)


def cmd_constrain(prob, opts, rep: Report):
    sys_ = _system(prob, opts["seed"])
    try:
        ledger = cons.analyze(sys_, opts["max_iter"])
    except cons.NoFixedPoint as err:
        rep.exit_code = EXIT_NONTERMINATION
        rep.results = {"error": str(err), "ledger": err.ledger.to_dict() if err.ledger else None}
        return
    except cons.Inconsistent as err:
        rep.results = {"error": str(err), "ledger": err.ledger.to_dict() if err.ledger else None}
        rep.verdict("consistency", "fail")
        return
    r = ledger.to_dict()
    for name, st in ledger.lifted_tangency.items():
        rep.verdict(f"lifted_{name}_tangent", st)
    if ledger.cotangent is not None:
        for name, v in cons.bridge_relations(ledger).items():
            rep.verdict(f"bridge_{name}", v)
    sec = prob.raw.get("constraints", {}).get("section")
    if sec:
        D = prob.field(sec["solution"], prob.T, "/constraints/section/solution")
        Y = prob.field(sec["projected"], prob.chart_for(sec["projected"]), "/constraints/section/projected")
        try:
            s = cons.second_order_section(ledger, D, Y)
            r["section"] = {"section": {str(k): to_text(v) for k, v in s["section"].items()},
                            "lifted": _field_dict(s["lifted"]), "checks": s["checks"]}
            for k, v in s["checks"].items():
                rep.verdict(f"section_{k}", v)
        except cons.NotProjectable as err:
            r["section"] = {"error": str(err)}
            rep.verdict("section_projectable", "fail")
    rep.results = r


def _rules(prob, section, ptr):
    rules = {}
    for name, rd in (section or {}).items():
        var = rd.get("variable", "s")
        local = dict(prob.symbols)
        sv = sp.Symbol(var, real=True)
        local[var] = sv
        body = _parse(rd["derivative"], local, prob.functions, f"{ptr}/{name}/derivative")
        rules[name] = sp.Lambda(sv, body)
    return rules


def cmd_hj(prob, opts, rep: Report):
    seed = opts["seed"]
    section = prob.raw.get("hj")
    if not isinstance(section, dict):
        raise ProblemError("/hj", "missing hj section")
    H = prob.hamiltonian
    if H is None:
        raise ProblemError("/hamiltonian", "the hj command needs a Hamiltonian")
    P = prob.P
    funcs = dict(prob.functions)
    out = {}
    cands = []
    for i, c in enumerate(section.get("candidates", [])):
        ptr = f"/hj/candidates/{i}"
        rules = _rules(prob, c.get("rules"), f"{ptr}/rules")
        funcs.update({r: 1 for r in rules})
        symbols = prob.symbols
        W = _parse(c["W"], symbols, funcs, f"{ptr}/W")
        params = tuple(symbols[p] for p in _names(c.get("parameters"), f"{ptr}/parameters"))
        E = _parse(c.get("energy", "E"), symbols, funcs, f"{ptr}/energy")
        asm = tuple(Assumption(_parse(a["expr"], symbols, funcs, f"{ptr}/assumptions/{j}"),
                               a.get("kind", "nonzero")) for j, a in enumerate(c.get("assumptions", [])))
        cand = hj.HJCandidate(prob.Q, W, params, E, asm,
                              {sp.Function(k, real=True): v for k, v in rules.items()})
        cert = hj.complete_integral_check(H, cand, P, seed)
        name = c.get("name", f"candidate_{i}")
        d = {"name": name, **cert.to_dict()}
        if cert.certified and "values" in c:
            vals = {symbols[k]: sp.nsimplify(v) for k, v in c["values"].items()}
            base, mom = hj.characteristics(H, cand, vals, P, seed)
            d["characteristics"] = {"base": _field_dict(base),
                                    "momenta": {str(k): to_text(v) for k, v in mom.items()}}
        cands.append(d)
        for k, v in cert.checks.items():
            if k == "transversality":
                rep.verdict(f"{name}_{k}", "ok" if v.nonzero else "fail")
            else:
                rep.verdict(f"{name}_{k}", v)
    out["candidates"] = cands
    syms = []
    for i, s in enumerate(section.get("symmetries", [])):
        ptr = f"/hj/symmetries/{i}"
        X0 = prob.field(s["field"], prob.Q, f"{ptr}/field")
        f = prob.expr(s.get("f", "0"), f"{ptr}/f")
        cert = hj.check_hj_symmetry(H, X0, f, P, seed)
        name = s.get("name", f"symmetry_{i}")
        syms.append({"name": name, **cert.to_dict()})
        rep.verdict(f"{name}_conserved", cert.conserved)
        rep.verdict(f"{name}_hamiltonian", cert.hamiltonian)
    out["symmetries"] = syms
    gens = []
    for i, g in enumerate(section.get("generalized", [])):
        ptr = f"/hj/generalized/{i}"
        E = prob.expr(g.get("energy", "E"), f"{ptr}/energy")
        levels = [prob.expr(x, f"{ptr}/levels/{j}") for j, x in enumerate(g.get("levels", []))]
        comm = [prob.expr(x, f"{ptr}/commutants/{j}") for j, x in enumerate(g.get("commutants", []))]
        cert = hj.generalized_hj_check(H, E, levels, comm, P, seed)
        name = g.get("name", f"generalized_{i}")
        gens.append({"name": name, **cert.to_dict()})
        rep.verdict(f"{name}_lagrangian", "ok" if cert.lagrangian else "fail")
        for j, v in enumerate(cert.commutants):
            rep.verdict(f"{name}_commutant_{j}", v)
    out["generalized"] = gens
    reds = []
    for i, c in enumerate(section.get("cyclic", [])):
        ptr = f"/hj/cyclic/{i}"
        X0 = prob.field(c["field"], prob.Q, f"{ptr}/field")
        adapted = _names(c.get("adapted"), f"{ptr}/adapted", True)
        local = dict(prob.symbols)
        local.update({n: sp.Symbol(n, real=True) for n in adapted})
        extra = c.get("assumptions", [])
        asm = tuple(Assumption(_parse(a["expr"], local, funcs, f"{ptr}/assumptions/{j}"),
                               a.get("kind", "nonzero")) for j, a in enumerate(extra))
        C = Chart(tuple(local[n] for n in adapted), assumptions=asm)
        mp = {prob.Q[k]: _parse(v, local, funcs, f"{ptr}/map/{k}") for k, v in c["map"].items()}
        k = local.get(c.get("k", "k")) or sp.Symbol(c.get("k", "k"), real=True)
        name = c.get("name", f"cyclic_{i}")
        try:
            red = hj.separate_cyclic(H, P, X0, C, mp, k, seed=seed)
        except hj.NotAdapted as err:
            reds.append({"name": name, "error": str(err)})
            rep.verdict(f"{name}_adapted", "fail")
            continue
        Wt = sp.Function("Wt", real=True)(C.coords[1])
        rc = hj.recomposition_check(H, P, red, Wt, sp.Symbol("E", real=True), seed=seed)
        d = {"name": name, "H_adapted": to_text(red.H_adapted), "H_reduced": to_text(red.H_reduced),
             "recomposition": rc.status}
        rep.verdict(f"{name}_recomposition", rc)
        if "expected" in c:
            lp = dict(local)
            lp.update({str(m): m for m in red.cotangent.coords})
            exp = _parse(c["expected"], lp, funcs, f"{ptr}/expected")
            v = is_zero(red.H_reduced - exp, seed=seed, assumptions=asm)
            d["matches_expected"] = v.status
            rep.verdict(f"{name}_expected", v)
        reds.append(d)
    out["cyclic"] = reds
    rep.results = out


def cmd_integrate(prob, opts, rep: Report):
    reqs = prob.raw.get("integrate", [])
    if not reqs:
        raise ProblemError("/integrate", "no integration requests")
    sys_ = None
    out = []
    first = None
    for i, r in enumerate(reqs):
        ptr = f"/integrate/{i}"
        name = r.get("name", f"run_{i}")
        binds = {prob.symbols[k]: sp.nsimplify(v) for k, v in r.get("bindings", {}).items()}
        if r.get("kind") == "principal":
            if sys_ is None:
                sys_ = _system(prob, opts["seed"])
            s = sys_
            if binds:
                s = lg.build(prob.lagrangian.subs(binds), prob.Q, prob.T, opts["seed"])
            S = prob.expr(r["S"], f"{ptr}/S")
            q0, q1, t1 = r["q0"], r["q1"], float(r["t"])
            bind = dict(binds)
            bind.update({prob.symbols[k]: sp.nsimplify(v) for k, v in r.get("S_bindings", {}).items()})
            res = ni.principal_function_check(s, q0, q1, t1, S, bind)
            ok = res["residual"] < float(r.get("tolerance", 1e-8))
            out.append({"name": name, **res, "pass": ok})
            rep.verdict(name, "ok" if ok else "fail")
            continue
        fld = r.get("field", "dynamics")
        if fld == "dynamics":
            if sys_ is None:
                sys_ = _system(prob, opts["seed"])
            X = sys_.dynamics
        else:
            X = prob.field(fld, prob.chart_for(fld), f"{ptr}/field")
        if binds:
            X = X.subs(binds)
        tol = float(opts.get("tol") or r.get("tol", 1e-10))
        try:
            traj = ni.integrate(X, r["x0"], r["t_span"], tol=tol, seed=opts["seed"])
        except ni.SingularRegion as err:
            out.append({"name": name, "error": str(err)})
            rep.verdict(name, "fail")
            continue
        if first is None:
            first = traj
        qs = {k: prob.expr(v, f"{ptr}/quantities/{k}").subs(binds)
              for k, v in r.get("quantities", {}).items()}
        drift = ni.verify_along(traj, qs)
        limit = float(r.get("drift_tol", 100 * tol))
        d = {"name": name, "steps": len(traj.t) - 1, "final": [float(x) for x in traj.final],
             "drift": drift, "drift_tol": limit}
        if "expect_final" in r:
            err = max(abs(a - float(b)) for a, b in zip(traj.final, r["expect_final"]))
            d["final_error"] = err
            rep.verdict(f"{name}_final", "ok" if err < float(r.get("final_tol", 1e-8)) else "fail")
        out.append(d)
        for k, v in drift.items():
            rep.verdict(f"{name}_{k}", "ok" if v < limit else "fail")
    if opts.get("export_csv") and first is not None:
        first.to_csv(opts["export_csv"])
    rep.results = {"runs": out}


DISPATCH = {"analyze": cmd_analyze, "noether": cmd_noether, "constrain": cmd_constrain,
            "hj": cmd_hj, "integrate": cmd_integrate}


def run(command: str, prob: ProblemFile, options: dict | None = None) -> Report:
    if command not in COMMANDS:
        raise ProblemError("", f"unknown command {command!r}")
    o = dict(prob.options)
    o.update({k: v for k, v in (options or {}).items() if v is not None})
    o.setdefault("seed", DEFAULT_SEED)
    o.setdefault("max_iter", o.get("max_iterations", cons.MAX_ITERATIONS))
    rep = Report(command, Path(prob.path).name)
    DISPATCH[command](prob, o, rep)
    return rep.finish()


def _emit(rep: Report, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(rep.to_dict(), indent=2, sort_keys=True)
    return rep.to_text()


def _run_file(args):
    path, command, options, fmt = args
    try:
        prob = load(path)
        cmd = command or prob.options.get("command", "analyze")
        rep = run(cmd, prob, options)
        return _emit(rep, fmt), rep.exit_code
    except ProblemError as err:
        return f"{path}: error: {err}", EXIT_USAGE


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="geomech", description=__doc__.splitlines()[0])
    p.add_argument("command", nargs="?", choices=COMMANDS)
    p.add_argument("problem", nargs="?", help="problem file (JSON)")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--seed", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", type=int, dest="max_iter")
    p.add_argument("--export-csv", dest="export_csv")
    p.add_argument("--all", dest="all_dir", help="run every *.json in a directory")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    options = {"seed": args.seed, "tol": args.tol, "max_iter": args.max_iter,
               "export_csv": args.export_csv}
    if args.all_dir:
        files = sorted(Path(args.all_dir).glob("*.json"))
        jobs = [(str(f), args.command, options, args.format) for f in files]
        with ProcessPoolExecutor() as ex:
            results = list(ex.map(_run_file, jobs))
        for text, _ in results:
            print(text)
        return max((c for _, c in results), default=EXIT_OK)
    if not args.command or not args.problem:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    text, code = _run_file((args.problem, args.command, options, args.format))
    print(text, file=sys.stderr if code == EXIT_USAGE else sys.stdout)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
