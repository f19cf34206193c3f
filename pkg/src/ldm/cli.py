"""``ldm`` command-line front end.

Exit codes: 0 success or equivalent, 1 type error or distinct, 2 parse or
input error, 3 fuel exhausted, 4 evaluation stuck or ill-formed.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import eval_mixed as em
from . import eval_prob as ep
from . import matrix as mx
from .denotation import DenotationError, FunctionDenotation, fsem, interp
from .parser import ParseError, detect_calculus, parse
from .printer import print_term
from .syntax import CALCULI, MIXED, PROB, SyntaxError_
from .typecheck import TypeCheckError, infer, is_base

EXIT_OK, EXIT_TYPE, EXIT_PARSE, EXIT_FUEL, EXIT_STUCK = 0, 1, 2, 3, 4


@dataclass(frozen=True)
class RunConfig:
    calculus: str | None = None
    tolerance: float = mx.DEFAULT_TOLERANCE
    fuel: int = 10_000
    seed: int | None = None
    output: str = "text"
    merge: bool = True

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.fuel <= 0:
            raise ValueError("fuel must be positive")
        if self.calculus is not None and self.calculus not in CALCULI:
            raise ValueError(f"unknown calculus {self.calculus!r}")


class CliError(Exception):
    def __init__(self, code: int, message: str, payload: dict | None = None):
        super().__init__(message)
        self.code = code
        self.payload = payload or {"error": message}


# -- formatting ---------------------------------------------------------------

def fmt_num(x: float) -> str:
    return format(float(x), ".12g")


def fmt_complex(z: complex) -> str:
    re, im = float(z.real), float(z.imag)
    if abs(im) < 1e-15:
        return fmt_num(re + 0.0)
    if abs(re) < 1e-15:
        return f"{fmt_num(im)}i"
    return f"{fmt_num(re)}{'+' if im >= 0 else '-'}{fmt_num(abs(im))}i"


def fmt_matrix(m: np.ndarray) -> str:
    cells = [[fmt_complex(z) for z in row] for row in m]
    width = max(len(c) for row in cells for c in row)
    return "\n".join("[ " + "  ".join(c.rjust(width) for c in row) + " ]" for row in cells)


def matrix_json(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def _emit(cfg: RunConfig, text: str, payload):
    if cfg.output == "json":
        print(json.dumps(payload, indent=2))
    else:
        print(text)


# -- loading ----------------------------------------------------------------------

def load(path: str, cfg: RunConfig):
    """Parse and typecheck ``path``; returns ``(term, type, calculus)``."""
    try:
        src = Path(path).read_text()
    except OSError as e:
        raise CliError(EXIT_PARSE, f"{path}: {e.strerror}") from None
    calculus = detect_calculus(src) or cfg.calculus or PROB
    try:
        t = parse(src, calculus)
    except ParseError as e:
        raise CliError(EXIT_PARSE, f"{path}:{e}", {
            "error": "ParseError", "message": e.detail, "line": e.line, "col": e.col,
        }) from None
    except SyntaxError_ as e:
        raise CliError(EXIT_PARSE, f"{path}: {e}", {"error": type(e).__name__, "message": str(e)}) from None
    try:
        ty = infer({}, t, calculus)
    except TypeCheckError as e:
        raise CliError(EXIT_TYPE, f"{path}: {e.code}: {e}", e.as_dict()) from None
    return t, ty, calculus


# -- commands ---------------------------------------------------------------------

def cmd_typecheck(path: str, cfg: RunConfig) -> int:
    t, ty, calculus = load(path, cfg)
    _emit(cfg, str(ty), {"ok": True, "calculus": calculus, "type": str(ty)})
    return EXIT_OK


def cmd_run(path: str, cfg: RunConfig) -> int:
    t, ty, calculus = load(path, cfg)
    if calculus == MIXED:
        return _run_mixed(t, ty, cfg)
    if cfg.seed is not None:
        try:
            leaf = ep.sample_run(t, cfg.seed, cfg.fuel)
        except ep.FuelExhausted as e:
            raise CliError(EXIT_FUEL, str(e)) from None
        _emit(cfg, print_term(leaf), {"seed": cfg.seed, "result": print_term(leaf)})
        return EXIT_OK
    tree = ep.build_trace(t, cfg.fuel, with_types=False)
    if any(leaf.exhausted for _, leaf in tree.leaves()):
        raise CliError(EXIT_FUEL, f"fuel exhausted after {cfg.fuel} steps on some branch")
    dist = ep.final_distribution(tree)
    lines = ["distribution:"]
    lines += [f"  {fmt_num(p)}  {print_term(r)}" for p, r in dist]
    payload = {"type": str(ty), "distribution": [{"prob": p, "term": print_term(r)} for p, r in dist]}
    try:
        rho = ep.distribution_density(dist)
    except (ep.NonDensityLeaf, ep.MixedDimensions):
        rho = None
    if rho is not None:
        lines += ["density:", fmt_matrix(rho.mat)]
        payload["density"] = {"n": rho.n, "entries": matrix_json(rho.mat)}
    stuck = [r for _, r in dist if not ep.is_value(r)]
    _emit(cfg, "\n".join(lines), payload)
    if stuck:
        print(f"stuck: {print_term(stuck[0])}", file=sys.stderr)
        return EXIT_STUCK
    return EXIT_OK


def _run_mixed(t, ty, cfg):
    try:
        nf = em.normalize_mixed(t, cfg.fuel)
    except ep.FuelExhausted as e:
        raise CliError(EXIT_FUEL, str(e)) from None
    res = em.step_mixed(nf)
    payload = {"type": str(ty), "result": print_term(nf)}
    lines = [print_term(nf)]
    if isinstance(nf, em.Rho):
        lines += ["density:", fmt_matrix(nf.rho.mat)]
        payload["density"] = {"n": nf.rho.n, "entries": matrix_json(nf.rho.mat)}
    if isinstance(res, em.Stuck):
        payload["stuck"] = res.reason
        _emit(cfg, "\n".join(lines), payload)
        where = "" if res.subterm is None else f" at {print_term(res.subterm)}"
        print(f"stuck: {res.reason}{where}", file=sys.stderr)
        return EXIT_STUCK
    _emit(cfg, "\n".join(lines), payload)
    return EXIT_OK


def cmd_trace(path: str, cfg: RunConfig) -> int:
    t, _, calculus = load(path, cfg)
    if calculus == MIXED:
        code = EXIT_OK
        try:
            for line in em.step_log(t, cfg.fuel):
                if cfg.output == "json":
                    print(line)
                else:
                    rec = json.loads(line)
                    print(f"{rec['step']:>4} {rec['rule'] or 'start':<14} {rec['term']}")
        except ep.FuelExhausted as e:
            print(f"fuel exhausted: {e}", file=sys.stderr)
            code = EXIT_FUEL
        return code
    tree = ep.build_trace(t, cfg.fuel)
    match cfg.output:
        case "json":
            print(json.dumps(tree.to_json(), indent=2))
        case "dot":
            print(tree.to_dot())
        case _:
            print(tree.to_text())
    if any(leaf.exhausted for _, leaf in tree.leaves()):
        return EXIT_FUEL
    return EXIT_OK


def cmd_denote(path: str, cfg: RunConfig) -> int:
    t, ty, _ = load(path, cfg)
    s = interp(t, merge=cfg.merge)
    lines = [f"type: {ty}", "triplets:"]
    for tr in s:
        tag = "eps" if tr.b is None else str(tr.b)
        elem = tr.e.describe() if hasattr(tr.e, "describe") else print_term(em.Rho(tr.e.rho))
        lines.append(f"  ({fmt_num(tr.p)}, {tag}, {elem})")
    payload = {"type": str(ty), "triplets": s.to_json()}
    v = fsem(t)
    if isinstance(v, FunctionDenotation):
        lines.append("density: none (the term denotes a function)")
        payload["density"] = None
    else:
        lines += ["density:", fmt_matrix(v.mat)]
        payload["density"] = {"n": v.n, "entries": matrix_json(v.mat)}
    _emit(cfg, "\n".join(lines), payload)
    return EXIT_OK


def cmd_equiv(path_a: str, path_b: str, cfg: RunConfig) -> int:
    ta, tya, _ = load(path_a, cfg)
    tb, tyb, _ = load(path_b, cfg)
    if tya != tyb:
        raise CliError(EXIT_TYPE, f"type mismatch: {tya} vs {tyb}",
                       {"error": "TypeMismatch", "expected": str(tya), "actual": str(tyb)})
    if not is_base(tya):
        raise CliError(EXIT_TYPE, f"equivalence needs a base type, got {tya}",
                       {"error": "TypeMismatch", "expected": "base type", "actual": str(tya)})
    ma, mb = fsem(ta).mat, fsem(tb).mat
    dev = mx.max_deviation(ma, mb)
    ok = dev <= cfg.tolerance
    verdict = "EQUIVALENT" if ok else "DISTINCT"
    _emit(cfg, f"{verdict} (max deviation {fmt_num(dev)})",
          {"verdict": verdict, "max_deviation": dev, "type": str(tya)})
    return EXIT_OK if ok else EXIT_TYPE


# -- entry point ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ldm", description="Density-matrix lambda calculi toolkit.")
    p.add_argument("command", choices=["typecheck", "run", "trace", "denote", "equiv"])
    p.add_argument("files", nargs="+", metavar="file")
    p.add_argument("--calculus", choices=list(CALCULI))
    p.add_argument("--fuel", type=int, default=10_000)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--output", choices=["text", "json", "dot"], default="text")
    p.add_argument("--no-merge", action="store_true",
                   help="denote: keep triplets with equal tag and matrix apart")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    want = 2 if args.command == "equiv" else 1
    if len(args.files) != want:
        print(f"ldm {args.command}: expected {want} file(s)", file=sys.stderr)
        return EXIT_PARSE
    try:
        cfg = RunConfig(args.calculus, args.tol or mx.get_tolerance(), args.fuel, args.seed, args.output,
                        not args.no_merge)
    except ValueError as e:
        print(f"ldm: {e}", file=sys.stderr)
        return EXIT_PARSE
    previous = mx.get_tolerance()
    mx.set_tolerance(cfg.tolerance)
    try:
        match args.command:
            case "typecheck":
                return cmd_typecheck(args.files[0], cfg)
            case "run":
                return cmd_run(args.files[0], cfg)
            case "trace":
                return cmd_trace(args.files[0], cfg)
            case "denote":
                return cmd_denote(args.files[0], cfg)
            case "equiv":
                return cmd_equiv(args.files[0], args.files[1], cfg)
    except CliError as e:
        if cfg.output == "json":
            print(json.dumps(e.payload, indent=2))
        print(str(e), file=sys.stderr)
        return e.code
    except (ep.IllFormedRedex, DenotationError, em.StuckTerm) as e:
        print(f"ldm: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_STUCK
    finally:
        mx.set_tolerance(previous)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
