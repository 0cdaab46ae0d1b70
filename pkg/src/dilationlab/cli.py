"""Command-line entry point.

Exit codes: 0 on success, 1 when a validation or paperlab check fails, 2 on usage
errors (bad flags, unreadable or malformed input files).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, fields

import numpy as np

from . import __version__
from .numkernel import NotContractiveError, round12

SCHEMAS = {
    "relation": 'permutation: {"m":2,"n":2,"theta":[[[1,1],[1,1]], [[1,2],[2,1]], ...]} '
                'or unitary: {"m":2,"n":2,"u":[[[re,im], ...], ...]} (rows and columns (i,j) in lexicographic order)',
    "rep": '{"rel": <relation>, "d": 5, "E": [matrix, ...], "F": [matrix, ...]} with matrix = [[[re,im], ...], ...]',
    "atomic": '{"rel": <permutation relation>, "vertices": [...], "e": [[[src, dst, [re,im]], ...], ...], "f": [...]}',
    "poly": '[{"coeff": [[[re,im], ...], ...], "word": "e1 f2"}, ...]',
    "row": '{"A": [matrix, ...]} or a representation file (its e_i f_j products are used)',
    "config": '{"tau_rel": 1e-9, "tau_unitary": 1e-10, "tau_int": 1e-9, "max_depth": 8, "max_basis": 200000, '
              '"output": "json"}',
}


class UsageError(Exception):
    pass


@dataclass
class Config:
    tau_rel: float = 1e-9
    tau_unitary: float = 1e-10
    tau_int: float = 1e-9
    max_depth: int = 8
    max_basis: int = 200_000
    output: str = "json"

    def __post_init__(self):
        for name in ("tau_rel", "tau_unitary", "tau_int"):
            if not getattr(self, name) > 0:
                raise UsageError(f"config: {name} must be positive")
        for name in ("max_depth", "max_basis"):
            if not int(getattr(self, name)) > 0:
                raise UsageError(f"config: {name} must be positive")
        if self.output not in ("json", "text"):
            raise UsageError("config: output must be 'json' or 'text'")

    @classmethod
    def load(cls, path: str | None) -> "Config":
        if path is None:
            return cls()
        data = _read_json(path, "config")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise UsageError(f"config: unknown keys {sorted(unknown)}\nschema: {SCHEMAS['config']}")
        try:
            return cls(**data)
        except (TypeError, ValueError) as exc:
            raise UsageError(f"config: {exc}") from exc


def _dumps(obj) -> str:
    return json.dumps(round12(obj), indent=1)


def _read_json(path: str, kind: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {kind} file {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON ({exc})\nschema: {SCHEMAS[kind]}") from exc


def _parse(kind: str, path: str, loader):
    data = _read_json(path, kind)
    try:
        return loader(data)
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise UsageError(f"{path} does not match the {kind} schema ({exc})\nschema: {SCHEMAS[kind]}") from exc


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        with open(out, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")


def _load_relation(path: str, cfg: Config):
    from .urelations import UnitaryRelation
    return _parse("relation", path, lambda d: UnitaryRelation.from_json(d, tol=cfg.tau_unitary))


def _load_rep(path: str, cfg: Config):
    from .reps import FiniteRep
    return _parse("rep", path, lambda d: FiniteRep.from_json(d, tol=np.inf))


# --- subcommands --------------------------------------------------------------------


def cmd_normalize(args, cfg: Config) -> int:
    from .semigroup import normalize, parse_word
    from .stara import format_coeff, reduce
    from .urelations import normal_terms
    rel = _load_relation(args.theta, cfg)
    try:
        if args.star:
            print(reduce(rel, args.word))
            return 0
        letters = parse_word(args.word)
        if rel.perm is not None:
            print(normalize(rel.perm, letters))
        else:
            terms = normal_terms(rel, letters)
            print(" + ".join(f"{format_coeff(c)} [{w}]" for w, c in terms) or "0")
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return 0


def cmd_classify(args, cfg: Config) -> int:
    from .semigroup import classify
    try:
        classes = classify(args.m, args.n)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if args.json:
        print(_dumps([{"size": len(c), "representative": c[0].to_json()} for c in classes]))
        return 0
    print(f"{len(classes)} classes of {sum(len(c) for c in classes)} permutations")
    for k, c in enumerate(classes, 1):
        rep = c[0]
        moved = [f"({i},{j})->{rep.theta(i, j)[0]},{rep.theta(i, j)[1]}"
                 for i in range(1, args.m + 1) for j in range(1, args.n + 1) if rep.theta(i, j) != (i, j)]
        print(f"class {k} size {len(c)}: {' '.join(moved) if moved else 'identity'}")
    return 0


def cmd_validate(args, cfg: Config) -> int:
    from .reps import validate
    rep = _load_rep(args.rep, cfg)
    tol = args.tol if args.tol is not None else cfg.tau_rel
    report = validate(rep, tol)
    print(_dumps(report.to_json()))
    ok = report.is_representation and (report.row_contractive or not args.require_contractive)
    return 0 if ok else 1


def _load_row(path: str, cfg: Config):
    from .numkernel import cmatrix
    from .reps import FiniteRep, matrix_from_json

    def loader(d):
        if "A" in d:
            return [cmatrix(matrix_from_json(a)) for a in d["A"]]
        rep = FiniteRep.from_json(d, tol=np.inf)
        return [a @ b for a in rep.E for b in rep.F]
    return _parse("row", path, loader)


def cmd_dilate(args, cfg: Config) -> int:
    from . import dilation
    from .reps import AtomicRep
    if args.depth < 0 or args.depth > cfg.max_depth:
        raise UsageError(f"--depth must lie in 0..{cfg.max_depth}")
    try:
        if args.mode == "fbp":
            out = dilation.fbp_dilate(_load_row(args.rep, cfg), args.depth, tol=cfg.tau_rel).to_json()
        elif args.mode == "solel":
            out = dilation.solel_dilate(_load_rep(args.rep, cfg), args.depth, tol=cfg.tau_rel).to_json()
        elif args.mode == "star":
            rep = _load_rep(args.rep, cfg)
            chain = dilation.star_dilate_defect_free(rep, args.depth, strict=not args.force, tol=cfg.tau_int)
            out = chain.compressed().to_json()
            out.update({"mode": "star", "depth": args.depth, "diagnostics": chain.diagnostics(),
                        "v_residuals": [chain.v_residual(s) for s in range(args.depth + 1)]})
        else:
            a = _parse("atomic", args.rep, AtomicRep.from_json)
            dil = dilation.atomic_star_dilate(a, args.depth)
            out = dil.graph.to_json()
            out.update({"mode": "atomic", "depth": args.depth, "interior": list(dil.interior),
                        "original": {str(k): v for k, v in dil.original.items()}})
    except NotContractiveError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        if args.mode in ("star", "atomic"):
            print(f"error: {exc}", file=sys.stderr)
            return 1
        raise UsageError(str(exc)) from exc
    _emit(_dumps(out), args.out)
    diag = out.get("diagnostics", {})
    if diag:
        print(_dumps(diag), file=sys.stderr)
    return 0


def cmd_norm(args, cfg: Config) -> int:
    from .fock import MatPoly, basis_size, norm_lower_seq
    rel = _load_relation(args.theta, cfg)
    poly = _parse("poly", args.poly, lambda d: MatPoly.from_json(d, rel))
    start = max(1, *poly.max_degree) if args.start is None else args.start
    if args.max_cutoff < start:
        raise UsageError(f"--max-cutoff must be at least {start}")
    if basis_size(rel.m, rel.n, args.max_cutoff, args.max_cutoff) > _basis_limit(cfg):
        raise UsageError("requested cutoff exceeds the basis-size limit (DILATIONLAB_MAX_BASIS)")
    try:
        seq = norm_lower_seq(rel, poly, args.max_cutoff, start=start)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    lines = ["cutoff,lower_bound"]
    lines += [f"{c},{v:.12g}" for c, v in zip(range(start, args.max_cutoff + 1), seq)]
    _emit("\n".join(lines), args.out)
    return 0


def _basis_limit(cfg: Config) -> int:
    from .fock import max_basis
    return max_basis() if os.environ.get("DILATIONLAB_MAX_BASIS") else cfg.max_basis


def cmd_paperlab(args, cfg: Config) -> int:
    from .paperlab import RUNS, run_all
    if args.only is not None and args.only not in RUNS:
        raise UsageError(f"unknown example {args.only!r}; choose from {', '.join(RUNS)}")
    reports = sorted(run_all(args.only), key=lambda r: r.example)
    fmt = args.format or cfg.output
    if fmt == "json":
        print(_dumps([r.to_json() for r in reports]))
    else:
        print("\n".join(r.to_text() for r in reports))
    return 0 if all(r.passed for r in reports) else 1


def cmd_tail_rep(args, cfg: Config) -> int:
    from .reps import Tail, interior_residuals, tail_rep
    rel = _load_relation(args.theta, cfg)
    try:
        tail = Tail.parse(args.prefix, args.cycle)
        tr = tail_rep(rel, tail, args.depth, args.cutoff)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    out = tr.rep.to_json()
    out.update({"tail": tail.to_json(), "top": tr.top, "cutoff": tr.cutoff,
                "labels": [[s, str(w)] for s, w in tr.labels],
                "interior_dim": int(tr.interior.shape[1]),
                "interior_residuals": interior_residuals(tr)})
    _emit(_dumps(out), args.out)
    return 0


def cmd_atomic(args, cfg: Config) -> int:
    from .reps import AtomicRep, graph_defect_free, random_defect_free_atomic, to_dot
    from .semigroup import PermRelation
    if args.random is not None:
        if args.theta is None:
            raise UsageError("--random needs --theta")
        rel = _parse("relation", args.theta, PermRelation.from_json)
        a = random_defect_free_atomic(rel, args.random, np.random.default_rng(args.seed))
    elif args.graph is not None:
        a = _parse("atomic", args.graph, AtomicRep.from_json)
    else:
        raise UsageError("give --graph FILE or --random D")
    if args.json:
        _emit(_dumps(a.to_json()), args.out)
    else:
        _emit(to_dot(a), args.out)
    if args.check_defect_free and not graph_defect_free(a):
        print("graph is not defect free", file=sys.stderr)
        return 1
    return 0


# --- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    # shared options are accepted before or after the subcommand name
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="JSON file with tolerances and limits")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="seed for randomized commands (never used by paperlab)")
    p = argparse.ArgumentParser(prog="dilationlab", description="Dilations of rank-2 graph semigroups.",
                                parents=[common])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("normalize", help="normal form of a word, or of a *-word with --star", parents=[common])
    s.add_argument("--theta", required=True, help="relation JSON (permutation or unitary)")
    s.add_argument("--word", required=True, help='e.g. "f2 e1", or with --star "e1* f2 e1 f1*"')
    s.add_argument("--star", action="store_true")
    s.set_defaults(func=cmd_normalize)

    s = sub.add_parser("classify", help="isomorphism classes of permutation relations", parents=[common])
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_classify)

    s = sub.add_parser("validate-rep", help="check a finite representation", parents=[common])
    s.add_argument("--rep", required=True)
    s.add_argument("--tol", type=float)
    s.add_argument("--require-contractive", action="store_true", help="also fail when not row contractive")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("dilate", help="build a dilation", parents=[common])
    s.add_argument("--rep", required=True)
    s.add_argument("--mode", choices=["fbp", "solel", "star", "atomic"], required=True)
    s.add_argument("--depth", type=int, required=True)
    s.add_argument("--out")
    s.add_argument("--force", action="store_true", help="star mode: accept inputs that are not defect free")
    s.set_defaults(func=cmd_dilate)

    s = sub.add_parser("norm", help="Fock-space lower bounds for a matrix polynomial (CSV)", parents=[common])
    s.add_argument("--theta", required=True)
    s.add_argument("--poly", required=True)
    s.add_argument("--max-cutoff", type=int, required=True)
    s.add_argument("--start", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_norm)

    s = sub.add_parser("paperlab", help="run the worked-example reproductions", parents=[common])
    s.add_argument("--only")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--json", dest="format", action="store_const", const="json")
    g.add_argument("--text", dest="format", action="store_const", const="text")
    s.set_defaults(func=cmd_paperlab)

    s = sub.add_parser("tail-rep", help="truncated tail representation", parents=[common])
    s.add_argument("--theta", required=True)
    s.add_argument("--prefix", default="", help='blocks such as "1,2 2,1"')
    s.add_argument("--cycle", required=True, help='repeating blocks such as "1,1"')
    s.add_argument("--depth", type=int, required=True)
    s.add_argument("--cutoff", type=int, required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_tail_rep)

    s = sub.add_parser("atomic", help="DOT (or JSON) for an atomic representation", parents=[common])
    s.add_argument("--graph")
    s.add_argument("--random", type=int, metavar="D", help="random defect-free graph on D vertices")
    s.add_argument("--theta")
    s.add_argument("--json", action="store_true")
    s.add_argument("--check-defect-free", action="store_true")
    s.add_argument("--out")
    s.set_defaults(func=cmd_atomic)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    set_env = False
    try:
        args.config = getattr(args, "config", None)
        args.seed = getattr(args, "seed", 0)
        cfg = Config.load(args.config)
        # the environment variable wins over the config file
        if args.config is not None and "DILATIONLAB_MAX_BASIS" not in os.environ:
            os.environ["DILATIONLAB_MAX_BASIS"] = str(cfg.max_basis)
            set_env = True
        return args.func(args, cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    finally:
        if set_env:
            os.environ.pop("DILATIONLAB_MAX_BASIS", None)


if __name__ == "__main__":
    sys.exit(main())
