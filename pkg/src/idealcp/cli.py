"""Command-line interface: ``idealcp {cliques,screen,decompose,gen,bench}``.

Exit codes: 0 success or completely positive, 2 input error, 3 not
completely positive (or screen failure), 4 inconclusive, 5 internal error.

Environment overrides (used when the matching flag is absent):
``IDEALCP_LEVEL``, ``IDEALCP_MAX_LEVEL``, ``IDEALCP_SEED``,
``IDEALCP_TOL_RANK``, ``IDEALCP_TOL_RECON``, ``IDEALCP_JOBS``,
``IDEALCP_FORMAT``.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import io
from .bench import PRESETS, format_report, run_suite, strip_timings
from .cliques import maximal_cliques, necessary_condition
from .decompose import DecomposeOptions, VerdictKind, certificate_to_dict, decompose, verdict_to_dict
from .errors import IdealCPError, ParseError
from .moments import assemble_sparse, random_sos_objective
from .tensor import dominance_violations, random_binary_sparse, random_cp

EXIT_OK, EXIT_INPUT, EXIT_NOT_CP, EXIT_INCONCLUSIVE, EXIT_INTERNAL = 0, 2, 3, 4, 5
EXIT_BY_VERDICT = {VerdictKind.CP: EXIT_OK, VerdictKind.NOT_CP: EXIT_NOT_CP,
                   VerdictKind.INCONCLUSIVE: EXIT_INCONCLUSIVE}


def _env(name, cast):
    raw = os.environ.get(f"IDEALCP_{name}")
    return None if raw in (None, "") else cast(raw)


def _dump(obj, path=None):
    text = json.dumps(obj, indent=1) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _emit(text, path=None):
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------- commands

def cmd_cliques(args) -> int:
    a = io.load_tensor(args.input)
    c = maximal_cliques(a)
    rep = necessary_condition(a, c)
    if args.format == "struct":
        _dump({**io.cliques_to_dict(c), "passed": rep.passed,
               "uncovered": [list(i) for i in rep.uncovered]})
    else:
        sys.stdout.write(io.format_cliques(c))
        if rep.passed:
            print("necessary condition: pass")
        else:
            print(f"necessary condition: FAIL ({len(rep.uncovered)} uncovered positive entries)")
            for idx in rep.uncovered[:args.max_report]:
                print(f"  uncovered: ({','.join(map(str, idx))})")
    return EXIT_OK if rep.passed else EXIT_NOT_CP


def cmd_screen(args) -> int:
    a = io.load_tensor(args.input)
    dom = dominance_violations(a)
    code = cmd_cliques(args)
    if args.format != "struct":
        print(f"zero-entry dominance violations: {len(dom)}")
        for d in dom[:args.max_report]:
            print(f"  zero {d.zero_index} below positive {d.positive_index}")
    return code


def _options(args) -> DecomposeOptions:
    o = DecomposeOptions(seed=args.seed, dense=args.dense, force_extract=args.force_extract,
                         merge_atoms=not args.no_merge_atoms, jobs=args.jobs,
                         level=args.level, max_level=args.max_level)
    if args.tol_rank is not None:
        o.rank_tol = args.tol_rank
    if args.tol_recon is not None:
        o.recon_tol = args.tol_recon
    return o


def _default_output(inp: str, suffix: str) -> str:
    p = Path(inp)
    return str(p.with_name(p.stem + suffix))


def cmd_decompose(args) -> int:
    a = io.load_tensor(args.input)
    opts = _options(args)
    v = decompose(a, opts)
    out = args.output
    if args.format == "struct":
        out = out or _default_output(args.input, ".verdict.json")
        _dump(verdict_to_dict(v, timings=not args.no_timings), out)
    elif v.kind is VerdictKind.CP:
        out = out or _default_output(args.input, ".decomp.txt")
        _emit(io.format_decomposition(v.decomposition, v.reconstruction_error), out)
        absorbed = _default_output(out, ".absorbed.txt")
        _emit(io.format_decomposition(v.decomposition, v.reconstruction_error, absorbed=True),
              absorbed)
    elif v.certificate is not None:
        out = out or _default_output(args.input, ".cert.json")
        _dump(certificate_to_dict(v.certificate), out)
    else:
        out = out or _default_output(args.input, ".verdict.json")
        _dump(verdict_to_dict(v, timings=not args.no_timings), out)

    print(f"verdict: {v.kind.value}")
    if v.cliques is not None:
        print(f"cliques: {len(v.cliques)} (max size {v.cliques.max_size})")
    if v.levels:
        print(f"levels tried: {', '.join(map(str, v.levels))}")
    if v.diagnostics:
        last = v.diagnostics[-1]
        blk = last.problem.get("max_psd_block")
        if opts.dense and v.cliques is not None:
            f = random_sos_objective(a.dim, last.objective_degree, seed=last.seed)
            sparse_blk = assemble_sparse(a, f, v.cliques, last.level).max_psd_block
            print(f"max PSD block: dense {blk} vs sparse {sparse_blk} at t={last.level}")
        else:
            print(f"max PSD block: {blk} at t={last.level}")
        for d in v.diagnostics:
            msg = f"  t={d.level} seed={d.seed}: {d.status}"
            if d.flatness:
                msg += " ranks " + " ".join("/".join(map(str, f.ranks)) for f in d.flatness)
            if d.errors:
                msg += f" ({'; '.join(d.errors)})"
            print(msg)
    if v.decomposition is not None:
        print(f"atoms: {len(v.decomposition)}")
        print(f"l1 reconstruction error: {v.reconstruction_error:.3e}")
    if v.certificate is not None:
        print(f"certificate: {type(v.certificate).__name__}")
    t = v.timings
    print("timings (s): " + " ".join(f"{k}={t.get(k, 0.0):.4f}"
                                     for k in ("cliques", "assembly", "sdp", "extraction", "total")))
    print(f"written: {out}")
    if v.kind is VerdictKind.CP and args.format != "struct":
        print(f"written: {absorbed} (weights absorbed)")
    return EXIT_BY_VERDICT[v.kind]


def cmd_gen(args) -> int:
    if args.kind == "cp":
        a, witness = random_cp(args.n, args.m, args.atoms, args.max_support or args.n, seed=args.seed)
        if args.witness:
            Path(args.witness).write_text(io.format_decomposition(witness))
    else:
        a = random_binary_sparse(args.n, args.m, args.nzd, seed=args.seed)
    fmt = "json" if args.format == "struct" else "text"
    if args.output:
        io.save_tensor(a, args.output, fmt)
    else:
        sys.stdout.write(io.format_tensor(a) if fmt == "text"
                         else json.dumps(io.tensor_to_dict(a), indent=1) + "\n")
    return EXIT_OK


def cmd_bench(args) -> int:
    report = run_suite(args.suite, jobs=args.jobs)
    if args.output:
        _dump(strip_timings(report) if args.no_timings else report, args.output)
    if args.format == "struct" and not args.output:
        _dump(strip_timings(report) if args.no_timings else report)
    else:
        sys.stdout.write(format_report(report))
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    fmt_default = _env("FORMAT", str) or "text"
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=["text", "struct"], default=fmt_default,
                        help="text or structured (JSON) output")

    p = argparse.ArgumentParser(prog="idealcp",
                                description="Complete positivity of sparse symmetric tensors.")
    sub = p.add_subparsers(dest="command", required=True)

    for name, help_ in (("cliques", "list maximal cliques and run the coverage screen"),
                        ("screen", "coverage screen plus zero-entry dominance report")):
        s = sub.add_parser(name, parents=[common], help=help_)
        s.add_argument("input")
        s.add_argument("--max-report", type=int, default=20, help="offenders to list")

    d = sub.add_parser("decompose", parents=[common], help="decide complete positivity")
    d.add_argument("input")
    d.add_argument("-o", "--output", help="result file (default next to the input)")
    d.add_argument("--level", type=int, default=_env("LEVEL", int), help="first relaxation level")
    d.add_argument("--max-level", type=int, default=_env("MAX_LEVEL", int), help="last level tried")
    d.add_argument("--seed", type=int, default=_env("SEED", int) or 0, help="objective seed")
    d.add_argument("--tol-rank", type=float, default=_env("TOL_RANK", float))
    d.add_argument("--tol-recon", type=float, default=_env("TOL_RECON", float))
    d.add_argument("--dense", action="store_true", help="use the dense relaxation")
    d.add_argument("--force-extract", action="store_true", help="extract even when not flat")
    d.add_argument("--no-merge-atoms", action="store_true", help="keep per-clique duplicates")
    d.add_argument("--jobs", type=int, default=_env("JOBS", int) or 1, help="parallel cliques")
    d.add_argument("--no-timings", action="store_true", help="omit timings from JSON output")

    g = sub.add_parser("gen", parents=[common], help="generate a random instance")
    g.add_argument("kind", choices=["cp", "binary"])
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--m", type=int, required=True)
    g.add_argument("--atoms", type=int, default=3, help="cp: number of atoms")
    g.add_argument("--max-support", type=int, help="cp: largest atom support")
    g.add_argument("--nzd", type=float, default=0.5, help="binary: off-diagonal density")
    g.add_argument("--seed", type=int, default=_env("SEED", int) or 0)
    g.add_argument("-o", "--output")
    g.add_argument("--witness", help="cp: also write the generating decomposition")

    b = sub.add_parser("bench", parents=[common], help="run a benchmark suite")
    b.add_argument("suite", nargs="?", default="screen-grid",
                   help=f"preset ({', '.join(PRESETS)}) or JSON suite file")
    b.add_argument("--jobs", type=int, default=_env("JOBS", int) or 1)
    b.add_argument("-o", "--output", help="write the JSON report here")
    b.add_argument("--no-timings", action="store_true", help="omit wall-clock fields from JSON")
    return p


COMMANDS = {"cliques": cmd_cliques, "screen": cmd_screen, "decompose": cmd_decompose,
            "gen": cmd_gen, "bench": cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        return COMMANDS[args.command](args)
    except (ParseError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except IdealCPError as exc:
        if isinstance(exc, ValueError):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INPUT
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # pragma: no cover - last resort
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
