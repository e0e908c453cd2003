"""Command line front end: ``kc <subcommand> ...``.

Exit status is 0 on success, 1 when a validation finds a violation and 2 on
usage or input errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from kc import __version__
from kc.bdd import check_structure, count_models_fbdd, dumps_orfbdd, eval_bdd, loads_orfbdd
from kc.circuit import (check_decomposable, check_deterministic, count_models_brute, dumps_nnf,
                        loads_nnf, table_from_function, weighted_count_ddnnf, Unknown)
from kc.dnnf2orfbdd import convert, size_bound
from kc.errors import KcError
from kc.families import FAMILIES, family_bounds, gen
from kc.harness import ExperimentSpec, STRATEGIES, REPRS, parse_range, run_experiment, to_csv
from kc.protocols import (check_protocol, cover_from_protocol, extract_unambiguous, loads_matrix,
                          protocol_matrix, row_class_cover, yannakakis)
from kc.sdd import compile_circuit, dumps_sdd, loads_sdd, restrict, validate
from kc.vtree import (build_vtree, dumps_vtree, find_balanced_vertex, loads_vtree, shell_partition)


class UsageError(Exception):
    pass


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _sidecar(path: str, suffix: str) -> Path:
    return Path(path).with_suffix(suffix)


def _load_vtree_for(sdd_path: str, vtree_path: str | None):
    if vtree_path:
        return loads_vtree(_read(vtree_path))
    side = _sidecar(sdd_path, ".vtree")
    return loads_vtree(side.read_text()) if side.exists() else None


def _parse_assignment(text: str) -> dict[int, bool]:
    rho = {}
    for part in text.replace(" ", "").split(","):
        if not part:
            continue
        var, _, val = part.partition("=")
        if val not in ("0", "1"):
            raise UsageError(f"bad assignment {part!r}; use var=0 or var=1")
        rho[int(var)] = val == "1"
    return rho


# ---------------------------------------------------------------- subcommands

def cmd_compile(a) -> int:
    c = loads_nnf(_read(a.input))
    vars_ = list(range(1, c.var_count + 1))
    vt = loads_vtree(_read(a.vtree)) if a.vtree else build_vtree(vars_, a.shape, a.seed)
    s = compile_circuit(c, vt, compress=a.compress)
    _write(a.out, dumps_sdd(s))
    if a.out and a.out != "-":
        Path(a.vtree_out or _sidecar(a.out, ".vtree")).write_text(dumps_vtree(vt))
    print(f"size {s.size()} size_circle_only {s.size_circle_only()}", file=sys.stderr)
    return 0


def cmd_restrict(a) -> int:
    vt = _load_vtree_for(a.sdd, a.vtree)
    if vt is None:
        raise UsageError("restrict needs the SDD's vtree (--vtree or a .vtree sidecar)")
    s = loads_sdd(_read(a.sdd), vt)
    r = restrict(s, _parse_assignment(a.assign))
    _write(a.out, dumps_sdd(r))
    if a.out and a.out != "-":
        Path(a.vtree_out or _sidecar(a.out, ".vtree")).write_text(dumps_vtree(r.vtree))
    return 0


def cmd_convert(a) -> int:
    c = loads_nnf(_read(a.input))
    conv = convert(c)
    exact, quasi = size_bound(conv.N, conv.M, conv.L)
    _write(a.out, dumps_orfbdd(conv.fbdd))
    print(f"N {conv.N} M {conv.M} L {conv.L} size {conv.actual}")
    print(f"bound NM^L={exact} N2^log2={quasi:.6g} actual={conv.actual}")
    return 0


def _header(text: str) -> str:
    for line in text.splitlines():
        tok = line.split()
        if tok and tok[0] != "c":
            return tok[0]
    return ""


def cmd_count(a) -> int:
    text = _read(a.input)
    head = _header(text)
    if head == "nnf":
        c = loads_nnf(text)
        # the linear-time count is only sound on d-DNNF input
        if not a.brute and check_decomposable(c) is None and check_deterministic(c) is None:
            models = int(weighted_count_ddnnf(c, assume_deterministic=True))
        else:
            models = count_models_brute(c)
    elif head in ("sdd", "psdd-pruned"):
        s = loads_sdd(text, _load_vtree_for(a.input, a.vtree))
        n = a.vars or max(s.vtree.variables, default=0)
        c = s.as_circuit(n)
        models = int(weighted_count_ddnnf(c, assume_deterministic=True))
    elif head == "orfbdd":
        d = loads_orfbdd(text)
        if a.vars is None:
            raise UsageError("counting an OR-FBDD needs --vars")
        if d.has_or_nodes():
            vs = list(range(1, a.vars + 1))
            models = table_from_function(lambda asg: eval_bdd(d, asg), vs).count()
        else:
            models = count_models_fbdd(d, a.vars)
    else:
        raise UsageError(f"unrecognised file header {head!r}")
    print(f"models {models}")
    return 0


def _print_transcript(t) -> None:
    for r in t.rounds:
        msg = "none" if r.msg is None else r.msg
        print(f"round {r.k} sender {r.sender} msg {msg} bits {r.bits} nodes-left {r.nodes_left}")
    print(f"answer {int(t.answer)} bits {t.total_bits} iteration-bits {t.iteration_bits}")


def cmd_protocol(a) -> int:
    if a.matrix:
        M = loads_matrix(_read(a.matrix))
        cover = row_class_cover(M)
    else:
        if not a.sdd:
            raise UsageError("protocol needs --sdd or --matrix")
        vt = _load_vtree_for(a.sdd, a.vtree)
        if vt is None:
            raise UsageError("protocol needs the SDD's vtree (--vtree or a .vtree sidecar)")
        s = loads_sdd(_read(a.sdd), vt)
        b = a.vertex if a.vertex is not None else find_balanced_vertex(vt)
        p = extract_unambiguous(s, shell_partition(vt, b))
        print(f"vertex {b} alice {' '.join(map(str, p.alice_vars))} bob {' '.join(map(str, p.bob_vars))}")
        print(f"alphabet {len(p.alphabet)} cost {p.cost} size {s.size()}")
        cover = cover_from_protocol(p)
        M = protocol_matrix(p)
    det = yannakakis(cover, M)
    rep = check_protocol(det, M)
    print(f"rectangles {len(cover)} g {det.g} bound {det.bound}")
    if a.row is not None and a.col is not None:
        _print_transcript(det.run(a.row, a.col))
    print(f"correct {int(rep.correct)} max-bits {rep.max_total_bits} "
          f"max-iteration-bits {rep.max_iteration_bits} halving {int(rep.halving_ok)}")
    return 0 if rep.correct else 1


def cmd_family(a) -> int:
    inst = gen(a.name, a.m, k=a.k, level=a.level)
    _write(a.out, dumps_nnf(inst.circuit))
    if a.out and a.out != "-":
        _sidecar(a.out, ".vars").write_text(inst.dumps_names())
    if a.bounds:
        for line in family_bounds(a.name, a.m, a.k).lines():
            print(line, file=sys.stderr)
    return 0


def cmd_experiment(a) -> int:
    spec = ExperimentSpec(a.family, parse_range(a.params), a.repr, a.strategy, a.restarts, a.seed,
                          a.k, a.level, a.compress, a.node_limit, a.op_limit, not a.no_timing)
    _write(a.out, to_csv(run_experiment(spec)))
    return 0


def cmd_validate(a) -> int:
    problems: list[str] = []
    if a.sdd:
        vt = _load_vtree_for(a.sdd, a.vtree)
        if vt is None:
            raise UsageError("validate needs the SDD's vtree (--vtree or a .vtree sidecar)")
        rep = validate(loads_sdd(_read(a.sdd), vt))
        problems += [f"node {v.node}: {v.kind} {v.detail}".rstrip() for v in rep.violations]
        for u in rep.unknown:
            print(f"node {u}: unknown (above the oracle cap)")
    elif a.nnf:
        c = loads_nnf(_read(a.nnf))
        v = check_decomposable(c)
        if v is not None:
            problems.append(f"node {v.node}: not decomposable (variable {v.var})")
        if a.deterministic:
            d = check_deterministic(c)
            if isinstance(d, Unknown):
                print(f"node {d.node}: unknown ({d.reason})")
            elif d is not None:
                problems.append(f"node {d.node}: not deterministic {d.detail}".rstrip())
    elif a.orfbdd:
        d = loads_orfbdd(_read(a.orfbdd))
        v = check_structure(d, [int(x) for x in a.order.split(",")] if a.order else None)
        if v is not None:
            problems.append(f"{v.kind} at variable {v.var} along path {' '.join(map(str, v.path))}")
    else:
        raise UsageError("validate needs --sdd, --nnf or --orfbdd")
    for p in problems:
        print(p)
    print("ok" if not problems else f"violations {len(problems)}")
    return 1 if problems else 0


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kc", description="Knowledge-compilation toolkit")
    ap.add_argument("--version", action="version", version=f"kc {__version__}")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("compile", help="compile an NNF circuit into an SDD")
    p.add_argument("--input", required=True)
    p.add_argument("--vtree")
    p.add_argument("--shape", default="balanced", choices=["balanced", "right-linear", "left-linear", "random"])
    p.add_argument("--seed", type=int)
    p.add_argument("--compress", action="store_true")
    p.add_argument("--out")
    p.add_argument("--vtree-out")
    p.set_defaults(fn=cmd_compile)

    p = sub.add_parser("restrict", help="restrict an SDD by a partial assignment")
    p.add_argument("--sdd", required=True)
    p.add_argument("--vtree")
    p.add_argument("--assign", required=True, help="e.g. 1=0,3=1")
    p.add_argument("--out")
    p.add_argument("--vtree-out")
    p.set_defaults(fn=cmd_restrict)

    p = sub.add_parser("convert", help="convert between representations")
    p.add_argument("what", choices=["dnnf2orfbdd"])
    p.add_argument("--input", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_convert)

    p = sub.add_parser("count", help="count models of an NNF, SDD or OR-FBDD file")
    p.add_argument("--input", required=True)
    p.add_argument("--vtree")
    p.add_argument("--vars", type=int)
    p.add_argument("--brute", action="store_true")
    p.set_defaults(fn=cmd_count)

    p = sub.add_parser("protocol", help="extract a protocol and simulate it deterministically")
    p.add_argument("--sdd")
    p.add_argument("--vtree")
    p.add_argument("--vertex", type=int)
    p.add_argument("--matrix")
    p.add_argument("--row", type=int)
    p.add_argument("--col", type=int)
    p.set_defaults(fn=cmd_protocol)

    p = sub.add_parser("family", help="generate a family member as NNF")
    p.add_argument("name", choices=FAMILIES)
    p.add_argument("--m", type=int, required=True, help="size parameter (m or n)")
    p.add_argument("--k", type=int)
    p.add_argument("--level", type=int)
    p.add_argument("--out")
    p.add_argument("--bounds", action="store_true")
    p.set_defaults(fn=cmd_family)

    p = sub.add_parser("experiment", help="size experiment, CSV output")
    p.add_argument("--family", required=True, choices=FAMILIES)
    p.add_argument("--params", required=True, help="e.g. 2..5")
    p.add_argument("--repr", default="sdd", choices=REPRS)
    p.add_argument("--strategy", default="balanced", choices=STRATEGIES)
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=int)
    p.add_argument("--level", type=int)
    p.add_argument("--compress", action="store_true")
    p.add_argument("--node-limit", type=int, default=2_000_000)
    p.add_argument("--op-limit", type=int)
    p.add_argument("--no-timing", action="store_true", help="write 0 in wall_ms")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_experiment)

    p = sub.add_parser("validate", help="check an SDD, NNF or OR-FBDD file")
    p.add_argument("--sdd")
    p.add_argument("--vtree")
    p.add_argument("--nnf")
    p.add_argument("--deterministic", action="store_true")
    p.add_argument("--orfbdd")
    p.add_argument("--order")
    p.set_defaults(fn=cmd_validate)
    return ap


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"kc: error: {exc}", file=sys.stderr)
        return 2
    except (KcError, ValueError) as exc:
        print(f"kc: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
