"""lpuc command line: compile, simulate, check, gen, stats.

Exit codes: 0 success, 1 verification failure, 2 usage/input error.
Pipeline errors print one machine-readable JSON line on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from random import Random

from . import __version__
from .errors import InfeasibleSpecError, LpucError, MissingInputError
from .netlist import Netlist, emit_ffcl, parse_ffcl, parse_structural_verilog
from .leveler import levelize
from .oracle import GenSpec, PROFILES, gen_random_dag
from .partition import partition_to_dump
from .pipeline import compile_netlist, run_check
from .program import LpuConfig, load_program
from .sim import run as sim_run, trace as sim_trace


def _manifest(args: argparse.Namespace, command: str) -> dict:
    flags = {k: v for k, v in sorted(vars(args).items())
             if k not in ("func", "command") and not callable(v)}
    return {"tool": "lpuc", "version": __version__, "command": command,
            "flags": flags}


def _load_netlist(path: str, fmt: str) -> Netlist:
    text = Path(path).read_text(encoding="utf-8")
    if fmt == "auto":
        fmt = "verilog" if path.endswith(".v") or "module" in text[:4096] else "ffcl"
    if fmt == "verilog":
        return parse_structural_verilog(text)
    return parse_ffcl(text)


def _config(args: argparse.Namespace) -> LpuConfig:
    return LpuConfig(m=args.m, n=args.n, t_sw=args.tsw)


def _read_vectors(path: str) -> dict[str, int]:
    out: dict[str, int] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise MissingInputError(f"malformed vector line {lineno}: '{raw}'",
                                    line=lineno)
        try:
            out[parts[0]] = int(parts[1], 16)
        except ValueError:
            raise MissingInputError(f"bad hex word on line {lineno}", line=lineno) from None
    return out


def _write_vectors(path: str, words: dict[str, int], bits: int) -> None:
    digits = max(1, (bits + 3) // 4)
    lines = [f"{name} {value:0{digits}x}" for name, value in words.items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_compile(args: argparse.Namespace) -> int:
    netlist = _load_netlist(args.netlist, args.format)
    cfg = _config(args)
    result = compile_netlist(netlist, cfg, merge=not args.no_merge,
                             share=not args.no_share)
    out = args.output or (args.netlist + ".program.json")
    Path(out).write_text(result.program.to_json(), encoding="utf-8")
    stats = result.stats
    stats["manifest"] = _manifest(args, "compile")
    print(f"gates={stats['gates']} l_max={stats['l_max']} "
          f"buffers_inserted={stats['inserted_buffers']} "
          f"dead_removed={stats['dead_gates_removed']}")
    print(f"mfgs: {stats['mfgs_before_merge']} before merge, "
          f"{stats['mfgs_after_merge']} after merge")
    print(f"queue_depth={stats['queue_depth']} passes={stats['passes']} "
          f"addresses_shared={stats['addresses_shared']}")
    print(f"{'mfg':>5} {'bottom':>7} {'top':>5} {'nodes':>6} {'latency':>8}")
    for row in stats["mfg_table"]:
        print(f"{row['id']:>5} {row['bottom']:>7} {row['top']:>5} "
              f"{row['nodes']:>6} {row['latency_cycles']:>8}")
    if args.stats:
        Path(args.stats).write_text(json.dumps(stats, indent=1) + "\n",
                                    encoding="utf-8")
    if args.dump_partition:
        Path(args.dump_partition).write_text(
            json.dumps(partition_to_dump(result.partition_post), indent=1) + "\n",
            encoding="utf-8")
    print(f"program written to {out}")
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    program = load_program(Path(args.program).read_text(encoding="utf-8"))
    inputs = _read_vectors(args.inputs)
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as sink:
            sim_trace(program, inputs, sink)
    outputs, report = sim_run(program, inputs)
    out = args.output or (args.program + ".outputs.txt")
    _write_vectors(out, outputs, program.config.word_bits)
    doc = report.to_json_dict()
    doc["manifest"] = _manifest(args, "simulate")
    if args.report:
        Path(args.report).write_text(json.dumps(doc, indent=1) + "\n",
                                     encoding="utf-8")
    print(f"total_cycles={report.total_cycles} passes={report.passes} "
          f"queue_depth={report.queue_depth} "
          f"utilization={report.utilization:.1f}%")
    print(f"outputs written to {out}")
    return 0


def cmd_check(args: argparse.Namespace) -> int:
    netlist = _load_netlist(args.netlist, args.format)
    cfg = _config(args)
    program = None
    if args.program:
        program = load_program(Path(args.program).read_text(encoding="utf-8"))
    result = run_check(netlist, cfg, args.trials, args.seed,
                       merge=not args.no_merge, program=program)
    verdict = {"manifest": _manifest(args, "check"),
               "passed": result.passed, "trials": result.trials}
    if result.warning:
        verdict["warning"] = result.warning
        print(f"warning: {result.warning}")
    if result.error:
        verdict["error"] = result.error
    if result.mismatches:
        verdict["first_mismatch"] = result.first_mismatch()
    if args.report:
        Path(args.report).write_text(json.dumps(verdict, indent=1) + "\n",
                                     encoding="utf-8")
    if result.passed:
        print(f"PASS ({result.trials} trials)")
        return 0
    if result.error:
        print(f"FAIL: {result.error['error']}: {result.error['detail']}")
    else:
        mm = result.first_mismatch()
        print(f"FAIL: net '{mm['net']}' mismatches on trial {mm['trial']}")
    return 1


def cmd_gen(args: argparse.Namespace) -> int:
    if args.spec:
        spec = GenSpec.from_json(Path(args.spec).read_text(encoding="utf-8"))
    else:
        spec = GenSpec(seed=args.seed, profile=args.profile,
                       gate_count=args.gates, pi_count=args.pis,
                       po_count=args.pos, max_fanin_depth=args.reach,
                       width=args.width, depth=args.depth,
                       k=args.k, w=args.w, m=args.m,
                       mismatched_bottoms=args.mismatched_bottoms)
    netlist = gen_random_dag(spec)
    text = emit_ffcl(netlist)
    out = args.output or "generated.ffcl"
    Path(out).write_text(text, encoding="utf-8")
    dag = levelize(netlist)
    widths = [len(v) for l, v in dag.node_set_by_level.items() if l > 0]
    print(f"gates={len(netlist.gates)} l_max={dag.l_max} "
          f"max_width={max(widths) if widths else 0}")
    print(f"netlist written to {out}")
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    netlist = _load_netlist(args.netlist, args.format)
    cfg = _config(args)
    merged = compile_netlist(netlist, cfg, merge=True)
    unmerged = compile_netlist(netlist, cfg, merge=False)
    doc = {
        "manifest": _manifest(args, "stats"),
        "merged": merged.stats,
        "unmerged": unmerged.stats,
    }
    print(f"{'':>12} {'mfgs':>6} {'queue_depth':>12} {'passes':>7} {'cycles_sum':>11}")
    for name, res in (("merged", merged), ("unmerged", unmerged)):
        total = sum(g.depth * cfg.t_c for g in res.partition_post.mfgs)
        print(f"{name:>12} {len(res.partition_post.mfgs):>6} "
              f"{res.program.queue_depth:>12} {res.program.passes:>7} {total:>11}")
    if args.dump_partition:
        Path(args.dump_partition).write_text(
            json.dumps(partition_to_dump(merged.partition_post), indent=1) + "\n",
            encoding="utf-8")
    if args.report:
        Path(args.report).write_text(json.dumps(doc, indent=1) + "\n",
                                     encoding="utf-8")
    return 0


def _add_config_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("-m", type=int, required=True, help="LPEs per LPV")
    sp.add_argument("-n", type=int, default=16, help="LPVs per LPU (default 16)")
    sp.add_argument("--tsw", type=int, default=5,
                    help="switch latency in cycles (default 5)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lpuc",
                                 description="logic-processor compiler and simulator")
    ap.add_argument("--version", action="version", version=f"lpuc {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("compile", help="compile a netlist to a program")
    sp.add_argument("netlist")
    _add_config_flags(sp)
    sp.add_argument("--format", choices=("auto", "ffcl", "verilog"), default="auto")
    sp.add_argument("--no-merge", action="store_true")
    sp.add_argument("--no-share", action="store_true",
                    help="disable instruction-queue address sharing")
    sp.add_argument("-o", "--output")
    sp.add_argument("--stats", help="write stats JSON here")
    sp.add_argument("--dump-partition", help="write the partition dump JSON here")
    sp.set_defaults(func=cmd_compile)

    sp = sub.add_parser("simulate", help="run a compiled program")
    sp.add_argument("program")
    sp.add_argument("--inputs", required=True, help="input vector file")
    sp.add_argument("-o", "--output")
    sp.add_argument("--report", help="write the SimReport JSON here")
    sp.add_argument("--trace", help="write JSON-lines trace here")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("check", help="compile + simulate vs the reference evaluator")
    sp.add_argument("netlist")
    _add_config_flags(sp)
    sp.add_argument("--format", choices=("auto", "ffcl", "verilog"), default="auto")
    sp.add_argument("--trials", type=int, default=8)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--no-merge", action="store_true")
    sp.add_argument("--program", help="check this program file instead of compiling")
    sp.add_argument("--report", help="write the verdict JSON here")
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("gen", help="generate a synthetic netlist")
    sp.add_argument("--profile", choices=PROFILES, default="uniform")
    sp.add_argument("--gates", type=int, default=100)
    sp.add_argument("--pis", type=int, default=16)
    sp.add_argument("--pos", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--reach", type=int, default=2,
                    help="max levels a fanin edge may span before balancing")
    sp.add_argument("--width", type=int)
    sp.add_argument("--depth", type=int)
    sp.add_argument("--k", type=int)
    sp.add_argument("--w", type=int)
    sp.add_argument("-m", type=int, help="LPV width the sibling family targets")
    sp.add_argument("--mismatched-bottoms", action="store_true")
    sp.add_argument("--spec", help="read the GenSpec from this JSON file")
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("stats", help="partition/schedule statistics for a netlist")
    sp.add_argument("netlist")
    _add_config_flags(sp)
    sp.add_argument("--format", choices=("auto", "ffcl", "verilog"), default="auto")
    sp.add_argument("--dump-partition")
    sp.add_argument("--report")
    sp.set_defaults(func=cmd_stats)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except LpucError as ex:
        sys.stderr.write(json.dumps(ex.to_json()) + "\n")
        return 2
    except OSError as ex:
        sys.stderr.write(json.dumps({"error": "IOError", "detail": str(ex)}) + "\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
