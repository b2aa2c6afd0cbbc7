"""Compiler and cycle-level simulator for a configurable logic processor.

Pipeline: parse a gate-level netlist, levelize and fully path-balance it,
partition the balanced DAG into maximal feasible subgraphs, merge
siblings, schedule the MFGs into static instruction queues, and execute
the resulting program bit-exactly against a reference evaluator.
"""

__version__ = "0.1.0"

from .errors import LpucError
from .leveler import LeveledDag, balance_paths, levelize
from .netlist import (
    Gate,
    GateOp,
    Netlist,
    emit_ffcl,
    parse_ffcl,
    parse_structural_verilog,
    validate,
)
from .oracle import GenSpec, eval_dag, gen_random_dag, gen_sibling_family
from .partition import Mfg, Partition, check_level, find_mfg, merge_mfgs, partition
from .pipeline import CheckResult, CompileResult, compile_netlist, run_check
from .program import LpuConfig, Program, load_program
from .schedule import allocate_snapshots, assign_addresses, emit_program, order_mfgs
from .sim import SimReport, run, trace

__all__ = [
    "CheckResult", "CompileResult", "Gate", "GateOp", "GenSpec", "LeveledDag",
    "LpuConfig", "LpucError", "Mfg", "Netlist", "Partition", "Program",
    "SimReport", "allocate_snapshots", "assign_addresses", "balance_paths",
    "check_level", "compile_netlist", "emit_ffcl", "emit_program", "eval_dag",
    "find_mfg", "gen_random_dag", "gen_sibling_family", "levelize",
    "load_program", "merge_mfgs", "order_mfgs", "parse_ffcl",
    "parse_structural_verilog", "partition", "run", "run_check", "trace",
    "validate",
]
