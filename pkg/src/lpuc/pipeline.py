"""End-to-end compile and check flows shared by the CLI and the tests."""

from __future__ import annotations

from dataclasses import dataclass, field
from random import Random

from .errors import CompileError, LpucError, SnapshotOverflowError
from .leveler import LeveledDag, balance_paths, levelize
from .netlist import Netlist, strip_dead_gates, validate
from .oracle import eval_dag
from .partition import Partition, merge_mfgs, partition
from .program import LpuConfig, Program
from .schedule import (
    AddressPlan,
    ExecutionOrder,
    SnapshotPlan,
    allocate_snapshots,
    assign_addresses,
    emit_program,
    order_mfgs,
)
from .sim import run as sim_run


@dataclass
class CompileResult:
    program: Program
    dag: LeveledDag
    partition_pre: Partition
    partition_post: Partition
    order: ExecutionOrder
    plan: AddressPlan
    snapshots: SnapshotPlan
    dead_gates_removed: int

    @property
    def stats(self) -> dict:
        cfg = self.program.config
        return {
            "gates": len(self.dag.netlist.gates),
            "l_max": self.dag.l_max,
            "inserted_buffers": self.dag.inserted_buffer_count,
            "dead_gates_removed": self.dead_gates_removed,
            "mfgs_before_merge": len(self.partition_pre.mfgs),
            "mfgs_after_merge": len(self.partition_post.mfgs),
            "queue_depth": self.program.queue_depth,
            "passes": self.program.passes,
            "addresses_shared": self.plan.shared_count,
            "mfg_latency": {g.id: g.depth * cfg.t_c for g in self.partition_post.mfgs},
            "mfg_table": [{"id": g.id, "bottom": g.bottom_level, "top": g.top_level,
                           "nodes": len(g.nodes),
                           "latency_cycles": g.depth * cfg.t_c}
                          for g in self.partition_post.mfgs],
        }


def compile_netlist(netlist: Netlist, cfg: LpuConfig, *, merge: bool = True,
                    share: bool = True) -> CompileResult:
    validate(netlist)
    if not netlist.gates:
        raise CompileError("netlist has no gates; nothing to compile")
    for po in netlist.primary_outputs:
        if netlist.is_pi(netlist.name_index[po]):
            raise CompileError(
                f"primary output '{po}' is a primary input; insert a BUF gate",
                name=po)
    stripped, removed = strip_dead_gates(netlist)
    dag = balance_paths(levelize(stripped))
    pre = partition(dag, cfg.m)
    post = merge_mfgs(pre, cfg.m) if merge else pre
    order = order_mfgs(post)
    # Overflow repair: when a sharing parent's row starves another
    # parent's parked values of latch selectors at the shared wave, give
    # that parent a fresh address and retry.  Sharing only ever removes
    # addresses, so the no-sharing plan is the fixed point.
    no_share: frozenset[int] = frozenset()
    while True:
        plan = assign_addresses(order, post, cfg, share=share, no_share=no_share)
        try:
            snap = allocate_snapshots(order, plan, post, dag, cfg)
            break
        except SnapshotOverflowError as ex:
            culprit = None
            for seg in plan.segments:
                if (seg.address == getattr(ex, "address", -1)
                        and seg.lpv_lo <= getattr(ex, "lpv", -1) <= seg.lpv_hi
                        and seg.mfg not in no_share):
                    culprit = seg.mfg
                    break
            if culprit is None:
                raise
            no_share = no_share | {culprit}
    program = emit_program(dag, post, order, plan, snap, cfg)
    return CompileResult(program=program, dag=dag, partition_pre=pre,
                         partition_post=post, order=order, plan=plan,
                         snapshots=snap, dead_gates_removed=removed)


@dataclass
class CheckResult:
    passed: bool
    trials: int
    mismatches: list[dict] = field(default_factory=list)
    error: dict | None = None
    warning: str | None = None

    def first_mismatch(self) -> dict | None:
        return self.mismatches[0] if self.mismatches else None


def random_inputs(netlist: Netlist, bits: int, rng: Random) -> dict[str, int]:
    return {pi: rng.getrandbits(bits) for pi in netlist.primary_inputs}


def run_check(netlist: Netlist, cfg: LpuConfig, trials: int, seed: int, *,
              merge: bool = True, program: Program | None = None) -> CheckResult:
    """Compile (unless a program is supplied), then compare simulator
    output against eval_dag on `trials` random batches, bit-exactly."""
    if trials == 0:
        return CheckResult(passed=True, trials=0,
                           warning="zero trials requested; PASS is vacuous")
    try:
        if program is None:
            program = compile_netlist(netlist, cfg, merge=merge).program
    except LpucError as ex:
        return CheckResult(passed=False, trials=0, error=ex.to_json())
    bits = program.config.word_bits
    rng = Random(seed)
    mismatches: list[dict] = []
    for t in range(trials):
        inputs = random_inputs(netlist, bits, rng)
        expected = eval_dag(netlist, inputs, bits)
        try:
            got, _ = sim_run(program, inputs)
        except LpucError as ex:
            return CheckResult(passed=False, trials=t + 1, error=ex.to_json())
        for po in netlist.primary_outputs:
            if got.get(po) != expected[po]:
                mismatches.append({"trial": t, "net": po,
                                   "expected": expected[po], "got": got.get(po)})
                return CheckResult(passed=False, trials=t + 1,
                                   mismatches=mismatches)
    return CheckResult(passed=True, trials=trials)
