"""Cycle-level execution of a compiled program on the LPU model.

Operands are 2m-bit packed words (one bit per batch sample).  Undefined
values are poisoned: reading or routing one raises UninitializedRead
instead of propagating zeros, which is what makes single-field program
mutations loud.  Wave timing: address a of pass p enters LPV 0 at cycle
T_p + (a - window_start), reaches LPV v at +v*t_c, and pass p+1 starts
n*t_c cycles after pass p's last wave entered (output-buffer drain).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import (
    InvalidInputError,
    MissingInputError,
    UninitializedReadError,
)
from .program import LpeInstr, Program


_MISO = {
    "AND": lambda a, b, mask: a & b,
    "OR": lambda a, b, mask: a | b,
    "XOR": lambda a, b, mask: a ^ b,
    "XNOR": lambda a, b, mask: (a ^ b) ^ mask,
    "NAND": lambda a, b, mask: (a & b) ^ mask,
    "NOR": lambda a, b, mask: (a | b) ^ mask,
}
_SISO = {
    "NOT": lambda a, mask: a ^ mask,
    "BUF": lambda a, mask: a,
}


@dataclass
class SimReport:
    total_cycles: int
    passes: int
    queue_depth: int
    utilization: float              # % of LPE instruction cells that compute
    mfg_latency: dict[int, int]     # mfg id -> measured first-output latency

    def to_json_dict(self) -> dict:
        return {"total_cycles": self.total_cycles, "passes": self.passes,
                "queue_depth": self.queue_depth,
                "utilization": round(self.utilization, 2),
                "mfg_latency": {str(k): v for k, v in sorted(self.mfg_latency.items())}}


def _check_inputs(program: Program, inputs: dict[str, int]) -> None:
    mask = (1 << program.config.word_bits) - 1
    needed = {e["net"] for e in program.input_buffer_map}
    for net in sorted(needed):
        if net not in inputs:
            raise MissingInputError(f"primary input '{net}' missing from inputs",
                                    name=net)
    for net, val in inputs.items():
        if not isinstance(val, int) or val < 0 or val > mask:
            raise InvalidInputError(
                f"input '{net}' must be a {program.config.word_bits}-bit word",
                name=net)


def run(program: Program, inputs: dict[str, int],
        trace_sink=None) -> tuple[dict[str, int], SimReport]:
    """Execute every pass and return (PO words, report).

    `trace_sink`, when given, receives one dict per executed compute:
    cycle, pass, address, LPV, LPE, opcode, operand values, result, the
    producing net, and the destination slots its value was routed to.
    """
    cfg = program.config
    n, m, t_c = cfg.n, cfg.m, cfg.t_c
    mask = (1 << cfg.word_bits) - 1
    _check_inputs(program, inputs)

    stream: list[int | None] = [None] * program.stream_size
    for entry in program.input_buffer_map:
        stream[entry["offset"]] = inputs[entry["net"]]
    regs = [[{"a": None, "b": None} for _ in range(m)] for _ in range(n)]
    captures: dict[tuple[int, int, int], dict] = {}
    for entry in program.output_buffer_map:
        captures[(entry["addr"], entry["lpv"], entry["lpe"])] = entry

    seg_rows: dict[tuple[int, int], tuple[int, int]] = {}
    for si, s in enumerate(program.segments):
        for v in range(s.lpv_lo, s.lpv_hi + 1):
            seg_rows[(s.address, v)] = (si, v)
    seg_lo: dict[int, int] = {}
    seg_hi: dict[int, int] = {}

    fanout_slots: dict[tuple[int, int, int], list[int]] = {}
    for v in range(1, n):
        for a in range(program.queue_depth):
            for slot, src in enumerate(program.queues[v][a].route):
                if src is not None and src["kind"] == "lpe":
                    fanout_slots.setdefault((v - 1, a, src["index"]), []).append(slot)

    outputs: dict[str, int] = {}
    last_cycle = -1
    t_pass = 0

    def read_sel(sel: dict, v: int, e: int, slots: list, ctx: str):
        kind = sel["kind"]
        if kind == "switch":
            val = slots[sel["slot"]]
        elif kind == "snap":
            val = regs[v][e][sel["reg"]]
        elif kind == "input":
            off = sel["offset"]
            val = stream[off] if off < len(stream) else None
        else:  # const0
            return 0
        if val is None:
            raise UninitializedReadError(
                f"{ctx}: {kind} read of an undefined value "
                f"(LPV {v}, LPE {e}, selector {sel})")
        return val

    for pass_idx, (w_lo, w_hi) in enumerate(program.pass_windows):
        for a in range(w_lo, w_hi):
            s_a = t_pass + (a - w_lo)
            prev_out: list[int | None] = [None] * m
            for v in range(n):
                cell = program.queues[v][a]
                cycle = s_a + v * t_c
                # switch stage feeding this LPV: previous LPV's outputs plus
                # this LPV's park taps
                slots: list[int | None] = [None] * (2 * m)
                for slot, src in enumerate(cell.route):
                    if src is None:
                        continue
                    if src["kind"] == "lpe":
                        val = prev_out[src["index"]] if v > 0 else None
                    else:
                        val = regs[v][src["lpe"]][src["reg"]]
                    if val is None:
                        raise UninitializedReadError(
                            f"cycle {cycle}: routing an undefined value into "
                            f"LPV {v} slot {slot} at address {a} (source {src})")
                    slots[slot] = val
                out_vals: list[int | None] = [None] * m
                for e in range(m):
                    instr = cell.lpe[e]
                    op = instr.op
                    need_a = op != "NOP" or instr.write_a
                    need_b = (op in _MISO) or instr.write_b
                    ctx = f"cycle {cycle}, address {a}"
                    val_a = val_b = None
                    if need_a:
                        if instr.src_a is None:
                            raise UninitializedReadError(
                                f"{ctx}: operand a of LPE {e} at LPV {v} is unselected")
                        val_a = read_sel(instr.src_a, v, e, slots, ctx)
                    if need_b:
                        if instr.src_b is None:
                            raise UninitializedReadError(
                                f"{ctx}: operand b of LPE {e} at LPV {v} is unselected")
                        val_b = read_sel(instr.src_b, v, e, slots, ctx)
                    if instr.write_a:
                        regs[v][e]["a"] = val_a
                    if instr.write_b:
                        regs[v][e]["b"] = val_b
                    if op == "NOP":
                        continue
                    # write-before-read: snapshot operands see this cycle's writes
                    if instr.src_a["kind"] == "snap":
                        val_a = regs[v][e][instr.src_a["reg"]]
                    if op in _MISO:
                        if instr.src_b["kind"] == "snap":
                            val_b = regs[v][e][instr.src_b["reg"]]
                        result = _MISO[op](val_a, val_b, mask)
                    else:
                        result = _SISO[op](val_a, mask)
                    out_vals[e] = result
                    last_cycle = max(last_cycle, cycle)
                    key = seg_rows.get((a, v))
                    if key is not None:
                        si = key[0]
                        if si not in seg_lo or cycle < seg_lo[si]:
                            seg_lo[si] = cycle
                        seg_hi[si] = max(seg_hi.get(si, cycle), cycle)
                    cap = captures.get((a, v, e))
                    if cap is not None:
                        if cap["kind"] == "po":
                            outputs[cap["net"]] = result
                        else:
                            stream[cap["offset"]] = result
                    if trace_sink is not None:
                        rec = {"cycle": cycle, "pass": pass_idx, "address": a,
                               "lpv": v, "lpe": e, "op": op,
                               "args": [val_a] if op in _SISO else [val_a, val_b],
                               "result": result,
                               "slots": fanout_slots.get((v, a, e), []),
                               "mfg": program.segments[key[0]].mfg if key else None}
                        trace_sink(rec)
                prev_out = out_vals
        k = w_hi - w_lo
        t_pass += (k - 1 if k > 0 else 0) + n * t_c

    mfg_latency: dict[int, int] = {}
    for si, s in enumerate(program.segments):
        if si not in seg_lo:
            continue
        span = seg_hi[si] - seg_lo[si] + t_c
        mfg_latency[s.mfg] = mfg_latency.get(s.mfg, 0) + span

    cells_total = max(1, cfg.n * program.queue_depth * cfg.m)
    non_nop = sum(1 for per_lpv in program.queues for cell in per_lpv
                  for i in cell.lpe if i.op != "NOP")
    report = SimReport(total_cycles=(last_cycle + t_c) if last_cycle >= 0 else 0,
                       passes=program.passes,
                       queue_depth=program.queue_depth,
                       utilization=100.0 * non_nop / cells_total,
                       mfg_latency=mfg_latency)
    return outputs, report


def trace(program: Program, inputs: dict[str, int], sink) -> None:
    """Stream per-compute JSON-line records to `sink` (file-like or callable)."""
    if callable(sink):
        emit = sink
    else:
        def emit(rec: dict) -> None:
            sink.write(json.dumps(rec, separators=(",", ":")) + "\n")
    run(program, inputs, trace_sink=emit)
