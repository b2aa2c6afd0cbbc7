"""Independent structural validators.

These re-derive every property from the dag and the plan rather than
trusting the stages that built them; the acceptance suite runs them on
every compile.
"""

from __future__ import annotations

from .leveler import LeveledDag
from .partition import Partition
from .program import LpuConfig, Program
from .schedule import AddressPlan, SnapshotPlan


def check_partition_conditions(dag: LeveledDag, p: Partition, m: int) -> list[str]:
    """Conditions (1), (2), (4), coverage, link sanity and the overlap bound."""
    errors: list[str] = []
    nl = dag.netlist
    for g in p.mfgs:
        for l in range(g.bottom_level + 1, g.top_level + 1):
            for nid in g.nodes_by_level.get(l, ()):
                for f in nl.fanin_ids(nid):
                    if f not in g.nodes:
                        errors.append(
                            f"mfg {g.id}: node {nid} at level {l} reads {f} "
                            f"from outside (condition 1)")
        for l in range(g.bottom_level, g.top_level + 1):
            row = g.nodes_by_level.get(l, ())
            if len(row) > m:
                errors.append(f"mfg {g.id}: level {l} holds {len(row)} > m={m} "
                              f"nodes (condition 2)")
            if not row:
                errors.append(f"mfg {g.id}: level {l} is empty")
        inputs = {f for nid in g.nodes_by_level.get(g.bottom_level, ())
                  for f in nl.fanin_ids(nid)}
        if sorted(inputs) != list(g.input_nodes):
            errors.append(f"mfg {g.id}: stored input_nodes disagree with the dag")
        gate_inputs = [f for f in inputs if not nl.is_pi(f)]
        if gate_inputs and len(inputs) <= m:
            errors.append(
                f"mfg {g.id}: gate-fed bottom level has only {len(inputs)} "
                f"inputs, needs > m={m} (condition 4)")
        if gate_inputs and len(gate_inputs) != len(inputs):
            errors.append(f"mfg {g.id}: bottom inputs mix PIs and gates")
    covered = set()
    for g in p.mfgs:
        covered |= g.nodes
    all_gates = set(range(nl.num_pis, nl.num_nodes))
    if covered != all_gates:
        errors.append(f"coverage: {len(all_gates - covered)} gate(s) uncovered")
    consumers = nl.consumers()
    member_count: dict[int, int] = {}
    for g in p.mfgs:
        for nid in g.nodes:
            member_count[nid] = member_count.get(nid, 0) + 1
    mfg_of_consumer: dict[int, set[int]] = {}
    for g in p.mfgs:
        for nid in g.nodes:
            for f in nl.fanin_ids(nid):
                mfg_of_consumer.setdefault(f, set()).add(g.id)
    for nid, cnt in member_count.items():
        bound = len(mfg_of_consumer.get(nid, ())) + (1 if nid in p.producer_of else 0)
        if cnt > bound:
            errors.append(f"node {nid}: member of {cnt} MFGs but bound is {bound} "
                          f"(condition 3 sanity)")
    for g in p.mfgs:
        for c in g.children:
            if g.id not in p.by_id(c).parents:
                errors.append(f"mfg {g.id}: child {c} lacks the back link")
    return errors


def check_address_conflicts(program: Program) -> list[str]:
    """No two MFGs may contribute compute cells to one (LPV, address)."""
    errors: list[str] = []
    owner: dict[tuple[int, int], int] = {}
    for s in program.segments:
        for v in range(s.lpv_lo, s.lpv_hi + 1):
            key = (v, s.address)
            prev = owner.setdefault(key, s.mfg)
            if prev != s.mfg:
                errors.append(f"LPV {v}, address {s.address}: MFGs {prev} and "
                              f"{s.mfg} both claim it")
    for v, per_lpv in enumerate(program.queues):
        for a, cell in enumerate(per_lpv):
            if any(i.op != "NOP" for i in cell.lpe) and (v, a) not in owner:
                errors.append(f"LPV {v}, address {a}: compute cell outside "
                              f"any MFG segment")
    return errors


def check_snapshot_capacity(snap: SnapshotPlan, plan: AddressPlan,
                            cfg: LpuConfig) -> list[str]:
    """Sweep parked lifetimes: per-register exclusivity and <= 2m per LPV.

    A parked value holds its (LPE, register) track over [start, end):
    latched while the producing wave passes, released once the last
    consuming wave has tapped it back into the switch.
    """
    errors: list[str] = []
    by_reg: dict[tuple[int, int, str], list] = {}
    for rec in snap.parks:
        by_reg.setdefault((rec.lpv, rec.lpe, rec.reg), []).append(rec)
    for key, recs in by_reg.items():
        for i in range(len(recs)):
            for j in range(i + 1, len(recs)):
                a, b = recs[i], recs[j]
                if a.start < b.end and b.start < a.end:
                    errors.append(f"register {key}: values {a.node} and {b.node} "
                                  f"overlap in time")
    for rec in snap.parks:
        if not rec.consumers or max(rec.consumers) != rec.end:
            errors.append(f"park of node {rec.node} at LPV {rec.lpv}: lifetime "
                          f"end {rec.end} disagrees with consumers {rec.consumers}")
        if rec.start >= rec.end:
            errors.append(f"park of node {rec.node} at LPV {rec.lpv}: empty "
                          f"lifetime [{rec.start}, {rec.end})")
    per_lpv: dict[int, dict[int, set]] = {}
    for rec in snap.parks:
        slots = per_lpv.setdefault(rec.lpv, {})
        for t in range(rec.start, rec.end):
            slots.setdefault(t, set()).add((rec.lpe, rec.reg))
    for v, by_time in per_lpv.items():
        worst = max(len(s) for s in by_time.values())
        if worst > 2 * cfg.m:
            errors.append(f"LPV {v}: {worst} values parked at once (> 2m)")
    return errors


def check_program_completeness(p: Partition, snap: SnapshotPlan) -> list[str]:
    """Every (MFG, node) membership occurrence computes exactly once."""
    errors: list[str] = []
    placed = set(snap.place)
    for g in p.mfgs:
        for nid in g.nodes:
            if (g.id, nid) not in placed:
                errors.append(f"mfg {g.id}: node {nid} never placed")
    want = sum(len(g.nodes) for g in p.mfgs)
    have = sum(1 for st in snap.cells.values() if st.node is not None)
    if want != have:
        errors.append(f"{have} compute cells for {want} membership occurrences")
    return errors


def measure_latencies_from_trace(records: list[dict], program: Program) -> dict[int, int]:
    """Re-derive per-MFG first-output latency from raw trace stamps."""
    t_c = program.config.t_c
    seg_of: dict[tuple[int, int], int] = {}
    for si, s in enumerate(program.segments):
        for v in range(s.lpv_lo, s.lpv_hi + 1):
            seg_of[(s.address, v)] = si
    lo: dict[int, int] = {}
    hi: dict[int, int] = {}
    for rec in records:
        si = seg_of.get((rec["address"], rec["lpv"]))
        if si is None:
            continue
        c = rec["cycle"]
        lo[si] = min(lo.get(si, c), c)
        hi[si] = max(hi.get(si, c), c)
    out: dict[int, int] = {}
    for si, s in enumerate(program.segments):
        if si in lo:
            out[s.mfg] = out.get(s.mfg, 0) + (hi[si] - lo[si] + t_c)
    return out
