"""Static scheduling: MFG ordering, address assignment, parking, emission.

The instruction grid is addressed (LPV, address).  Gate level l of an
MFG executes on LPV (l-1) mod n during circulation pass (l-1) div n; an
MFG deeper than a pass is split into per-pass segments and each segment
gets an address inside its pass's window.  A parent may reuse its
most-recent child's address when their occupied LPV ranges are disjoint,
which is what makes the child's top-level results flow straight through
the switch into the parent's bottom row on the same wave.

Results of every other child are parked: when the producing wave passes
the parent's LPV, a free (LPE, register) slot there latches the value
(snap_write on the operand selector), and at each consuming wave the
switch's park taps re-inject it into an input slot.  A register slot is
therefore busy from the producing wave until the last consuming wave,
and a LPV can hold at most 2m parked values at any point; when the
interval packing does not fit, compilation aborts with SnapshotOverflow.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import (
    AddressConflictError,
    CyclicMfgGraphError,
    SnapshotOverflowError,
)
from .leveler import LeveledDag
from .netlist import op_arity
from .partition import Mfg, Partition
from .program import Cell, LpuConfig, Program, SegmentMeta


@dataclass
class ExecutionOrder:
    order: list[int]
    position: dict[int, int]
    most_recent_child: dict[int, int]


def _designated_mrc(p: Partition, g: Mfg) -> int | None:
    """Pick the child supplying the most parent inputs; it is scheduled
    last so those values flow through the switch instead of parking."""
    if not g.children:
        return None
    inputs = set(g.input_nodes)
    return max(g.children,
               key=lambda c: (len(inputs & set(p.by_id(c).roots)), c))


def _child_visit_order(p: Partition, g: Mfg) -> list[int]:
    kids = sorted(g.children)
    mrc = _designated_mrc(p, g)
    if mrc is not None:
        kids.remove(mrc)
        kids.append(mrc)
    return kids


def order_mfgs(p: Partition) -> ExecutionOrder:
    """Post-order walk from the root MFG(s): every child is scheduled
    before its parent; siblings visit in ascending MFG id with the
    designated most-recent child moved last."""
    WHITE, GRAY, BLACK = 0, 1, 2
    color: dict[int, int] = {}
    order: list[int] = []
    position: dict[int, int] = {}
    for root in sorted(p.root_mfg_ids):
        if color.get(root) == BLACK:
            continue
        stack = [(root, _child_visit_order(p, p.by_id(root)), 0)]
        color[root] = GRAY
        while stack:
            mid, kids, i = stack[-1]
            advanced = False
            while i < len(kids):
                c = kids[i]
                i += 1
                st = color.get(c, WHITE)
                if st == GRAY:
                    raise CyclicMfgGraphError(
                        f"MFG link cycle through MFG {c} (partitioner bug)")
                if st == WHITE:
                    stack[-1] = (mid, kids, i)
                    color[c] = GRAY
                    stack.append((c, _child_visit_order(p, p.by_id(c)), 0))
                    advanced = True
                    break
            if advanced:
                continue
            stack.pop()
            color[mid] = BLACK
            position[mid] = len(order)
            order.append(mid)
    if len(order) != len(p.mfgs):
        raise CyclicMfgGraphError("some MFGs are unreachable from the roots")
    mrc = {}
    for g in p.mfgs:
        if g.children:
            mrc[g.id] = max(g.children, key=lambda c: position[c])
    return ExecutionOrder(order=order, position=position, most_recent_child=mrc)


@dataclass(frozen=True)
class Seg:
    mfg: int
    pass_idx: int
    address: int          # global address (after window offsetting)
    lpv_lo: int
    lpv_hi: int
    level_lo: int
    level_hi: int


@dataclass
class AddressPlan:
    address_of: dict[int, int]          # mfg -> first-segment address
    last_address_of: dict[int, int]     # mfg -> last-segment address
    segments: list[Seg]
    segs_of: dict[int, list[Seg]]
    windows: list[tuple[int, int]]
    queue_depth: int
    passes: int
    shared_count: int


def _split_segments(g: Mfg, n: int) -> list[tuple[int, int, int]]:
    """(pass, level_lo, level_hi) pieces of [bottom, top] cut at pass bounds."""
    out = []
    lo = g.bottom_level
    while lo <= g.top_level:
        q = (lo - 1) // n
        hi = min(g.top_level, (q + 1) * n)
        out.append((q, lo, hi))
        lo = hi + 1
    return out


def assign_addresses(order: ExecutionOrder, p: Partition, cfg: LpuConfig,
                     *, share: bool = True,
                     no_share: frozenset[int] = frozenset()) -> AddressPlan:
    """Walk the execution order handing out addresses inside per-pass
    windows; a first segment may ride its most-recent child's address
    when the occupied LPV ranges stay disjoint.  MFGs listed in
    `no_share` always take a fresh address (used by the overflow-repair
    loop: a sharing parent's row can starve another parent's parked
    values of latch selectors at the shared wave)."""
    n = cfg.n
    l_max = p.l_max
    passes = (l_max + n - 1) // n
    buckets: list[list[list[tuple[int, int, int]]]] = [[] for _ in range(passes)]
    raw: list[dict] = []
    last_local: dict[int, tuple[int, int]] = {}   # mfg -> (pass, bucket idx)
    first_local: dict[int, tuple[int, int]] = {}
    shared = 0

    for mid in order.order:
        g = p.by_id(mid)
        for si, (q, lo, hi) in enumerate(_split_segments(g, n)):
            lpv_lo, lpv_hi = (lo - 1) % n, (hi - 1) % n
            placed_idx = None
            if si == 0 and share and mid not in no_share:
                c = order.most_recent_child.get(mid)
                if c is not None and c in last_local:
                    cq, cidx = last_local[c]
                    if cq == q:
                        occ = buckets[q][cidx]
                        if all(hi2 < lpv_lo or lo2 > lpv_hi for lo2, hi2, _ in occ):
                            occ.append((lpv_lo, lpv_hi, mid))
                            placed_idx = cidx
                            shared += 1
            if placed_idx is None:
                buckets[q].append([(lpv_lo, lpv_hi, mid)])
                placed_idx = len(buckets[q]) - 1
            raw.append({"mfg": mid, "pass": q, "idx": placed_idx,
                        "lpv_lo": lpv_lo, "lpv_hi": lpv_hi,
                        "level_lo": lo, "level_hi": hi})
            last_local[mid] = (q, placed_idx)
            if si == 0:
                first_local[mid] = (q, placed_idx)

    offsets = []
    total = 0
    for q in range(passes):
        offsets.append(total)
        total += len(buckets[q])
    windows = [(offsets[q], offsets[q] + len(buckets[q])) for q in range(passes)]

    segments = [Seg(mfg=r["mfg"], pass_idx=r["pass"],
                    address=offsets[r["pass"]] + r["idx"],
                    lpv_lo=r["lpv_lo"], lpv_hi=r["lpv_hi"],
                    level_lo=r["level_lo"], level_hi=r["level_hi"])
                for r in raw]
    segs_of: dict[int, list[Seg]] = {}
    for s in segments:
        segs_of.setdefault(s.mfg, []).append(s)
    address_of = {mid: offsets[q] + i for mid, (q, i) in first_local.items()}
    last_address_of = {mid: offsets[q] + i for mid, (q, i) in last_local.items()}

    used: dict[tuple[int, int], int] = {}
    for s in segments:
        for v in range(s.lpv_lo, s.lpv_hi + 1):
            prev = used.setdefault((v, s.address), s.mfg)
            if prev != s.mfg:
                raise AddressConflictError(
                    f"MFGs {prev} and {s.mfg} both occupy LPV {v} at address {s.address}")
    return AddressPlan(address_of=address_of, last_address_of=last_address_of,
                       segments=segments, segs_of=segs_of, windows=windows,
                       queue_depth=total, passes=passes, shared_count=shared)


# ---------------------------------------------------------------------------
# Snapshot allocation

# Operand sources, as hashable tuples until emission turns them into selectors:
#   ("switch", node)       same-wave delivery through the switch
#   ("park", node, wave)   parked value re-injected through a park tap
#   ("input", node)        PI fetched from the streaming buffer
#   ("circ", node)         value circulated through the output buffer


@dataclass
class CellState:
    """Selector/latch bookkeeping for one (LPV, address, LPE) slot."""
    node: tuple[int, int] | None = None       # (mfg, node)
    arity: int = 0
    sources: dict = field(default_factory=lambda: {"a": None, "b": None})
    writes: dict = field(default_factory=lambda: {"a": False, "b": False})


@dataclass
class ParkRec:
    """One parked value: track (lpv, lpe, reg) busy over [start, end)."""
    lpv: int
    lpe: int
    reg: str
    node: int
    start: int                      # producing wave (latch address)
    end: int                        # last consuming wave (exclusive bound)
    consumers: list[int] = field(default_factory=list)


@dataclass
class SnapshotPlan:
    place: dict[tuple[int, int], int]              # (mfg, node) -> lpe
    cells: dict[tuple[int, int, int], CellState]   # (lpv, addr, lpe)
    row_nodes: dict[tuple[int, int], dict[int, tuple[int, int]]]
    sources_of: dict[tuple[int, int], list]        # (mfg, node) -> operand sources
    parks: list[ParkRec]
    park_track: dict[tuple[int, int, int], tuple[int, str]]  # (lpv, node, wave) -> (lpe, reg)
    circ_values: list[tuple[int, int]]             # (producer mfg, node)


class _Alloc:
    def __init__(self, dag: LeveledDag, p: Partition, order: ExecutionOrder,
                 plan: AddressPlan, cfg: LpuConfig):
        self.dag = dag
        self.nl = dag.netlist
        self.p = p
        self.order = order
        self.plan = plan
        self.cfg = cfg
        self.place: dict[tuple[int, int], int] = {}
        self.cells: dict[tuple[int, int, int], CellState] = {}
        self.row_nodes: dict[tuple[int, int], dict[int, tuple[int, int]]] = {}
        self.sources_of: dict[tuple[int, int], list] = {}
        self.park_demand: dict[tuple[int, int, int], dict] = {}  # (lpv, node, wave)
        self.circ_values: list[tuple[int, int]] = []
        self._circ_seen: set[tuple[int, int]] = set()

    def cell(self, v: int, a: int, e: int) -> CellState:
        return self.cells.setdefault((v, a, e), CellState())

    def raw_sources(self, z: int, g: Mfg, level: int, seg: Seg) -> list[tuple]:
        out = []
        for f in self.nl.fanin_ids(z):
            if self.nl.is_pi(f):
                out.append(("input", f))
            elif (level - 1) % self.cfg.n == 0 and level - 1 > 0:
                out.append(("circ", f))
                if f in g.nodes and self.dag.level[f] >= g.bottom_level:
                    producer = g.id
                else:
                    producer = self.p.producer_of[f]
                key = (producer, f)
                if key not in self._circ_seen:
                    self._circ_seen.add(key)
                    self.circ_values.append(key)
            elif level > g.bottom_level:
                out.append(("switch", f))
            else:
                producer = self.p.producer_of[f]
                a_c = self.plan.last_address_of[producer]
                if a_c == seg.address:
                    out.append(("switch", f))
                else:
                    out.append(("park", f, a_c))
                    v = (level - 1) % self.cfg.n
                    dem = self.park_demand.setdefault(
                        (v, f, a_c), {"end": seg.address, "consumers": []})
                    dem["end"] = max(dem["end"], seg.address)
                    dem["consumers"].append(seg.address)
        return out

    def place_rows(self) -> None:
        for mid in self.order.order:
            g = self.p.by_id(mid)
            for seg in self.plan.segs_of[mid]:
                for level in range(seg.level_lo, seg.level_hi + 1):
                    v = (level - 1) % self.cfg.n
                    row = self.row_nodes.setdefault((v, seg.address), {})
                    for e, z in enumerate(g.nodes_by_level[level]):
                        assert e not in row
                        row[e] = (mid, z)
                        self.place[(mid, z)] = e
                        srcs = self.raw_sources(z, g, level, seg)
                        self.sources_of[(mid, z)] = srcs
                        st = self.cell(v, seg.address, e)
                        st.node = (mid, z)
                        st.arity = op_arity(self.nl.gate_of(z).op)
                        st.sources["a"] = srcs[0]
                        if st.arity == 2:
                            st.sources["b"] = srcs[1]

    # -- latch binding ------------------------------------------------------

    def _latch_ok(self, st: CellState, side: str, src: tuple) -> bool:
        if st.writes[side]:
            return st.sources[side] == src
        if st.sources[side] == src:
            return True
        if st.node is None:
            return st.sources[side] is None
        other = "b" if side == "a" else "a"
        if st.arity == 1:
            # SISO operand is pinned to side a; side b is free for latches
            return side == "b" and st.sources[side] is None
        # MISO: src must be one of the operands, movable to `side` unless
        # the other side's selector is pinned by an earlier latch
        return st.sources[other] == src and not st.writes[other]

    @staticmethod
    def _latch_commit(st: CellState, side: str, src: tuple) -> None:
        other = "b" if side == "a" else "a"
        if (st.arity == 2 and st.sources[side] != src
                and st.sources[other] == src and not st.writes[other]):
            st.sources[side], st.sources[other] = st.sources[other], st.sources[side]
        st.sources[side] = src
        st.writes[side] = True

    def allocate_parks(self) -> tuple[list[ParkRec], dict]:
        parks: list[ParkRec] = []
        track_of: dict[tuple[int, int, int], tuple[int, str]] = {}
        by_lpv: dict[int, list[tuple[int, int, dict]]] = {}
        for (v, f, start), dem in self.park_demand.items():
            by_lpv.setdefault(v, []).append((start, f, dem))
        for v in sorted(by_lpv):
            demands = sorted(by_lpv[v], key=lambda d: (d[0], d[1]))
            busy: dict[tuple[int, str], list[tuple[int, int]]] = {}
            for start, f, dem in demands:
                end = dem["end"]
                placed = None
                for e in range(self.cfg.m):
                    for r in ("a", "b"):
                        spans = busy.setdefault((e, r), [])
                        if any(s < end and start < t for s, t in spans):
                            continue
                        st = self.cell(v, start, e)
                        if not self._latch_ok(st, r, ("switch", f)):
                            continue
                        placed = (e, r)
                        break
                    if placed:
                        break
                if placed is None:
                    ex = SnapshotOverflowError(
                        f"LPV {v}: no free snapshot register for value "
                        f"'{self.nl.node_name(f)}' parked over waves "
                        f"[{start}, {end}] (capacity 2m={2*self.cfg.m}); "
                        f"consumers at addresses {sorted(set(dem['consumers']))}",
                        name=self.nl.node_name(f))
                    ex.lpv = v
                    ex.address = start
                    raise ex
                e, r = placed
                busy[(e, r)].append((start, end))
                self._latch_commit(self.cell(v, start, e), r, ("switch", f))
                track_of[(v, f, start)] = (e, r)
                parks.append(ParkRec(lpv=v, lpe=e, reg=r, node=f, start=start,
                                     end=end, consumers=sorted(set(dem["consumers"]))))
        return parks, track_of

    def run(self) -> SnapshotPlan:
        self.place_rows()
        parks, track_of = self.allocate_parks()
        return SnapshotPlan(place=self.place, cells=self.cells,
                            row_nodes=self.row_nodes, sources_of=self.sources_of,
                            parks=parks, park_track=track_of,
                            circ_values=self.circ_values)


def allocate_snapshots(order: ExecutionOrder, plan: AddressPlan, p: Partition,
                       dag: LeveledDag, cfg: LpuConfig) -> SnapshotPlan:
    """Place every node occurrence onto an LPE and pack parked-value
    lifetimes onto the 2m snapshot registers of each LPV; raises
    SnapshotOverflow when the packing does not fit."""
    return _Alloc(dag, p, order, plan, cfg).run()


# ---------------------------------------------------------------------------
# Emission


def emit_program(dag: LeveledDag, p: Partition, order: ExecutionOrder,
                 plan: AddressPlan, snap: SnapshotPlan, cfg: LpuConfig) -> Program:
    nl = dag.netlist
    n, m = cfg.n, cfg.m
    depth = plan.queue_depth
    grid = [[Cell.empty(cfg) for _ in range(depth)] for _ in range(n)]

    # Stream-buffer offsets: PI region first (one slot per use, consumer scan
    # order), then circulated values (producer creation order).
    input_map: list[dict] = []
    pi_offset: dict[tuple[int, int, str], int] = {}
    counter = 0
    for addr in range(depth):
        for v in range(n):
            for e in range(m):
                st = snap.cells.get((v, addr, e))
                if st is None:
                    continue
                for side in ("a", "b"):
                    src = st.sources[side]
                    if src is not None and src[0] == "input":
                        assert v == 0, "PI reads only happen on LPV 0"
                        pi_offset[(addr, e, side)] = counter
                        input_map.append({"offset": counter,
                                          "net": nl.node_name(src[1]),
                                          "addr": addr, "lpe": e, "operand": side})
                        counter += 1
    circ_offset: dict[tuple[int, int], int] = {}
    for key in snap.circ_values:
        circ_offset[key] = counter
        counter += 1

    def circ_lookup(consumer_mfg: int, f: int) -> int:
        g = p.by_id(consumer_mfg)
        if f in g.nodes and dag.level[f] >= g.bottom_level:
            producer = consumer_mfg
        else:
            producer = p.producer_of[f]
        return circ_offset[(producer, f)]

    # Switch slots, per consuming (LPV, address).  A slot is fed either by
    # the previous LPV's LPE (same-wave value) or by a park tap.
    slot_of: dict[tuple[int, int], dict[tuple, int]] = {}

    def slot_for(v: int, addr: int, key: tuple) -> int:
        reg = slot_of.setdefault((v, addr), {})
        if key not in reg:
            if len(reg) >= 2 * m:
                raise AddressConflictError(
                    f"more than {2*m} switch slots needed at LPV {v}, address {addr}")
            reg[key] = len(reg)
        return reg[key]

    for (v, addr, e), st in sorted(snap.cells.items()):
        instr = grid[v][addr].lpe[e]
        if st.node is not None:
            mfg_id, z = st.node
            instr.op = nl.gate_of(z).op.value
        for side in ("a", "b"):
            src = st.sources[side]
            if src is None:
                continue
            if src[0] == "input":
                sel = {"kind": "input", "offset": pi_offset[(addr, e, side)]}
            elif src[0] == "circ":
                assert st.node is not None
                sel = {"kind": "input", "offset": circ_lookup(st.node[0], src[1])}
            elif src[0] == "switch":
                sel = {"kind": "switch", "slot": slot_for(v, addr, ("lpe", src[1]))}
            elif src[0] == "park":
                sel = {"kind": "switch",
                       "slot": slot_for(v, addr, ("park", src[1], src[2]))}
            else:
                raise AssertionError(src)
            if side == "a":
                instr.src_a = sel
            else:
                instr.src_b = sel
        instr.write_a = st.writes["a"]
        instr.write_b = st.writes["b"]

    # Routes: cell (v, addr).route feeds LPV v's input slots.
    for (v, addr), reg in sorted(slot_of.items()):
        route = grid[v][addr].route
        producers = snap.row_nodes.get((v - 1, addr), {}) if v >= 1 else {}
        node_to_lpe = {node: e for e, (_, node) in producers.items()}
        for key, slot in reg.items():
            if key[0] == "lpe":
                assert v >= 1, "LPV 0 has no upstream LPV"
                j = node_to_lpe.get(key[1])
                if j is None:
                    raise AddressConflictError(
                        f"switch value '{nl.node_name(key[1])}' not produced at "
                        f"LPV {v-1}, address {addr}")
                route[slot] = {"kind": "lpe", "index": j}
            else:
                _, f, start = key
                j, r = snap.park_track[(v, f, start)]
                route[slot] = {"kind": "park", "lpe": j, "reg": r}

    # Captures: circulated values then primary outputs.
    output_map: list[dict] = []
    for (producer, f) in snap.circ_values:
        e = snap.place[(producer, f)]
        lvl = dag.level[f]
        seg = next(s for s in plan.segs_of[producer]
                   if s.level_lo <= lvl <= s.level_hi)
        v = (lvl - 1) % n
        assert v == n - 1, "circulated values always exit the last LPV"
        grid[v][seg.address].lpe[e].capture = True
        output_map.append({"addr": seg.address, "lpv": v, "lpe": e,
                           "kind": "circ", "offset": circ_offset[(producer, f)]})
    for po in dict.fromkeys(nl.primary_outputs):
        d = nl.name_index[po]
        producer = p.producer_of[d]
        e = snap.place[(producer, d)]
        seg = plan.segs_of[producer][-1]
        v = (dag.level[d] - 1) % n
        grid[v][seg.address].lpe[e].capture = True
        output_map.append({"addr": seg.address, "lpv": v, "lpe": e,
                           "kind": "po", "net": po})

    seen_cap = set()
    for entry in output_map:
        key = (entry["addr"], entry["lpe"])
        if key in seen_cap:
            raise AddressConflictError(
                f"two captures collide at address {entry['addr']}, LPE {entry['lpe']}")
        seen_cap.add(key)

    segments = [SegmentMeta(mfg=s.mfg, pass_idx=s.pass_idx, address=s.address,
                            lpv_lo=s.lpv_lo, lpv_hi=s.lpv_hi,
                            level_lo=s.level_lo, level_hi=s.level_hi,
                            bottom=p.by_id(s.mfg).bottom_level,
                            top=p.by_id(s.mfg).top_level)
                for s in sorted(plan.segments,
                                key=lambda s: (s.pass_idx, s.address, s.lpv_lo))]

    return Program(config=cfg, queue_depth=depth, passes=plan.passes,
                   pass_windows=list(plan.windows), queues=grid,
                   input_buffer_map=input_map, output_buffer_map=output_map,
                   segments=segments,
                   net_name_table={nid: nl.node_name(nid)
                                   for nid in range(nl.num_nodes)})
