"""Logic-level assignment and full path balancing.

After balancing, every edge spans exactly one level and every primary
output sits at l_max, which is what lets the partitioner treat BFS
depth and logic level interchangeably and lets the instruction grid map
level l onto LPV (l-1) mod n.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .errors import CompileError
from .netlist import Gate, GateOp, Netlist, _build_name_index, validate


@dataclass
class LeveledDag:
    netlist: Netlist
    level: list[int]                      # by node id
    l_max: int
    node_set_by_level: dict[int, list[int]]
    inserted_buffer_count: int = 0
    balanced: bool = False

    def fanin_ids(self, nid: int) -> tuple[int, ...]:
        return self.netlist.fanin_ids(nid)


def _levels_of(netlist: Netlist) -> list[int]:
    level = [0] * netlist.num_nodes
    npis = netlist.num_pis
    indeg = [0] * len(netlist.gates)
    consumers: dict[int, list[int]] = {}
    for gid in range(npis, netlist.num_nodes):
        for f in netlist.fanin_ids(gid):
            if f >= npis:
                indeg[gid - npis] += 1
            consumers.setdefault(f, []).append(gid)
    ready = deque(i + npis for i, d in enumerate(indeg) if d == 0)
    while ready:
        gid = ready.popleft()
        level[gid] = 1 + max(level[f] for f in netlist.fanin_ids(gid))
        for c in consumers.get(gid, ()):
            indeg[c - npis] -= 1
            if indeg[c - npis] == 0:
                ready.append(c)
    return level


def _group_by_level(level: list[int]) -> dict[int, list[int]]:
    groups: dict[int, list[int]] = {}
    for nid, l in enumerate(level):
        groups.setdefault(l, []).append(nid)
    return {l: sorted(groups[l]) for l in sorted(groups)}


def levelize(netlist: Netlist) -> LeveledDag:
    """ASAP levels: 0 for PIs, 1 + max(fanin levels) for gates."""
    validate(netlist)
    level = _levels_of(netlist)
    l_max = max(level) if level else 0
    return LeveledDag(netlist=netlist, level=level, l_max=l_max,
                      node_set_by_level=_group_by_level(level))


class _namer:
    """Fresh `__fpb_<k>` names, skipping anything the netlist already uses."""

    def __init__(self, taken: set[str]):
        self.taken = set(taken)
        self.k = 0
        self.count = 0

    def fresh(self) -> str:
        while True:
            name = f"__fpb_{self.k}"
            self.k += 1
            if name not in self.taken:
                self.taken.add(name)
                self.count += 1
                return name


def balance_paths(dag: LeveledDag) -> LeveledDag:
    """Insert BUF chains so every edge spans one level and POs sit at l_max.

    Each unbalanced edge gets its own chain (no sharing between fanout
    edges); a padded PO keeps its net name by renaming the original
    driver net and handing the name to the last buffer of the chain.
    """
    nl = dag.netlist
    level = list(dag.level)
    l_max = dag.l_max
    names = _namer(set(nl.name_index))

    po_pad: dict[str, int] = {}          # PO net -> pad chain length
    if l_max > 0:
        for po in dict.fromkeys(nl.primary_outputs):
            drv = nl.name_index[po]
            if nl.is_pi(drv):
                raise CompileError(
                    f"primary output '{po}' is a primary input; drive it "
                    f"through a BUF gate to make the netlist balanceable",
                    name=po)
            gap = l_max - level[drv]
            if gap > 0:
                po_pad[po] = gap

    rename: dict[str, str] = {}          # original driver net -> fresh internal name
    for po in po_pad:
        rename[po] = names.fresh()

    gates: list[Gate] = []
    for g in nl.gates:
        out = rename.get(g.output, g.output)
        fanins = tuple(rename.get(f, f) for f in g.fanins)
        gates.append(Gate(out, g.op, fanins))

    extra: list[Gate] = []
    extra_level: list[int] = []

    def chain(src_name: str, src_level: int, length: int, final_name: str | None) -> None:
        cur = src_name
        for i in range(length):
            out = final_name if (final_name is not None and i == length - 1) else names.fresh()
            extra.append(Gate(out, GateOp.BUF, (cur,)))
            extra_level.append(src_level + i + 1)
            cur = out

    # Pad shallow POs up to l_max first so edge splicing below sees final names.
    for po, gap in po_pad.items():
        drv = nl.name_index[po]
        chain(rename[po], level[drv], gap, po)

    # Splice per-edge chains; iterate gates in id order, fanin slots left to right.
    npis = nl.num_pis
    for gid in range(npis, nl.num_nodes):
        g = gates[gid - npis]
        src_ids = nl.fanin_ids(gid)       # renaming never changes node identity
        new_fanins = list(g.fanins)
        for slot, fname in enumerate(g.fanins):
            src = src_ids[slot]
            gap = level[gid] - level[src]
            if gap > 1:
                mid = names.fresh()
                chain(fname, level[src], gap - 1, mid)
                new_fanins[slot] = mid
        if tuple(new_fanins) != g.fanins:
            gates[gid - npis] = Gate(g.output, g.op, tuple(new_fanins))

    out_netlist = Netlist(primary_inputs=list(nl.primary_inputs),
                          primary_outputs=list(nl.primary_outputs),
                          gates=gates + extra)
    out_netlist.name_index = _build_name_index(out_netlist.primary_inputs,
                                               out_netlist.gates)
    out_level = level + extra_level
    out = LeveledDag(netlist=out_netlist, level=out_level,
                     l_max=max(out_level) if out_level else 0,
                     node_set_by_level=_group_by_level(out_level),
                     inserted_buffer_count=dag.inserted_buffer_count + names.count,
                     balanced=True)
    assert out.l_max == l_max
    for gid in range(out_netlist.num_pis, out_netlist.num_nodes):
        for f in out_netlist.fanin_ids(gid):
            assert out_level[gid] == out_level[f] + 1, "unbalanced edge survived"
    return out
