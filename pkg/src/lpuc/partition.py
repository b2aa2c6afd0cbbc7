"""Maximal-feasible-subgraph extraction and sibling merging.

An MFG is a leveled subgraph in which only the bottom-most level takes
inputs from outside and no level holds more than m nodes.  The
partitioner extracts one MFG per output cone top-down, then a greedy
pass merges sibling MFGs (children of one parent with equal bottom
levels) while the per-level union stays within m.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .errors import BottomMismatchError, CompileError, WidthOverflowError
from .leveler import LeveledDag


@dataclass
class Mfg:
    id: int
    nodes: frozenset[int]
    bottom_level: int
    top_level: int
    nodes_by_level: dict[int, list[int]]    # level -> sorted node ids
    roots: list[int]                        # top-level output nodes
    input_nodes: list[int]                  # distinct fanins of the bottom row
    children: list[int] = field(default_factory=list)
    parents: list[int] = field(default_factory=list)

    @property
    def min_root(self) -> int:
        return min(self.roots)

    @property
    def depth(self) -> int:
        return self.top_level - self.bottom_level + 1


@dataclass
class Partition:
    mfgs: list[Mfg]
    root_mfg_ids: list[int]
    coverage: frozenset[int]
    producer_of: dict[int, int]             # root node id -> mfg id

    def by_id(self, mid: int) -> Mfg:
        return self.mfgs[mid]

    @property
    def l_max(self) -> int:
        return max(m.top_level for m in self.mfgs)


def find_mfg(dag: LeveledDag, root: int, m: int) -> Mfg:
    """Grow the fanin cone of `root` breadth-first until some level of the
    cone exceeds m nodes; that level becomes the stop level and the MFG
    keeps everything above it.  PIs are counted (they can trigger the
    stop) but are never members."""
    if m < 1:
        raise WidthOverflowError(f"LPV width m={m} cannot hold any node")
    nl = dag.netlist
    if nl.is_pi(root):
        raise WidthOverflowError("cannot root an MFG at a primary input",
                                 name=nl.node_name(root))
    level = dag.level
    queue: deque[int] = deque([root])
    visited = {root}
    count: dict[int, int] = {}
    popped: list[int] = []
    stop_level: int | None = None
    while queue:
        cur = queue.popleft()
        l = level[cur]
        count[l] = count.get(l, 0) + 1
        popped.append(cur)
        if count[l] > m:
            stop_level = l
            break
        for f in nl.fanin_ids(cur):
            if f not in visited:
                visited.add(f)
                queue.append(f)
    bottom = 1 if stop_level is None else stop_level + 1
    nodes = [nid for nid in popped if level[nid] >= bottom]
    by_level: dict[int, list[int]] = {}
    for nid in nodes:
        by_level.setdefault(level[nid], []).append(nid)
    by_level = {l: sorted(v) for l, v in sorted(by_level.items())}
    inputs = sorted({f for nid in by_level[bottom] for f in nl.fanin_ids(nid)})
    return Mfg(id=-1, nodes=frozenset(nodes), bottom_level=bottom,
               top_level=level[root], nodes_by_level=by_level,
               roots=[root], input_nodes=inputs)


def _renumbered(mfgs: list[Mfg], po_drivers: list[int]) -> Partition:
    """Stable-renumber by ascending min root node id and rebuild links."""
    mfgs = sorted(mfgs, key=lambda g: g.min_root)
    old_to_new = {}
    for new_id, g in enumerate(mfgs):
        old_to_new[g.id] = new_id
    producer_of: dict[int, int] = {}
    for new_id, g in enumerate(mfgs):
        g.id = new_id
        for r in g.roots:
            producer_of[r] = new_id
    for g in mfgs:
        g.children = sorted({old_to_new[c] for c in g.children})
        g.parents = sorted({old_to_new[p] for p in g.parents})
    coverage = frozenset().union(*(g.nodes for g in mfgs)) if mfgs else frozenset()
    root_ids = list(dict.fromkeys(producer_of[d] for d in po_drivers))
    return Partition(mfgs=mfgs, root_mfg_ids=root_ids, coverage=coverage,
                     producer_of=producer_of)


def partition(dag: LeveledDag, m: int) -> Partition:
    """Cover the balanced dag with MFGs, one BFS per primary output.

    Each extracted MFG's gate-level inputs root further MFGs until the
    traversal bottoms out at the PIs; shared roots are memoized, which
    also deduplicates MFGs reachable from several POs.
    """
    nl = dag.netlist
    if not nl.gates:
        raise CompileError("netlist has no gates; nothing to partition")
    by_root: dict[int, Mfg] = {}
    mfgs: list[Mfg] = []

    def get(root: int) -> Mfg:
        got = by_root.get(root)
        if got is None:
            got = find_mfg(dag, root, m)
            got.id = len(mfgs)
            by_root[root] = got
            mfgs.append(got)
        return got

    po_drivers = []
    for po in nl.primary_outputs:
        drv = nl.name_index[po]
        if nl.is_pi(drv):
            raise CompileError(f"primary output '{po}' is a primary input", name=po)
        po_drivers.append(drv)

    for drv in po_drivers:
        fresh = drv not in by_root
        top = get(drv)
        if not fresh:
            continue
        queue = deque([top])
        while queue:
            cur = queue.popleft()
            for x in cur.input_nodes:
                if nl.is_pi(x):
                    continue
                known = x in by_root
                child = get(x)
                if child.id not in cur.children:
                    cur.children.append(child.id)
                    child.parents.append(cur.id)
                if not known:
                    queue.append(child)

    covered = frozenset().union(*(g.nodes for g in mfgs))
    all_gates = frozenset(range(nl.num_pis, nl.num_nodes))
    if covered != all_gates:
        missing = sorted(all_gates - covered)
        raise CompileError(
            f"{len(missing)} gate(s) unreachable from any primary output "
            f"(first: '{nl.node_name(missing[0])}'); strip dead logic first",
            name=nl.node_name(missing[0]))
    return _renumbered(mfgs, po_drivers)


def check_level(a: Mfg, b: Mfg, m: int) -> bool:
    """True iff merging a and b keeps every level's node union within m."""
    if a.bottom_level != b.bottom_level:
        raise BottomMismatchError(
            f"bottom levels differ: {a.bottom_level} vs {b.bottom_level}")
    for l in range(a.bottom_level, max(a.top_level, b.top_level) + 1):
        union = set(a.nodes_by_level.get(l, ())) | set(b.nodes_by_level.get(l, ()))
        if len(union) > m:
            return False
    return True


def _union_mfg(a: Mfg, b: Mfg, new_id: int) -> Mfg:
    by_level: dict[int, list[int]] = {}
    for l in range(a.bottom_level, max(a.top_level, b.top_level) + 1):
        u = set(a.nodes_by_level.get(l, ())) | set(b.nodes_by_level.get(l, ()))
        if u:
            by_level[l] = sorted(u)
    inputs = sorted(set(a.input_nodes) | set(b.input_nodes))
    return Mfg(id=new_id, nodes=a.nodes | b.nodes,
               bottom_level=a.bottom_level,
               top_level=max(a.top_level, b.top_level),
               nodes_by_level=by_level,
               roots=a.roots + b.roots,
               input_nodes=inputs,
               children=list(dict.fromkeys(a.children + b.children)),
               parents=sorted(set(a.parents) | set(b.parents)))


def merge_mfgs(p: Partition, m: int) -> Partition:
    """Greedy sibling merging, breadth-first from the root MFG(s).

    Among the children of the MFG being visited, pairs with equal bottom
    levels whose per-level union fits in m are merged repeatedly (scan
    order: ascending minimum root node id) until no pair merges; merged
    MFGs inherit both parts' links and grandchildren are re-parented.
    """
    alive: dict[int, Mfg] = {}
    for g in p.mfgs:
        alive[g.id] = Mfg(id=g.id, nodes=g.nodes, bottom_level=g.bottom_level,
                          top_level=g.top_level,
                          nodes_by_level={l: list(v) for l, v in g.nodes_by_level.items()},
                          roots=list(g.roots), input_nodes=list(g.input_nodes),
                          children=list(g.children), parents=list(g.parents))
    next_id = max(alive) + 1 if alive else 0
    queue: deque[int] = deque(sorted(p.root_mfg_ids))
    enqueued = set(queue)
    processed: set[int] = set()

    while queue:
        cur_id = queue.popleft()
        cur = alive.get(cur_id)
        if cur is None or cur_id in processed:
            continue
        processed.add(cur_id)
        while True:
            kids = sorted((alive[c] for c in cur.children), key=lambda g: g.min_root)
            merged_any = False
            for i in range(len(kids)):
                for j in range(i + 1, len(kids)):
                    a, b = kids[i], kids[j]
                    if a.bottom_level != b.bottom_level:
                        continue
                    if not check_level(a, b, m):
                        continue
                    merged = _union_mfg(a, b, next_id)
                    next_id += 1
                    alive[merged.id] = merged
                    del alive[a.id], alive[b.id]
                    dead = {a.id, b.id}
                    for other in alive.values():
                        if other is merged:
                            continue
                        if dead & set(other.children):
                            other.children = list(dict.fromkeys(
                                merged.id if c in dead else c for c in other.children))
                        if dead & set(other.parents):
                            other.parents = sorted(
                                {merged.id if q in dead else q for q in other.parents})
                    merged.children = [c for c in merged.children if c not in dead]
                    merged.parents = [q for q in merged.parents if q not in dead]
                    merged_any = True
                    break
                if merged_any:
                    break
            if not merged_any:
                break
        for c in sorted(cur.children):
            if c not in enqueued and c in alive:
                enqueued.add(c)
                queue.append(c)

    po_drivers = [r for rid in p.root_mfg_ids for r in p.mfgs[rid].roots]
    return _renumbered(list(alive.values()), po_drivers)


def partition_to_dump(p: Partition) -> list[dict]:
    """Stable JSON-able dump: one record per MFG."""
    return [{
        "id": g.id,
        "bottom_level": g.bottom_level,
        "top_level": g.top_level,
        "nodes": sorted(g.nodes),
        "roots": list(g.roots),
        "children": list(g.children),
    } for g in p.mfgs]
