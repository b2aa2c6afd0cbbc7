"""Reference evaluation and seeded synthetic netlist generators.

eval_dag is the single source of functional truth for the whole
pipeline; it deliberately shares no gate-semantics code with the
simulator (minterm-style expressions here, direct bitwise forms there)
so a transcription slip in one cannot hide in the other.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, asdict
from random import Random

from .errors import InfeasibleSpecError, MissingInputError
from .netlist import Gate, GateOp, Netlist, _build_name_index
from .program import LpuConfig


def _inv(x: int, mask: int) -> int:
    return x ^ mask


# Minterm expansions over (a, b); kept intentionally distinct from the
# simulator's bitwise forms.
_EVAL2 = {
    GateOp.AND: lambda a, b, m: a & b,
    GateOp.OR: lambda a, b, m: (a & b) | (a & _inv(b, m)) | (_inv(a, m) & b),
    GateOp.XOR: lambda a, b, m: (a & _inv(b, m)) | (_inv(a, m) & b),
    GateOp.XNOR: lambda a, b, m: (a & b) | (_inv(a, m) & _inv(b, m)),
    GateOp.NAND: lambda a, b, m: (a & _inv(b, m)) | (_inv(a, m) & b) | (_inv(a, m) & _inv(b, m)),
    GateOp.NOR: lambda a, b, m: _inv(a, m) & _inv(b, m),
}
_EVAL1 = {
    GateOp.NOT: lambda a, m: _inv(a, m),
    GateOp.BUF: lambda a, m: a,
}


def eval_dag(netlist: Netlist, inputs: dict[str, int], bits: int) -> dict[str, int]:
    """Topological evaluation with bitwise semantics across the batch."""
    mask = (1 << bits) - 1
    values: dict[int, int] = {}
    for i, name in enumerate(netlist.primary_inputs):
        if name not in inputs:
            raise MissingInputError(f"primary input '{name}' not bound", name=name)
        values[i] = inputs[name] & mask
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
        g = netlist.gate_of(gid)
        fin = netlist.fanin_ids(gid)
        if g.op in _EVAL2:
            values[gid] = _EVAL2[g.op](values[fin[0]], values[fin[1]], mask)
        else:
            values[gid] = _EVAL1[g.op](values[fin[0]], mask)
        for c in consumers.get(gid, ()):
            indeg[c - npis] -= 1
            if indeg[c - npis] == 0:
                ready.append(c)
    return {po: values[netlist.name_index[po]] for po in netlist.primary_outputs}


PROFILES = ("uniform", "fanin-tree", "wide-shallow", "deep-narrow", "sibling-family")


@dataclass(frozen=True)
class GenSpec:
    seed: int = 0
    profile: str = "uniform"
    gate_count: int = 100
    pi_count: int = 16
    po_count: int = 1
    max_fanin_depth: int = 2     # how many levels back a fanin edge may reach
    width: int | None = None     # wide-shallow / deep-narrow knob
    depth: int | None = None
    locality: int | None = None  # fanin window radius; None = global wiring
    k: int | None = None         # sibling-family knobs
    w: int | None = None
    m: int | None = None         # LPV width the sibling family is built for
    mismatched_bottoms: bool = False

    def to_json_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_json(text: str) -> "GenSpec":
        return GenSpec(**json.loads(text))


_MISO_PALETTE = (GateOp.AND, GateOp.OR, GateOp.XOR, GateOp.XNOR,
                 GateOp.NAND, GateOp.NOR)
_SISO_PALETTE = (GateOp.NOT, GateOp.BUF)


class _Builder:
    def __init__(self, pi_count: int):
        self.pis = [f"x{i}" for i in range(pi_count)]
        self.gates: list[Gate] = []
        self.k = 0

    def gate(self, op: GateOp, *fanins: str) -> str:
        name = f"g{self.k}"
        self.k += 1
        self.gates.append(Gate(name, op, tuple(fanins)))
        return name

    def netlist(self, pos: list[str]) -> Netlist:
        nl = Netlist(primary_inputs=list(self.pis), primary_outputs=list(pos),
                     gates=list(self.gates))
        nl.name_index = _build_name_index(nl.primary_inputs, nl.gates)
        return nl


def _reduce_trees(b: _Builder, rng: Random, nets: list[str], po_count: int) -> list[str]:
    """Pairwise-reduce `nets` into po_count roots (consumes every net)."""
    groups: list[list[str]] = [[] for _ in range(po_count)]
    for i, net in enumerate(nets):
        groups[i % po_count].append(net)
    roots = []
    for grp in groups:
        if not grp:
            grp = [rng.choice(nets)]
        while len(grp) > 1:
            nxt = []
            for i in range(0, len(grp) - 1, 2):
                nxt.append(b.gate(rng.choice(_MISO_PALETTE), grp[i], grp[i + 1]))
            if len(grp) % 2:
                nxt.append(grp[-1])
            grp = nxt
        roots.append(grp[0])
    return roots


def _consumed_map(b: _Builder) -> set[str]:
    used: set[str] = set()
    for g in b.gates:
        used.update(g.fanins)
    return used


def gen_random_dag(spec: GenSpec) -> Netlist:
    """Seed-deterministic netlist matching the requested profile."""
    if spec.profile not in PROFILES:
        raise InfeasibleSpecError(f"unknown profile '{spec.profile}'")
    if spec.profile == "sibling-family":
        if spec.k is None or spec.w is None or spec.m is None:
            raise InfeasibleSpecError("sibling-family needs k, w and m")
        return gen_sibling_family(spec.k, spec.w, LpuConfig(m=spec.m),
                                  depth=spec.depth or 4, seed=spec.seed,
                                  mismatched_bottoms=spec.mismatched_bottoms)
    if spec.pi_count < 2:
        raise InfeasibleSpecError("need at least 2 primary inputs")
    if spec.po_count < 1:
        raise InfeasibleSpecError("need at least 1 primary output")
    rng = Random(spec.seed)
    b = _Builder(spec.pi_count)

    if spec.profile == "fanin-tree":
        roots = _reduce_trees(b, rng, list(b.pis), spec.po_count)
        return b.netlist(roots)

    if spec.profile == "wide-shallow":
        depth = spec.depth or 3
        width = spec.width or max(4, spec.gate_count // max(1, depth))
    elif spec.profile == "deep-narrow":
        depth = spec.depth or 48
        width = spec.width or 1
    else:  # uniform
        depth = spec.depth or max(2, round(math.sqrt(max(4, spec.gate_count) / 2)))
        width = None

    if spec.profile == "uniform":
        base = max(1, spec.gate_count // depth)
        widths = [base] * depth
        for i in range(spec.gate_count - base * depth):
            widths[i % depth] += 1
    else:
        widths = [width] * depth
    reach = max(1, spec.max_fanin_depth)

    levels: list[list[str]] = [list(b.pis)]
    for li, w in enumerate(widths, start=1):
        row = []
        pool: list[str] = []
        for back in range(1, min(reach, li) + 1):
            pool.extend(levels[li - back])

        def pick(nets: list[str], pos: int, row_w: int) -> str:
            if spec.locality is None or len(nets) <= 2 * spec.locality:
                return rng.choice(nets)
            # wire within a window around the gate's relative position,
            # like placed logic; keeps live cuts commensurate with the window
            center = round(pos / max(1, row_w - 1) * (len(nets) - 1)) if row_w > 1 \
                else len(nets) // 2
            lo = max(0, center - spec.locality)
            hi = min(len(nets), center + spec.locality + 1)
            return nets[rng.randrange(lo, hi)]

        for j in range(w):
            op = rng.choice(_MISO_PALETTE if rng.random() < 0.8 else _SISO_PALETTE)
            anchor = pick(levels[li - 1], j, w)
            if op in _SISO_PALETTE:
                row.append(b.gate(op, anchor))
            else:
                row.append(b.gate(op, pick(pool, j, w), anchor))
        levels.append(row)

    used = _consumed_map(b)
    dangling = [g.output for g in b.gates if g.output not in used]
    roots = _reduce_trees(b, rng, dangling, spec.po_count)
    return b.netlist(roots)


def gen_sibling_family(k: int, w: int, cfg: LpuConfig, *, depth: int = 4,
                       seed: int = 0, mismatched_bottoms: bool = False) -> Netlist:
    """k independent sibling groups of w parallel chains feeding one parent
    cone, plus enough width-1 padding chains at the same bottom level to
    force the parent's extraction to stop above the chain tops.

    With k*w <= m the padding makes the stop level hold m+1 nodes while
    the k designated siblings stay mergeable into exactly one MFG (their
    per-level union is k*w <= m and their ids precede the padding's).
    """
    if k < 2 or w < 1:
        raise InfeasibleSpecError("sibling-family needs k >= 2 and w >= 1")
    if depth < 2:
        raise InfeasibleSpecError("sibling chains need depth >= 2")
    m = cfg.m
    rng = Random(seed)
    pad = max(0, m + 1 - k * w)
    if mismatched_bottoms and m < 2:
        raise InfeasibleSpecError("mismatched variant needs m >= 2")

    n_chains = k * w + pad
    wide_base = (m + 1) if mismatched_bottoms else 0
    b = _Builder(n_chains + wide_base)

    chain_tops: list[str] = []
    pi_idx = 0
    for group in range(k):
        if mismatched_bottoms and group == 1:
            # wide-based pyramid: its extraction stops above the wide row,
            # giving this sibling a deeper bottom level than the chains
            row = [b.gate(rng.choice(_MISO_PALETTE),
                          b.pis[n_chains + i], b.pis[n_chains + (i + 1) % wide_base])
                   for i in range(wide_base)]
            while len(row) > 1:
                nxt = []
                for i in range(0, len(row) - 1, 2):
                    nxt.append(b.gate(rng.choice(_MISO_PALETTE), row[i], row[i + 1]))
                if len(row) % 2:
                    nxt.append(b.gate(GateOp.BUF, row[-1]))
                row = nxt
            chain_tops.append(row[0])
            pi_idx += w  # keep chain PIs aligned
            continue
        for _ in range(w):
            cur = b.pis[pi_idx]
            pi_idx += 1
            for _ in range(depth):
                cur = b.gate(rng.choice(_SISO_PALETTE), cur)
            chain_tops.append(cur)
    for _ in range(pad):
        cur = b.pis[pi_idx]
        pi_idx += 1
        for _ in range(depth):
            cur = b.gate(rng.choice(_SISO_PALETTE), cur)
        chain_tops.append(cur)

    # parent cone: one row consuming every chain top, then a reduction tree
    row = []
    tops = list(chain_tops)
    for i in range(0, len(tops) - 1, 2):
        row.append(b.gate(rng.choice(_MISO_PALETTE), tops[i], tops[i + 1]))
    if len(tops) % 2:
        row.append(b.gate(GateOp.BUF, tops[-1]))
    while len(row) > 1:
        nxt = []
        for i in range(0, len(row) - 1, 2):
            nxt.append(b.gate(rng.choice(_MISO_PALETTE), row[i], row[i + 1]))
        if len(row) % 2:
            nxt.append(row[-1])
        row = nxt
    return b.netlist([row[0]])
