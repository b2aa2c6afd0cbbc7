"""Gate-level combinational netlist IR: parse, validate, serialize.

The native interchange format is the line-based ``.ffcl`` file; a strict
structural-Verilog subset maps onto the same IR.  Node ids are assigned
in file order (primary inputs first, then gates), which keeps every
downstream stage and golden file deterministic.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

from .errors import (
    ArityMismatchError,
    CycleError,
    DuplicateNetError,
    NetlistSyntaxError,
    UndefinedNetError,
    UnsupportedConstructError,
)


class GateOp(str, Enum):
    AND = "AND"
    OR = "OR"
    XOR = "XOR"
    XNOR = "XNOR"
    NAND = "NAND"
    NOR = "NOR"
    NOT = "NOT"
    BUF = "BUF"


MISO_OPS = frozenset({GateOp.AND, GateOp.OR, GateOp.XOR,
                      GateOp.XNOR, GateOp.NAND, GateOp.NOR})
SISO_OPS = frozenset({GateOp.NOT, GateOp.BUF})


def op_arity(op: GateOp) -> int:
    return 2 if op in MISO_OPS else 1


_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


@dataclass(frozen=True)
class Gate:
    output: str
    op: GateOp
    fanins: tuple[str, ...]


@dataclass
class Netlist:
    primary_inputs: list[str]
    primary_outputs: list[str]
    gates: list[Gate]
    name_index: dict[str, int] = field(default_factory=dict)

    # node id layout: PIs get 0..P-1 in list order, gate i gets P+i.

    @property
    def num_pis(self) -> int:
        return len(self.primary_inputs)

    @property
    def num_nodes(self) -> int:
        return len(self.primary_inputs) + len(self.gates)

    def is_pi(self, nid: int) -> bool:
        return nid < len(self.primary_inputs)

    def gate_of(self, nid: int) -> Gate:
        return self.gates[nid - len(self.primary_inputs)]

    def node_name(self, nid: int) -> str:
        if self.is_pi(nid):
            return self.primary_inputs[nid]
        return self.gate_of(nid).output

    def fanin_ids(self, nid: int) -> tuple[int, ...]:
        if self.is_pi(nid):
            return ()
        return tuple(self.name_index[f] for f in self.gate_of(nid).fanins)

    def consumers(self) -> dict[int, list[int]]:
        """Map node id -> ids of gates reading it (one entry per edge)."""
        out: dict[int, list[int]] = {nid: [] for nid in range(self.num_nodes)}
        for gid in range(self.num_pis, self.num_nodes):
            for f in self.fanin_ids(gid):
                out[f].append(gid)
        return out


def _build_name_index(pis: list[str], gates: list[Gate]) -> dict[str, int]:
    idx: dict[str, int] = {}
    for i, name in enumerate(pis):
        idx[name] = i
    for i, g in enumerate(gates):
        idx[g.output] = len(pis) + i
    return idx


def _check_cycles(netlist: Netlist, line_of: dict[int, int] | None = None) -> None:
    """Kahn over gate nodes; reports the smallest-id gate stuck in a cycle."""
    npis = netlist.num_pis
    indeg = [0] * len(netlist.gates)
    consumers: dict[int, list[int]] = {}
    for gid in range(npis, netlist.num_nodes):
        for f in netlist.fanin_ids(gid):
            if f >= npis:
                indeg[gid - npis] += 1
                consumers.setdefault(f, []).append(gid)
    ready = deque(i + npis for i, d in enumerate(indeg) if d == 0)
    seen = 0
    while ready:
        gid = ready.popleft()
        seen += 1
        for c in consumers.get(gid, ()):
            indeg[c - npis] -= 1
            if indeg[c - npis] == 0:
                ready.append(c)
    if seen != len(netlist.gates):
        stuck = min(i + npis for i, d in enumerate(indeg) if d > 0)
        name = netlist.node_name(stuck)
        line = line_of.get(stuck) if line_of else None
        raise CycleError(f"combinational cycle through net '{name}'",
                         name=name, line=line)


def _finalize(pis: list[tuple[str, int]], pos: list[tuple[str, int]],
              gates: list[tuple[Gate, int]]) -> Netlist:
    """Shared semantic checks for both parsers. Tuples carry line numbers."""
    defined: dict[str, int] = {}
    for name, line in pis:
        if name in defined:
            raise DuplicateNetError(f"net '{name}' defined twice", name=name, line=line)
        defined[name] = line
    for g, line in gates:
        if g.output in defined:
            raise DuplicateNetError(f"net '{g.output}' defined twice",
                                    name=g.output, line=line)
        defined[g.output] = line
    for g, line in gates:
        want = op_arity(g.op)
        if len(g.fanins) != want:
            raise ArityMismatchError(
                f"gate '{g.output}': {g.op.value} takes {want} fanin(s), got {len(g.fanins)}",
                name=g.output, line=line)
        for f in g.fanins:
            if f not in defined:
                raise UndefinedNetError(f"gate '{g.output}' reads undefined net '{f}'",
                                        name=f, line=line)
    for name, line in pos:
        if name not in defined:
            raise UndefinedNetError(f"primary output '{name}' is not a defined net",
                                    name=name, line=line)
    netlist = Netlist(
        primary_inputs=[n for n, _ in pis],
        primary_outputs=[n for n, _ in pos],
        gates=[g for g, _ in gates],
    )
    netlist.name_index = _build_name_index(netlist.primary_inputs, netlist.gates)
    line_of = {netlist.name_index[g.output]: line for g, line in gates}
    _check_cycles(netlist, line_of)
    return netlist


def _check_name(tok: str, line: int) -> str:
    if not _NAME_RE.match(tok):
        raise NetlistSyntaxError(f"invalid net name '{tok}'", name=tok, line=line)
    return tok


def parse_ffcl(text: str) -> Netlist:
    """Parse the native .ffcl line format into a validated Netlist."""
    pis: list[tuple[str, int]] = []
    pos: list[tuple[str, int]] = []
    gates: list[tuple[Gate, int]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        kw = toks[0]
        if kw == "input":
            if len(toks) < 2:
                raise NetlistSyntaxError("'input' needs at least one name", line=lineno)
            pis.extend((_check_name(t, lineno), lineno) for t in toks[1:])
        elif kw == "output":
            if len(toks) < 2:
                raise NetlistSyntaxError("'output' needs at least one name", line=lineno)
            pos.extend((_check_name(t, lineno), lineno) for t in toks[1:])
        elif kw == "gate":
            if len(toks) < 4:
                raise NetlistSyntaxError("'gate' needs: gate <out> <OP> <fanin...>",
                                         line=lineno)
            out = _check_name(toks[1], lineno)
            try:
                op = GateOp(toks[2])
            except ValueError:
                raise NetlistSyntaxError(f"unknown operation '{toks[2]}'",
                                         name=out, line=lineno) from None
            fanins = tuple(_check_name(t, lineno) for t in toks[3:])
            gates.append((Gate(out, op, fanins), lineno))
        else:
            raise NetlistSyntaxError(f"unknown directive '{kw}'", line=lineno)
    return _finalize(pis, pos, gates)


def emit_ffcl(netlist: Netlist) -> str:
    """Canonical .ffcl emission; parse_ffcl(emit_ffcl(n)) reproduces n exactly."""
    lines = []
    if netlist.primary_inputs:
        lines.append("input " + " ".join(netlist.primary_inputs))
    if netlist.primary_outputs:
        lines.append("output " + " ".join(netlist.primary_outputs))
    for g in netlist.gates:
        lines.append(f"gate {g.output} {g.op.value} " + " ".join(g.fanins))
    return "\n".join(lines) + "\n"


def validate(netlist: Netlist) -> None:
    """Re-verify every Netlist invariant on an in-memory object.

    Violations are reported deterministically: per-node checks run in
    ascending node id order, then primary outputs, then cycle detection.
    """
    seen: dict[str, int] = {}
    for nid in range(netlist.num_nodes):
        name = netlist.node_name(nid)
        if not _NAME_RE.match(name):
            raise NetlistSyntaxError(f"invalid net name '{name}'", name=name)
        if name in seen:
            raise DuplicateNetError(f"net '{name}' defined twice", name=name)
        seen[name] = nid
    if netlist.name_index != seen:
        raise NetlistSyntaxError("name_index out of sync with node list")
    for nid in range(netlist.num_pis, netlist.num_nodes):
        g = netlist.gate_of(nid)
        want = op_arity(g.op)
        if len(g.fanins) != want:
            raise ArityMismatchError(
                f"gate '{g.output}': {g.op.value} takes {want} fanin(s), got {len(g.fanins)}",
                name=g.output)
        for f in g.fanins:
            if f not in seen:
                raise UndefinedNetError(f"gate '{g.output}' reads undefined net '{f}'",
                                        name=f)
    for name in netlist.primary_outputs:
        if name not in seen:
            raise UndefinedNetError(f"primary output '{name}' is not a defined net",
                                    name=name)
    _check_cycles(netlist)


def strip_dead_gates(netlist: Netlist) -> tuple[Netlist, int]:
    """Drop gates whose output can never reach a primary output.

    Dead gates cannot affect any PO, and partition coverage is defined
    over PO cones only, so the compile pipeline removes them up front.
    """
    live: set[int] = set()
    stack = [netlist.name_index[p] for p in netlist.primary_outputs]
    while stack:
        nid = stack.pop()
        if nid in live or netlist.is_pi(nid):
            continue
        live.add(nid)
        stack.extend(netlist.fanin_ids(nid))
    kept = [g for i, g in enumerate(netlist.gates)
            if (i + netlist.num_pis) in live]
    removed = len(netlist.gates) - len(kept)
    if removed == 0:
        return netlist, 0
    out = Netlist(primary_inputs=list(netlist.primary_inputs),
                  primary_outputs=list(netlist.primary_outputs),
                  gates=kept)
    out.name_index = _build_name_index(out.primary_inputs, out.gates)
    return out, removed


_VERILOG_PRIMS = {
    "and": GateOp.AND, "or": GateOp.OR, "xor": GateOp.XOR, "xnor": GateOp.XNOR,
    "nand": GateOp.NAND, "nor": GateOp.NOR, "not": GateOp.NOT, "buf": GateOp.BUF,
}

_BEHAVIORAL_KWS = {
    "assign", "always", "always_comb", "always_ff", "initial", "parameter",
    "localparam", "reg", "genvar", "generate", "function", "task", "integer",
    "real", "if", "for", "case", "specify", "defparam", "supply0", "supply1",
    "tri", "inout",
}


def _strip_verilog_comments(text: str) -> str:
    out = []
    i, n = 0, len(text)
    while i < n:
        if text.startswith("//", i):
            j = text.find("\n", i)
            i = n if j < 0 else j
        elif text.startswith("/*", i):
            j = text.find("*/", i)
            if j < 0:
                raise NetlistSyntaxError("unterminated block comment",
                                         line=text.count("\n", 0, i) + 1)
            out.append("\n" * text.count("\n", i, j + 2))
            i = j + 2
        else:
            out.append(text[i])
            i += 1
    return "".join(out)


def _lineno_at(text: str, pos: int) -> int:
    return text.count("\n", 0, pos) + 1


def parse_structural_verilog(text: str) -> Netlist:
    """Parse a single structural-Verilog module built from gate primitives.

    Accepted: one module, scalar ports (ANSI header directions or body
    input/output declarations), `wire` declarations, and instantiations
    of and/or/xor/xnor/nand/nor/not/buf.  Anything behavioral raises
    UnsupportedConstruct.
    """
    src = _strip_verilog_comments(text)
    m = re.search(r"\bmodule\b", src)
    if m is None:
        raise NetlistSyntaxError("no module found", line=1)
    if src[:m.start()].strip():
        raise UnsupportedConstructError("tokens before module header", line=1)
    hdr = re.compile(r"module\s+([A-Za-z_][A-Za-z0-9_]*)\s*\((.*?)\)\s*;", re.S)
    hm = hdr.match(src, m.start())
    if hm is None:
        raise NetlistSyntaxError("malformed module header", line=_lineno_at(src, m.start()))
    end = re.search(r"\bendmodule\b", src)
    if end is None:
        raise NetlistSyntaxError("missing endmodule", line=_lineno_at(src, len(src) - 1))
    if re.search(r"\bmodule\b", src[hm.end():]):
        raise UnsupportedConstructError("multiple modules are not supported",
                                        line=_lineno_at(src, hm.end() + src[hm.end():].find("module")))
    if src[end.end():].strip():
        raise UnsupportedConstructError("tokens after endmodule",
                                        line=_lineno_at(src, end.end()))

    hdr_line = _lineno_at(src, hm.start())
    port_order: list[str] = []
    port_dir: dict[str, str | None] = {}

    def add_port(name: str, direction: str | None, line: int) -> None:
        _check_name(name, line)
        if name in port_dir:
            raise DuplicateNetError(f"port '{name}' listed twice", name=name, line=line)
        port_order.append(name)
        port_dir[name] = direction

    cur_dir: str | None = None
    ports_txt = hm.group(2).strip()
    if ports_txt:
        for item in ports_txt.split(","):
            toks = item.split()
            if not toks:
                raise NetlistSyntaxError("empty port entry", line=hdr_line)
            if toks[0] in ("input", "output"):
                cur_dir = toks[0]
                toks = toks[1:]
            if toks and toks[0] == "wire":
                toks = toks[1:]
            if len(toks) != 1:
                if any("[" in t for t in item.split()):
                    raise UnsupportedConstructError("vector ports are not supported",
                                                    line=hdr_line)
                raise NetlistSyntaxError(f"malformed port entry '{item.strip()}'",
                                         line=hdr_line)
            if "[" in toks[0]:
                raise UnsupportedConstructError("vector ports are not supported",
                                                line=hdr_line)
            add_port(toks[0], cur_dir, hdr_line)

    body = src[hm.end():end.start()]
    body_base = hm.end()
    gates: list[tuple[Gate, int]] = []
    scan = 0
    while True:
        j = body.find(";", scan)
        stmt = body[scan:] if j < 0 else body[scan:j]
        stmt_line = _lineno_at(src, body_base + scan + (len(stmt) - len(stmt.lstrip())))
        stripped = stmt.strip()
        if j < 0:
            if stripped:
                raise NetlistSyntaxError(f"unterminated statement '{stripped[:40]}'",
                                         line=stmt_line)
            break
        scan = j + 1
        if not stripped:
            continue
        toks = stripped.split()
        kw = toks[0]
        if kw in ("input", "output"):
            names = [t for t in re.split(r"[,\s]+", " ".join(toks[1:])) if t]
            for nm in names:
                if nm == "wire":
                    continue
                if "[" in nm:
                    raise UnsupportedConstructError("vector ports are not supported",
                                                    line=stmt_line)
                _check_name(nm, stmt_line)
                if nm not in port_dir:
                    raise UndefinedNetError(f"'{nm}' declared {kw} but not a port",
                                            name=nm, line=stmt_line)
                if port_dir[nm] is not None and port_dir[nm] != kw:
                    raise UnsupportedConstructError(
                        f"port '{nm}' declared both {port_dir[nm]} and {kw}",
                        name=nm, line=stmt_line)
                port_dir[nm] = kw
            continue
        if kw == "wire":
            for nm in (t for t in re.split(r"[,\s]+", " ".join(toks[1:])) if t):
                if "[" in nm:
                    raise UnsupportedConstructError("vector wires are not supported",
                                                    line=stmt_line)
                _check_name(nm, stmt_line)
            continue
        if kw in _BEHAVIORAL_KWS:
            raise UnsupportedConstructError(f"'{kw}' is not structural",
                                            line=stmt_line)
        gm = re.match(r"([a-z]+)\s*([A-Za-z_][A-Za-z0-9_]*)?\s*\((.*)\)\s*\Z",
                      stripped, re.S)
        if gm is None or gm.group(1) not in _VERILOG_PRIMS:
            raise UnsupportedConstructError(f"unsupported statement '{stripped[:40]}'",
                                            line=stmt_line)
        op = _VERILOG_PRIMS[gm.group(1)]
        args = [a.strip() for a in gm.group(3).split(",")]
        if any(not a for a in args):
            raise NetlistSyntaxError("malformed argument list", line=stmt_line)
        for a in args:
            _check_name(a, stmt_line)
        if len(args) != op_arity(op) + 1:
            raise ArityMismatchError(
                f"primitive '{gm.group(1)}' takes {op_arity(op) + 1} terminals, got {len(args)}",
                name=args[0], line=stmt_line)
        gates.append((Gate(args[0], op, tuple(args[1:])), stmt_line))

    missing = [p for p in port_order if port_dir[p] is None]
    if missing:
        raise UnsupportedConstructError(
            f"port '{missing[0]}' has no direction", name=missing[0], line=hdr_line)
    pis = [(p, hdr_line) for p in port_order if port_dir[p] == "input"]
    pos = [(p, hdr_line) for p in port_order if port_dir[p] == "output"]
    return _finalize(pis, pos, gates)
