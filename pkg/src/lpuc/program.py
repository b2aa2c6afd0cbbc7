"""Static program image: instruction queues, buffer maps, serialization.

The JSON document is canonical (fixed key order, compact separators), so
loading and re-serializing a program produced by this toolchain is
byte-identical — the determinism and golden-file tests rely on that.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import jsonschema

from .errors import SchemaError, VersionMismatchError
from .netlist import GateOp

PROGRAM_VERSION = 1

OPCODES = tuple(op.value for op in GateOp) + ("NOP",)


@dataclass(frozen=True)
class LpuConfig:
    """Grid geometry: m LPEs per LPV, n LPVs, switch latency t_sw."""
    m: int
    n: int = 16
    t_sw: int = 5

    def __post_init__(self):
        if self.m < 1 or self.n < 1 or self.t_sw < 0:
            raise ValueError(f"invalid LPU config m={self.m} n={self.n} t_sw={self.t_sw}")

    @property
    def t_c(self) -> int:
        return 1 + self.t_sw

    @property
    def word_bits(self) -> int:
        return 2 * self.m


# Operand selectors (per-LPE src_a/src_b) are plain dicts in one of the forms:
#   {"kind": "switch", "slot": s}   s in [0, 2m)
#   {"kind": "snap", "reg": "a"|"b"}
#   {"kind": "input", "offset": k}  streaming buffer (PI region or circulated)
#   {"kind": "const0"}
#   None (unused)
# Route sources (per destination slot of the switch after an LPV):
#   {"kind": "lpe", "index": j}     output of LPE j this cycle
#   {"kind": "park", "lpe": j, "reg": "a"|"b"}  parked register of LPE j
#   None


@dataclass
class LpeInstr:
    op: str = "NOP"
    src_a: dict | None = None
    src_b: dict | None = None
    write_a: bool = False
    write_b: bool = False
    capture: bool = False

    def to_json(self) -> dict:
        return {"op": self.op, "src_a": self.src_a, "src_b": self.src_b,
                "snap": {"a": self.write_a, "b": self.write_b},
                "capture": self.capture}

    @staticmethod
    def from_json(d: dict) -> "LpeInstr":
        return LpeInstr(op=d["op"], src_a=d["src_a"], src_b=d["src_b"],
                        write_a=d["snap"]["a"], write_b=d["snap"]["b"],
                        capture=d["capture"])


@dataclass
class Cell:
    """One (LPV, address) slot: m LPE instructions + the outgoing route."""
    lpe: list[LpeInstr]
    route: list[dict | None]

    @staticmethod
    def empty(cfg: LpuConfig) -> "Cell":
        return Cell(lpe=[LpeInstr() for _ in range(cfg.m)],
                    route=[None] * (2 * cfg.m))

    def is_nop(self) -> bool:
        return all(i.op == "NOP" for i in self.lpe)

    def to_json(self) -> dict:
        return {"lpe": [i.to_json() for i in self.lpe], "route": self.route}


@dataclass
class SegmentMeta:
    """Which MFG occupies which (pass, address, LPV range, level range)."""
    mfg: int
    pass_idx: int
    address: int
    lpv_lo: int
    lpv_hi: int
    level_lo: int
    level_hi: int
    bottom: int
    top: int

    def to_json(self) -> dict:
        return {"mfg": self.mfg, "pass": self.pass_idx, "address": self.address,
                "lpv_lo": self.lpv_lo, "lpv_hi": self.lpv_hi,
                "level_lo": self.level_lo, "level_hi": self.level_hi,
                "bottom": self.bottom, "top": self.top}

    @staticmethod
    def from_json(d: dict) -> "SegmentMeta":
        return SegmentMeta(mfg=d["mfg"], pass_idx=d["pass"], address=d["address"],
                           lpv_lo=d["lpv_lo"], lpv_hi=d["lpv_hi"],
                           level_lo=d["level_lo"], level_hi=d["level_hi"],
                           bottom=d["bottom"], top=d["top"])


@dataclass
class Program:
    config: LpuConfig
    queue_depth: int
    passes: int
    pass_windows: list[tuple[int, int]]          # per pass: [start, end) address range
    queues: list[list[Cell]]                     # [n][queue_depth]
    input_buffer_map: list[dict]                 # {offset, net, addr, lpe, operand}
    output_buffer_map: list[dict]                # {addr, lpv, lpe, kind, net|offset}
    segments: list[SegmentMeta]
    net_name_table: dict[int, str]

    @property
    def stream_size(self) -> int:
        hi = -1
        for e in self.input_buffer_map:
            hi = max(hi, e["offset"])
        for e in self.output_buffer_map:
            if e["kind"] == "circ":
                hi = max(hi, e["offset"])
        return hi + 1

    def po_nets(self) -> list[str]:
        return [e["net"] for e in self.output_buffer_map if e["kind"] == "po"]

    def to_json_dict(self) -> dict:
        return {
            "version": PROGRAM_VERSION,
            "config": {"m": self.config.m, "n": self.config.n, "t_sw": self.config.t_sw},
            "queue_depth": self.queue_depth,
            "passes": self.passes,
            "pass_windows": [list(w) for w in self.pass_windows],
            "queues": [[c.to_json() for c in per_lpv] for per_lpv in self.queues],
            "input_buffer_map": self.input_buffer_map,
            "output_buffer_map": self.output_buffer_map,
            "segments": [s.to_json() for s in self.segments],
            "net_name_table": {str(k): v for k, v in sorted(self.net_name_table.items())},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), separators=(",", ":")) + "\n"


_SRC_SCHEMA = {
    "oneOf": [
        {"type": "null"},
        {"type": "object", "additionalProperties": False,
         "required": ["kind", "slot"],
         "properties": {"kind": {"const": "switch"},
                        "slot": {"type": "integer", "minimum": 0}}},
        {"type": "object", "additionalProperties": False,
         "required": ["kind", "reg"],
         "properties": {"kind": {"const": "snap"},
                        "reg": {"enum": ["a", "b"]}}},
        {"type": "object", "additionalProperties": False,
         "required": ["kind", "offset"],
         "properties": {"kind": {"const": "input"},
                        "offset": {"type": "integer", "minimum": 0}}},
        {"type": "object", "additionalProperties": False,
         "required": ["kind"],
         "properties": {"kind": {"const": "const0"}}},
    ]
}

_ROUTE_SCHEMA = {
    "oneOf": [
        {"type": "null"},
        {"type": "object", "additionalProperties": False,
         "required": ["kind", "index"],
         "properties": {"kind": {"const": "lpe"},
                        "index": {"type": "integer", "minimum": 0}}},
        {"type": "object", "additionalProperties": False,
         "required": ["kind", "lpe", "reg"],
         "properties": {"kind": {"const": "park"},
                        "lpe": {"type": "integer", "minimum": 0},
                        "reg": {"enum": ["a", "b"]}}},
    ]
}

_PROGRAM_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["version", "config", "queue_depth", "passes", "pass_windows",
                 "queues", "input_buffer_map", "output_buffer_map", "segments",
                 "net_name_table"],
    "properties": {
        "version": {"type": "integer"},
        "config": {"type": "object", "additionalProperties": False,
                   "required": ["m", "n", "t_sw"],
                   "properties": {"m": {"type": "integer", "minimum": 1},
                                  "n": {"type": "integer", "minimum": 1},
                                  "t_sw": {"type": "integer", "minimum": 0}}},
        "queue_depth": {"type": "integer", "minimum": 0},
        "passes": {"type": "integer", "minimum": 1},
        "pass_windows": {"type": "array",
                         "items": {"type": "array", "minItems": 2, "maxItems": 2,
                                   "items": {"type": "integer", "minimum": 0}}},
        "queues": {"type": "array", "items": {"type": "array", "items": {
            "type": "object", "additionalProperties": False,
            "required": ["lpe", "route"],
            "properties": {
                "lpe": {"type": "array", "items": {
                    "type": "object", "additionalProperties": False,
                    "required": ["op", "src_a", "src_b", "snap", "capture"],
                    "properties": {
                        "op": {"enum": list(OPCODES)},
                        "src_a": _SRC_SCHEMA,
                        "src_b": _SRC_SCHEMA,
                        "snap": {"type": "object", "additionalProperties": False,
                                 "required": ["a", "b"],
                                 "properties": {"a": {"type": "boolean"},
                                                "b": {"type": "boolean"}}},
                        "capture": {"type": "boolean"},
                    }}},
                "route": {"type": "array", "items": _ROUTE_SCHEMA},
            }}}},
        "input_buffer_map": {"type": "array", "items": {
            "type": "object", "additionalProperties": False,
            "required": ["offset", "net", "addr", "lpe", "operand"],
            "properties": {"offset": {"type": "integer", "minimum": 0},
                           "net": {"type": "string"},
                           "addr": {"type": "integer", "minimum": 0},
                           "lpe": {"type": "integer", "minimum": 0},
                           "operand": {"enum": ["a", "b"]}}}},
        "output_buffer_map": {"type": "array", "items": {"oneOf": [
            {"type": "object", "additionalProperties": False,
             "required": ["addr", "lpv", "lpe", "kind", "net"],
             "properties": {"addr": {"type": "integer", "minimum": 0},
                            "lpv": {"type": "integer", "minimum": 0},
                            "lpe": {"type": "integer", "minimum": 0},
                            "kind": {"const": "po"},
                            "net": {"type": "string"}}},
            {"type": "object", "additionalProperties": False,
             "required": ["addr", "lpv", "lpe", "kind", "offset"],
             "properties": {"addr": {"type": "integer", "minimum": 0},
                            "lpv": {"type": "integer", "minimum": 0},
                            "lpe": {"type": "integer", "minimum": 0},
                            "kind": {"const": "circ"},
                            "offset": {"type": "integer", "minimum": 0}}},
        ]}},
        "segments": {"type": "array", "items": {
            "type": "object", "additionalProperties": False,
            "required": ["mfg", "pass", "address", "lpv_lo", "lpv_hi",
                         "level_lo", "level_hi", "bottom", "top"],
            "properties": {k: {"type": "integer", "minimum": 0}
                           for k in ("mfg", "pass", "address", "lpv_lo", "lpv_hi",
                                     "level_lo", "level_hi", "bottom", "top")}}},
        "net_name_table": {"type": "object",
                           "patternProperties": {r"^\d+$": {"type": "string"}},
                           "additionalProperties": False},
    },
}


def _cross_checks(doc: dict) -> None:
    m = doc["config"]["m"]
    n = doc["config"]["n"]
    depth = doc["queue_depth"]
    if len(doc["queues"]) != n:
        raise SchemaError(f"queues has {len(doc['queues'])} LPVs, config says {n}",
                          path="queues")
    for v, per_lpv in enumerate(doc["queues"]):
        if len(per_lpv) != depth:
            raise SchemaError(f"LPV {v} has {len(per_lpv)} addresses, "
                              f"queue_depth says {depth}", path=f"queues/{v}")
        for a, cell in enumerate(per_lpv):
            if len(cell["lpe"]) != m:
                raise SchemaError(f"cell has {len(cell['lpe'])} LPEs, config m={m}",
                                  path=f"queues/{v}/{a}/lpe")
            if len(cell["route"]) != 2 * m:
                raise SchemaError(f"route has {len(cell['route'])} slots, expected 2m={2*m}",
                                  path=f"queues/{v}/{a}/route")
            for e, instr in enumerate(cell["lpe"]):
                for side in ("src_a", "src_b"):
                    src = instr[side]
                    if src and src["kind"] == "switch" and src["slot"] >= 2 * m:
                        raise SchemaError("switch slot out of range",
                                          path=f"queues/{v}/{a}/lpe/{e}/{side}")
                for side, flag in (("src_a", "a"), ("src_b", "b")):
                    if instr["snap"][flag] and instr[side] is None:
                        raise SchemaError("snap_write set on an unselected operand",
                                          path=f"queues/{v}/{a}/lpe/{e}/{side}")
            for s, rsrc in enumerate(cell["route"]):
                if rsrc is None:
                    continue
                j = rsrc["index"] if rsrc["kind"] == "lpe" else rsrc["lpe"]
                if j >= m:
                    raise SchemaError("route source LPE out of range",
                                      path=f"queues/{v}/{a}/route/{s}")
    windows = doc["pass_windows"]
    if len(windows) != doc["passes"]:
        raise SchemaError("pass_windows length differs from passes",
                          path="pass_windows")
    cursor = 0
    for i, (lo, hi) in enumerate(windows):
        if lo != cursor or hi < lo:
            raise SchemaError("pass windows must tile [0, queue_depth)",
                              path=f"pass_windows/{i}")
        cursor = hi
    if windows and cursor != depth:
        raise SchemaError("pass windows do not cover queue_depth",
                          path="pass_windows")


def load_program(document: str | dict) -> Program:
    """Validate a program document and build the in-memory Program."""
    if isinstance(document, str):
        try:
            doc = json.loads(document)
        except json.JSONDecodeError as ex:
            raise SchemaError(f"not valid JSON: {ex}") from None
    else:
        doc = document
    if not isinstance(doc, dict) or "version" not in doc:
        raise SchemaError("document is not a program object", path="")
    if doc["version"] != PROGRAM_VERSION:
        raise VersionMismatchError(
            f"program version {doc['version']} unsupported (want {PROGRAM_VERSION})")
    try:
        jsonschema.validate(doc, _PROGRAM_SCHEMA)
    except jsonschema.ValidationError as ex:
        path = "/".join(str(p) for p in ex.absolute_path)
        raise SchemaError(ex.message, path=path) from None
    _cross_checks(doc)
    cfg = LpuConfig(m=doc["config"]["m"], n=doc["config"]["n"],
                    t_sw=doc["config"]["t_sw"])
    queues = [[Cell(lpe=[LpeInstr.from_json(i) for i in cell["lpe"]],
                    route=list(cell["route"]))
               for cell in per_lpv]
              for per_lpv in doc["queues"]]
    return Program(
        config=cfg,
        queue_depth=doc["queue_depth"],
        passes=doc["passes"],
        pass_windows=[(w[0], w[1]) for w in doc["pass_windows"]],
        queues=queues,
        input_buffer_map=doc["input_buffer_map"],
        output_buffer_map=doc["output_buffer_map"],
        segments=[SegmentMeta.from_json(s) for s in doc["segments"]],
        net_name_table={int(k): v for k, v in doc["net_name_table"].items()},
    )
