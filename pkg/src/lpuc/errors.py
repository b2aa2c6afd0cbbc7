"""Error taxonomy shared by every pipeline stage.

Every error carries a stable machine-readable ``code`` plus whatever
location data was available at raise time, so the CLI can print one
JSON diagnostic line on stderr.
"""

from __future__ import annotations


class LpucError(Exception):
    code = "Error"

    def __init__(self, detail: str, *, name: str | None = None,
                 line: int | None = None, path: str | None = None):
        super().__init__(detail)
        self.detail = detail
        self.name = name
        self.line = line
        self.path = path

    def to_json(self) -> dict:
        out = {"error": self.code, "detail": self.detail}
        if self.name is not None:
            out["name"] = self.name
        if self.line is not None:
            out["line"] = self.line
        if self.path is not None:
            out["path"] = self.path
        return out


class NetlistSyntaxError(LpucError):
    code = "SyntaxError"


class UndefinedNetError(LpucError):
    code = "UndefinedNet"


class DuplicateNetError(LpucError):
    code = "DuplicateNet"


class ArityMismatchError(LpucError):
    code = "ArityMismatch"


class CycleError(LpucError):
    code = "CycleDetected"


class UnsupportedConstructError(LpucError):
    code = "UnsupportedConstruct"


class CompileError(LpucError):
    code = "CompileError"


class WidthOverflowError(LpucError):
    code = "WidthOverflow"


class BottomMismatchError(LpucError):
    code = "BottomMismatch"


class CyclicMfgGraphError(LpucError):
    code = "CyclicMfgGraph"


class SnapshotOverflowError(LpucError):
    code = "SnapshotOverflow"


class AddressConflictError(LpucError):
    code = "AddressConflict"


class SchemaError(LpucError):
    code = "SchemaError"


class VersionMismatchError(LpucError):
    code = "VersionMismatch"


class UninitializedReadError(LpucError):
    code = "UninitializedRead"


class MissingInputError(LpucError):
    code = "MissingInput"


class InvalidInputError(LpucError):
    code = "InvalidInput"


class InfeasibleSpecError(LpucError):
    code = "InfeasibleSpec"
