"""Exception hierarchy shared by every module.

Each error carries a short machine-readable ``code`` so the CLI can emit
``{"error": code, "message": ...}`` without string matching.
"""


class CQNLSError(Exception):
    code = "CQNLSError"

    def to_json(self):
        return {"error": self.code, "message": str(self)}


class NonPowerOfTwo(CQNLSError, ValueError):
    code = "NonPowerOfTwo"


class GridTooLarge(CQNLSError, ValueError):
    code = "GridTooLarge"


class SymbolSingularity(CQNLSError, ArithmeticError):
    code = "SymbolSingularity"

    def __init__(self, message, xi=None):
        super().__init__(message)
        self.xi = xi


class DyadicOutOfRange(CQNLSError, ValueError):
    code = "DyadicOutOfRange"


class BadAxis(CQNLSError, ValueError):
    code = "BadAxis"


class NoStableEquilibrium(CQNLSError, ValueError):
    code = "NoStableEquilibrium"


class DegenerateRoot(CQNLSError, ValueError):
    code = "DegenerateRoot"


class FieldBlowup(CQNLSError, FloatingPointError):
    code = "FieldBlowup"

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class BadWindow(CQNLSError, ValueError):
    code = "BadWindow"


class InsufficientHorizon(CQNLSError, ValueError):
    code = "InsufficientHorizon"


class BandCapExceeded(CQNLSError, ValueError):
    code = "BandCapExceeded"


class NonCompactSupport(CQNLSError, ValueError):
    code = "NonCompactSupport"


class ZeroFrequency(CQNLSError, ValueError):
    code = "ZeroFrequency"


class UnsupportedDyad(CQNLSError, ValueError):
    code = "UnsupportedDyad"


class UnresolvedOscillation(CQNLSError, ValueError):
    code = "UnresolvedOscillation"


class ConfigError(CQNLSError, ValueError):
    code = "ConfigError"

    def __init__(self, message, line=None, column=None, kind="ConfigError"):
        loc = ""
        if line is not None:
            loc = f" (line {line}, column {column or 1})"
        super().__init__(message + loc)
        self.line = line
        self.column = column
        self.code = kind

    def to_json(self):
        out = super().to_json()
        out["line"] = self.line
        out["column"] = self.column
        return out


class SnapshotError(CQNLSError, IOError):
    code = "SnapshotError"


class ChecksumMismatch(SnapshotError):
    code = "ChecksumMismatch"


class VersionMismatch(SnapshotError):
    code = "VersionMismatch"


class TruncatedSnapshot(SnapshotError):
    code = "TruncatedSnapshot"
