"""Exception hierarchy and source diagnostics."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    line: int
    col: int
    message: str
    rule: str

    def format(self, filename: str = "<string>") -> str:
        return f"{filename}:{self.line}:{self.col}: {self.severity}: {self.message} [{self.rule}]"


class CrnppError(Exception):
    """Base class for every error raised by the toolkit."""

    exit_code = 1


class DiagnosticError(CrnppError):
    """Raised when a program is rejected; carries all diagnostics found."""

    def __init__(self, diagnostics: list[Diagnostic], filename: str = "<string>"):
        self.diagnostics = list(diagnostics)
        self.filename = filename
        super().__init__("\n".join(d.format(filename) for d in self.diagnostics))


class ParseError(DiagnosticError):
    pass


class ValidationError(DiagnosticError):
    pass


class CompileError(CrnppError):
    pass


class CrnError(CrnppError):
    pass


class OracleError(CrnppError):
    pass


class OracleTieError(OracleError):
    """A conditional was evaluated while the live comparison sat exactly on the epsilon boundary."""


class NumericalError(CrnppError):
    """Integration failed: step-size underflow, divergence or step budget exhaustion."""

    exit_code = 2


class PhaseReconstructionError(NumericalError):
    pass
