"""Exception types raised across the toolkit."""


class GfmError(Exception):
    """Base class for all toolkit errors."""


class ModelError(GfmError, ValueError):
    """A network, branch or controller description is structurally invalid."""


class ValidationFailed(GfmError):
    """Matrix assembly was requested for a model whose well-posedness report failed."""

    def __init__(self, report):
        self.report = report
        failed = ", ".join(c.name for c in report.checks if not c.passed)
        super().__init__(f"network is not well posed (failed: {failed})")


class RankDeficientInterior(GfmError):
    """The interior block of the network matrix is numerically singular.

    Happens when the network is not interior-exterior node connected, or when
    it is but the data are numerically degenerate.
    """

    def __init__(self, ratio, tol):
        self.ratio = ratio
        self.tol = tol
        super().__init__(
            f"interior network matrix is rank deficient: sigma_min/sigma_max = {ratio:.3e} "
            f"< {tol:.1e}; Kron reduction requires every interior node to reach an exterior "
            "node over sync edges traversed primary -> secondary"
        )


class NonConformingGains(GfmError, ValueError):
    """Droop gains do not satisfy m_p == m_q / tau."""


class NonUniformDroop(GfmError, ValueError):
    """Converters carry different normalized droop gains and heterogeneity was not allowed."""


class NotStable(GfmError):
    """An operation that needs a unique balanced equilibrium was called on a model without one."""


class DocumentError(GfmError):
    """Syntax or semantic error in a network document."""

    def __init__(self, message, line=None, column=None, kind="syntax"):
        self.message = message
        self.line = line
        self.column = column
        self.kind = kind
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        super().__init__(f"{where}{message}")
