from __future__ import annotations


class IPCWError(Exception):
    """
    Base class for all errors raised by ipcw_regression.

    ``exit_code`` is what the command line returns when the error reaches it.
    """

    exit_code: int = 1


class DatasetFormatError(IPCWError):
    """A CSV dataset could not be parsed."""

    exit_code = 2

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        self.row = row
        self.column = column
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column '{column}'")
        prefix = f"{', '.join(location)}: " if location else ""
        super().__init__(f"{prefix}{message}")


class InvalidRecord(IPCWError):
    """An observed record violates its invariants."""


class OutcomeUnobserved(IPCWError):
    """The outcome of a record censored before the horizon was requested."""

    def __init__(self, exit_time: float, horizon: float):
        self.exit_time = exit_time
        self.horizon = horizon
        super().__init__(
            f"outcome unobserved: censored at {exit_time:g} before horizon {horizon:g}"
        )


class StratumEmpty(IPCWError):
    def __init__(self, stratum: int):
        self.stratum = stratum
        super().__init__(f"stratum {stratum} has no records")


class StratumTooSmall(IPCWError):
    def __init__(self, stratum: int, size: int):
        self.stratum = stratum
        self.size = size
        super().__init__(
            f"stratum {stratum} has {size} record(s), leave-one-out needs at least 2"
        )


class PositivityViolation(IPCWError):
    """
    A censoring weight needs a censoring survival estimate of zero.
    """

    def __init__(
        self,
        stratum: int | None,
        time: float | None,
        record: int | None = None,
        reason: str | None = None,
    ):
        self.stratum = stratum
        self.time = time
        self.record = record
        if reason is None:
            reason = f"censoring survival is 0 just before time {time:g}"
        where = f"stratum {stratum}" if stratum is not None else "dataset"
        if record is not None:
            where += f" (leaving out record {record})"
        super().__init__(f"positivity violation in {where}: {reason}")


class SingularSystem(IPCWError):
    """The score Jacobian could not be inverted."""


class UnsupportedContrast(IPCWError):
    def __init__(self, contrast: tuple[float, ...]):
        self.contrast = contrast
        super().__init__(
            f"no closed form for contrast {contrast}, use (0, 1) or (1, 0)"
        )


class ConfigError(IPCWError):
    """A simulation configuration is invalid."""

    exit_code = 2
