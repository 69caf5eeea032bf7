from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from functools import cached_property
from typing import TYPE_CHECKING

import numpy as np

from .exceptions import InvalidRecord, OutcomeUnobserved, StratumEmpty

if TYPE_CHECKING:
    from collections.abc import Sequence
    from pathlib import Path


@dataclass(frozen=True)
class ObservedRecord:
    """
    One subject: exit time, exit type (0 = censored), design vector, stratum.
    """

    exit_time: float
    exit_type: int
    covariates: tuple[float, ...]
    stratum: int = 0

    def __post_init__(self) -> None:
        if not math.isfinite(self.exit_time) or self.exit_time <= 0:
            msg = f"exit time must be positive and finite, got {self.exit_time}"
            raise InvalidRecord(msg)
        if self.exit_type < 0:
            msg = f"exit type must be >= 0, got {self.exit_type}"
            raise InvalidRecord(msg)
        if self.stratum < 0:
            msg = f"stratum must be >= 0, got {self.stratum}"
            raise InvalidRecord(msg)

    @property
    def is_censored(self) -> bool:
        return self.exit_type == 0


class OutcomeKind(str, Enum):
    SURVIVAL = "survival"
    CAUSE_FAILURE = "cause"
    RESTRICTED_TIME = "restricted"
    TIME_LOST = "lost"


@dataclass(frozen=True)
class OutcomeSpec:
    """
    The outcome Y = y(T~ ∧ t, D~·1{T~ <= t}) at horizon t.

    ``cause`` is only used by the cause specific kinds.
    """

    kind: OutcomeKind
    horizon: float
    cause: int = 1

    def __post_init__(self) -> None:
        if not self.horizon > 0:
            msg = f"horizon must be positive, got {self.horizon}"
            raise InvalidRecord(msg)
        if self.cause < 1:
            msg = f"cause must be >= 1, got {self.cause}"
            raise InvalidRecord(msg)

    def is_observed(self, exit_time: float, exit_type: int) -> bool:
        return exit_time >= self.horizon or exit_type != 0

    def evaluate(self, exit_time: float, exit_type: int) -> float:
        if not self.is_observed(exit_time, exit_type):
            raise OutcomeUnobserved(exit_time, self.horizon)
        return float(
            self.evaluate_many(np.array([exit_time]), np.array([exit_type]))[0]
        )

    def evaluate_many(
        self, exit_times: np.ndarray, exit_types: np.ndarray
    ) -> np.ndarray:
        """
        Vectorized outcome values. Records censored before the horizon get 0,
        callers mask them with their (zero) weight.
        """
        t = self.horizon
        restricted = np.minimum(exit_times, t)
        # exit type as seen at the horizon: 0 when still in follow-up at t
        kind_at_t = np.where(exit_times <= t, exit_types, 0)
        observed = (exit_times >= t) | (exit_types != 0)

        if self.kind is OutcomeKind.SURVIVAL:
            values = (kind_at_t == 0).astype(float)
        elif self.kind is OutcomeKind.CAUSE_FAILURE:
            values = (kind_at_t == self.cause).astype(float)
        elif self.kind is OutcomeKind.RESTRICTED_TIME:
            values = restricted.astype(float)
        else:
            values = (t - restricted) * (kind_at_t == self.cause)

        return np.where(observed, values, 0.0)


def evaluate_outcome(spec: OutcomeSpec, exit_time: float, exit_type: int) -> float:
    return spec.evaluate(exit_time, exit_type)


class StratifierKind(str, Enum):
    TRIVIAL = "trivial"
    QUANTIZE = "quantize"
    FACTORS = "factors"


@dataclass(frozen=True)
class Stratifier:
    """
    Maps design vectors to dense stratum labels 0..k-1.

    - trivial: a single stratum
    - quantize: covariate ``column`` cut into ``bins`` with j/k < x <= (j+1)/k
    - factors: binary covariates ``factors`` read as bits of the label
    """

    kind: StratifierKind = StratifierKind.TRIVIAL
    column: int | None = None
    bins: int = 1
    factors: tuple[int, ...] = ()

    @classmethod
    def trivial(cls) -> Stratifier:
        return cls()

    @classmethod
    def quantize(cls, column: int, bins: int) -> Stratifier:
        if bins < 1:
            msg = f"number of bins must be >= 1, got {bins}"
            raise InvalidRecord(msg)
        return cls(kind=StratifierKind.QUANTIZE, column=column, bins=bins)

    @classmethod
    def factor_subset(cls, columns: Sequence[int]) -> Stratifier:
        return cls(kind=StratifierKind.FACTORS, factors=tuple(columns))

    @property
    def stratum_count(self) -> int:
        if self.kind is StratifierKind.QUANTIZE:
            return self.bins
        if self.kind is StratifierKind.FACTORS:
            return 2 ** len(self.factors)
        return 1

    def assign(self, covariates: np.ndarray) -> np.ndarray:
        covariates = np.atleast_2d(np.asarray(covariates, dtype=float))
        n = covariates.shape[0]

        if self.kind is StratifierKind.QUANTIZE:
            x = covariates[:, self.column]
            labels = np.ceil(x * self.bins).astype(int) - 1
            return np.clip(labels, 0, self.bins - 1)

        if self.kind is StratifierKind.FACTORS:
            labels = np.zeros(n, dtype=int)
            for bit, column in enumerate(self.factors):
                x = covariates[:, column]
                if not np.all((x == 0) | (x == 1)):
                    msg = f"factor column {column} is not binary"
                    raise InvalidRecord(msg)
                labels += x.astype(int) << bit
            return labels

        return np.zeros(n, dtype=int)


@dataclass(frozen=True)
class Dataset:
    """
    Observed records with the outcome definition and the number of strata.

    Record order is preserved everywhere; all derived arrays follow it.
    """

    records: tuple[ObservedRecord, ...]
    outcome: OutcomeSpec
    stratum_count: int = 1

    def __post_init__(self) -> None:
        if len(self.records) == 0:
            msg = "a dataset needs at least one record"
            raise InvalidRecord(msg)

        width = len(self.records[0].covariates)
        seen = set()
        for index, record in enumerate(self.records):
            if len(record.covariates) != width:
                msg = (
                    f"record {index} has {len(record.covariates)} covariates, "
                    f"expected {width}"
                )
                raise InvalidRecord(msg)
            if record.stratum >= self.stratum_count:
                msg = (
                    f"record {index} has stratum {record.stratum}, "
                    f"only {self.stratum_count} strata declared"
                )
                raise InvalidRecord(msg)
            seen.add(record.stratum)

        for stratum in range(self.stratum_count):
            if stratum not in seen:
                raise StratumEmpty(stratum)

    @classmethod
    def from_arrays(  # noqa: PLR0913
        cls,
        times: Sequence[float] | np.ndarray,
        statuses: Sequence[int] | np.ndarray,
        covariates: Sequence[Sequence[float]] | np.ndarray,
        outcome: OutcomeSpec,
        strata: Sequence[int] | np.ndarray | None = None,
        stratum_count: int | None = None,
    ) -> Dataset:
        covariates = np.asarray(covariates, dtype=float)
        if covariates.ndim == 1:
            covariates = covariates[:, np.newaxis]
        if strata is None:
            strata = np.zeros(len(times), dtype=int)
        strata = np.asarray(strata, dtype=int)
        if stratum_count is None:
            stratum_count = int(strata.max()) + 1 if len(strata) else 1

        records = tuple(
            ObservedRecord(
                exit_time=float(time),
                exit_type=int(status),
                covariates=tuple(float(v) for v in row),
                stratum=int(stratum),
            )
            for time, status, row, stratum in zip(
                times, statuses, covariates, strata, strict=True
            )
        )
        return cls(records=records, outcome=outcome, stratum_count=stratum_count)

    @cached_property
    def times(self) -> np.ndarray:
        return np.array([r.exit_time for r in self.records], dtype=float)

    @cached_property
    def statuses(self) -> np.ndarray:
        return np.array([r.exit_type for r in self.records], dtype=int)

    @cached_property
    def covariates(self) -> np.ndarray:
        return np.array([r.covariates for r in self.records], dtype=float)

    @cached_property
    def strata(self) -> np.ndarray:
        return np.array([r.stratum for r in self.records], dtype=int)

    @cached_property
    def observed(self) -> np.ndarray:
        """1{T~ >= t} + 1{T~ < t, D~ != 0} for every record."""
        return (self.times >= self.outcome.horizon) | (self.statuses != 0)

    @cached_property
    def outcomes(self) -> np.ndarray:
        """Y for observed records, 0 for records censored before the horizon."""
        return self.outcome.evaluate_many(self.times, self.statuses)

    @property
    def n(self) -> int:
        return len(self.records)

    @property
    def p(self) -> int:
        return len(self.records[0].covariates)

    def stratum_members(self, stratum: int) -> np.ndarray:
        return np.flatnonzero(self.strata == stratum)

    def stratified(self, stratifier: Stratifier) -> Dataset:
        """Relabel strata using ``stratifier`` on the design vectors."""
        labels = stratifier.assign(self.covariates)
        records = tuple(
            replace(record, stratum=int(label))
            for record, label in zip(self.records, labels, strict=True)
        )
        return Dataset(
            records=records,
            outcome=self.outcome,
            stratum_count=stratifier.stratum_count,
        )

    def without(self, index: int) -> Dataset:
        """The dataset with record ``index`` left out, strata kept."""
        records = self.records[:index] + self.records[index + 1 :]
        return Dataset(
            records=records, outcome=self.outcome, stratum_count=self.stratum_count
        )


@dataclass
class GlobalOptions:
    """
    Options shared by all subcommands.
    """

    seed: int | None
    threads: int
    format: str | None
    verbose: int

    def format_or(self, default: str) -> str:
        return self.format or default


@dataclass
class FitOptions:
    """
    Program argument options for ``fit``.
    """

    csv: Path
    approach: str
    link: str
    a: str
    time_point: float
    outcome: str
    cause: int
    response: str | None
    intercept: bool
    max_iter: int
    tol: float
    dump_censoring: Path | None
    strata_col: str | None
    strata_k: int | None
    strata_on: str | None
    strata_factors: tuple[str, ...] | None


@dataclass
class PseudoOptions:
    """
    Program argument options for ``pseudo``.
    """

    csv: Path
    time_point: float
    outcome: str
    cause: int
    intercept: bool
    out: Path | None
    strata_col: str | None
    strata_k: int | None
    strata_on: str | None
    strata_factors: tuple[str, ...] | None


@dataclass
class SimulateOptions:
    """
    Program argument options for ``simulate``.
    """

    scenario: str
    config: Path | None
    reps: int | None
    out: Path | None
    figure_data: Path | None
    seed: int | None = None
    threads: int = 1
    format: str = "csv"
