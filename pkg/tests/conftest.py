from __future__ import annotations

from typing import TYPE_CHECKING, Protocol

import numpy as np
import pytest

from ipcw_regression.datastructures import Dataset, OutcomeKind, OutcomeSpec

if TYPE_CHECKING:
    import pathlib


class DatasetFactory(Protocol):
    def __call__(  # noqa: PLR0913
        self,
        seed: int,
        n: int = 40,
        strata: int = 1,
        censoring: float = 0.5,
        ties: bool = False,
        outcome: OutcomeSpec | None = None,
    ) -> Dataset: ...


SURVIVAL_AT_3_5 = OutcomeSpec(OutcomeKind.SURVIVAL, 3.5)


@pytest.fixture()
def four_records() -> Dataset:
    """
    (time, status) = (1,1), (2,0), (3,1), (4,0) with the survival outcome at
    t = 3.5. Censoring jumps at 2 (hazard 1/3) and 4 (hazard 1); the weights
    are (1, 0, 1.5, 1.5).
    """
    return Dataset.from_arrays(
        times=[1.0, 2.0, 3.0, 4.0],
        statuses=[1, 0, 1, 0],
        covariates=np.ones((4, 1)),
        outcome=SURVIVAL_AT_3_5,
    )


def random_dataset(  # noqa: PLR0913
    seed: int,
    n: int = 40,
    strata: int = 1,
    censoring: float = 0.5,
    ties: bool = False,
    outcome: OutcomeSpec | None = None,
) -> Dataset:
    """
    Exponential event times with a binary and a uniform covariate, exponential
    censoring at rate ``censoring`` and uniformly drawn strata. Every stratum
    gets at least two records. With ``ties`` times are rounded to one decimal.
    """
    rng = np.random.default_rng(seed)
    x1 = rng.integers(0, 2, n)
    x2 = rng.random(n)
    event = rng.exponential(1 / np.exp(-0.5 + 0.7 * x1 - 0.4 * x2))
    censor = rng.exponential(1 / censoring, n) if censoring > 0 else np.full(n, np.inf)
    times = np.minimum(event, censor)
    if ties:
        times = np.maximum(np.round(times, 1), 0.1)
    statuses = (event <= censor).astype(int)
    labels = np.concatenate(
        [np.repeat(np.arange(strata), 2), rng.integers(0, strata, n - 2 * strata)]
    )
    return Dataset.from_arrays(
        times=times,
        statuses=statuses,
        covariates=np.column_stack([np.ones(n), x1, x2]),
        outcome=outcome or OutcomeSpec(OutcomeKind.SURVIVAL, float(np.median(times))),
        strata=labels,
        stratum_count=strata,
    )


@pytest.fixture()
def make_dataset() -> DatasetFactory:
    return random_dataset


@pytest.fixture()
def dataset_csv(tmp_path: pathlib.Path) -> pathlib.Path:
    """
    A small censored dataset with covariates x1 (binary) and x2 (uniform), an
    extra column ``id`` and a stratum column ``group``.
    """
    rng = np.random.default_rng(7)
    n = 60
    x1 = rng.integers(0, 2, n)
    x2 = rng.random(n)
    event = rng.exponential(1 / np.exp(-0.3 + 0.8 * x1))
    censor = rng.exponential(2.0, n)
    times = np.round(np.minimum(event, censor), 4) + 0.0001
    statuses = (event <= censor).astype(int)

    lines = ["id,time,status,x1,x2,group"]
    lines.extend(
        f"{i},{times[i]:.17g},{statuses[i]},{x1[i]},{x2[i]:.17g},{i % 2}"
        for i in range(n)
    )
    path = tmp_path / "data.csv"
    path.write_text("\n".join(lines) + "\n")
    return path
