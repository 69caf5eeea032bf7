"""
Test the jack-knife pseudo-observations.
"""

import numpy as np
import pytest

from ipcw_regression.censoring import fit_censoring
from ipcw_regression.datastructures import Dataset, OutcomeKind, OutcomeSpec
from ipcw_regression.exceptions import PositivityViolation, StratumTooSmall
from ipcw_regression.pseudo import (
    jackknife_pseudo_values,
    pseudo_observations,
    theta_hat,
)

from .conftest import DatasetFactory


def test_four_record_pseudo_values(four_records: Dataset) -> None:
    """
    theta_hat = 0.375 and the pseudo-values are (0, 0.5, -0.5, 1.5).
    """
    censoring = fit_censoring(four_records)

    for route in (pseudo_observations, jackknife_pseudo_values):
        result = route(four_records, censoring)
        assert result.theta_hat == pytest.approx(0.375)
        np.testing.assert_allclose(result.values, [0.0, 0.5, -0.5, 1.5], atol=1e-12)
        np.testing.assert_allclose(
            result.leave_one_out, [0.5, 1 / 3, 2 / 3, 0.0], atol=1e-12
        )


def test_mean_of_pseudo_values(four_records: Dataset) -> None:
    """
    The pseudo-values average to n theta_hat - (n - 1) times the mean of the
    leave-one-out estimates.
    """
    result = pseudo_observations(four_records, fit_censoring(four_records))
    n = four_records.n

    assert result.values.mean() == pytest.approx(
        n * result.theta_hat - (n - 1) * result.leave_one_out.mean()
    )


@pytest.mark.parametrize(
    "outcome",
    [
        None,
        OutcomeSpec(OutcomeKind.CAUSE_FAILURE, 0.7),
        OutcomeSpec(OutcomeKind.RESTRICTED_TIME, 1.1),
        OutcomeSpec(OutcomeKind.TIME_LOST, 0.9),
    ],
)
def test_routes_agree(
    make_dataset: DatasetFactory, outcome: OutcomeSpec | None
) -> None:
    """
    The one-pass formula reproduces the definitional jack-knife on random
    stratified data with and without ties.
    """
    for seed in range(50):
        dataset = make_dataset(
            seed,
            n=20 + seed % 7,
            strata=1 + seed % 3,
            ties=seed % 2 == 0,
            outcome=outcome,
        )
        censoring = fit_censoring(dataset)

        fast = pseudo_observations(dataset, censoring)
        slow = jackknife_pseudo_values(dataset, censoring)

        np.testing.assert_allclose(fast.values, slow.values, atol=1e-10)
        np.testing.assert_allclose(fast.leave_one_out, slow.leave_one_out, atol=1e-10)


def test_routes_agree_on_many_datasets(make_dataset: DatasetFactory) -> None:
    """
    200 small datasets, up to four strata.
    """
    for seed in range(200):
        dataset = make_dataset(1000 + seed, n=12, strata=1 + seed % 4, ties=True)
        censoring = fit_censoring(dataset)

        np.testing.assert_allclose(
            pseudo_observations(dataset, censoring).values,
            jackknife_pseudo_values(dataset, censoring).values,
            atol=1e-10,
        )


def test_workers_do_not_change_values(make_dataset: DatasetFactory) -> None:
    """
    Computing strata in parallel gives the same numbers.
    """
    dataset = make_dataset(9, n=60, strata=4)
    censoring = fit_censoring(dataset)

    np.testing.assert_array_equal(
        pseudo_observations(dataset, censoring, workers=3).values,
        pseudo_observations(dataset, censoring).values,
    )
    np.testing.assert_allclose(
        jackknife_pseudo_values(dataset, censoring, workers=3).values,
        pseudo_observations(dataset, censoring).values,
        atol=1e-10,
    )


def test_uncensored_pseudo_values_are_outcomes(make_dataset: DatasetFactory) -> None:
    """
    Without censoring every pseudo-value is the outcome itself.
    """
    dataset = make_dataset(2, n=40, strata=2, censoring=0.0)
    result = pseudo_observations(dataset, fit_censoring(dataset))

    np.testing.assert_allclose(result.values, dataset.outcomes, atol=1e-12)


def test_pseudo_values_are_linear_in_the_outcome() -> None:
    """
    Moving the restricted time horizon from 1.6 to 1.9, with no exit in
    between, adds 0.3 times the survival pseudo-values.
    """
    times = np.array([0.3, 0.5, 0.9, 1.4, 2.0, 2.2])
    statuses = np.array([1, 0, 1, 0, 1, 0])

    def values(kind: OutcomeKind, horizon: float) -> np.ndarray:
        dataset = Dataset.from_arrays(
            times, statuses, np.ones((6, 1)), OutcomeSpec(kind, horizon)
        )
        return pseudo_observations(dataset, fit_censoring(dataset)).values

    shift = values(OutcomeKind.RESTRICTED_TIME, 1.9) - values(
        OutcomeKind.RESTRICTED_TIME, 1.6
    )
    np.testing.assert_allclose(
        shift, 0.3 * values(OutcomeKind.SURVIVAL, 1.6), atol=1e-12
    )


def test_stratum_too_small() -> None:
    """
    Leaving one out needs two records in every stratum.
    """
    dataset = Dataset.from_arrays(
        times=[1.0, 2.0, 3.0],
        statuses=[1, 0, 1],
        covariates=np.ones((3, 1)),
        outcome=OutcomeSpec(OutcomeKind.SURVIVAL, 2.5),
        strata=[0, 0, 1],
    )

    with pytest.raises(StratumTooSmall, match="stratum 1 has 1 record"):
        pseudo_observations(dataset, fit_censoring(dataset))


def test_nothing_observed() -> None:
    """
    With every record censored before the horizon there is nothing to weight.
    """
    dataset = Dataset.from_arrays(
        times=[1.0, 2.0],
        statuses=[0, 0],
        covariates=np.ones((2, 1)),
        outcome=OutcomeSpec(OutcomeKind.SURVIVAL, 5.0),
    )

    with pytest.raises(PositivityViolation, match="no outcome observed"):
        theta_hat(dataset, fit_censoring(dataset))
