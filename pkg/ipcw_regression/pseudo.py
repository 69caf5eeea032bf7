"""
Jack-knife pseudo-observations of the inverse probability weighted mean.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .censoring import (
    compute_weights,
    leave_one_out_weight_matrix,
    leave_one_out_weights,
)
from .exceptions import PositivityViolation, StratumTooSmall

if TYPE_CHECKING:
    from .censoring import StratifiedCensoring
    from .datastructures import Dataset

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PseudoSet:
    """
    theta_hat: the weighted mean of Y over all records
    values: the pseudo-observations n·theta_hat - (n-1)·theta_hat^(i)
    leave_one_out: theta_hat^(i), the estimate without record i
    """

    theta_hat: float
    values: np.ndarray
    leave_one_out: np.ndarray


def theta_hat(
    dataset: Dataset,
    censoring: StratifiedCensoring,
    weights: np.ndarray | None = None,
) -> float:
    if not dataset.observed.any():
        raise PositivityViolation(
            stratum=None,
            time=dataset.outcome.horizon,
            reason=f"no outcome observed at horizon {dataset.outcome.horizon:g}",
        )
    if weights is None:
        weights = compute_weights(dataset, censoring)
    return float(np.sum(weights * dataset.outcomes) / dataset.n)


def _check_strata(dataset: Dataset) -> None:
    for stratum in range(dataset.stratum_count):
        size = len(dataset.stratum_members(stratum))
        if size < 2:  # noqa: PLR2004
            raise StratumTooSmall(stratum, size)


def _stratum_pseudo_values(
    dataset: Dataset,
    censoring: StratifiedCensoring,
    weights: np.ndarray,
    stratum: int,
) -> tuple[np.ndarray, np.ndarray]:
    members = dataset.stratum_members(stratum)
    y = dataset.outcomes[members]
    w = weights[members]

    # W_j - W_j^(i) for j != i in the stratum; the diagonal carries W_i Y_i
    change = w[np.newaxis, :] - leave_one_out_weight_matrix(dataset, censoring, stratum)
    np.fill_diagonal(change, 0.0)
    return members, w * y + change @ y


def pseudo_observations(
    dataset: Dataset,
    censoring: StratifiedCensoring,
    workers: int = 1,
) -> PseudoSet:
    """
    Pseudo-observations computed stratum by stratum:

        theta_i = W_i Y_i + sum_{j != i, Z_j = Z_i} (W_j - W_j^(i)) Y_j

    which equals the jack-knife of the overall estimator since leaving out
    record i only changes the censoring curve of its own stratum.
    """
    _check_strata(dataset)
    weights = compute_weights(dataset, censoring)
    overall = theta_hat(dataset, censoring, weights)
    n = dataset.n

    def run(stratum: int) -> tuple[np.ndarray, np.ndarray]:
        return _stratum_pseudo_values(dataset, censoring, weights, stratum)

    values = np.empty(n, dtype=float)
    strata = range(dataset.stratum_count)
    if workers > 1 and dataset.stratum_count > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, strata))
    else:
        results = [run(stratum) for stratum in strata]

    for members, stratum_values in results:
        values[members] = stratum_values

    leave_one_out = (n * overall - values) / (n - 1)
    logger.debug("pseudo-observations: theta_hat=%.6g, n=%d", overall, n)
    return PseudoSet(theta_hat=overall, values=values, leave_one_out=leave_one_out)


def jackknife_pseudo_values(
    dataset: Dataset,
    censoring: StratifiedCensoring,
    workers: int = 1,
) -> PseudoSet:
    """
    Pseudo-observations from their definition, one refit per record:

        theta^(i) = 1/(n-1) sum_{j != i} W_j^(i) Y_j
        theta_i = n·theta - (n-1)·theta^(i)

    Quadratic in n with a full refit each time; ``pseudo_observations`` is the
    fast route to the same numbers.
    """
    _check_strata(dataset)
    overall = theta_hat(dataset, censoring)
    n = dataset.n
    y = dataset.outcomes

    def refit(i: int) -> float:
        return float(np.sum(leave_one_out_weights(dataset, censoring, i) * y) / (n - 1))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            leave_one_out = np.array(list(pool.map(refit, range(n))))
    else:
        leave_one_out = np.array([refit(i) for i in range(n)])

    values = n * overall - (n - 1) * leave_one_out
    return PseudoSet(theta_hat=overall, values=values, leave_one_out=leave_one_out)
