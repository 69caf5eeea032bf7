"""
Stratified Kaplan-Meier estimation of the censoring distribution and the
inverse probability of censoring weights built from it.

Ties between an event and a censoring at the same time are resolved in favour
of the event: a record censored at ``s`` is at risk of censoring at ``s``, a
record with an event at ``s`` is not.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any

import numpy as np

from .exceptions import PositivityViolation, StratumEmpty, StratumTooSmall

if TYPE_CHECKING:
    from .datastructures import Dataset

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class CensoringCurve:
    """
    Step functions of the censoring hazard and survival for one stratum.

    All arrays are indexed by the sorted distinct censoring times.
    """

    stratum: int
    jump_times: np.ndarray
    hazard_increments: np.ndarray
    survival_values: np.ndarray
    at_risk_counts: np.ndarray
    censoring_counts: np.ndarray

    def survival(self, s: float | np.ndarray) -> float | np.ndarray:
        """G(s), right-continuous; constant past the last jump."""
        index = np.searchsorted(self.jump_times, s, side="right")
        return self._lookup(index)

    def survival_left(self, s: float | np.ndarray) -> float | np.ndarray:
        """G(s-): the product over jumps strictly before ``s``."""
        index = np.searchsorted(self.jump_times, s, side="left")
        return self._lookup(index)

    def _lookup(self, index: Any) -> Any:
        padded = np.concatenate(([1.0], self.survival_values))
        values = padded[index]
        return float(values) if np.ndim(values) == 0 else values

    def to_dict(self) -> dict[str, Any]:
        return {
            "stratum": self.stratum,
            "jump_times": self.jump_times.tolist(),
            "hazard_increments": self.hazard_increments.tolist(),
            "survival_values": self.survival_values.tolist(),
            "at_risk_counts": self.at_risk_counts.tolist(),
            "censoring_counts": self.censoring_counts.tolist(),
        }


@dataclass(frozen=True, eq=False)
class StratifiedCensoring:
    """
    One censoring curve per stratum, each fitted on its own records only.
    """

    curves: tuple[CensoringCurve, ...]
    sizes: tuple[int, ...]

    def survival_left(self, times: np.ndarray, strata: np.ndarray) -> np.ndarray:
        values = np.empty(len(times), dtype=float)
        for curve in self.curves:
            mask = strata == curve.stratum
            if mask.any():
                values[mask] = curve.survival_left(times[mask])
        return values

    def to_dict(self) -> dict[str, Any]:
        return {
            "strata": [
                {**curve.to_dict(), "n": size}
                for curve, size in zip(self.curves, self.sizes, strict=True)
            ]
        }


def fit_curve(
    times: np.ndarray, statuses: np.ndarray, stratum: int = 0
) -> CensoringCurve:
    """
    Product-limit fit of the censoring distribution on one stratum's records.

    At a censoring time s the risk set is #{T~ > s} + #{T~ = s, D~ = 0}.
    """
    times = np.asarray(times, dtype=float)
    statuses = np.asarray(statuses, dtype=int)

    jump_times, censoring_counts = np.unique(times[statuses == 0], return_counts=True)
    sorted_times = np.sort(times)
    beyond = len(times) - np.searchsorted(sorted_times, jump_times, side="right")
    at_risk_counts = beyond + censoring_counts

    hazard_increments = censoring_counts / at_risk_counts
    survival_values = np.cumprod(1.0 - hazard_increments)

    return CensoringCurve(
        stratum=stratum,
        jump_times=jump_times,
        hazard_increments=hazard_increments,
        survival_values=survival_values,
        at_risk_counts=at_risk_counts,
        censoring_counts=censoring_counts,
    )


def fit_censoring(dataset: Dataset) -> StratifiedCensoring:
    curves = []
    sizes = []
    for stratum in range(dataset.stratum_count):
        members = dataset.stratum_members(stratum)
        if len(members) == 0:
            raise StratumEmpty(stratum)
        curve = fit_curve(dataset.times[members], dataset.statuses[members], stratum)
        logger.debug(
            "stratum %d: %d records, %d censoring jumps",
            stratum,
            len(members),
            len(curve.jump_times),
        )
        curves.append(curve)
        sizes.append(len(members))
    return StratifiedCensoring(curves=tuple(curves), sizes=tuple(sizes))


def eval_G_left(curve: CensoringCurve, s: float) -> float:  # noqa: N802
    return curve.survival_left(s)


def _weights_from_denominators(
    observed: np.ndarray,
    denominators: np.ndarray,
    exit_times: np.ndarray,
    stratum_of: np.ndarray,
    record: int | None = None,
) -> np.ndarray:
    needed = observed & (denominators <= 0)
    if needed.any():
        first = int(np.flatnonzero(needed)[0])
        raise PositivityViolation(
            stratum=int(stratum_of[first]),
            time=float(exit_times[first]),
            record=record,
        )
    weights = np.zeros(len(observed), dtype=float)
    weights[observed] = 1.0 / denominators[observed]
    return weights


def compute_weights(dataset: Dataset, censoring: StratifiedCensoring) -> np.ndarray:
    """
    W_i = (1{T~ >= t} + 1{T~ < t, D~ != 0}) / G(T~ ∧ t- | Z).
    """
    horizon = dataset.outcome.horizon
    at = np.minimum(dataset.times, horizon)
    denominators = censoring.survival_left(at, dataset.strata)
    return _weights_from_denominators(
        dataset.observed, denominators, at, dataset.strata
    )


def _check_leave_one_out_size(dataset: Dataset, stratum: int) -> np.ndarray:
    members = dataset.stratum_members(stratum)
    if len(members) < 2:  # noqa: PLR2004
        raise StratumTooSmall(stratum, len(members))
    return members


def leave_one_out_weights(
    dataset: Dataset, censoring: StratifiedCensoring, i: int
) -> np.ndarray:
    """
    Weights with the censoring curve of record ``i``'s stratum refitted without
    record ``i``. Other strata keep their weights; position ``i`` is 0.
    """
    stratum = int(dataset.strata[i])
    members = _check_leave_one_out_size(dataset, stratum)
    keep = members[members != i]

    curve = fit_curve(dataset.times[keep], dataset.statuses[keep], stratum)
    at = np.minimum(dataset.times[keep], dataset.outcome.horizon)

    weights = compute_weights(dataset, censoring)
    weights[keep] = _weights_from_denominators(
        dataset.observed[keep],
        curve.survival_left(at),
        at,
        dataset.strata[keep],
        record=i,
    )
    weights[i] = 0.0
    return weights


def leave_one_out_weight_matrix(
    dataset: Dataset, censoring: StratifiedCensoring, stratum: int
) -> np.ndarray:
    """
    All leave-one-out weights of a stratum at once.

    Row ``a`` holds the weights of the stratum's members when member ``a`` is
    left out (diagonal 0). Each refit is the full-stratum curve with the left
    out record taken off the risk and censoring counts, which is the same
    product-limit fit as on the reduced records.
    """
    members = _check_leave_one_out_size(dataset, stratum)
    curve = censoring.curves[stratum]
    horizon = dataset.outcome.horizon

    times = dataset.times[members]
    statuses = dataset.statuses[members]
    observed = dataset.observed[members]
    at = np.minimum(times, horizon)
    size = len(members)
    others = ~np.eye(size, dtype=bool)

    jumps = curve.jump_times
    censored_at = (statuses == 0)[:, np.newaxis] & (times[:, np.newaxis] == jumps)
    beyond = times[:, np.newaxis] > jumps
    at_risk = curve.at_risk_counts - (beyond | censored_at)
    counts = curve.censoring_counts - censored_at

    hazard = np.zeros(at_risk.shape, dtype=float)
    np.divide(counts, at_risk, out=hazard, where=at_risk > 0)
    survival = np.hstack(
        [np.ones((size, 1)), np.cumprod(1.0 - hazard, axis=1)],
    )
    denominators = survival[:, np.searchsorted(jumps, at, side="left")]

    needed = observed[np.newaxis, :] & others
    failing = needed & (denominators <= 0)
    if failing.any():
        row, column = (int(v) for v in np.argwhere(failing)[0])
        raise PositivityViolation(
            stratum=stratum, time=float(at[column]), record=int(members[row])
        )

    weights = np.zeros((size, size), dtype=float)
    np.divide(1.0, denominators, out=weights, where=needed)
    return weights
