from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from scipy.stats import norm

from .exceptions import SingularSystem

if TYPE_CHECKING:
    from .glm import FitResult


def normal_quantile(probability: float) -> float:
    return float(norm.ppf(probability))


@dataclass(frozen=True, eq=False)
class SandwichEstimate:
    """
    covariance: the n-scaled asymptotic variance estimate
    se_beta: standard errors of beta, sqrt(diag(covariance) / n)
    """

    covariance: np.ndarray
    se_beta: np.ndarray


@dataclass(frozen=True)
class ConfidenceInterval:
    estimate: float
    lower: float
    upper: float

    def covers(self, value: float) -> bool:
        return self.lower <= value <= self.upper


def sandwich(fit: FitResult) -> SandwichEstimate:
    """
    Huber-White sandwich n J^-1 (sum_i u_i u_i^T) J^-T with J the observed
    Jacobian of the score at the estimate.
    """
    n = fit.n
    try:
        bread = np.linalg.inv(fit.jacobian)
    except np.linalg.LinAlgError as e:
        msg = f"singular score Jacobian for the {fit.approach.value} fit"
        raise SingularSystem(msg) from e

    meat = fit.contributions.T @ fit.contributions
    covariance = n * bread @ meat @ bread.T
    covariance = (covariance + covariance.T) / 2
    se_beta = np.sqrt(np.clip(np.diag(covariance), 0.0, None) / n)
    return SandwichEstimate(covariance=covariance, se_beta=se_beta)


def wald_ci(
    fit: FitResult, estimate: SandwichEstimate, level: float = 0.95
) -> list[ConfidenceInterval]:
    z = normal_quantile(1 - (1 - level) / 2)
    return [
        ConfidenceInterval(
            estimate=float(beta), lower=float(beta - z * se), upper=float(beta + z * se)
        )
        for beta, se in zip(fit.beta, estimate.se_beta, strict=True)
    ]
