"""
Estimating equations for the three censoring weighted regressions and a damped
Newton solver for them.

Every approach has per-subject contributions of the form

    u_i(beta) = A(beta; x_i) (r_i - v_i mu(beta; x_i))

ind:        r_i = W_i Y_i,  v_i = W_i
out:        r_i = W_i Y_i,  v_i = 1
pse:        r_i = theta_i,  v_i = 1
uncensored: r_i = Y_i,      v_i = 1
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING

import numpy as np

from .censoring import compute_weights, fit_censoring
from .exceptions import InvalidRecord, SingularSystem
from .pseudo import pseudo_observations

if TYPE_CHECKING:
    from .censoring import StratifiedCensoring
    from .datastructures import Dataset
    from .pseudo import PseudoSet

logger = logging.getLogger(__name__)

DEFAULT_MAX_ITER = 50
DEFAULT_TOL = 1e-8
MAX_HALVINGS = 10


class Approach(str, Enum):
    IND = "ind"
    OUT = "out"
    PSE = "pse"
    UNCENSORED = "uncensored"


class Link(str, Enum):
    IDENTITY = "identity"
    EXP = "exp"
    LOGIT = "logit"

    def mean(self, eta: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """mu and its first and second derivatives in eta."""
        if self is Link.IDENTITY:
            return eta.copy(), np.ones_like(eta), np.zeros_like(eta)
        if self is Link.EXP:
            mu = np.exp(eta)
            return mu, mu, mu
        mu = 1.0 / (1.0 + np.exp(-eta))
        d1 = mu * (1.0 - mu)
        return mu, d1, d1 * (1.0 - 2.0 * mu)


class AChoice(str, Enum):
    COVARIATE = "covariate"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class ModelSpec:
    link: Link
    a_choice: AChoice
    p: int

    def __post_init__(self) -> None:
        if self.p < 1:
            msg = f"parameter dimension must be >= 1, got {self.p}"
            raise InvalidRecord(msg)


@dataclass(frozen=True)
class Responses:
    """
    The (r, v) pair that turns an approach into u_i = A_i (r_i - v_i mu_i).
    """

    approach: Approach
    response: np.ndarray
    mean_weight: np.ndarray


@dataclass(frozen=True, eq=False)
class FitResult:
    beta: np.ndarray
    approach: Approach
    converged: bool
    iterations: int
    score_norm: float
    jacobian: np.ndarray
    contributions: np.ndarray

    @property
    def n(self) -> int:
        return self.contributions.shape[0]


def prepare_responses(
    approach: Approach,
    dataset: Dataset,
    censoring: StratifiedCensoring | None = None,
    pseudo: PseudoSet | None = None,
    workers: int = 1,
) -> Responses:
    approach = Approach(approach)
    n = dataset.n

    if approach is Approach.UNCENSORED:
        if not dataset.observed.all():
            first = int(np.flatnonzero(~dataset.observed)[0])
            # raises OutcomeUnobserved for the first censored-before-t record
            dataset.outcome.evaluate(dataset.times[first], dataset.statuses[first])
        return Responses(approach, dataset.outcomes.copy(), np.ones(n))

    if censoring is None:
        censoring = fit_censoring(dataset)

    if approach is Approach.PSE:
        if pseudo is None:
            pseudo = pseudo_observations(dataset, censoring, workers=workers)
        return Responses(approach, pseudo.values.copy(), np.ones(n))

    weights = compute_weights(dataset, censoring)
    response = weights * dataset.outcomes
    if approach is Approach.IND:
        return Responses(approach, response, weights)
    return Responses(approach, response, np.ones(n))


def assemble_score(
    model: ModelSpec,
    covariates: np.ndarray,
    responses: Responses,
    beta: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    The score U_n(beta), its per-subject contributions (n x p) and the observed
    Jacobian dU_n/dbeta^T.
    """
    covariates = np.asarray(covariates, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if (
        covariates.ndim != 2  # noqa: PLR2004
        or covariates.shape[1] != model.p
        or beta.shape != (model.p,)
    ):
        msg = (
            f"dimension mismatch: design {covariates.shape}, beta {beta.shape}, "
            f"model p={model.p}"
        )
        raise InvalidRecord(msg)
    if len(responses.response) != covariates.shape[0]:
        msg = (
            f"dimension mismatch: {len(responses.response)} responses for "
            f"{covariates.shape[0]} records"
        )
        raise InvalidRecord(msg)

    with np.errstate(over="ignore", invalid="ignore"):
        eta = covariates @ beta
        mu, d1, d2 = model.link.mean(eta)

        if model.a_choice is AChoice.GAUSSIAN:
            a_scale, a_slope = d1, d2
        else:
            a_scale, a_slope = np.ones_like(eta), np.zeros_like(eta)

        residual = responses.response - responses.mean_weight * mu
        contributions = covariates * (a_scale * residual)[:, np.newaxis]

        # d/dbeta^T of a_scale(eta) x (r - v mu(eta))
        #   = (a_slope (r - v mu) - v a_scale mu') x x^T
        curvature = a_slope * residual - responses.mean_weight * a_scale * d1
        jacobian = (covariates * curvature[:, np.newaxis]).T @ covariates

    # running sum in record order
    score = np.cumsum(contributions, axis=0)[-1]
    return score, contributions, jacobian


def initial_beta(
    model: ModelSpec, covariates: np.ndarray, responses: Responses
) -> np.ndarray:
    """
    Zero, except for the identity link where a weighted least squares fit of
    the responses is used.
    """
    if model.link is not Link.IDENTITY:
        return np.zeros(model.p)
    gram = (covariates * responses.mean_weight[:, np.newaxis]).T @ covariates
    try:
        return np.linalg.solve(gram, covariates.T @ responses.response)
    except np.linalg.LinAlgError:
        return np.zeros(model.p)


def _norm(score: np.ndarray, n: int) -> float:
    value = float(np.max(np.abs(score))) / n
    return value if np.isfinite(value) else np.inf


def damped_step(  # noqa: PLR0913
    model: ModelSpec,
    covariates: np.ndarray,
    responses: Responses,
    beta: np.ndarray,
    step: np.ndarray,
    norm: float,
) -> tuple[np.ndarray, tuple[np.ndarray, np.ndarray, np.ndarray], float, float]:
    """
    beta - factor * step for the first factor 1, 1/2, ..., 2^-MAX_HALVINGS that
    lowers the scaled score norm below ``norm``; the last one when none does.

    Returns the new beta, its score triple, its norm and the factor applied.
    """
    n = covariates.shape[0]
    for halvings in range(MAX_HALVINGS + 1):
        factor = 0.5**halvings
        candidate = beta - factor * step
        trial = assemble_score(model, covariates, responses, candidate)
        trial_norm = _norm(trial[0], n)
        if trial_norm < norm:
            break
    return candidate, trial, trial_norm, factor


def solve_equation(  # noqa: PLR0913
    model: ModelSpec,
    covariates: np.ndarray,
    responses: Responses,
    init: np.ndarray | None = None,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
) -> FitResult:
    """
    Damped Newton iteration on U_n(beta) = 0.

    A step is halved (at most MAX_HALVINGS times) until the scaled score norm
    decreases. Non-convergence returns the last iterate with converged=False.
    """
    if max_iter < 1:
        msg = f"max_iter must be >= 1, got {max_iter}"
        raise InvalidRecord(msg)
    covariates = np.asarray(covariates, dtype=float)
    n = covariates.shape[0]
    if init is None:
        beta = initial_beta(model, covariates, responses)
    else:
        beta = np.asarray(init, dtype=float)
    if not np.all(np.isfinite(beta)):
        msg = "initial beta must be finite"
        raise InvalidRecord(msg)

    score, contributions, jacobian = assemble_score(model, covariates, responses, beta)
    norm = _norm(score, n)
    iterations = 0

    while norm > tol and iterations < max_iter:
        iterations += 1
        try:
            step = np.linalg.solve(jacobian, score)
        except np.linalg.LinAlgError as e:
            msg = f"singular score Jacobian at iteration {iterations}"
            raise SingularSystem(msg) from e

        beta, trial, norm, factor = damped_step(
            model, covariates, responses, beta, step, norm
        )
        score, contributions, jacobian = trial
        logger.debug(
            "%s iteration %d: |U|/n=%.3e, step factor %g",
            responses.approach.value,
            iterations,
            norm,
            factor,
        )

    converged = norm <= tol
    if not converged:
        logger.info(
            "%s fit did not converge in %d iterations (|U|/n=%.3e)",
            responses.approach.value,
            max_iter,
            norm,
        )

    return FitResult(
        beta=beta,
        approach=responses.approach,
        converged=converged,
        iterations=iterations,
        score_norm=norm,
        jacobian=jacobian,
        contributions=contributions,
    )


def solve(  # noqa: PLR0913
    approach: Approach | str,
    dataset: Dataset,
    model: ModelSpec,
    init: np.ndarray | None = None,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
    censoring: StratifiedCensoring | None = None,
    pseudo: PseudoSet | None = None,
) -> FitResult:
    responses = prepare_responses(Approach(approach), dataset, censoring, pseudo)
    return solve_equation(
        model, dataset.covariates, responses, init=init, max_iter=max_iter, tol=tol
    )
