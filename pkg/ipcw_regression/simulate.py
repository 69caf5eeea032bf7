"""
Seeded Monte Carlo scenarios for comparing the censoring weighted regressions.

Scenario I:   two groups, uniform event times, point mass or exponential
              censoring, Y = 1{T <= 1}, identity link.
Scenario II:  Weibull event and censoring times depending on three
              covariates, Y = min(T, 1), censoring stratified on a quantized
              covariate.
Scenario III: 32 binary covariate patterns, uniform event and censoring
              times, Y = 1{T <= 1}, log link, stratification on a subset of
              the binary factors.

Every replication draws from its own Philox stream keyed by
(seed, replication index, variable), so results do not depend on how the
replications are spread over workers.
"""

from __future__ import annotations

import asyncio
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import TYPE_CHECKING, Any

import numpy as np

from .censoring import fit_censoring
from .datastructures import Dataset, OutcomeKind, OutcomeSpec, Stratifier
from .exceptions import ConfigError, IPCWError
from .glm import (
    AChoice,
    Approach,
    Link,
    ModelSpec,
    Responses,
    prepare_responses,
    solve_equation,
)
from .variance import normal_quantile, sandwich, wald_ci

if TYPE_CHECKING:
    from collections.abc import Callable
    from pathlib import Path

logger = logging.getLogger(__name__)

DEFAULT_SEED = 20240101
DEFAULT_REPLICATIONS = 10_000
HORIZON = 1.0
LEVEL = 0.95

CENSORED_APPROACHES = (Approach.IND, Approach.OUT, Approach.PSE)
APPROACHES = (*CENSORED_APPROACHES, Approach.UNCENSORED)

# variable tags of the per-replication random streams
STREAMS = {"covariates": 0, "events": 1, "censoring": 2}

SCENARIO_I_RISK = {0: 1 / 6, 1: 1 / 2}
SCENARIO_I_SIZES = (50, 100, 200, 400, 800)
SCENARIO_II_SIZE = 1000
SCENARIO_II_BINS = (1, 2, 4, 8)
SCENARIO_III_PER_STRATUM = (2, 6, 12)
SCENARIO_III_FACTORS = (0, 1, 3, 5)
SCENARIO_III_PATTERNS = 32
WEIBULL_SHAPE = 1.5

# design, event times, censoring times
Draw = tuple[np.ndarray, np.ndarray, np.ndarray]


class Scenario(str, Enum):
    I = "I"  # noqa: E741
    II = "II"
    III = "III"

    @classmethod
    def from_number(cls, number: int | str) -> Scenario:
        try:
            return {1: cls.I, 2: cls.II, 3: cls.III}[int(number)]
        except (KeyError, ValueError):
            try:
                return cls(str(number))
            except ValueError:
                msg = f"unknown scenario {number!r}, use 1, 2 or 3"
                raise ConfigError(msg) from None


class CensoringKind(str, Enum):
    POINT_MASS = "point_mass"
    EXPONENTIAL = "exponential"


@dataclass(frozen=True)
class CensoringLaw:
    """
    point_mass: C = value with probability 1/2, otherwise no censoring
    exponential: C ~ Exp(rate=value)
    """

    kind: CensoringKind
    value: float

    @property
    def label(self) -> str:
        if self.kind is CensoringKind.EXPONENTIAL:
            return "exp"
        return f"{self.value:g}"

    @classmethod
    def parse(cls, value: Any) -> CensoringLaw:
        if isinstance(value, CensoringLaw):
            return value
        if isinstance(value, dict):
            kind = value.get("kind")
            if kind == CensoringKind.POINT_MASS.value and "s" in value:
                return cls(CensoringKind.POINT_MASS, float(value["s"]))
            if kind == CensoringKind.EXPONENTIAL.value:
                return cls(CensoringKind.EXPONENTIAL, float(value.get("rate", 1.0)))
        elif value == "exp":
            return cls(CensoringKind.EXPONENTIAL, 1.0)
        else:
            try:
                return cls(CensoringKind.POINT_MASS, float(value))
            except (TypeError, ValueError):
                pass
        msg = f"invalid censoring {value!r}, use 0.2, 0.8 or \"exp\""
        raise ConfigError(msg)


POINT_MASS_EARLY = CensoringLaw(CensoringKind.POINT_MASS, 0.2)
POINT_MASS_LATE = CensoringLaw(CensoringKind.POINT_MASS, 0.8)
EXPONENTIAL = CensoringLaw(CensoringKind.EXPONENTIAL, 1.0)
SCENARIO_I_CENSORING = (POINT_MASS_EARLY, POINT_MASS_LATE, EXPONENTIAL)


@dataclass(frozen=True)
class ScenarioConfig:
    """
    One simulation configuration.

    ``n`` is the total sample size for Scenarios I and II and the number of
    records per covariate pattern for Scenario III.
    """

    scenario: Scenario
    n: int
    censoring: CensoringLaw | None = None
    strata_k: int = 1
    strata_factors: int = 0
    replications: int = DEFAULT_REPLICATIONS
    seed: int = DEFAULT_SEED

    def __post_init__(self) -> None:  # noqa: C901
        if self.replications < 1:
            msg = f"replications must be >= 1, got {self.replications}"
            raise ConfigError(msg)
        if not 0 <= self.seed < 2**64:
            msg = f"seed must be a 64-bit unsigned integer, got {self.seed}"
            raise ConfigError(msg)
        if self.n < 2:  # noqa: PLR2004
            msg = f"n must be >= 2, got {self.n}"
            raise ConfigError(msg)

        if self.scenario is Scenario.I:
            if self.censoring not in SCENARIO_I_CENSORING:
                msg = (
                    "scenario I censoring must be 0.2, 0.8 or exp, "
                    f"got {self.censoring}"
                )
                raise ConfigError(msg)
        elif self.censoring is not None:
            msg = (
                "censoring is only configurable in scenario I "
                f"({self.scenario.value})"
            )
            raise ConfigError(msg)

        if self.scenario is Scenario.II:
            if self.strata_k not in SCENARIO_II_BINS:
                msg = f"strata_k must be one of {SCENARIO_II_BINS}, got {self.strata_k}"
                raise ConfigError(msg)
        elif self.strata_k != 1:
            msg = "strata_k is only configurable in scenario II"
            raise ConfigError(msg)

        if self.scenario is Scenario.III:
            if self.strata_factors not in SCENARIO_III_FACTORS:
                msg = (
                    f"strata_factors must be one of {SCENARIO_III_FACTORS}, "
                    f"got {self.strata_factors}"
                )
                raise ConfigError(msg)
        elif self.strata_factors != 0:
            msg = "strata_factors is only configurable in scenario III"
            raise ConfigError(msg)

    @property
    def sample_size(self) -> int:
        if self.scenario is Scenario.III:
            return SCENARIO_III_PATTERNS * self.n
        return self.n

    @property
    def outcome(self) -> OutcomeSpec:
        if self.scenario is Scenario.II:
            return OutcomeSpec(OutcomeKind.RESTRICTED_TIME, HORIZON)
        return OutcomeSpec(OutcomeKind.CAUSE_FAILURE, HORIZON, cause=1)

    @property
    def model(self) -> ModelSpec:
        if self.scenario is Scenario.III:
            return ModelSpec(Link.EXP, AChoice.GAUSSIAN, p=6)
        if self.scenario is Scenario.II:
            return ModelSpec(Link.IDENTITY, AChoice.COVARIATE, p=4)
        return ModelSpec(Link.IDENTITY, AChoice.COVARIATE, p=2)

    @property
    def stratifier(self) -> Stratifier:
        if self.scenario is Scenario.II:
            return Stratifier.quantize(column=2, bins=self.strata_k)
        if self.scenario is Scenario.III and self.strata_factors:
            return Stratifier.factor_subset(range(1, self.strata_factors + 1))
        return Stratifier.trivial()

    @property
    def truth(self) -> np.ndarray | None:
        """True coefficients; Scenario II has no closed form."""
        if self.scenario is Scenario.I:
            low, high = SCENARIO_I_RISK[0], SCENARIO_I_RISK[1]
            return np.array([low, high - low])
        if self.scenario is Scenario.III:
            return np.array([math.log(0.1)] + [math.log(1.25)] * 5)
        return None

    @property
    def coefficients(self) -> tuple[str, ...]:
        return tuple(f"b{j}" for j in range(self.model.p))

    @property
    def max_iter(self) -> int:
        return 20 if self.scenario is Scenario.III else 50

    @property
    def joint_convergence(self) -> bool:
        """Summaries keep only replications where every approach converged."""
        return self.scenario is Scenario.III

    def label(self) -> str:
        if self.scenario is Scenario.I:
            return f"Scenario I, cens={self.censoring.label}, n={self.n}"
        if self.scenario is Scenario.II:
            return f"Scenario II, k={self.strata_k}, n={self.n}"
        return f"Scenario III, k={self.strata_factors}, n={self.n} per stratum"

    def to_dict(self) -> dict[str, Any]:
        return {
            "scenario": self.scenario.value,
            "n": self.n,
            "censoring": self.censoring.label if self.censoring else None,
            "strata_k": self.strata_k,
            "strata_factors": self.strata_factors,
            "replications": self.replications,
            "seed": self.seed,
        }


CONFIG_FIELDS = frozenset(
    {"scenario", "n", "n_per_stratum", "censoring", "strata_k", "strata_factors",
     "replications", "seed"}
)


def _integer(data: dict[str, Any], key: str, default: int) -> int:
    value = data.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int):
        msg = f"{key} must be an integer, got {value!r}"
        raise ConfigError(msg)
    return value


def config_from_dict(data: dict[str, Any], scenario: Scenario) -> ScenarioConfig:
    if not isinstance(data, dict):
        msg = f"a configuration must be a JSON object, got {type(data).__name__}"
        raise ConfigError(msg)
    if unknown := sorted(set(data) - CONFIG_FIELDS):
        msg = f"unknown configuration field(s): {', '.join(unknown)}"
        raise ConfigError(msg)
    if "scenario" in data and Scenario.from_number(data["scenario"]) is not scenario:
        msg = f"configuration is for scenario {data['scenario']}, not {scenario.value}"
        raise ConfigError(msg)

    default_n = {
        Scenario.I: 800,
        Scenario.II: SCENARIO_II_SIZE,
        Scenario.III: 12,
    }[scenario]
    n_key = "n_per_stratum" if "n_per_stratum" in data else "n"
    censoring = None
    if scenario is Scenario.I:
        censoring = CensoringLaw.parse(data.get("censoring", "0.2"))
    elif "censoring" in data:
        censoring = CensoringLaw.parse(data["censoring"])

    return ScenarioConfig(
        scenario=scenario,
        n=_integer(data, n_key, default_n),
        censoring=censoring,
        strata_k=_integer(data, "strata_k", 1),
        strata_factors=_integer(data, "strata_factors", 0),
        replications=_integer(data, "replications", DEFAULT_REPLICATIONS),
        seed=_integer(data, "seed", DEFAULT_SEED),
    )


def load_configs(
    path: Path,
    scenario: Scenario,
    seed: int | None = None,
    replications: int | None = None,
) -> list[ScenarioConfig]:
    """
    Read one configuration object or a list of them from a JSON file.
    ``seed`` and ``replications`` override every configuration when given.
    """
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        msg = f"unable to read configuration {path}: {e}"
        raise ConfigError(msg) from e

    items = data if isinstance(data, list) else [data]
    if not items:
        msg = f"configuration {path} is an empty list"
        raise ConfigError(msg)
    configs = [config_from_dict(item, scenario) for item in items]
    return [override(config, seed, replications) for config in configs]


def override(
    config: ScenarioConfig, seed: int | None = None, replications: int | None = None
) -> ScenarioConfig:
    if seed is not None:
        config = replace(config, seed=seed)
    if replications is not None:
        config = replace(config, replications=replications)
    return config


def default_grid(
    scenario: Scenario,
    replications: int = DEFAULT_REPLICATIONS,
    seed: int = DEFAULT_SEED,
) -> list[ScenarioConfig]:
    common = {"scenario": scenario, "replications": replications, "seed": seed}
    if scenario is Scenario.I:
        return [
            ScenarioConfig(n=n, censoring=censoring, **common)
            for censoring in SCENARIO_I_CENSORING
            for n in SCENARIO_I_SIZES
        ]
    if scenario is Scenario.II:
        return [
            ScenarioConfig(n=SCENARIO_II_SIZE, strata_k=k, **common)
            for k in SCENARIO_II_BINS
        ]
    return [
        ScenarioConfig(n=m, strata_factors=f, **common)
        for f in SCENARIO_III_FACTORS
        for m in SCENARIO_III_PER_STRATUM
    ]


def replication_rng(seed: int, rep_index: int, stream: str) -> np.random.Generator:
    sequence = np.random.SeedSequence(
        entropy=seed, spawn_key=(rep_index, STREAMS[stream])
    )
    return np.random.Generator(np.random.Philox(sequence))


def _open_unit(rng: np.random.Generator, size: int) -> np.ndarray:
    """Uniform draws on (0, 1]."""
    return 1.0 - rng.random(size)


@dataclass(frozen=True, eq=False)
class SimulatedSample:
    """
    The observed dataset plus the outcome each record would have without
    censoring, for the uncensored reference fit.
    """

    dataset: Dataset
    true_outcomes: np.ndarray
    event_times: np.ndarray


def _scenario_i(
    config: ScenarioConfig, rngs: dict[str, np.random.Generator]
) -> Draw:
    n = config.n
    x = rngs["covariates"].integers(0, 2, size=n)
    risk = np.where(x == 1, SCENARIO_I_RISK[1], SCENARIO_I_RISK[0])
    event = _open_unit(rngs["events"], n) / risk

    censoring = config.censoring
    if censoring.kind is CensoringKind.POINT_MASS:
        censored = rngs["censoring"].random(n) < 0.5  # noqa: PLR2004
        censor = np.where(censored, censoring.value, np.inf)
    else:
        censor = rngs["censoring"].exponential(1 / censoring.value, size=n)

    design = np.column_stack([np.ones(n), x])
    return design, event, censor


def _scenario_ii(
    config: ScenarioConfig, rngs: dict[str, np.random.Generator]
) -> Draw:
    n = config.n
    covariates = rngs["covariates"]
    x1 = covariates.standard_normal(n)
    x2 = _open_unit(covariates, n)
    x3 = covariates.gamma(shape=3.0, scale=0.5, size=n)

    # S(t) = exp(-(rate t)^shape)
    rate = np.exp(-2 + x1 + x2 / 6 + x3 / 2 + x2 * x3 / 4)
    event = rngs["events"].standard_exponential(n) ** (1 / WEIBULL_SHAPE) / rate
    censor_rate = np.exp(-0.5 + x2)
    censor = (
        rngs["censoring"].standard_exponential(n) ** (1 / WEIBULL_SHAPE) / censor_rate
    )

    design = np.column_stack([np.ones(n), x1, x2, x3])
    return design, event, censor


def _scenario_iii(
    config: ScenarioConfig, rngs: dict[str, np.random.Generator]
) -> Draw:
    patterns = (np.arange(SCENARIO_III_PATTERNS)[:, np.newaxis] >> np.arange(5)) & 1
    x = np.repeat(patterns, config.n, axis=0).astype(float)
    n = x.shape[0]

    risk = 0.1 * 1.25 ** x.sum(axis=1)
    event = _open_unit(rngs["events"], n) / risk
    censor = _open_unit(rngs["censoring"], n) * 5 / 3

    design = np.column_stack([np.ones(n), x])
    return design, event, censor


GENERATORS = {
    Scenario.I: _scenario_i,
    Scenario.II: _scenario_ii,
    Scenario.III: _scenario_iii,
}


def generate(config: ScenarioConfig, rep_index: int) -> SimulatedSample:
    rngs = {name: replication_rng(config.seed, rep_index, name) for name in STREAMS}
    design, event, censor = GENERATORS[config.scenario](config, rngs)

    times = np.minimum(event, censor)
    statuses = (event <= censor).astype(int)
    outcome = config.outcome
    stratifier = config.stratifier

    dataset = Dataset.from_arrays(
        times,
        statuses,
        design,
        outcome,
        strata=stratifier.assign(design),
        stratum_count=stratifier.stratum_count,
    )
    true_outcomes = outcome.evaluate_many(event, np.ones(len(event), dtype=int))
    return SimulatedSample(
        dataset=dataset, true_outcomes=true_outcomes, event_times=event
    )


@dataclass(frozen=True, eq=False)
class ApproachEstimate:
    """
    One approach in one replication. ``beta`` and ``se`` are NaN when the fit
    failed; ``covers`` is None when the true coefficients are unknown.
    """

    approach: Approach
    beta: np.ndarray
    se: np.ndarray
    converged: bool
    covers: np.ndarray | None = None

    @classmethod
    def failed(cls, approach: Approach, p: int) -> ApproachEstimate:
        nan = np.full(p, np.nan)
        return cls(approach=approach, beta=nan, se=nan.copy(), converged=False)


@dataclass(frozen=True, eq=False)
class ReplicationResult:
    rep_index: int
    estimates: dict[Approach, ApproachEstimate] = field(default_factory=dict)

    def all_converged(
        self, approaches: tuple[Approach, ...] = CENSORED_APPROACHES
    ) -> bool:
        return all(self.estimates[approach].converged for approach in approaches)


def _estimate(
    config: ScenarioConfig, covariates: np.ndarray, responses: Responses
) -> ApproachEstimate:
    model = config.model
    fit = solve_equation(model, covariates, responses, max_iter=config.max_iter)
    if not fit.converged:
        return ApproachEstimate.failed(responses.approach, model.p)

    estimate = sandwich(fit)
    covers = None
    if (truth := config.truth) is not None:
        intervals = wald_ci(fit, estimate, LEVEL)
        covers = np.array(
            [ci.covers(value) for ci, value in zip(intervals, truth, strict=True)]
        )
    return ApproachEstimate(
        approach=responses.approach,
        beta=fit.beta,
        se=estimate.se_beta,
        converged=True,
        covers=covers,
    )


def run_replication(config: ScenarioConfig, rep_index: int) -> ReplicationResult:
    """
    Fit all approaches on one simulated sample. Never raises on numerical
    problems: a failing approach is recorded as not converged.
    """
    p = config.model.p
    result = ReplicationResult(rep_index=rep_index)

    try:
        sample = generate(config, rep_index)
    except IPCWError as e:
        logger.warning("replication %d: %s", rep_index, e)
        result.estimates.update(
            {approach: ApproachEstimate.failed(approach, p) for approach in APPROACHES}
        )
        return result

    dataset = sample.dataset
    censoring = None
    for approach in CENSORED_APPROACHES:
        try:
            if censoring is None:
                censoring = fit_censoring(dataset)
            responses = prepare_responses(approach, dataset, censoring)
            result.estimates[approach] = _estimate(
                config, dataset.covariates, responses
            )
        except IPCWError as e:
            logger.debug("replication %d, %s: %s", rep_index, approach.value, e)
            result.estimates[approach] = ApproachEstimate.failed(approach, p)

    reference = Responses(Approach.UNCENSORED, sample.true_outcomes, np.ones(dataset.n))
    try:
        result.estimates[Approach.UNCENSORED] = _estimate(
            config, dataset.covariates, reference
        )
    except IPCWError as e:
        logger.debug("replication %d, uncensored: %s", rep_index, e)
        result.estimates[Approach.UNCENSORED] = ApproachEstimate.failed(
            Approach.UNCENSORED, p
        )
    return result


@dataclass(frozen=True)
class CoefficientSummary:
    """
    scaled_mc_variance: n·Var(beta) over the included replications
    scaled_mc_variance_se: its normal theory standard error
    mean_scaled_sandwich / median_scaled_sandwich: n·se^2 averaged
    mad_variance: n·MAD(beta)^2 / z_0.75^2
    """

    coefficient: str
    mean_beta: float
    bias: float
    scaled_mc_variance: float
    scaled_mc_variance_se: float
    mean_scaled_sandwich: float
    median_scaled_sandwich: float
    coverage_pct: float
    mad_variance: float


@dataclass(frozen=True)
class ApproachSummary:
    approach: Approach
    convergence_pct: float
    included: int
    coefficients: tuple[CoefficientSummary, ...]

    def coefficient(self, name: str) -> CoefficientSummary:
        for summary in self.coefficients:
            if summary.coefficient == name:
                return summary
        raise KeyError(name)


@dataclass(frozen=True)
class CampaignSummary:
    config: ScenarioConfig
    replications: int
    approaches: dict[Approach, ApproachSummary]

    def get(
        self, approach: Approach | str, coefficient: str = "b1"
    ) -> CoefficientSummary:
        return self.approaches[Approach(approach)].coefficient(coefficient)

    def to_dict(self) -> dict[str, Any]:
        def clean(value: Any) -> Any:
            if isinstance(value, float) and not math.isfinite(value):
                return None
            return value

        return {
            "config": self.config.to_dict(),
            "replications": self.replications,
            "approaches": {
                approach.value: {
                    "convergence_pct": summary.convergence_pct,
                    "included": summary.included,
                    "coefficients": {
                        c.coefficient: {
                            key: clean(value)
                            for key, value in asdict(c).items()
                            if key != "coefficient"
                        }
                        for c in summary.coefficients
                    },
                }
                for approach, summary in self.approaches.items()
            },
        }


def _summarize_coefficient(  # noqa: PLR0913
    name: str,
    betas: np.ndarray,
    ses: np.ndarray,
    covers: np.ndarray | None,
    truth: float | None,
    n: int,
) -> CoefficientSummary:
    count = len(betas)
    nan = float("nan")
    if count == 0:
        return CoefficientSummary(name, nan, nan, nan, nan, nan, nan, nan, nan)

    variance = float(np.var(betas, ddof=1)) if count > 1 else nan
    scaled = n * variance
    variance_se = scaled * math.sqrt(2 / (count - 1)) if count > 1 else nan
    sandwich_scaled = n * ses**2
    mad = float(np.median(np.abs(betas - np.median(betas))))
    z = normal_quantile(0.75)

    return CoefficientSummary(
        coefficient=name,
        mean_beta=float(np.mean(betas)),
        bias=float(np.mean(betas) - truth) if truth is not None else nan,
        scaled_mc_variance=scaled,
        scaled_mc_variance_se=variance_se,
        mean_scaled_sandwich=float(np.mean(sandwich_scaled)),
        median_scaled_sandwich=float(np.median(sandwich_scaled)),
        coverage_pct=100 * float(np.mean(covers)) if covers is not None else nan,
        mad_variance=n * mad**2 / z**2,
    )


def summarize(
    config: ScenarioConfig, results: list[ReplicationResult]
) -> CampaignSummary:
    """
    Aggregate replications in rep_index order. With joint convergence only
    replications where all censored approaches converged are kept, for every
    approach including the uncensored reference.
    """
    results = sorted(results, key=lambda r: r.rep_index)
    total = len(results)
    truth = config.truth
    n = config.sample_size
    joint = np.array([r.all_converged() for r in results], dtype=bool)

    approaches = {}
    for approach in APPROACHES:
        estimates = [r.estimates[approach] for r in results]
        converged = np.array([e.converged for e in estimates], dtype=bool)
        include = converged & joint if config.joint_convergence else converged
        kept = [e for e, keep in zip(estimates, include, strict=True) if keep]

        betas = np.array([e.beta for e in kept]).reshape(-1, config.model.p)
        ses = np.array([e.se for e in kept]).reshape(-1, config.model.p)
        covers = (
            np.array([e.covers for e in kept]).reshape(-1, config.model.p)
            if truth is not None
            else None
        )

        coefficients = tuple(
            _summarize_coefficient(
                name,
                betas[:, j],
                ses[:, j],
                covers[:, j] if covers is not None else None,
                float(truth[j]) if truth is not None else None,
                n,
            )
            for j, name in enumerate(config.coefficients)
        )
        approaches[approach] = ApproachSummary(
            approach=approach,
            convergence_pct=100 * float(np.mean(converged)) if total else float("nan"),
            included=len(kept),
            coefficients=coefficients,
        )

    return CampaignSummary(config=config, replications=total, approaches=approaches)


async def gather_replications(
    config: ScenarioConfig,
    workers: int = 1,
    on_done: Callable[[], None] | None = None,
) -> list[ReplicationResult]:
    """
    Run all replications of ``config``; with more than one worker they are
    spread over a process pool. The result list is in rep_index order.
    """
    loop = asyncio.get_running_loop()

    if workers <= 1:
        results = []
        for rep_index in range(config.replications):
            results.append(run_replication(config, rep_index))
            if on_done:
                on_done()
        return results

    semaphore = asyncio.Semaphore(workers)
    with ProcessPoolExecutor(max_workers=workers) as pool:

        async def replicate(rep_index: int) -> ReplicationResult:
            async with semaphore:
                result = await loop.run_in_executor(
                    pool, run_replication, config, rep_index
                )
            if on_done:
                on_done()
            return result

        return await asyncio.gather(
            *[replicate(rep_index) for rep_index in range(config.replications)]
        )


def run_campaign(config: ScenarioConfig, workers: int = 1) -> CampaignSummary:
    results = asyncio.run(gather_replications(config, workers))
    summary = summarize(config, results)
    logger.info(
        "%s: %d replications, convergence %s",
        config.label(),
        summary.replications,
        ", ".join(
            f"{a.value}={s.convergence_pct:.1f}%" for a, s in summary.approaches.items()
        ),
    )
    return summary
