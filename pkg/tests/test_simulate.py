"""
Test the simulation scenarios, the replication runner and the summaries.

Monte Carlo acceptance runs are marked slow; run them with ``pytest -m slow``.
"""

import json
import pathlib

import numpy as np
import pytest

from ipcw_regression.asymptotics import ExampleParams, sigma_report
from ipcw_regression.datastructures import OutcomeKind
from ipcw_regression.exceptions import ConfigError
from ipcw_regression.glm import Approach, solve
from ipcw_regression.simulate import (
    EXPONENTIAL,
    POINT_MASS_EARLY,
    POINT_MASS_LATE,
    ApproachEstimate,
    CampaignSummary,
    CensoringLaw,
    ReplicationResult,
    Scenario,
    ScenarioConfig,
    config_from_dict,
    default_grid,
    generate,
    load_configs,
    override,
    replication_rng,
    run_campaign,
    run_replication,
    summarize,
)


def scenario_i(n: int = 50, censoring: CensoringLaw = POINT_MASS_EARLY, **kwargs):
    return ScenarioConfig(Scenario.I, n=n, censoring=censoring, **kwargs)


def distance(summary: CampaignSummary, approach: str, coefficient: str) -> float:
    reference = summary.get(Approach.UNCENSORED, coefficient).mean_beta
    return abs(summary.get(approach, coefficient).mean_beta - reference)


def estimate(approach: Approach, beta: list[float], **kwargs) -> ApproachEstimate:
    return ApproachEstimate(
        approach=approach,
        beta=np.array(beta),
        se=np.array(kwargs.pop("se", [0.1] * len(beta))),
        converged=True,
        **kwargs,
    )


@pytest.mark.parametrize(
    ("value", "expected"),
    [(1, Scenario.I), ("2", Scenario.II), ("III", Scenario.III), (3, Scenario.III)],
)
def test_scenario_from_number(value: int | str, expected: Scenario) -> None:
    """
    Scenarios are given as numbers or roman numerals.
    """
    assert Scenario.from_number(value) is expected


def test_unknown_scenario() -> None:
    """
    Anything else is a configuration error.
    """
    with pytest.raises(ConfigError, match="unknown scenario"):
        Scenario.from_number(4)


@pytest.mark.parametrize(
    ("value", "expected"),
    [
        ("0.2", POINT_MASS_EARLY),
        (0.8, POINT_MASS_LATE),
        ("exp", EXPONENTIAL),
        ({"kind": "point_mass", "s": 0.2}, POINT_MASS_EARLY),
        ({"kind": "exponential", "rate": 1}, EXPONENTIAL),
    ],
)
def test_parse_censoring(value: object, expected: CensoringLaw) -> None:
    """
    Censoring laws come as labels, numbers or objects.
    """
    assert CensoringLaw.parse(value) == expected


@pytest.mark.parametrize(
    ("kwargs", "message"),
    [
        ({"scenario": Scenario.I, "n": 50, "censoring": None}, "0.2, 0.8 or exp"),
        (
            {"scenario": Scenario.I, "n": 50, "censoring": CensoringLaw.parse(0.5)},
            "0.2, 0.8 or exp",
        ),
        ({"scenario": Scenario.II, "n": 50, "strata_k": 3}, "strata_k must be one of"),
        ({"scenario": Scenario.II, "n": 50, "strata_factors": 1}, "only configurable"),
        ({"scenario": Scenario.III, "n": 5, "strata_factors": 2}, "strata_factors"),
        ({"scenario": Scenario.III, "n": 5, "censoring": EXPONENTIAL}, "scenario I"),
        ({"scenario": Scenario.II, "n": 1}, "n must be >= 2"),
        ({"scenario": Scenario.II, "n": 10, "replications": 0}, "replications"),
        ({"scenario": Scenario.II, "n": 10, "seed": -1}, "64-bit"),
    ],
)
def test_config_validation(kwargs: dict, message: str) -> None:
    """
    Values outside the scenario's grid are rejected.
    """
    with pytest.raises(ConfigError, match=message):
        ScenarioConfig(**kwargs)


def test_scenario_properties() -> None:
    """
    Outcome, model, strata and truth follow the scenario.
    """
    first = scenario_i()
    second = ScenarioConfig(Scenario.II, n=100, strata_k=4)
    third = ScenarioConfig(Scenario.III, n=6, strata_factors=3)

    assert first.outcome.kind is OutcomeKind.CAUSE_FAILURE
    assert first.truth == pytest.approx([1 / 6, -1 / 3])
    assert first.coefficients == ("b0", "b1")
    assert second.outcome.kind is OutcomeKind.RESTRICTED_TIME
    assert second.truth is None
    assert second.stratifier.stratum_count == 4  # noqa: PLR2004
    assert third.sample_size == 192  # noqa: PLR2004
    assert third.stratifier.stratum_count == 8  # noqa: PLR2004
    assert third.max_iter == 20  # noqa: PLR2004
    assert third.joint_convergence
    assert third.truth == pytest.approx(np.log([0.1] + [1.25] * 5))


def test_config_from_dict() -> None:
    """
    Defaults fill in missing fields; n_per_stratum is an alias of n.
    """
    config = config_from_dict({"n_per_stratum": 6, "strata_factors": 1}, Scenario.III)

    assert config.n == 6  # noqa: PLR2004
    assert config.replications == 10_000  # noqa: PLR2004
    assert config.seed == 20240101  # noqa: PLR2004
    assert config_from_dict({}, Scenario.I).censoring == POINT_MASS_EARLY


@pytest.mark.parametrize(
    ("data", "message"),
    [
        ({"n": 800, "bins": 3}, "unknown configuration field"),
        ({"n": "800"}, "n must be an integer"),
        ({"scenario": 2}, "not I"),
        ([1, 2], "JSON object"),
    ],
)
def test_config_from_dict_errors(data: object, message: str) -> None:
    """
    Unknown fields, wrong types and foreign scenarios are rejected.
    """
    with pytest.raises(ConfigError, match=message):
        config_from_dict(data, Scenario.I)


def test_load_configs(tmp_path: pathlib.Path) -> None:
    """
    A list of configurations, with seed and replications overridden.
    """
    path = tmp_path / "configs.json"
    path.write_text(json.dumps([{"n": 100, "censoring": "exp"}, {"n": 200}]))

    configs = load_configs(path, Scenario.I, seed=5, replications=7)

    assert [c.n for c in configs] == [100, 200]
    assert [c.censoring.label for c in configs] == ["exp", "0.2"]
    assert {(c.seed, c.replications) for c in configs} == {(5, 7)}


def test_load_configs_errors(tmp_path: pathlib.Path) -> None:
    """
    Unreadable files and empty lists are configuration errors.
    """
    broken = tmp_path / "broken.json"
    broken.write_text("{")
    empty = tmp_path / "empty.json"
    empty.write_text("[]")

    with pytest.raises(ConfigError, match="unable to read"):
        load_configs(broken, Scenario.I)
    with pytest.raises(ConfigError, match="empty list"):
        load_configs(empty, Scenario.I)
    with pytest.raises(ConfigError, match="unable to read"):
        load_configs(tmp_path / "missing.json", Scenario.I)


def test_override_keeps_config_without_values() -> None:
    """
    Nothing changes when no override is given.
    """
    config = scenario_i(seed=3)
    assert override(config) == config


@pytest.mark.parametrize(
    ("scenario", "count"), [(Scenario.I, 15), (Scenario.II, 4), (Scenario.III, 12)]
)
def test_default_grid(scenario: Scenario, count: int) -> None:
    """
    The full grid of every scenario.
    """
    configs = default_grid(scenario, replications=3, seed=1)

    assert len(configs) == count
    assert len(set(configs)) == count
    assert all(c.replications == 3 and c.seed == 1 for c in configs)  # noqa: PLR2004


def test_random_streams_are_keyed() -> None:
    """
    Streams differ per replication and variable and repeat for the same key.
    """
    first = replication_rng(1, 0, "events").random(4)

    np.testing.assert_array_equal(first, replication_rng(1, 0, "events").random(4))
    assert not np.array_equal(first, replication_rng(1, 1, "events").random(4))
    assert not np.array_equal(first, replication_rng(1, 0, "censoring").random(4))
    assert not np.array_equal(first, replication_rng(2, 0, "events").random(4))


def test_generate_is_deterministic() -> None:
    """
    The same configuration and replication index give the same sample.
    """
    config = scenario_i(n=100, censoring=EXPONENTIAL)

    first = generate(config, 4)
    again = generate(config, 4)
    np.testing.assert_array_equal(first.dataset.times, again.dataset.times)
    assert not np.array_equal(first.dataset.times, generate(config, 5).dataset.times)


def test_scenario_i_sample() -> None:
    """
    Equal group sizes, uniform risks and half of the survivors censored at s.
    """
    sample = generate(scenario_i(n=20_000), 0)
    dataset = sample.dataset
    x = dataset.covariates[:, 1]
    late = sample.event_times > 0.2  # noqa: PLR2004
    censored_at_s = (dataset.times == 0.2) & (dataset.statuses == 0)  # noqa: PLR2004

    assert x.mean() == pytest.approx(0.5, abs=3 * np.sqrt(0.25 / 20_000))
    assert sample.true_outcomes[x == 1].mean() == pytest.approx(0.5, abs=0.03)
    assert sample.true_outcomes[x == 0].mean() == pytest.approx(1 / 6, abs=0.02)
    assert censored_at_s[late].mean() == pytest.approx(0.5, abs=0.02)
    assert not censored_at_s[~late].any()


def test_scenario_ii_sample() -> None:
    """
    Four covariate columns, restricted times in (0, 1] and quantized strata.
    """
    sample = generate(ScenarioConfig(Scenario.II, n=1000, strata_k=4), 0)
    dataset = sample.dataset

    assert dataset.p == 4  # noqa: PLR2004
    assert np.all((sample.true_outcomes > 0) & (sample.true_outcomes <= 1))
    assert set(dataset.strata.tolist()) == {0, 1, 2, 3}
    assert dataset.statuses.mean() < 1


def test_scenario_iii_sample() -> None:
    """
    32 patterns of five binary factors; the baseline pattern has risk 0.1.
    """
    sample = generate(ScenarioConfig(Scenario.III, n=4000, strata_factors=3), 0)
    dataset = sample.dataset
    patterns = {tuple(row) for row in dataset.covariates[:, 1:].tolist()}

    assert dataset.n == 32 * 4000  # noqa: PLR2004
    assert len(patterns) == 32  # noqa: PLR2004
    assert dataset.stratum_count == 8  # noqa: PLR2004
    assert np.all(dataset.covariates[:4000, 1:] == 0)
    assert sample.true_outcomes[:4000].mean() == pytest.approx(0.1, abs=0.02)


def test_run_replication() -> None:
    """
    Every approach, including the uncensored reference, gets an estimate.
    """
    result = run_replication(scenario_i(n=200), 0)

    assert set(result.estimates) == set(Approach)
    assert result.all_converged()
    for approach_estimate in result.estimates.values():
        assert approach_estimate.beta.shape == (2,)
        assert approach_estimate.covers.dtype == bool


def test_small_strata_count_as_failures() -> None:
    """
    Numerical problems of a replication never abort the campaign.
    """
    result = run_replication(ScenarioConfig(Scenario.III, n=2, strata_factors=5), 0)

    assert set(result.estimates) == set(Approach)
    for approach_estimate in result.estimates.values():
        if not approach_estimate.converged:
            assert np.all(np.isnan(approach_estimate.beta))


def test_summarize() -> None:
    """
    Mean, bias, variances, coverage and convergence from known estimates.
    """
    config = scenario_i(n=100, replications=4)
    slopes = [0.1, 0.3, 0.5, 0.7]
    covers = [True, True, False, True]
    results = []
    for rep_index, (slope, cover) in enumerate(zip(slopes, covers, strict=True)):
        estimates = {
            approach: estimate(
                approach,
                [0.2, slope],
                se=[0.1, 0.2],
                covers=np.array([True, cover]),
            )
            for approach in Approach
        }
        results.append(ReplicationResult(rep_index, estimates))
    results[2].estimates[Approach.OUT] = ApproachEstimate.failed(Approach.OUT, 2)

    summary = summarize(config, list(reversed(results)))
    pse = summary.get(Approach.PSE)

    assert summary.replications == 4  # noqa: PLR2004
    assert pse.mean_beta == pytest.approx(0.4)
    assert pse.bias == pytest.approx(0.4 + 1 / 3)
    assert pse.scaled_mc_variance == pytest.approx(100 * 0.2 / 3)
    assert pse.scaled_mc_variance_se == pytest.approx(100 * 0.2 / 3 * np.sqrt(2 / 3))
    assert pse.mean_scaled_sandwich == pytest.approx(4.0)
    assert pse.median_scaled_sandwich == pytest.approx(4.0)
    assert pse.coverage_pct == pytest.approx(75.0)
    assert pse.mad_variance == pytest.approx(100 * 0.04 / 0.6744898**2, rel=1e-6)

    out = summary.approaches[Approach.OUT]
    assert out.convergence_pct == pytest.approx(75.0)
    assert out.included == 3  # noqa: PLR2004
    assert out.coefficient("b1").coverage_pct == pytest.approx(100.0)
    assert summary.approaches[Approach.IND].included == 4  # noqa: PLR2004


def test_joint_convergence() -> None:
    """
    Scenario III keeps only replications where all approaches converged.
    """
    config = ScenarioConfig(Scenario.III, n=2, replications=3)
    results = [
        ReplicationResult(
            rep_index,
            {
                approach: estimate(
                    approach, [rep_index] * 6, covers=np.ones(6, dtype=bool)
                )
                for approach in Approach
            },
        )
        for rep_index in range(3)
    ]
    results[1].estimates[Approach.PSE] = ApproachEstimate.failed(Approach.PSE, 6)

    summary = summarize(config, results)

    assert summary.approaches[Approach.IND].included == 2  # noqa: PLR2004
    assert summary.approaches[Approach.IND].convergence_pct == pytest.approx(100.0)
    assert summary.approaches[Approach.PSE].convergence_pct == pytest.approx(200 / 3)
    assert summary.get(Approach.UNCENSORED, "b0").mean_beta == pytest.approx(1.0)


def test_summary_to_dict() -> None:
    """
    Undefined metrics serialize as None.
    """
    config = ScenarioConfig(Scenario.II, n=10, replications=1)
    results = [
        ReplicationResult(
            0, {approach: estimate(approach, [1.0] * 4) for approach in Approach}
        )
    ]

    data = summarize(config, results).to_dict()
    b1 = data["approaches"]["out"]["coefficients"]["b1"]

    assert data["config"]["scenario"] == "II"
    assert b1["mean_beta"] == 1.0
    assert b1["scaled_mc_variance"] is None
    assert b1["bias"] is None
    json.dumps(data)


def test_campaign_does_not_depend_on_workers() -> None:
    """
    Spreading replications over processes gives the identical summary.
    """
    config = scenario_i(n=60, censoring=EXPONENTIAL, replications=6, seed=99)

    assert run_campaign(config, workers=2).to_dict() == run_campaign(config).to_dict()


@pytest.mark.slow()
def test_true_coefficients_are_recovered() -> None:
    """
    At n = 100 000 the weighted fits land on beta_1 = -1/3.
    """
    config = scenario_i(n=100_000, censoring=EXPONENTIAL)
    dataset = generate(config, 0).dataset

    for approach in (Approach.IND, Approach.OUT):
        fit = solve(approach, dataset, config.model)
        assert fit.beta[1] == pytest.approx(-1 / 3, abs=0.02)


REFERENCE_AT_800 = {
    # censoring: ((var ind, out, pse), (coverage ind, out, pse))
    "0.2": ((1.48, 1.81, 1.48), (94.9, 95.4, 95.7)),
    "0.8": ((1.18, 1.05, 1.02), (94.8, 95.0, 94.8)),
    "exp": ((1.62, 1.69, 1.46), (95.0, 95.4, 95.3)),
}


@pytest.mark.slow()
@pytest.mark.parametrize("censoring", ["0.2", "0.8", "exp"])
def test_scenario_i_at_800(censoring: str) -> None:
    """
    Variances and coverage of 2000 replications against 10 000 replication
    reference values; pse has the smallest variance. Point mass censoring is
    also held against the exact asymptotic variances.
    """
    config = scenario_i(
        n=800, censoring=CensoringLaw.parse(censoring), replications=2000
    )
    summary = run_campaign(config, workers=4)
    variances, coverages = REFERENCE_AT_800[censoring]

    for approach, variance, coverage in zip(
        ("ind", "out", "pse"), variances, coverages, strict=True
    ):
        b1 = summary.get(approach)
        assert b1.scaled_mc_variance == pytest.approx(variance, abs=0.10)
        assert b1.coverage_pct == pytest.approx(coverage, abs=1.5)

        if config.censoring != EXPONENTIAL:
            exact = sigma_report(ExampleParams(0.5, 1 / 6, config.censoring.value))
            assert abs(b1.scaled_mc_variance - exact.sigma_type[approach]) <= (
                3 * b1.scaled_mc_variance_se
            )

    pse = summary.get("pse")
    smallest = min(summary.get(a).scaled_mc_variance for a in ("ind", "out"))
    assert pse.scaled_mc_variance <= smallest + 3 * pse.scaled_mc_variance_se


@pytest.mark.slow()
def test_scenario_iii_smoke() -> None:
    """
    12 records per pattern without stratification: all fits converge and the
    intervals cover about 97% of the time.
    """
    config = ScenarioConfig(Scenario.III, n=12, strata_factors=0, replications=1000)
    summary = run_campaign(config, workers=4)

    coverages = {"ind": 96.7, "out": 97.2, "pse": 97.2}
    for approach, coverage in coverages.items():
        convergence = summary.approaches[Approach(approach)].convergence_pct
        assert convergence >= 99.5  # noqa: PLR2004
        assert summary.get(approach).coverage_pct == pytest.approx(coverage, abs=2.0)


@pytest.mark.slow()
def test_scenario_ii_stratification() -> None:
    """
    Finer censoring strata move the mean estimates towards the uncensored fit
    and shrink the variance of the out estimate of b2, while its sandwich
    estimate stays above it.
    """
    coarse, fine = (
        run_campaign(
            ScenarioConfig(Scenario.II, n=1000, strata_k=k, replications=200), 4
        )
        for k in (1, 8)
    )

    assert fine.get("out", "b2").scaled_mc_variance < coarse.get(
        "out", "b2"
    ).scaled_mc_variance
    assert fine.get("out", "b2").mean_scaled_sandwich > fine.get(
        "out", "b2"
    ).scaled_mc_variance

    slopes = ("b1", "b2", "b3")
    for approach in ("ind", "out", "pse"):
        assert sum(distance(fine, approach, c) for c in slopes) < sum(
            distance(coarse, approach, c) for c in slopes
        )
    assert distance(fine, "out", "b2") < distance(coarse, "out", "b2")
