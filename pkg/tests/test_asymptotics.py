"""
Test the exact asymptotic variances of the two-group example.
"""

import itertools

import numpy as np
import pytest

from ipcw_regression.asymptotics import (
    INTERCEPT,
    J_INV,
    SLOPE,
    TYPES,
    ExampleParams,
    intercept_ind_out_threshold,
    intercept_pse_out_threshold,
    moments,
    phi_differences,
    sigma_report,
    slope_ind_out_thresholds,
    survival,
)
from ipcw_regression.exceptions import ConfigError, UnsupportedContrast

GRID_VALUES = np.round(np.arange(0.05, 1.0, 0.1), 2)
GRID = [
    (float(p), float(q), float(s))
    for p, q, s in itertools.product(GRID_VALUES, GRID_VALUES, np.arange(0.1, 1.0, 0.1))
]
MARGIN = 1e-6


def test_grid_is_large_enough() -> None:
    """
    The sign checks run over at least 500 parameter points.
    """
    assert len(GRID) >= 500  # noqa: PLR2004


def test_moments() -> None:
    """
    f1 = 0.2 at p = 1/2, q = 1/6, s = 1/2.
    """
    f = moments(0.5, 1 / 6, 0.5)
    assert f.f1 == pytest.approx(0.2)


def test_moments_at_start() -> None:
    """
    At s = 0 the moments are the unconditional ones.
    """
    f = moments(0.6, 0.2, 0.0)

    assert f.f1 == pytest.approx(0.4)
    assert f.f2 == pytest.approx(0.1)
    assert f.f3 == pytest.approx(0.15)
    assert f.f4 == pytest.approx(0.25)


def test_equal_risks_have_no_covariance() -> None:
    """
    When p = q, Y and X are independent given T > s.
    """
    assert moments(0.4, 0.4, 0.7).f2 == pytest.approx(0.0, abs=1e-15)


def test_survival() -> None:
    """
    S(s) = 1 - s (p + q) / 2.
    """
    assert survival(0.5, 1 / 6, 0.5) == pytest.approx(1 - 0.5 / 3)


def test_report_contents() -> None:
    """
    J^-1 and the uncensored variance 7/9 at p = 1/2, q = 1/6.
    """
    report = sigma_report(ExampleParams(0.5, 1 / 6, 0.2))

    assert report.J_inv == J_INV.tolist()
    assert report.sigma_uncensored == pytest.approx(7 / 9)
    assert set(report.sigma_type) == set(TYPES)
    assert report.to_dict()["contrast"] == (0.0, 1.0)


def test_early_censoring_values() -> None:
    """
    s = 0.2: pse and ind about 1.45, out about 1.77.
    """
    report = sigma_report(ExampleParams(0.5, 1 / 6, 0.2))

    assert report.sigma_type["pse"] == pytest.approx(1.452, abs=5e-3)
    assert report.sigma_type["ind"] == pytest.approx(1.459, abs=5e-3)
    assert report.sigma_type["out"] == pytest.approx(1.768, abs=5e-3)


def test_late_censoring_ordering() -> None:
    """
    s = 0.8: pse <= out < ind.
    """
    sigma = sigma_report(ExampleParams(0.5, 1 / 6, 0.8)).sigma_type

    assert sigma["pse"] <= sigma["out"] < sigma["ind"]
    assert sigma["pse"] == pytest.approx(1.009, abs=5e-3)
    assert sigma["out"] == pytest.approx(1.038, abs=5e-3)
    assert sigma["ind"] == pytest.approx(1.160, abs=5e-3)


@pytest.mark.parametrize(("p", "q", "s"), GRID)
def test_variance_identities(p: float, q: float, s: float) -> None:
    """
    Sigma_type - Sigma = Phi_type S(s), Phi' >= Phi and the lower bound holds.
    """
    for a in (SLOPE, INTERCEPT, (0.3, -1.2)):
        report = sigma_report(ExampleParams(p, q, s, a))

        for name in TYPES:
            phi = getattr(report, f"phi_{name}")
            phi_prime = getattr(report, f"phi_prime_{name}")
            assert report.sigma_type[name] - report.sigma_uncensored == pytest.approx(
                phi * report.S_s, abs=1e-12
            )
            assert phi_prime >= phi - 1e-12
            assert report.phi_lower <= phi + 1e-12


@pytest.mark.parametrize(("p", "q", "s"), GRID)
@pytest.mark.parametrize("a", [SLOPE, INTERCEPT])
def test_closed_forms_match_enumeration(
    p: float, q: float, s: float, a: tuple[float, float]
) -> None:
    """
    The closed form differences agree with the cell enumeration.
    """
    params = ExampleParams(p, q, s, a)
    report = sigma_report(params)
    differences = phi_differences(params)

    assert differences.d_pse_out == pytest.approx(
        report.phi_pse - report.phi_out, abs=1e-10
    )
    assert differences.d_ind_out == pytest.approx(
        report.phi_ind - report.phi_out, abs=1e-10
    )
    assert differences.d_pse_ind == pytest.approx(
        report.phi_pse - report.phi_ind, abs=1e-10
    )


@pytest.mark.parametrize(("p", "q", "s"), GRID)
def test_slope_signs(p: float, q: float, s: float) -> None:
    """
    For the slope pse always beats out; ind beats out below both thresholds and
    loses above both.
    """
    differences = phi_differences(ExampleParams(p, q, s, SLOPE))
    low, high = slope_ind_out_thresholds(p, q)

    assert differences.d_pse_out < 0
    if s < low - MARGIN:
        assert differences.d_ind_out < 0
    if s > high + MARGIN:
        assert differences.d_ind_out > 0


@pytest.mark.parametrize(("p", "q", "s"), GRID)
def test_intercept_thresholds(p: float, q: float, s: float) -> None:
    """
    For the intercept the sign of each difference flips at its threshold.
    """
    differences = phi_differences(ExampleParams(p, q, s, INTERCEPT))
    pse_out = intercept_pse_out_threshold(p, q)
    ind_out = intercept_ind_out_threshold(q)

    if abs(s - pse_out) > MARGIN:
        assert (differences.d_pse_out < 0) == (s < pse_out)
    if abs(s - ind_out) > MARGIN:
        assert (differences.d_ind_out < 0) == (s < ind_out)


def test_pse_beats_ind_at_late_censoring() -> None:
    """
    For the slope pse is not worse than ind once censoring happens late.
    """
    for p, q in itertools.product(GRID_VALUES, GRID_VALUES):
        high = slope_ind_out_thresholds(float(p), float(q))[1]
        for s in np.linspace(high + 0.01, 0.99, 5):
            if s < 1:
                differences = phi_differences(ExampleParams(float(p), float(q), s))
                assert differences.d_pse_ind <= 0


@pytest.mark.parametrize("s", [0.05, 0.2, 0.4, 0.54])
def test_ind_beats_pse_for_the_intercept(s: float) -> None:
    """
    p = 1/2, q = 1/6: below 1/(2 - q) ind has the smaller intercept variance.
    """
    assert s < intercept_ind_out_threshold(1 / 6)
    differences = phi_differences(ExampleParams(0.5, 1 / 6, s, INTERCEPT))
    assert differences.d_pse_ind > 0


def test_unsupported_contrast() -> None:
    """
    Only the slope and the intercept have closed forms.
    """
    params = ExampleParams(0.5, 0.2, 0.5, (1.0, 1.0))

    with pytest.raises(UnsupportedContrast):
        phi_differences(params)
    assert sigma_report(params).phi_pse > 0


@pytest.mark.parametrize(
    ("p", "q", "s"),
    [(0.0, 0.5, 0.5), (0.5, 1.0, 0.5), (0.5, 0.5, 0.0), (0.5, 0.5, 1.2)],
)
def test_parameters_in_unit_interval(p: float, q: float, s: float) -> None:
    """
    p, q and s must lie strictly between 0 and 1.
    """
    with pytest.raises(ConfigError, match="must lie in"):
        ExampleParams(p, q, s)
