"""
Asymptotic variances of the three approaches in the two-group uniform example.

Setting: X ~ Bernoulli(1/2), P(T <= u | X=1) = p·u, P(T <= u | X=0) = q·u,
Y = 1{T <= 1}, mu(beta; X) = beta_0 + beta_1 X with A = (1, X), no strata,
and censoring at the single time s with probability 1/2. Then

    Sigma_type  = Sigma + Phi_type(s) S(s)
    Sigma'_type = Sigma + Phi'_type(s) S(s)

with Phi_type(s) = Var(phi_type | T > s), Phi'_type(s) = E(phi_type phi_type^T | T > s)
and the influence terms

    phi_ind = B(X)(Y - mu(X)),  phi_out = B(X) Y,  phi_pse = B(X)(Y - E(Y | T > s))

where B(X) = J^-1 (1, X). Conditional moments are computed by enumerating the
four (X, Y) cells given T > s.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from .exceptions import ConfigError, UnsupportedContrast

J_INV = np.array([[2.0, -2.0], [-2.0, 4.0]])

SLOPE = (0.0, 1.0)
INTERCEPT = (1.0, 0.0)
CONTRASTS = {"b1": SLOPE, "b0": INTERCEPT}

TYPES = ("ind", "out", "pse")


@dataclass(frozen=True)
class ExampleParams:
    p: float
    q: float
    s: float
    a: tuple[float, float] = SLOPE

    def __post_init__(self) -> None:
        for name in ("p", "q", "s"):
            value = getattr(self, name)
            if not 0 < value < 1:
                msg = f"{name} must lie in (0, 1), got {value}"
                raise ConfigError(msg)
        if len(self.a) != 2:  # noqa: PLR2004
            msg = f"contrast must have length 2, got {self.a}"
            raise ConfigError(msg)


class Moments(NamedTuple):
    f1: float
    f2: float
    f3: float
    f4: float


class PhiDifferences(NamedTuple):
    d_pse_out: float
    d_ind_out: float
    d_pse_ind: float


@dataclass(frozen=True)
class OracleReport:
    contrast: tuple[float, float]
    f1: float
    f2: float
    f3: float
    f4: float
    J_inv: list[list[float]]  # noqa: N815
    phi_ind: float
    phi_out: float
    phi_pse: float
    phi_lower: float
    phi_prime_ind: float
    phi_prime_out: float
    phi_prime_pse: float
    S_s: float  # noqa: N815
    sigma_uncensored: float
    sigma_type: dict[str, float]
    sigma_prime_type: dict[str, float]

    def to_dict(self) -> dict:
        return asdict(self)


def _denominator(p: float, q: float, s: float) -> float:
    return 2 - p * s - q * s


def moments(p: float, q: float, s: float) -> Moments:
    """
    f1 = E(Y | T>s), f2 = Cov(Y, X | T>s), f3 = Cov(YX, X | T>s), f4 = Var(X | T>s)
    """
    d = _denominator(p, q, s)
    f1 = (p + q) * (1 - s) / d
    f2 = (p * (1 - s) / (1 - p * s) - f1) * (1 - p * s) / d
    f3 = p * (1 - s) / d * (1 - q * s) / d
    f4 = (1 - p * s) / d * (1 - q * s) / d
    return Moments(f1, f2, f3, f4)


def survival(p: float, q: float, s: float) -> float:
    """S(s) = P(T > s)."""
    return _denominator(p, q, s) / 2


def _cells(p: float, q: float, s: float) -> list[tuple[int, int, float]]:
    """(x, y, P(X=x, Y=y | T > s)) for the four cells."""
    d = _denominator(p, q, s)
    return [
        (1, 1, p * (1 - s) / d),
        (1, 0, (1 - p) / d),
        (0, 1, q * (1 - s) / d),
        (0, 0, (1 - q) / d),
    ]


def _influence_moments(
    cells: list[tuple[int, int, float]], centre: dict[int, float]
) -> tuple[np.ndarray, np.ndarray]:
    """
    Conditional mean and raw second moment of B(X)(Y - centre[X]).
    """
    mean = np.zeros(2)
    raw = np.zeros((2, 2))
    for x, y, probability in cells:
        value = J_INV @ np.array([1.0, x]) * (y - centre[x])
        mean += probability * value
        raw += probability * np.outer(value, value)
    return mean, raw


def _contract(matrix: np.ndarray, a: np.ndarray) -> float:
    return float(a @ matrix @ a)


def sigma_report(params: ExampleParams) -> OracleReport:
    p, q, s = params.p, params.q, params.s
    a = np.asarray(params.a, dtype=float)
    f = moments(p, q, s)
    cells = _cells(p, q, s)
    model_mean = {0: q, 1: p}

    # uncensored variance: enumeration at s = 0, where phi_ind has mean zero
    mean, raw = _influence_moments(_cells(p, q, 0.0), model_mean)
    sigma = raw - np.outer(mean, mean)

    centres = {
        "ind": model_mean,
        "out": {0: 0.0, 1: 0.0},
        "pse": {0: f.f1, 1: f.f1},
        "lower": {
            0: q * (1 - s) / (1 - q * s),
            1: p * (1 - s) / (1 - p * s),
        },
    }
    phi = {}
    phi_prime = {}
    for name, centre in centres.items():
        mean, raw = _influence_moments(cells, centre)
        phi[name] = _contract(raw - np.outer(mean, mean), a)
        phi_prime[name] = _contract(raw, a)

    s_s = survival(p, q, s)
    sigma_uncensored = _contract(sigma, a)

    return OracleReport(
        contrast=(float(a[0]), float(a[1])),
        f1=f.f1,
        f2=f.f2,
        f3=f.f3,
        f4=f.f4,
        J_inv=J_INV.tolist(),
        phi_ind=phi["ind"],
        phi_out=phi["out"],
        phi_pse=phi["pse"],
        phi_lower=phi["lower"],
        phi_prime_ind=phi_prime["ind"],
        phi_prime_out=phi_prime["out"],
        phi_prime_pse=phi_prime["pse"],
        S_s=s_s,
        sigma_uncensored=sigma_uncensored,
        sigma_type={name: sigma_uncensored + phi[name] * s_s for name in TYPES},
        sigma_prime_type={
            name: sigma_uncensored + phi_prime[name] * s_s for name in TYPES
        },
    )


def phi_differences(params: ExampleParams) -> PhiDifferences:
    """
    Closed forms of a^T (Phi_pse - Phi_out) a and a^T (Phi_ind - Phi_out) a for
    the slope contrast (0, 1) and the intercept contrast (1, 0).
    """
    p, q = params.p, params.q
    f1, f2, f3, f4 = moments(p, q, params.s)
    contrast = tuple(float(v) for v in params.a)

    if contrast == SLOPE:
        d_pse_out = 16 * f1 * (f1 * f4 - 2 * f3 + f2)
        d_ind_out = 4 * (p + q) ** 2 * f4 - 16 * (p + q) * f3 + 8 * (p + q) * f2
    elif contrast == INTERCEPT:
        d_pse_out = 4 * f1 * (f1 * f4 - 2 * f3 + 2 * f2)
        d_ind_out = 4 * q * (q * f4 - 2 * f3 + 2 * f2)
    else:
        raise UnsupportedContrast(contrast)

    return PhiDifferences(d_pse_out, d_ind_out, d_pse_out - d_ind_out)


def slope_ind_out_thresholds(p: float, q: float) -> tuple[float, float]:
    """
    For the slope, ind beats out below the smaller and loses above the larger.
    """
    low, high = sorted((1 / (2 - p), 1 / (2 - q)))
    return low, high


def intercept_pse_out_threshold(p: float, q: float) -> float:
    """For the intercept, pse beats out exactly when s is below this value."""
    return (3 * q - p) / (q * (p + q))


def intercept_ind_out_threshold(q: float) -> float:
    """For the intercept, ind beats out exactly when s is below this value."""
    return 1 / (2 - q)
