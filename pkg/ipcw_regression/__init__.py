from __future__ import annotations

import asyncio
import functools
import logging
import pathlib
import sys
from importlib import metadata
from typing import TYPE_CHECKING, Any

import numpy as np
import rich_click as click
from rich.console import Console
from rich.logging import RichHandler

from .asymptotics import CONTRASTS, ExampleParams, phi_differences, sigma_report
from .campaign import CampaignRunner
from .censoring import fit_censoring
from .dataio import format_number, read_table, write_csv, write_json, write_pseudo
from .datastructures import (
    FitOptions,
    GlobalOptions,
    OutcomeKind,
    OutcomeSpec,
    PseudoOptions,
    SimulateOptions,
)
from .exceptions import IPCWError, UnsupportedContrast
from .glm import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    AChoice,
    Approach,
    Link,
    ModelSpec,
    Responses,
    prepare_responses,
    solve_equation,
)
from .pseudo import pseudo_observations
from .simulate import Scenario, default_grid, load_configs, override
from .variance import sandwich, wald_ci

if TYPE_CHECKING:
    from collections.abc import Callable
    from typing import IO

__version__ = metadata.version("ipcw-regression")

click.rich_click.USE_RICH_MARKUP = True

logger = logging.getLogger(__name__)


class SimpleIntRange(click.IntRange):
    """
    Simplify the display of ranges
    """

    name = "INT"

    def _describe_range(self) -> str:
        if self.min is None:
            op = "<" if self.max_open else "<="
            return f"{op}{self.max}"
        if self.max is None:
            op = ">" if self.min_open else ">="
            return f"{op}{self.min}"
        return f"{self.min} to {self.max}"


class SimpleFloatRange(click.FloatRange):
    """
    Simplify the display of ranges
    """

    name = "FLOAT"

    def _describe_range(self) -> str:
        if self.min is None:
            op = "<" if self.max_open else "<="
            return f"{op}{self.max}"
        if self.max is None:
            op = ">" if self.min_open else ">="
            return f"{op}{self.min}"
        lower = "(" if self.min_open else "["
        upper = ")" if self.max_open else "]"
        return f"{lower}{self.min}, {self.max}{upper}"


class ContrastParamType(click.ParamType):
    """
    A contrast vector: 'b1' for the slope, 'b0' for the intercept, or 'a0,a1'.
    """

    name = "b1|b0|a0,a1"

    def convert(
        self,
        value: Any,
        param: click.ParamType,  # noqa: ARG002: Unused argument
        ctx: click.Context,  # noqa: ARG002: Unused argument
    ) -> tuple[float, float]:
        if isinstance(value, tuple):
            return value
        if value in CONTRASTS:
            return CONTRASTS[value]
        try:
            a0, a1 = (float(v) for v in value.split(","))
        except ValueError:
            self.fail(f"{value} is not b1, b0 or two comma separated numbers")
        return a0, a1


class ColumnListParamType(click.ParamType):
    """
    Comma separated covariate column names, like 'x1,x3'.
    """

    name = "COLUMNS"

    def convert(
        self,
        value: Any,
        param: click.ParamType,  # noqa: ARG002: Unused argument
        ctx: click.Context,  # noqa: ARG002: Unused argument
    ) -> tuple[str, ...]:
        if isinstance(value, tuple):
            return value
        names = tuple(name.strip() for name in value.split(",") if name.strip())
        if not names:
            self.fail(f"{value!r} names no columns")
        return names


def configure_logging(verbose: int) -> None:
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbose, logging.DEBUG)
    logging.basicConfig(
        level=level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )


def error(msg: str, exit_code: int | None = None) -> None:
    """
    Display an error message and optionally exit the program.

    :param msg: The error message to display.
    :param exit_code: Exit with this code after displaying the message.
                      Default is None, which does not exit.
    :return: None
    """
    sys.stderr.write(f"❌ {msg}\n")
    if exit_code is not None:
        sys.exit(exit_code)


def reports_errors(func: Callable[..., None]) -> Callable[..., None]:
    """
    Turn errors of the computation into a message and the error's exit code.
    """

    @functools.wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> None:
        try:
            func(*args, **kwargs)
        except IPCWError as e:
            error(str(e), exit_code=e.exit_code)
        except KeyboardInterrupt:
            pass

    return wrapper


def strata_options(func: Callable[..., None]) -> Callable[..., None]:
    decorators = [
        click.option(
            "--strata-col",
            type=str,
            default=None,
            envvar="IPCW_STRATA_COL",
            help="CSV column with integer stratum labels 0..k-1.",
        ),
        click.option(
            "--strata-k",
            type=SimpleIntRange(min=1),
            default=None,
            envvar="IPCW_STRATA_K",
            help="Quantize the covariate given by --strata-on into this many strata.",
        ),
        click.option(
            "--strata-on",
            type=str,
            default=None,
            envvar="IPCW_STRATA_ON",
            help="Covariate column quantized by --strata-k. [dim]Example: x2[/]",
        ),
        click.option(
            "--strata-factors",
            type=ColumnListParamType(),
            default=None,
            envvar="IPCW_STRATA_FACTORS",
            help="Binary covariates whose combinations form the strata. "
            "[dim]Example: x1,x3[/]",
        ),
    ]
    for decorator in reversed(decorators):
        func = decorator(func)
    return func


def outcome_options(func: Callable[..., None]) -> Callable[..., None]:
    decorators = [
        click.option(
            "--csv",
            type=click.Path(exists=True, dir_okay=False, path_type=pathlib.Path),
            required=True,
            envvar="IPCW_CSV",
            help="Dataset with columns time, status, x1..xp and optionally z.",
        ),
        click.option(
            "-t",
            "--time-point",
            type=SimpleFloatRange(min=0, min_open=True),
            required=True,
            envvar="IPCW_TIME_POINT",
            help="Horizon t at which the outcome is evaluated.",
        ),
        click.option(
            "--outcome",
            type=click.Choice([kind.value for kind in OutcomeKind]),
            default=OutcomeKind.SURVIVAL.value,
            envvar="IPCW_OUTCOME",
            help="survival: 1{T > t}, cause: 1{T <= t, cause j}, "
            "restricted: min(T, t), lost: (t - T) 1{T <= t, cause j}.",
        ),
        click.option(
            "--cause",
            type=SimpleIntRange(min=1),
            default=1,
            envvar="IPCW_CAUSE",
            help="Cause j for the cause and lost outcomes.",
        ),
        click.option(
            "--intercept/--no-intercept",
            type=bool,
            default=True,
            envvar="IPCW_INTERCEPT",
            help="Prepend an intercept column to the covariates.",
        ),
    ]
    for decorator in reversed(decorators):
        func = decorator(func)
    return func


def stratification(options: FitOptions | PseudoOptions) -> dict[str, Any]:
    given = [
        flag
        for flag, value in (
            ("--strata-col", options.strata_col),
            ("--strata-k", options.strata_k),
            ("--strata-factors", options.strata_factors),
        )
        if value is not None
    ]
    if len(given) > 1:
        msg = f"{' and '.join(given)} are mutually exclusive"
        raise click.UsageError(msg)
    if (options.strata_k is None) != (options.strata_on is None):
        msg = "--strata-k and --strata-on must be given together"
        raise click.UsageError(msg)
    return {
        "strata_col": options.strata_col,
        "strata_k": options.strata_k,
        "strata_on": options.strata_on,
        "strata_factors": options.strata_factors,
    }


def output_stream() -> IO[str]:
    return click.get_text_stream("stdout")


@click.group(
    name="ipcw-regression",
    context_settings={"show_default": True},
    no_args_is_help=True,
)
@click.option(
    "--seed",
    type=SimpleIntRange(min=0),
    default=None,
    envvar="IPCW_SEED",
    help="Seed of the simulation streams. Overrides the seed of every configuration.",
)
@click.option(
    "--threads",
    type=SimpleIntRange(min=1),
    default=1,
    envvar="IPCW_THREADS",
    help="Number of workers for simulation replications and pseudo-observations.",
)
@click.option(
    "--format",
    type=click.Choice(["json", "csv"]),
    default=None,
    envvar="IPCW_FORMAT",
    help="Format of results written to stdout. "
    "[dim]Default: csv for pseudo, json otherwise[/]",
)
@click.option(
    "-v",
    "--verbose",
    count=True,
    help="Log progress (-v) or solver iterations (-vv) to stderr.",
)
@click.version_option(
    __version__,
    "--version",
    prog_name="ipcw-regression",
)
@click.pass_context
def main(ctx: click.Context, **kwargs: Any) -> None:
    """
    Regression of event-time outcomes under right censoring with inverse
    probability of censoring weights.
    """
    options = GlobalOptions(**kwargs)
    configure_logging(options.verbose)
    ctx.obj = options


@main.command(no_args_is_help=True)
@outcome_options
@click.option(
    "--approach",
    type=click.Choice([approach.value for approach in Approach]),
    default=Approach.PSE.value,
    envvar="IPCW_APPROACH",
    help="ind: weight each record, out: weight the outcome, pse: pseudo-observations, "
    "uncensored: plain regression without censoring.",
)
@click.option(
    "--link",
    type=click.Choice([link.value for link in Link]),
    default=Link.IDENTITY.value,
    envvar="IPCW_LINK",
    help="Inverse link mu(beta; x).",
)
@click.option(
    "--a",
    "a",
    type=click.Choice([choice.value for choice in AChoice]),
    default=AChoice.COVARIATE.value,
    envvar="IPCW_A",
    help="covariate: A = x, gaussian: A = d mu / d beta.",
)
@click.option(
    "--response",
    type=str,
    default=None,
    envvar="IPCW_RESPONSE",
    help="Regress this CSV column directly. Requires --approach uncensored.",
)
@click.option(
    "--max-iter",
    type=SimpleIntRange(min=1),
    default=DEFAULT_MAX_ITER,
    envvar="IPCW_MAX_ITER",
    help="Maximum number of Newton iterations.",
)
@click.option(
    "--tol",
    type=SimpleFloatRange(min=0, min_open=True),
    default=DEFAULT_TOL,
    envvar="IPCW_TOL",
    help="Convergence tolerance on max |U(beta)| / n.",
)
@click.option(
    "--dump-censoring",
    type=click.Path(file_okay=True, dir_okay=False, path_type=pathlib.Path),
    required=False,
    envvar="IPCW_DUMP_CENSORING",
    help="Write the per-stratum censoring curves as JSON. "
    "[dim]Example: ./censoring.json[/]",
)
@strata_options
@click.pass_obj
@reports_errors
def fit(global_options: GlobalOptions, **kwargs: Any) -> None:
    """
    Fit a censoring weighted regression to a CSV dataset.
    """
    options = FitOptions(**kwargs)
    strata = stratification(options)
    approach = Approach(options.approach)
    if options.response and approach is not Approach.UNCENSORED:
        msg = "--response requires --approach uncensored"
        raise click.UsageError(msg)

    table = read_table(options.csv)
    outcome = OutcomeSpec(
        OutcomeKind(options.outcome), options.time_point, options.cause
    )
    dataset = table.to_dataset(outcome, options.intercept, **strata)
    model = ModelSpec(Link(options.link), AChoice(options.a), dataset.p)

    censoring = None
    if approach is not Approach.UNCENSORED or options.dump_censoring:
        censoring = fit_censoring(dataset)

    if options.response:
        responses = Responses(
            approach, table.column(options.response), np.ones(dataset.n)
        )
    else:
        responses = prepare_responses(
            approach, dataset, censoring, workers=global_options.threads
        )

    if options.dump_censoring:
        options.dump_censoring.parent.mkdir(parents=True, exist_ok=True)
        with options.dump_censoring.open("w") as stream:
            write_json(stream, censoring.to_dict())

    result = solve_equation(
        model, dataset.covariates, responses, max_iter=options.max_iter, tol=options.tol
    )
    names = table.design_names(options.intercept)

    estimate = None
    intervals = []
    if result.converged:
        estimate = sandwich(result)
        intervals = wald_ci(result, estimate)
    else:
        logger.warning(
            "%s fit did not converge in %d iterations", approach.value, options.max_iter
        )

    if global_options.format == "csv":
        write_csv(
            output_stream(),
            ["coefficient", "beta", "se", "ci95_lower", "ci95_upper"],
            (
                [
                    name,
                    float(beta),
                    float(estimate.se_beta[j]) if estimate else None,
                    intervals[j].lower if intervals else None,
                    intervals[j].upper if intervals else None,
                ]
                for j, (name, beta) in enumerate(zip(names, result.beta, strict=True))
            ),
        )
        return

    write_json(
        output_stream(),
        {
            "approach": approach.value,
            "link": options.link,
            "a": options.a,
            "time_point": options.time_point,
            "outcome": options.outcome,
            "n": dataset.n,
            "strata": dataset.stratum_count,
            "coefficients": names,
            "beta": result.beta,
            "se": estimate.se_beta if estimate else None,
            "ci95": [[ci.lower, ci.upper] for ci in intervals] if intervals else None,
            "cov": estimate.covariance if estimate else None,
            "converged": result.converged,
            "iterations": result.iterations,
            "score_norm": result.score_norm,
        },
    )


@main.command(no_args_is_help=True)
@outcome_options
@click.option(
    "-o",
    "--out",
    type=click.Path(file_okay=True, dir_okay=False, path_type=pathlib.Path),
    required=False,
    envvar="IPCW_OUT",
    help="Write the dataset with a pseudo_y column here instead of stdout. "
    "[dim]Example: ./pseudo.csv[/]",
)
@strata_options
@click.pass_obj
@reports_errors
def pseudo(global_options: GlobalOptions, **kwargs: Any) -> None:
    """
    Compute jack-knife pseudo-observations of the weighted mean outcome.
    """
    options = PseudoOptions(**kwargs)
    strata = stratification(options)

    table = read_table(options.csv)
    outcome = OutcomeSpec(
        OutcomeKind(options.outcome), options.time_point, options.cause
    )
    dataset = table.to_dataset(outcome, options.intercept, **strata)
    result = pseudo_observations(
        dataset, fit_censoring(dataset), workers=global_options.threads
    )
    logger.info(
        "theta_hat = %s over %d records", format_number(result.theta_hat), dataset.n
    )

    out = options.out
    output_format = global_options.format_or("csv")
    as_json = out.suffix == ".json" if out else output_format == "json"
    if out:
        out.parent.mkdir(parents=True, exist_ok=True)
    with click.open_file(str(out) if out else "-", "w") as stream:
        if as_json:
            write_json(
                stream,
                {
                    "theta_hat": result.theta_hat,
                    "pseudo_y": result.values,
                    "leave_one_out": result.leave_one_out,
                },
            )
        else:
            write_pseudo(stream, table, result.values)


@main.command(no_args_is_help=True)
@click.option(
    "--p",
    type=SimpleFloatRange(min=0, max=1, min_open=True, max_open=True),
    required=True,
    envvar="IPCW_P",
    help="P(T <= 1 | X = 1).",
)
@click.option(
    "--q",
    type=SimpleFloatRange(min=0, max=1, min_open=True, max_open=True),
    required=True,
    envvar="IPCW_Q",
    help="P(T <= 1 | X = 0).",
)
@click.option(
    "--s",
    type=SimpleFloatRange(min=0, max=1, min_open=True, max_open=True),
    required=True,
    envvar="IPCW_S",
    help="Censoring time, hit with probability 1/2.",
)
@click.option(
    "--contrast",
    type=ContrastParamType(),
    default="b1",
    envvar="IPCW_CONTRAST",
    help="Contrast a of the coefficients (a^T beta).",
)
@click.pass_obj
@reports_errors
def asymptotics(
    global_options: GlobalOptions,
    p: float,
    q: float,
    s: float,
    contrast: tuple[float, float],
) -> None:
    """
    Exact asymptotic variances in the two-group example with censoring at s.
    """
    params = ExampleParams(p=p, q=q, s=s, a=contrast)
    payload = sigma_report(params).to_dict()
    try:
        payload["phi_differences"] = phi_differences(params)._asdict()
    except UnsupportedContrast as e:
        logger.info("%s", e)
        payload["phi_differences"] = None

    if global_options.format == "csv":
        rows = []
        for key, value in payload.items():
            if isinstance(value, dict):
                rows.extend([f"{key}_{name}", v] for name, v in value.items())
            elif key in ("J_inv", "contrast"):
                flat = " ".join(format_number(float(v)) for v in np.ravel(value))
                rows.append([key, flat])
            else:
                rows.append([key, value])
        write_csv(output_stream(), ["quantity", "value"], rows)
        return

    write_json(output_stream(), payload)


@main.command(no_args_is_help=True)
@click.option(
    "--scenario",
    type=click.Choice(["1", "2", "3"]),
    required=True,
    envvar="IPCW_SCENARIO",
    help="1: two groups, 2: Weibull with stratification, 3: 32 binary patterns.",
)
@click.option(
    "--config",
    type=click.Path(exists=True, dir_okay=False, path_type=pathlib.Path),
    required=False,
    envvar="IPCW_CONFIG",
    help="JSON configuration, one object or a list. Without it the full grid "
    "of the scenario is run. [dim]See docs/config.md[/]",
)
@click.option(
    "--reps",
    type=SimpleIntRange(min=1),
    default=None,
    envvar="IPCW_REPS",
    help="Replications per configuration. Overrides the configuration.",
)
@click.option(
    "--seed",
    type=SimpleIntRange(min=0),
    default=None,
    envvar="IPCW_SEED",
    help="Same as the group --seed.",
)
@click.option(
    "-o",
    "--out",
    type=click.Path(file_okay=True, dir_okay=False, path_type=pathlib.Path),
    required=False,
    envvar="IPCW_OUT",
    help="Write the report here (JSON for a .json file, CSV otherwise). "
    "[dim]Example: ./results.csv[/]",
)
@click.option(
    "--figure-data",
    type=click.Path(file_okay=True, dir_okay=False, path_type=pathlib.Path),
    required=False,
    envvar="IPCW_FIGURE_DATA",
    help="Write every metric in long CSV format for plotting.",
)
@click.pass_obj
@reports_errors
def simulate(global_options: GlobalOptions, **kwargs: Any) -> None:
    """
    Run a seeded Monte Carlo campaign and report variances, coverage and
    convergence of the approaches.
    """
    options = SimulateOptions(
        **kwargs,
        threads=global_options.threads,
        format=global_options.format_or("json"),
    )
    if options.seed is None:
        options.seed = global_options.seed

    scenario = Scenario.from_number(options.scenario)
    if options.config:
        configs = load_configs(options.config, scenario, options.seed, options.reps)
    else:
        configs = [
            override(config, options.seed, options.reps)
            for config in default_grid(scenario)
        ]

    runner = CampaignRunner(options=options, configs=configs)
    asyncio.run(runner.run())


if __name__ == "__main__":
    main()
