from __future__ import annotations

import math
import time
from decimal import Decimal
from textwrap import dedent
from typing import IO, TYPE_CHECKING

import click
from rich.console import Console
from rich.table import Table
from rich.text import Text

from .dataio import write_csv, write_json
from .glm import Approach
from .simulate import (
    APPROACHES,
    CENSORED_APPROACHES,
    CampaignSummary,
    Scenario,
    ScenarioConfig,
    gather_replications,
    summarize,
)

if TYPE_CHECKING:
    from .datastructures import SimulateOptions

FOCUS = "b1"

# report columns per scenario
SCENARIO_I_HEADER = [
    "cens",
    "n",
    "var_ind",
    "var_out",
    "var_pse",
    "varhat_ind",
    "varhat_out",
    "varhat_pse",
    "cov_ind",
    "cov_out",
    "cov_pse",
    "var_uncensored",
    "pc_ind",
    "pc_out",
    "pc_pse",
]
SCENARIO_II_HEADER = [
    "k",
    "n",
    "coefficient",
    "mean_ind",
    "mean_out",
    "mean_pse",
    "mean_uncensored",
    "var_ind",
    "var_out",
    "var_pse",
    "var_uncensored",
    "varhat_ind",
    "varhat_out",
    "varhat_pse",
    "pc_ind",
    "pc_out",
    "pc_pse",
]
SCENARIO_III_HEADER = [
    "k",
    "n_per_stratum",
    "pc_ind",
    "pc_out",
    "pc_pse",
    "cov_ind",
    "cov_out",
    "cov_pse",
    "varhat_ind",
    "varhat_out",
    "varhat_pse",
    "var_ind",
    "var_out",
    "var_pse",
]
FIGURE_HEADER = [
    "scenario",
    "configuration",
    "approach",
    "coefficient",
    "metric",
    "value",
]
FIGURE_METRICS = (
    "mean_beta",
    "bias",
    "scaled_mc_variance",
    "scaled_mc_variance_se",
    "mean_scaled_sandwich",
    "median_scaled_sandwich",
    "coverage_pct",
    "mad_variance",
)


def _row_i(summary: CampaignSummary) -> list:
    config = summary.config
    approaches = summary.approaches
    return [
        config.censoring.label,
        config.n,
        *(summary.get(a, FOCUS).scaled_mc_variance for a in CENSORED_APPROACHES),
        *(summary.get(a, FOCUS).mean_scaled_sandwich for a in CENSORED_APPROACHES),
        *(summary.get(a, FOCUS).coverage_pct for a in CENSORED_APPROACHES),
        summary.get(Approach.UNCENSORED, FOCUS).scaled_mc_variance,
        *(approaches[a].convergence_pct for a in CENSORED_APPROACHES),
    ]


def _rows_ii(summary: CampaignSummary) -> list[list]:
    config = summary.config
    rows = []
    for coefficient in config.coefficients[1:]:
        rows.append(
            [
                config.strata_k,
                config.n,
                coefficient,
                *(summary.get(a, coefficient).mean_beta for a in APPROACHES),
                *(summary.get(a, coefficient).scaled_mc_variance for a in APPROACHES),
                *(
                    summary.get(a, coefficient).mean_scaled_sandwich
                    for a in CENSORED_APPROACHES
                ),
                *(summary.approaches[a].convergence_pct for a in CENSORED_APPROACHES),
            ]
        )
    return rows


def _row_iii(summary: CampaignSummary) -> list:
    config = summary.config
    return [
        config.strata_factors,
        config.n,
        *(summary.approaches[a].convergence_pct for a in CENSORED_APPROACHES),
        *(summary.get(a, FOCUS).coverage_pct for a in CENSORED_APPROACHES),
        *(summary.get(a, FOCUS).median_scaled_sandwich for a in CENSORED_APPROACHES),
        *(summary.get(a, FOCUS).mad_variance for a in CENSORED_APPROACHES),
    ]


def report_table(
    scenario: Scenario, summaries: list[CampaignSummary]
) -> tuple[list[str], list[list]]:
    """Header and rows of the campaign report for ``scenario``."""
    if scenario is Scenario.I:
        return SCENARIO_I_HEADER, [_row_i(s) for s in summaries]
    if scenario is Scenario.II:
        return SCENARIO_II_HEADER, [row for s in summaries for row in _rows_ii(s)]
    return SCENARIO_III_HEADER, [_row_iii(s) for s in summaries]


def figure_rows(summaries: list[CampaignSummary]) -> list[list]:
    """Every metric of every configuration in long format."""
    rows = []
    for summary in summaries:
        label = summary.config.label()
        for approach, approach_summary in summary.approaches.items():
            rows.append(
                [
                    summary.config.scenario.value,
                    label,
                    approach.value,
                    "",
                    "convergence_pct",
                    approach_summary.convergence_pct,
                ]
            )
            for coefficient in approach_summary.coefficients:
                rows.extend(
                    [
                        summary.config.scenario.value,
                        label,
                        approach.value,
                        coefficient.coefficient,
                        metric,
                        getattr(coefficient, metric),
                    ]
                    for metric in FIGURE_METRICS
                )
    return rows


class CampaignRunner:
    console: Console
    options: SimulateOptions
    configs: list[ScenarioConfig]
    summaries: list[CampaignSummary]
    total_time: Decimal

    def __init__(self, options: SimulateOptions, configs: list[ScenarioConfig]) -> None:
        self.options = options
        self.configs = configs
        self.summaries = []
        self.total_time = Decimal(0)

    async def run(self) -> list[CampaignSummary]:
        """
        Run every configuration in turn, then write and display the report.
        """
        self.console = Console(stderr=True)

        start = time.time()
        for config in self.configs:
            done = 0

            with self.console.status(
                f"[bold green]{config.label()}: 0/{config.replications} replications",
                spinner="dots2",
            ) as status:

                def progress(config: ScenarioConfig = config) -> None:
                    nonlocal done
                    done += 1
                    status.update(
                        f"[bold green]{config.label()}: "
                        f"{done}/{config.replications} replications"
                    )

                results = await gather_replications(
                    config, self.options.threads, on_done=progress
                )

            summary = summarize(config, results)
            self.summaries.append(summary)
            self.console.print(f":heavy_check_mark: {config.label()}", emoji=True)

        self.total_time = Decimal(time.time() - start)
        self.write_report()
        self.write_figure_data()
        self.show_report()
        return self.summaries

    def write_report(self) -> None:
        """
        Write the report to --out, or to stdout. A ``.json`` file or
        ``--format json`` without a file gives the JSON summaries.
        """
        out = self.options.out
        as_json = out.suffix == ".json" if out else self.options.format == "json"

        if out:
            out = out.expanduser().absolute()
            out.parent.mkdir(parents=True, exist_ok=True)
        with click.open_file(str(out) if out else "-", "w") as stream:
            self._write(stream, as_json=as_json)

    def _write(self, stream: IO[str], as_json: bool) -> None:
        if as_json:
            write_json(stream, [summary.to_dict() for summary in self.summaries])
            return
        header, rows = report_table(self.scenario, self.summaries)
        write_csv(stream, header, rows)

    def write_figure_data(self) -> None:
        if not self.options.figure_data:
            return
        outfile = self.options.figure_data.expanduser().absolute()
        outfile.parent.mkdir(parents=True, exist_ok=True)
        with outfile.open("w", newline="") as stream:
            write_csv(stream, FIGURE_HEADER, figure_rows(self.summaries))

    @property
    def scenario(self) -> Scenario:
        return self.configs[0].scenario

    def show_report(self) -> None:
        """
        Display the report.
        """
        replications = sorted({config.replications for config in self.configs})
        text = Text(
            dedent(
                f"""
                Scenario .......: {self.scenario.value}
                Configurations .: {len(self.configs)}
                Replications ...: {", ".join(str(r) for r in replications)}
                Workers ........: {self.options.threads}
                Total Time .....: {self.total_time:.2f}s
                """,
            ),
        )
        self.console.print(text)

        table = Table(title=f"n·Var({FOCUS}) / coverage %", title_justify="left")
        table.add_column("configuration")
        for approach in APPROACHES:
            table.add_column(approach.value, justify="right")

        for summary in self.summaries:
            cells = []
            for approach in APPROACHES:
                coefficient = summary.get(approach, FOCUS)
                coverage = (
                    f" / {coefficient.coverage_pct:.1f}"
                    if not math.isnan(coefficient.coverage_pct)
                    else ""
                )
                cells.append(f"{coefficient.scaled_mc_variance:.3f}{coverage}")
            table.add_row(summary.config.label(), *cells)
        self.console.print(table)

        if failing := [
            (summary, approach)
            for summary in self.summaries
            for approach, approach_summary in summary.approaches.items()
            if approach_summary.convergence_pct < 100  # noqa: PLR2004
        ]:
            self.console.print(
                ":warning: Non-converged fits:\n",
                style="bold underline",
                highlight=False,
                emoji=True,
            )
            for summary, approach in failing:
                self.console.print(
                    f"{summary.config.label()}, {approach.value}: "
                    f"{summary.approaches[approach].convergence_pct:.1f}% converged"
                )
            self.console.print("")

        if self.options.out:
            self.console.print(
                f":bar_chart: Results are written to "
                f"[magenta underline]{self.options.out}[/]",
                emoji=True,
            )
        if self.options.figure_data:
            self.console.print(
                f":floppy_disk: Figure data is written to "
                f"[magenta underline]{self.options.figure_data}[/]",
                emoji=True,
            )

