"""Command-line surface: summarize, fit, diagnose, compete and simulate."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

from competing_risks import DEFAULT_CAUSES, CauseSpec, check_disjoint
from config import (
    G_TRANSFORMS,
    LOG_LEVELS,
    TIE_METHODS,
    AnalysisSettings,
    ConfigError,
    get_analysis_settings,
    get_fit_controls,
)
from dataset_io import CovariateRecipe, write_panel
from pipeline import DOMAIN_ERRORS, AnalysisPipeline, AnalysisResult
from reporting import (
    competing_document,
    emit,
    fit_document,
    ph_document,
    render_competing_tsv,
    render_fit_tsv,
    render_ph_tsv,
    render_rejections,
    render_summary_tsv,
    summary_document,
    to_json,
    write_curves,
    write_residuals,
)
from synthgen import (
    ScenarioError,
    generate,
    ground_truth_path,
    inline_scenario,
    load_scenario,
    write_ground_truth,
)

LOGGER = logging.getLogger(__name__)

FIT_TITLE = "Risk-oblivious Cox model"
AUGMENTED_TITLE = "Risk-oblivious Cox model with time interaction terms"


@dataclass(frozen=True)
class RunConfig:
    """One invocation's options, resolved from flags over environment defaults."""

    command: str
    input: Path | None
    output: Path | None
    format: str
    log_level: str
    ties: str = "breslow"
    recipe: Path | None = None
    augment: bool = False
    g_transform: str = "identity"
    alpha: float = 0.05
    residuals_out: Path | None = None
    curve_out: Path | None = None
    causes: tuple[CauseSpec, ...] = DEFAULT_CAUSES
    workers: int = 1
    scenario: Path | None = None
    n_subjects: int | None = None
    baseline_rate: float | None = None
    beta: tuple[float, ...] | None = None
    censor_horizon: float | None = None
    seed: int | None = None
    latent_times: bool = False

    @classmethod
    def from_namespace(cls, args: argparse.Namespace) -> "RunConfig":
        values = {key: value for key, value in vars(args).items() if key in cls.__dataclass_fields__}
        if values.get("causes") is None:
            values.pop("causes", None)
        else:
            values["causes"] = tuple(values["causes"])
        if values.get("beta") is not None:
            values["beta"] = tuple(values["beta"])
        return cls(**values)


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _probability(text: str) -> float:
    value = _positive_float(text)
    if not value < 1:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1), got {text}")
    return value


def _cause(text: str) -> CauseSpec:
    try:
        return CauseSpec.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _beta(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"--beta must be comma-separated numbers, got {text!r}") from None


def build_parser(settings: AnalysisSettings) -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", type=Path, default=None, help="Panel file (.tsv, or .csv for commas)")
    common.add_argument("--output", type=Path, default=None, help="Output path (default: stdout)")
    common.add_argument(
        "--format", choices=("tsv", "structured"), default="tsv", help="TSV tables or a JSON document"
    )
    common.add_argument("--log-level", choices=LOG_LEVELS, default=settings.log_level, type=str.upper)

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--ties", choices=TIE_METHODS, default=settings.ties, help="Tie handling")
    model.add_argument("--recipe", type=Path, default=None, help="Covariate recipe JSON")

    parser = argparse.ArgumentParser(
        prog="survival-engine",
        description="Survival analysis of staged financing panels.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    summarize = commands.add_parser("summarize", parents=[common], help="Descriptive tables")
    summarize.add_argument("--curve-out", type=Path, default=None, help="Write Kaplan-Meier steps as TSV")

    fit = commands.add_parser("fit", parents=[common, model], help="Risk-oblivious Cox fit")
    fit.add_argument(
        "--augment-time-interactions",
        dest="augment",
        action="store_true",
        help="Test proportionality, then refit with the roundNumber and weeksSinceFirst time interactions",
    )
    fit.add_argument("--g", dest="g_transform", choices=G_TRANSFORMS, default=settings.g_transform)
    fit.add_argument("--alpha", type=_probability, default=settings.alpha, help="Flag threshold")

    diagnose = commands.add_parser("diagnose", parents=[common, model], help="Proportional hazards test")
    diagnose.add_argument("--g", dest="g_transform", choices=G_TRANSFORMS, default=settings.g_transform)
    diagnose.add_argument("--residuals-out", type=Path, default=None, help="Write residuals as TSV")
    diagnose.add_argument("--alpha", type=_probability, default=settings.alpha, help="Flag threshold")

    compete = commands.add_parser("compete", parents=[common, model], help="Cause-specific Cox fits")
    compete.add_argument(
        "--cause",
        dest="causes",
        action="append",
        type=_cause,
        default=None,
        help="name=KIND[,KIND...]; repeatable (default: financing=VE, exit=MA,IPO)",
    )
    compete.add_argument("--workers", type=_positive_int, default=settings.workers)

    simulate = commands.add_parser("simulate", parents=[common], help="Generate a synthetic panel")
    simulate.add_argument("--scenario", type=Path, default=None, help="Scenario JSON")
    simulate.add_argument("--n", dest="n_subjects", type=_positive_int, default=None)
    simulate.add_argument("--baseline-rate", type=_positive_float, default=None)
    simulate.add_argument("--beta", type=_beta, default=None, help="Comma-separated coefficients")
    simulate.add_argument("--censor-horizon", type=_positive_float, default=None)
    simulate.add_argument("--seed", type=int, default=None)
    simulate.add_argument("--latent-times", action="store_true", help="Record latent times in the sidecar")
    return parser


def _report_failure(result: AnalysisResult) -> int:
    if result.panel is not None and result.panel.rejections:
        sys.stderr.write(render_rejections(result.panel.rejections))
    print(f"error: {result.error_msg}", file=sys.stderr)
    return 1


def cmd_summarize(config: RunConfig, pipeline: AnalysisPipeline) -> int:
    result = pipeline.summarize(config.input)
    if not result.ok:
        return _report_failure(result)
    if config.format == "structured":
        emit(to_json(summary_document(result.summary)), config.output)
    else:
        emit(render_summary_tsv(result.summary), config.output)
    if config.curve_out is not None:
        write_curves(result.summary.curves, config.curve_out)
    return 0


def cmd_fit(config: RunConfig, pipeline: AnalysisPipeline) -> int:
    result = pipeline.fit(config.input, augment_time_interactions=config.augment)
    if not result.ok:
        return _report_failure(result)
    if config.format == "structured":
        document = {"fit": fit_document(result.fit, FIT_TITLE)}
        if result.augmented_fit is not None:
            document["ph_test"] = ph_document(result.ph_report, config.alpha)
            document["augmented_fit"] = fit_document(result.augmented_fit, AUGMENTED_TITLE)
        emit(to_json(document), config.output)
        return 0
    blocks = [render_fit_tsv(result.fit, FIT_TITLE)]
    if result.augmented_fit is not None:
        blocks.append(render_ph_tsv(result.ph_report, config.alpha))
        blocks.append(render_fit_tsv(result.augmented_fit, AUGMENTED_TITLE))
    emit("\n".join(blocks), config.output)
    return 0


def cmd_diagnose(config: RunConfig, pipeline: AnalysisPipeline) -> int:
    result = pipeline.diagnose(config.input)
    if not result.ok:
        return _report_failure(result)
    if config.format == "structured":
        emit(to_json(ph_document(result.ph_report, config.alpha)), config.output)
    else:
        emit(render_ph_tsv(result.ph_report, config.alpha), config.output)
    if config.residuals_out is not None:
        write_residuals(result.residuals, config.residuals_out)
    flagged = result.ph_report.flagged(config.alpha)
    if flagged:
        LOGGER.warning("Proportional hazards rejected for: %s", ", ".join(flagged))
    return 0


def cmd_compete(config: RunConfig, pipeline: AnalysisPipeline) -> int:
    result = pipeline.compete(config.input, config.causes)
    if not result.ok:
        return _report_failure(result)
    if config.format == "structured":
        emit(to_json(competing_document(result.competing)), config.output)
    else:
        emit(render_competing_tsv(result.competing), config.output)
    failures = result.competing.failures
    for failure in failures:
        print(
            f"error: cause {failure.cause.label} could not be fitted: "
            f"{failure.fit.error_type}: {failure.fit.message}",
            file=sys.stderr,
        )
    return 1 if failures else 0


def cmd_simulate(config: RunConfig) -> int:
    if config.scenario is not None:
        scenario = load_scenario(config.scenario)
    else:
        missing = [
            flag
            for flag, value in (
                ("--n", config.n_subjects),
                ("--baseline-rate", config.baseline_rate),
                ("--beta", config.beta),
                ("--censor-horizon", config.censor_horizon),
                ("--seed", config.seed),
            )
            if value is None
        ]
        if missing:
            raise ScenarioError(f"without --scenario, simulate needs {', '.join(missing)}")
        scenario = inline_scenario(
            config.n_subjects, config.baseline_rate, list(config.beta), config.censor_horizon, config.seed
        )
    if config.latent_times:
        scenario = scenario.model_copy(update={"record_latent_times": True})

    records, truth = generate(scenario)
    write_panel(records, config.output)
    sidecar = write_ground_truth(truth, ground_truth_path(config.output))
    LOGGER.info("Wrote %s and %s", config.output, sidecar)
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    try:
        settings = get_analysis_settings()
        controls = get_fit_controls()
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    parser = build_parser(settings)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    config = RunConfig.from_namespace(args)
    logging.basicConfig(
        level=getattr(logging, config.log_level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )

    usage_error = None
    if config.command == "simulate":
        if config.output is None:
            usage_error = "simulate requires --output"
    elif config.input is None:
        usage_error = f"{config.command} requires --input"
    elif config.command == "compete":
        try:
            check_disjoint(config.causes)
        except ValueError as exc:
            usage_error = str(exc)
    if usage_error is not None:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {usage_error}", file=sys.stderr)
        return 2

    try:
        if config.command == "simulate":
            return cmd_simulate(config)
        recipe = CovariateRecipe.from_json(config.recipe) if config.recipe else None
        pipeline = AnalysisPipeline(
            ties=config.ties,
            controls=controls,
            recipe=recipe,
            g_transform=config.g_transform,
            workers=config.workers,
        )
        handlers: dict[str, Callable[[RunConfig, AnalysisPipeline], int]] = {
            "summarize": cmd_summarize,
            "fit": cmd_fit,
            "diagnose": cmd_diagnose,
            "compete": cmd_compete,
        }
        return handlers[config.command](config, pipeline)
    except DOMAIN_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
