"""Analysis pipeline over one panel file, with per-stage timing metrics."""
from __future__ import annotations

import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator, Optional, Sequence

from competing_risks import DEFAULT_CAUSES, CauseSpec, CompetingRiskReport, fit_competing
from config import ConfigError, FitControls
from constants import DEFAULT_TIME_INTERACTIONS
from cox_fit import CoxFit, CoxFitError, DesignMatrix, TieMethod, fit_cox
from dataset_io import CovariateRecipe, Panel, PanelSummary, build_design, load_panel, summarize_panel
from ph_diagnostics import (
    PhTestReport,
    ResidualMatrix,
    ResidualStateError,
    augment_with_time_interactions,
    grambsch_therneau_test,
    scale_residuals,
    schoenfeld_residuals,
)

LOGGER = logging.getLogger(__name__)

DOMAIN_ERRORS = (ValueError, CoxFitError, ResidualStateError, ConfigError, OSError)


class PanelRejectedError(ValueError):
    """Raised when a panel file has rows that failed validation."""


@dataclass
class AnalysisResult:
    command: str
    source: str

    panel: Optional[Panel] = None
    summary: Optional[PanelSummary] = None

    design: Optional[DesignMatrix] = None
    fit: Optional[CoxFit] = None
    residuals: Optional[ResidualMatrix] = None
    ph_report: Optional[PhTestReport] = None

    # Refit with time interactions
    augmented_design: Optional[DesignMatrix] = None
    augmented_fit: Optional[CoxFit] = None

    competing: Optional[CompetingRiskReport] = None

    # Overall
    timings: dict[str, float] = field(default_factory=dict)
    total_latency: float = 0.0
    status: str = "pending"  # pending, success, error
    error_msg: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.status == "success"


class AnalysisPipeline:
    def __init__(
        self,
        ties: TieMethod | str = TieMethod.BRESLOW,
        controls: FitControls | None = None,
        recipe: CovariateRecipe | None = None,
        g_transform: str = "identity",
        workers: int = 1,
    ) -> None:
        self.ties = TieMethod.from_name(ties)
        self.controls = controls or FitControls()
        self.recipe = recipe or CovariateRecipe()
        self.g_transform = g_transform
        self.workers = workers

    @contextmanager
    def _stage(self, result: AnalysisResult, name: str) -> Iterator[None]:
        t0 = time.perf_counter()
        try:
            yield
        finally:
            result.timings[name] = time.perf_counter() - t0

    def _run(self, command: str, path: str | Path, stages: Callable[[AnalysisResult], None]) -> AnalysisResult:
        result = AnalysisResult(command=command, source=str(path))
        start_total = time.perf_counter()
        try:
            with self._stage(result, "load"):
                result.panel = load_panel(path)
            if result.panel.rejections:
                raise PanelRejectedError(
                    f"{len(result.panel.rejections)} row(s) of {path} failed validation"
                )
            stages(result)
            result.status = "success"
        except DOMAIN_ERRORS as exc:
            LOGGER.error("%s failed: %s", command, exc)
            result.status = "error"
            result.error_msg = str(exc)

        result.total_latency = time.perf_counter() - start_total
        LOGGER.info(
            "%s finished in %.3fs (%s)",
            command,
            result.total_latency,
            ", ".join(f"{name}={seconds:.3f}s" for name, seconds in result.timings.items()),
        )
        return result

    def _fit(self, result: AnalysisResult) -> None:
        with self._stage(result, "design"):
            result.design = build_design(result.panel.records, self.recipe)
        with self._stage(result, "fit"):
            result.fit = fit_cox(result.design, self.ties, self.controls)

    def _diagnose(self, result: AnalysisResult) -> None:
        with self._stage(result, "diagnose"):
            residuals = schoenfeld_residuals(result.design, result.fit)
            result.residuals = scale_residuals(residuals, result.fit)
            result.ph_report = grambsch_therneau_test(result.residuals, result.fit, self.g_transform)

    def summarize(self, path: str | Path) -> AnalysisResult:
        def stages(result: AnalysisResult) -> None:
            with self._stage(result, "summarize"):
                result.summary = summarize_panel(result.panel.records)

        return self._run("summarize", path, stages)

    def fit(
        self,
        path: str | Path,
        augment_time_interactions: bool = False,
        pairs: Sequence[tuple[str, str]] = DEFAULT_TIME_INTERACTIONS,
    ) -> AnalysisResult:
        """Fit the model; optionally test proportionality and refit with time interactions."""

        def stages(result: AnalysisResult) -> None:
            self._fit(result)
            if not augment_time_interactions:
                return
            self._diagnose(result)
            flagged = result.ph_report.flagged()
            if flagged:
                LOGGER.info("Non-proportional covariates: %s", ", ".join(flagged))
            with self._stage(result, "refit"):
                result.augmented_design = augment_with_time_interactions(result.design, pairs)
                result.augmented_fit = fit_cox(result.augmented_design, self.ties, self.controls)

        return self._run("fit", path, stages)

    def diagnose(self, path: str | Path) -> AnalysisResult:
        def stages(result: AnalysisResult) -> None:
            self._fit(result)
            self._diagnose(result)

        return self._run("diagnose", path, stages)

    def compete(self, path: str | Path, causes: Sequence[CauseSpec] = DEFAULT_CAUSES) -> AnalysisResult:
        def stages(result: AnalysisResult) -> None:
            with self._stage(result, "compete"):
                result.competing = fit_competing(
                    result.panel.records, self.recipe, causes, self.ties, self.controls, self.workers
                )

        return self._run("compete", path, stages)


__all__ = ["AnalysisPipeline", "AnalysisResult", "DOMAIN_ERRORS", "PanelRejectedError"]
