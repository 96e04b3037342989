"""Configuration helpers for the staged-financing survival engine."""
from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Final

from dotenv import load_dotenv


class ConfigError(RuntimeError):
    """Raised when a configuration value is missing or malformed."""


_PROJECT_ROOT = Path(__file__).resolve().parent
# Load project-specific .env first, then fall back to default search path.
_ENV_FILE_LOADED: Final[bool] = load_dotenv(_PROJECT_ROOT / ".env", override=True)
_DEFAULT_ENV_LOADED: Final[bool] = load_dotenv(override=True)


TIE_METHODS: Final[tuple[str, ...]] = ("breslow", "efron")
G_TRANSFORMS: Final[tuple[str, ...]] = ("identity", "log", "km", "rank")
LOG_LEVELS: Final[tuple[str, ...]] = ("DEBUG", "INFO", "WARNING", "ERROR")


@dataclass(frozen=True)
class FitControls:
    """Newton-Raphson convergence parameters for Cox fits."""

    max_iterations: int = 50
    loglik_rtol: float = 1e-9
    gradient_tol: float = 1e-6
    max_halvings: int = 10
    separation_bound: float = 20.0

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be at least 1")
        if self.loglik_rtol <= 0 or self.gradient_tol <= 0:
            raise ConfigError("convergence tolerances must be positive")
        if self.max_halvings < 0:
            raise ConfigError("max_halvings must be non-negative")
        if self.separation_bound <= 0:
            raise ConfigError("separation_bound must be positive")


@dataclass(frozen=True)
class AnalysisSettings:
    """Defaults shared by the command-line surface."""

    ties: str = "breslow"
    g_transform: str = "identity"
    alpha: float = 0.05
    workers: int = 1
    log_level: str = "INFO"


_DEFAULT_ENV_VARS: Final[tuple[str, ...]] = (
    "SURVIVAL_MAX_ITER",
    "SURVIVAL_LOGLIK_RTOL",
    "SURVIVAL_GRADIENT_TOL",
    "SURVIVAL_MAX_HALVINGS",
    "SURVIVAL_SEPARATION_BOUND",
    "SURVIVAL_TIES",
    "SURVIVAL_G_TRANSFORM",
    "SURVIVAL_ALPHA",
    "SURVIVAL_WORKERS",
    "SURVIVAL_LOG_LEVEL",
)


def _optional_env(var_name: str) -> str | None:
    """Return the stripped environment variable, or None when unset or blank."""

    value = os.getenv(var_name)
    if value is None or value.strip() == "":
        return None
    return value.strip()


def _env_int(var_name: str, default: int) -> int:
    raw = _optional_env(var_name)
    if raw is None:
        return default
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(
            f"Environment variable '{var_name}' must be an integer, got {raw!r}."
        ) from exc


def _env_float(var_name: str, default: float) -> float:
    raw = _optional_env(var_name)
    if raw is None:
        return default
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigError(
            f"Environment variable '{var_name}' must be a number, got {raw!r}."
        ) from exc


def _env_choice(var_name: str, default: str, choices: tuple[str, ...]) -> str:
    raw = _optional_env(var_name)
    if raw is None:
        return default
    normalized = raw.lower() if choices[0].islower() else raw.upper()
    if normalized not in choices:
        raise ConfigError(
            f"Environment variable '{var_name}' must be one of {', '.join(choices)}; got {raw!r}."
        )
    return normalized


def get_fit_controls() -> FitControls:
    """Return convergence parameters, overridable from the environment."""

    defaults = FitControls()
    return FitControls(
        max_iterations=_env_int("SURVIVAL_MAX_ITER", defaults.max_iterations),
        loglik_rtol=_env_float("SURVIVAL_LOGLIK_RTOL", defaults.loglik_rtol),
        gradient_tol=_env_float("SURVIVAL_GRADIENT_TOL", defaults.gradient_tol),
        max_halvings=_env_int("SURVIVAL_MAX_HALVINGS", defaults.max_halvings),
        separation_bound=_env_float("SURVIVAL_SEPARATION_BOUND", defaults.separation_bound),
    )


def get_analysis_settings() -> AnalysisSettings:
    """Return command-line defaults, overridable from the environment."""

    defaults = AnalysisSettings()
    alpha = _env_float("SURVIVAL_ALPHA", defaults.alpha)
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"SURVIVAL_ALPHA must lie in (0, 1), got {alpha}.")
    workers = _env_int("SURVIVAL_WORKERS", defaults.workers)
    if workers < 1:
        raise ConfigError(f"SURVIVAL_WORKERS must be at least 1, got {workers}.")
    return AnalysisSettings(
        ties=_env_choice("SURVIVAL_TIES", defaults.ties, TIE_METHODS),
        g_transform=_env_choice("SURVIVAL_G_TRANSFORM", defaults.g_transform, G_TRANSFORMS),
        alpha=alpha,
        workers=workers,
        log_level=_env_choice("SURVIVAL_LOG_LEVEL", defaults.log_level, LOG_LEVELS),
    )


__all__ = [
    "AnalysisSettings",
    "ConfigError",
    "FitControls",
    "G_TRANSFORMS",
    "LOG_LEVELS",
    "TIE_METHODS",
    "get_analysis_settings",
    "get_fit_controls",
]
