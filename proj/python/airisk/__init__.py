"""Monte Carlo quantification of AI threat scenarios.

Thin wrappers over the native ``_airisk`` module. Portfolios are passed as
dicts (or JSON text) in the same shape as the ``*.portfolio.json`` files;
results come back as plain dicts.
"""

from __future__ import annotations

import json
import os
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Sequence

from ._airisk import AiriskError, Registry, Service
from . import _airisk

__all__ = [
    "AiriskError",
    "Registry",
    "Service",
    "calibrate_lognormal",
    "classify_incidents",
    "default_registry_path",
    "load_registry",
    "lognormal_quantile",
    "rank_controls",
    "render_report",
    "simulate",
]


def default_registry_path() -> Path:
    """$AIRISK_REGISTRY, else the registry bundled with the package."""
    env = os.environ.get("AIRISK_REGISTRY")
    if env:
        return Path(env)
    bundled = resources.files("airisk") / "data" / "taxonomy.json"
    if bundled.is_file():
        return Path(str(bundled))
    source_tree = Path(__file__).resolve().parents[2] / "data" / "taxonomy.json"
    if source_tree.is_file():
        return source_tree
    raise FileNotFoundError("no taxonomy registry found; set AIRISK_REGISTRY")


def load_registry(path: str | os.PathLike[str] | None = None) -> Registry:
    return Registry(Path(path) if path is not None else default_registry_path())


def _text(portfolio: Mapping[str, Any] | str) -> str:
    return portfolio if isinstance(portfolio, str) else json.dumps(portfolio)


def _registry(registry: Registry | None) -> Registry:
    return registry if registry is not None else load_registry()


def calibrate_lognormal(low: float, high: float, confidence: float = 0.9) -> tuple[float, float]:
    """(mu, sigma) placing `low` and `high` at the symmetric `confidence` quantiles."""
    return _airisk.calibrate_lognormal(low, high, confidence)


def lognormal_quantile(mu: float, sigma: float, p: float) -> float:
    return _airisk.lognormal_quantile(mu, sigma, p)


def simulate(
    portfolio: Mapping[str, Any] | str,
    trials: int = 100_000,
    seed: int = 42,
    confidences: Sequence[float] | None = None,
    threads: int = 0,
    registry: Registry | None = None,
) -> tuple[dict[str, Any], list[float]]:
    """Runs the portfolio workflow. Returns (result, portfolio trial losses)."""
    text, losses = _airisk.simulate_portfolio(
        _registry(registry), _text(portfolio), trials, seed,
        list(confidences) if confidences is not None else None, threads)
    return json.loads(text), losses


def rank_controls(
    portfolio: Mapping[str, Any] | str,
    scenario_id: str,
    trials: int = 100_000,
    seed: int = 42,
    threads: int = 0,
    registry: Registry | None = None,
) -> list[dict[str, Any]]:
    return json.loads(_airisk.rank_controls(
        _registry(registry), _text(portfolio), scenario_id, trials, seed, threads))


def classify_incidents(
    path: str | os.PathLike[str],
    reference_labels: bool = False,
    registry: Registry | None = None,
) -> dict[str, Any]:
    return json.loads(_airisk.classify_incidents(_registry(registry), Path(path), reference_labels))


def render_report(
    portfolio: Mapping[str, Any] | str,
    format: str = "markdown",
    trials: int = 100_000,
    seed: int = 42,
    generated_at: int | None = None,
    registry: Registry | None = None,
) -> str:
    """`generated_at` pins the report timestamp (seconds since the epoch)."""
    return _airisk.render_report(_registry(registry), _text(portfolio), format, trials, seed, generated_at)
