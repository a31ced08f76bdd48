"""Config-driven experiment runner and report."""

from .config import ExperimentConfig, RunConfig, load_config, parse_config
from .report import render, summarize
from .runner import run

__all__ = ["ExperimentConfig", "RunConfig", "load_config", "parse_config", "render", "run", "summarize"]
