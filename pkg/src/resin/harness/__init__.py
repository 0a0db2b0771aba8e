"""Experiment configuration, drivers and command-line interface."""

from .config import EXPERIMENTS, make_config
from .experiments import RUNNERS, TrialRecord, describe, summarize, write_records

__all__ = ["EXPERIMENTS", "RUNNERS", "TrialRecord", "describe", "make_config", "summarize", "write_records"]
