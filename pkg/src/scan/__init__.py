"""
Loss scans driven by a YAML run configuration.
"""

from .config import ConfigError, RunConfig, load_config
from .runner import run_scan, summarize_scan, validate_scan, write_table

__all__ = ["ConfigError", "RunConfig", "load_config", "run_scan", "summarize_scan", "validate_scan", "write_table"]
