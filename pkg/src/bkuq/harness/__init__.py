"""Configuration, scenario orchestration, caching and result emission."""
from .config import DEFAULTS, SCENARIOS, ConfigError, dump_config, load_config, parse_config_text
from .output import OutputError, write_csv, write_manifest, write_plot_script
from .scenarios import RUNNERS, cache_build, cache_purge, cache_verify

__all__ = ["DEFAULTS", "SCENARIOS", "ConfigError", "dump_config", "load_config",
           "parse_config_text", "OutputError", "write_csv", "write_manifest",
           "write_plot_script", "RUNNERS", "cache_build", "cache_purge", "cache_verify"]
