"""
Configuration loader utility.
"""
import yaml
import os
from functools import lru_cache
from pathlib import Path
from typing import Dict, Any, Optional

from dotenv import load_dotenv

OUTPUT_DIR_ENV = "PMT_OUTPUT_DIR"

# settings read by get_setting; None means the shipped config.yaml
_active_config: Optional[Dict[str, Any]] = None


def load_config(config_path: Optional[str] = None) -> Dict[str, Any]:
    """
    Load configuration from YAML file.

    A file is merged over the default config.yaml and becomes the active
    configuration that every get_setting call reads.

    Args:
        config_path: Path to config file. If None, returns the active config

    Returns:
        Configuration dictionary
    """
    if config_path is None:
        return active_config()

    with open(config_path, 'r') as f:
        overrides = yaml.safe_load(f) or {}

    config = {**_default_config(), **overrides}
    activate_config(config)
    return dict(config)


@lru_cache(maxsize=1)
def _default_config() -> Dict[str, Any]:
    # Get the root directory of the project
    root_dir = Path(__file__).parent.parent.parent
    with open(root_dir / "config.yaml", 'r') as f:
        return yaml.safe_load(f)


def activate_config(config: Optional[Dict[str, Any]]) -> None:
    """Install ``config`` for get_setting; None restores config.yaml."""
    global _active_config
    _active_config = dict(config) if config is not None else None


def active_config() -> Dict[str, Any]:
    """Copy of the configuration get_setting currently reads."""
    return dict(_active_config if _active_config is not None else _default_config())


def get_setting(key: str, config: Optional[Dict[str, Any]] = None) -> Any:
    """
    Read a single setting, falling back to the active configuration.

    Args:
        key: Upper-case configuration key
        config: Configuration dictionary (active config when None)

    Returns:
        The configured value
    """
    if config is None:
        config = _active_config if _active_config is not None else _default_config()
    if key not in config:
        raise KeyError(f"Missing configuration key: {key}")
    return config[key]


def resolve_output_dir(config: Dict[str, Any], override: Optional[str] = None) -> str:
    """
    Resolve the output directory: explicit override, then PMT_OUTPUT_DIR, then config.

    Args:
        config: Configuration dictionary
        override: Value of the --out flag, if any

    Returns:
        Output directory path
    """
    if override:
        return override
    load_dotenv()
    return os.getenv(OUTPUT_DIR_ENV) or config.get('OUTPUT_DIR', 'lab_outputs')


def ensure_directories(config: Dict[str, Any], override: Optional[str] = None) -> str:
    """
    Ensure the output directory exists.

    Args:
        config: Configuration dictionary
        override: Optional output directory override

    Returns:
        The output directory that was created
    """
    output_dir = resolve_output_dir(config, override)
    os.makedirs(output_dir, exist_ok=True)
    return output_dir
