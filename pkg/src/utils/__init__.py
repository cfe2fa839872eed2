"""
Initialization file for utils package.
"""
from .config_utils import load_config, get_setting, resolve_output_dir, ensure_directories
from .parallel_utils import parallel_map

__all__ = [
    'load_config',
    'get_setting',
    'resolve_output_dir',
    'ensure_directories',
    'parallel_map'
]
