"""
Utility functions for the one-bit spectral estimator.
"""

from .file_utils import (
    find_file,
    get_file_search_paths,
    parse_scenario_file,
    format_scenario,
    write_csv_atomic,
)
from .logging_utils import configure_logging

__all__ = [
    'find_file',
    'get_file_search_paths',
    'parse_scenario_file',
    'format_scenario',
    'write_csv_atomic',
    'configure_logging',
]
