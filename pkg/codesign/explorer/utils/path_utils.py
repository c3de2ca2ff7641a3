"""
Path Utilities

Centralized utilities for consistent path resolution across all modules.
"""

from pathlib import Path
from typing import Optional, Union


def resolve_path(path_input: Union[str, Path], base_dir: Optional[Path] = None) -> Path:
    """
    Consistently resolve a path string or Path object to an absolute Path.

    Args:
        path_input: The path string or Path object to resolve
        base_dir: Optional base directory to resolve relative paths from
                  If None, relative paths will be resolved from current directory

    Returns:
        An absolute Path object
    """
    path = Path(path_input)

    if path.is_absolute():
        return path

    if base_dir is None:
        return path.resolve()

    return (Path(base_dir) / path).resolve()
