"""
File operation utilities shared by the explorer modules.

All JSON artifacts go through write_json so that identical data always
produces identical bytes.
"""

import json
from pathlib import Path
from typing import Any, Dict, Union

import yaml

from codesign.explorer.logger_utils.logger_utils import setup_logger, ENCODING
from codesign.explorer.exceptions import ConfigError

logger = setup_logger("file_tools", module="utils")

SCHEMA_VERSION = "1.0"


def ensure_directory_exists(dir_path: Union[str, Path], description: str = "directory") -> Path:
    """Create a directory (and parents) if needed and return it as a Path."""
    path = Path(dir_path)
    if not path.exists():
        path.mkdir(parents=True, exist_ok=True)
        logger.debug(f"Created {description}: {path}")
    return path


def dumps_json(data: Any) -> str:
    """Serialize to the canonical text form used by every artifact."""
    return json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def write_json(data: Any, path: Union[str, Path]) -> Path:
    """Write data as canonical JSON, creating parent directories."""
    path = Path(path)
    ensure_directory_exists(path.parent, "output directory")
    with open(path, "w", encoding=ENCODING, newline="\n") as f:
        f.write(dumps_json(data))
    return path


def read_json(path: Union[str, Path]) -> Any:
    """
    Load a JSON document.

    Raises:
        ConfigError: If the file doesn't exist or has parsing errors
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"File not found: {path}")
    try:
        with open(path, "r", encoding=ENCODING) as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        error_msg = f"Error parsing JSON in {path}: {e}"
        logger.error(error_msg)
        raise ConfigError(error_msg)


def write_text(text: str, path: Union[str, Path]) -> Path:
    """Write text with LF line endings, creating parent directories."""
    path = Path(path)
    ensure_directory_exists(path.parent, "output directory")
    with open(path, "w", encoding=ENCODING, newline="\n") as f:
        f.write(text)
    return path


def read_yaml(path: Union[str, Path]) -> Dict[str, Any]:
    """
    Load a YAML configuration file.

    Raises:
        ConfigError: If the file doesn't exist or has parsing errors
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Config file not found: {path}")
    try:
        with open(path, "r", encoding=ENCODING) as f:
            return yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        error_msg = f"Error parsing YAML in {path}: {e}"
        logger.error(error_msg)
        raise ConfigError(error_msg)
