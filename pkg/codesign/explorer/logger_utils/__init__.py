from .logger_utils import setup_logger, ENCODING

__all__ = ["setup_logger", "ENCODING"]
