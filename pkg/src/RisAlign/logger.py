import logging
import os
from datetime import datetime

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(message)s"
LOG_DIR = os.environ.get("RISALIGN_LOG_DIR", os.path.join(os.getcwd(), "logs"))

logger = logging.getLogger("RisAlign")


def setup_logging(level: str = "INFO", log_dir: str | None = LOG_DIR, to_file: bool = True) -> str | None:
    """
    Configure the package logger

    One log file per day under log_dir; warnings and above are mirrored to stderr.

    Args:
        level: Logging level name
        log_dir: Directory for daily log files
        to_file: Whether to write the daily log file at all

    Returns:
        Path of the log file, or None when logging to stderr only
    """
    stream_handler = logging.StreamHandler()
    stream_handler.setLevel(logging.WARNING)
    handlers: list[logging.Handler] = [stream_handler]

    log_filename = None
    if to_file and log_dir:
        os.makedirs(log_dir, exist_ok=True)
        log_filename = os.path.join(log_dir, datetime.now().strftime("%Y-%m-%d") + ".log")
        handlers.append(logging.FileHandler(log_filename, encoding="utf-8"))

    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format=LOG_FORMAT,
        handlers=handlers,
        force=True,
    )
    logger.setLevel(getattr(logging, level.upper(), logging.INFO))
    return log_filename
