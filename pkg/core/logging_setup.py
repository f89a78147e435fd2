"""
Logging setup for the semi-Markov dynamics toolkit
Rotating log file with gzip-compressed backups, level taken from the environment
"""

import gzip
import logging
import os
import sys
from logging.handlers import RotatingFileHandler
from typing import Optional

LOG_FORMAT = '%(asctime)s - %(levelname)s - %(name)s - %(message)s'
DEFAULT_LOG_FILE = 'semimarkov.log'


def _namer(default_name: str) -> str:
    return default_name + '.gz'


def _rotator(source: str, dest: str) -> None:
    try:
        with open(source, 'rb') as src, gzip.open(dest, 'wb') as dst:
            dst.writelines(src)
    finally:
        try:
            os.remove(source)
        except OSError:
            pass


def setup_logging(log_file: Optional[str] = None,
                  level: Optional[str] = None,
                  verbose: bool = False) -> None:
    """Configure the root logger once per process

    Args:
        log_file: Path of the rotating log file (default: semimarkov.log)
        level: Level name; falls back to SEMIMARKOV_LOG_LEVEL, then WARNING
        verbose: Also echo records to stderr
    """
    try:
        level_name = (level or os.getenv('SEMIMARKOV_LOG_LEVEL', 'WARNING')).upper()
        log_level = getattr(logging, level_name, logging.WARNING)
        root_logger = logging.getLogger()
        root_logger.setLevel(log_level)

        if verbose and not any(getattr(h, '_semimarkov_console', False) for h in root_logger.handlers):
            console = logging.StreamHandler(sys.stderr)
            console.setFormatter(logging.Formatter('%(levelname)s - %(name)s - %(message)s'))
            console._semimarkov_console = True
            root_logger.addHandler(console)

        log_path = log_file or DEFAULT_LOG_FILE
        # Avoid adding duplicate handlers if already configured
        for h in root_logger.handlers:
            if isinstance(h, RotatingFileHandler):
                if getattr(h, 'baseFilename', '').endswith(os.path.basename(log_path)):
                    return

        max_bytes = int(os.getenv('SEMIMARKOV_LOG_MAX_BYTES', '5000000'))  # ~5MB
        backups = int(os.getenv('SEMIMARKOV_LOG_BACKUPS', '3'))

        handler = RotatingFileHandler(
            log_path,
            maxBytes=max_bytes,
            backupCount=backups,
            encoding='utf-8',
            delay=True
        )
        handler.namer = _namer
        handler.rotator = _rotator
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        root_logger.addHandler(handler)
    except Exception:
        # Never crash on logging setup issues
        pass
