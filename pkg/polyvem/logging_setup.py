import logging
import os
from datetime import datetime
from typing import Optional

from .config import VEMConfig

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s %(message)s'


def configure_logging(level: Optional[str] = None, log_dir: Optional[str] = None) -> Optional[str]:
    """Configure root logging; returns the log file path when one is written."""

    level_name = (level or VEMConfig.LOG_LEVEL).upper()
    log_dir = log_dir or VEMConfig.LOG_DIR
    handlers: list[logging.Handler] = [logging.StreamHandler()]
    log_file = None
    if log_dir:
        os.makedirs(log_dir, exist_ok=True)
        log_file = os.path.join(log_dir, f"polyvem_{datetime.now().strftime('%Y%m%d')}.log")
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(
        level=getattr(logging, level_name, logging.INFO),
        format=LOG_FORMAT,
        handlers=handlers,
        force=True,
    )
    return log_file


def log_result(message: str, level: str = 'info', logger: Optional[logging.Logger] = None):
    log = logger or logging.getLogger("polyvem")
    if level == 'info':
        log.info(message)
    elif level == 'warning':
        log.warning(message)
    elif level == 'error':
        log.error(message)
    else:
        log.debug(message)
