import logging

from src.core.settings import settings

LOG_FORMAT = "[%(levelname)s] [%(name)s: %(funcName)s] %(message)s"


def configure_logging(level: str | None = None) -> None:
    """Configure the root logger once for CLI runs."""
    logging.basicConfig(format=LOG_FORMAT, level=(level or settings.log_level).upper())
