import logging
from logging.handlers import RotatingFileHandler
from pathlib import Path
from .singleton import Singleton
from typing import Dict, Optional
from .envvars import EnvVars

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s - [%(filename)s:%(lineno)d]'


class LogManager(metaclass=Singleton):

    def __init__(self, log_filename: str = "sbscv.log"):
        self._loggers: Dict[str, logging.Logger] = {}
        self._file_handler: Optional[RotatingFileHandler] = None
        self._console_handler: Optional[logging.StreamHandler] = None
        self._log_dir = Path(EnvVars().log_path).expanduser()
        self._setup_base_config(log_filename)
        if EnvVars().log_console:
            self.enable_console()


    def _setup_base_config(self, log_filename: str):
        """Initialize base logging configuration."""
        try:
            self._log_dir.mkdir(parents=True, exist_ok=True)
        except PermissionError:
            print(f"Warning: Cannot create {self._log_dir}. Logging to the working directory.")
            self._log_dir = Path('.')

        if self._file_handler is None:
            self._file_handler = RotatingFileHandler(
                self._log_dir / log_filename,
                maxBytes=10485760,  # 10MB
                backupCount=5
            )
            self._file_handler.setFormatter(logging.Formatter(LOG_FORMAT))


    def get_logger(self, name: str) -> logging.Logger:
        if name not in self._loggers:
            logger = logging.getLogger(f"sbscv.{name}")
            logger.setLevel(EnvVars().log_level)

            for handler in logger.handlers[:]:
                logger.removeHandler(handler)

            logger.addHandler(self._file_handler)
            if self._console_handler is not None:
                logger.addHandler(self._console_handler)

            logger.propagate = False

            self._loggers[name] = logger

        return self._loggers[name]


    def enable_console(self, level: Optional[str] = None):
        """Mirror every managed logger to stderr (CLI --verbose)."""
        if self._console_handler is None:
            self._console_handler = logging.StreamHandler()
            self._console_handler.setFormatter(logging.Formatter('%(levelname)s %(name)s: %(message)s'))
            for logger in self._loggers.values():
                logger.addHandler(self._console_handler)
        if level is not None:
            self._console_handler.setLevel(level)


    def update_all_log_levels(self, level):
        """Update log level for all managed loggers."""
        for logger in self._loggers.values():
            logger.setLevel(level)

    def get_all_loggers(self) -> Dict[str, logging.Logger]:
        """Get dictionary of all managed loggers."""
        return self._loggers.copy()

    @property
    def log_file(self) -> Path:
        return Path(self._file_handler.baseFilename)

    def cleanup(self):
        for logger in self._loggers.values():
            for handler in logger.handlers[:]:
                logger.removeHandler(handler)
        if self._file_handler is not None:
            self._file_handler.close()
        self._loggers.clear()
