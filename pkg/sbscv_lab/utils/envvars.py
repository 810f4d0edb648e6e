from typing import Optional
from dotenv import load_dotenv
from pathlib import Path
import os

from .singleton import Singleton
from .errors import ConfigurationError

DEFAULT_DIMENSION_CAP = 8192


class EnvVars(metaclass=Singleton):

    def __init__(self):
        # Both files are optional; values already in the environment win
        for env_path in (Path.cwd() / ".env", Path.home() / ".env"):
            if env_path.exists():
                load_dotenv(env_path, override=False)

        self.env_variables = {}
        self.log_path = self.get_env("SBSCV_LOG_PATH", str(Path.home() / ".sbscv" / "logs"))
        self.log_level = self.get_env("SBSCV_LOG_LEVEL", "INFO").upper()
        self.log_console = self.get_bool("SBSCV_LOG_CONSOLE", "False")

        # None when unset; the scenario or CLI then decides
        self.dimension_cap = self.get_int("SBSCV_CAP")


    def get_env(self, variable: str, default: Optional[str] = None) -> Optional[str]:
        return self.env_variables.get(variable) or self.env_variables.setdefault(
            variable,
            os.getenv(variable, default)
        )

    def get_bool(self, key: str, default: str) -> bool:
        value = self.get_env(key, default)
        return value.lower() in ('true', '1', 'yes', 'y')

    def get_int(self, key: str, default: Optional[int] = None) -> Optional[int]:
        value = self.get_env(key)
        if value is None or value.strip() == "":
            return default
        try:
            parsed = int(value)
        except ValueError:
            raise ConfigurationError(f"Environment variable {key} must be an integer, got {value!r}")
        if parsed < 1:
            raise ConfigurationError(f"Environment variable {key} must be positive, got {parsed}")
        return parsed
