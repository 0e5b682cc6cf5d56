import logging
from os import path
from toml import load
from typing import Any, List

from .exception import ConfigException

log = logging.getLogger(__name__)

BASE_DIR = path.abspath(path.join(path.dirname(__file__), ".."))
DATA_DIR = path.abspath(path.join(BASE_DIR, "./data/"))
CONFIG_FILE_NAME = "config.toml"
EXAMPLE_CONFIG_FILE_NAME = "config.EXAMPLE.toml"
PYPROJECT_FILE_NAME = "pyproject.toml"

PYPROJECT_FILE = path.abspath(path.join(BASE_DIR, PYPROJECT_FILE_NAME))
CONFIG_FILE = path.abspath(path.join(DATA_DIR, CONFIG_FILE_NAME))
EXAMPLE_CONFIG_FILE = path.abspath(path.join(DATA_DIR, EXAMPLE_CONFIG_FILE_NAME))

logging_name_to_level = {
    # Adapted from __init__.py of logging library, L108
    "critical": logging.CRITICAL,
    "fatal": logging.FATAL,
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "warning": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
    "notset": logging.NOTSET,
}


class TOMLConfig:
    """
    General-purpose toml config class.
    """
    __slots__ = ("data", )

    def __init__(self, json_data: dict):
        self.data = json_data

    @classmethod
    def from_filename(cls, file_path: str):
        with open(file_path, "r", encoding="utf-8") as config_file:
            data = load(config_file)

        return cls(data)

    def get_table(self, name: str, ignore_empty: bool = False) -> "TOMLConfig":
        data = self.data.get(name)

        if data is None and not ignore_empty:
            raise ConfigException(f"Configuration table missing: '{name}'")

        return TOMLConfig(data or {})

    def get(self, name: str, fallback: Any = None, ignore_empty: bool = False) -> Any:
        data = self.data.get(name)

        if data is None and not ignore_empty:
            raise ConfigException(f"Configuration value missing: '{name}'")

        if data is None:
            return fallback
        else:
            return data


class DiffusionConfig:
    """
    Parses and contains all the supported configuration values.
    """
    __slots__ = (
        "_config",
        "_table_logging", "_table_tolerances", "_table_boundary",
        "_table_simulation", "_table_chain", "_table_dest_paths",
        # Logging
        "VERBOSITY", "PROGRESS_LOG_INTERVAL",
        # Tolerances
        "DEFAULT_TOL", "TOL_LADDER", "CANTOR_MAX_DEPTH", "MAX_REFINEMENT_CELLS",
        # Boundary
        "LIMIT_SEQUENCE_LENGTH", "LIMIT_RATIO",
        # Simulation
        "STEP_H", "MAX_STEPS", "BLOCK_SIZE", "WORKERS", "CENSORED_FLAG_FRACTION",
        "CONFIDENCE", "SURVIVAL_SPAN_STEPS",
        # Chain
        "POSITIVITY_ATOL", "BALANCE_RTOL", "RESOLVENT_ALPHA",
        # DestinationPaths
        "XLSX_OUTPUT_PATH",
    )

    def __init__(self, config_dict: TOMLConfig):
        self._config = config_dict

        self._table_logging = self._config.get_table("Logging")
        self._table_tolerances = self._config.get_table("Tolerances")
        self._table_boundary = self._config.get_table("Boundary")
        self._table_simulation = self._config.get_table("Simulation")
        self._table_chain = self._config.get_table("Chain")
        self._table_dest_paths = self._config.get_table("DestinationPaths")

        ##########
        # Logging
        ##########
        verbosity: str = self._table_logging.get("verbosity", "").lower()
        self.VERBOSITY: int = logging_name_to_level.get(verbosity)
        if self.VERBOSITY is None:
            log.warning("verbosity was not set properly, falling back to \"info\"")
            self.VERBOSITY = logging.INFO

        self.PROGRESS_LOG_INTERVAL: int = int(self._table_logging.get("progress_log_interval"))

        ##########
        # Tolerances
        ##########
        self.DEFAULT_TOL: float = float(self._table_tolerances.get("default_tol"))
        ladder: List[Any] = self._table_tolerances.get("ladder")
        self.TOL_LADDER: List[float] = sorted((float(a) for a in ladder), reverse=True)
        if len(self.TOL_LADDER) < 1 or any(a <= 0 for a in self.TOL_LADDER):
            raise ConfigException("Tolerances.ladder must be a non-empty list of positive numbers")
        self.CANTOR_MAX_DEPTH: int = int(self._table_tolerances.get("cantor_max_depth"))
        self.MAX_REFINEMENT_CELLS: int = int(self._table_tolerances.get("max_refinement_cells"))

        ##########
        # Boundary
        ##########
        self.LIMIT_SEQUENCE_LENGTH: int = int(self._table_boundary.get("limit_sequence_length"))
        self.LIMIT_RATIO: float = float(self._table_boundary.get("limit_ratio"))
        if not 0 < self.LIMIT_RATIO < 1:
            raise ConfigException("Boundary.limit_ratio must lie strictly between 0 and 1")

        ##########
        # Simulation
        ##########
        self.STEP_H: float = float(self._table_simulation.get("step_h"))
        self.MAX_STEPS: int = int(self._table_simulation.get("max_steps"))
        self.BLOCK_SIZE: int = int(self._table_simulation.get("block_size"))
        self.WORKERS: int = max(1, int(self._table_simulation.get("workers")))
        self.CENSORED_FLAG_FRACTION: float = float(self._table_simulation.get("censored_flag_fraction"))
        self.CONFIDENCE: float = float(self._table_simulation.get("confidence"))
        self.SURVIVAL_SPAN_STEPS: int = int(self._table_simulation.get("survival_span_steps"))

        ##########
        # Chain
        ##########
        self.POSITIVITY_ATOL: float = float(self._table_chain.get("positivity_atol"))
        self.BALANCE_RTOL: float = float(self._table_chain.get("balance_rtol"))
        self.RESOLVENT_ALPHA: float = float(self._table_chain.get("resolvent_alpha"))

        ##########
        # DestinationPaths
        ##########
        # using .replace here because .format expects us to format every placeholder
        # but DATETIME must be formatted at the very moment we're creating a file
        self.XLSX_OUTPUT_PATH: str = path.abspath(self._table_dest_paths.get("xlsx_output_path").replace(
            "{DATA_DIR}", DATA_DIR
        ))


if path.isfile(CONFIG_FILE):
    raw_config = TOMLConfig.from_filename(CONFIG_FILE)
else:
    log.warning(f"No configuration at '{CONFIG_FILE}', using '{EXAMPLE_CONFIG_FILE_NAME}' defaults.")
    raw_config = TOMLConfig.from_filename(EXAMPLE_CONFIG_FILE)

config = DiffusionConfig(raw_config)

config_pyproject = TOMLConfig.from_filename(PYPROJECT_FILE)
pyproject_tool_poetry = config_pyproject.get_table("tool").get_table("poetry")

PROJECT_NAME = pyproject_tool_poetry.get("name")
VERSION = pyproject_tool_poetry.get("version")
