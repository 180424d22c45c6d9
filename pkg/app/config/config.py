"""
Configuration file for the merge tree Wasserstein toolkit.
This has different configurations for each scope (local, prod).
The scope is used to determine which configuration to use based on the SCOPE environment variable.
The default configuration is local when SCOPE is not set.

Numeric values can be overridden per run with MTW_<KEY> environment variables
(for example MTW_THREADS=8). Command-line flags take precedence over both.
"""

import logging
import os
from enum import Enum
from typing import Any

logger = logging.getLogger(__name__)

ENV_PREFIX = "MTW_"


local_config = {
    "LOG_LEVEL": "DEBUG",
    "SCOPE": "local",
    # Metric parameters
    "EPS1": 0.05,
    "EPS2": 0.95,
    "EPS3": 0.9,
    "NORMALIZE": True,
    "DEFAULT_SOLVER": "exact",
    # Execution
    "THREADS": 1,
    "SEED": 0,
    "SIMPLIFY_THRESHOLD": 0.0025,
    # Iteration guards
    "BARYCENTER_MAX_ITERATIONS": 500,
    "KMEANS_MAX_ITERATIONS": 100,
}

prod_config = {
    "LOG_LEVEL": "WARNING",
    "SCOPE": "prod",
    "EPS1": 0.05,
    "EPS2": 0.95,
    "EPS3": 0.9,
    "NORMALIZE": True,
    "DEFAULT_SOLVER": "exact",
    "THREADS": 1,
    "SEED": 0,
    "SIMPLIFY_THRESHOLD": 0.0025,
    "BARYCENTER_MAX_ITERATIONS": 500,
    "KMEANS_MAX_ITERATIONS": 100,
}


def _coerce(raw: str, default: Any) -> Any:
    """Convert an environment string to the type of the scope default."""
    if isinstance(default, bool):
        return raw.strip().lower() in {"1", "true", "yes", "on"}
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


class Config:
    @staticmethod
    def get(config_name: str) -> Any:
        """
        Get configuration value by name based on environment variables.

        Args:
            config_name: The name of the configuration value to retrieve

        Returns:
            The configuration value for the current environment
        """
        internal_config = prod_config if Config.get_env() == Config.ScopeEnvironment.PROD else local_config

        config_value = internal_config.get(config_name)

        override = os.getenv(f"{ENV_PREFIX}{config_name}")
        if override is not None and config_value is not None:
            try:
                config_value = _coerce(override, config_value)
            except ValueError:
                logger.warning(f"Ignoring invalid override {ENV_PREFIX}{config_name}={override!r}")

        logger.debug(f"Getting config {config_name}: {config_value}")
        return config_value

    class ScopeEnvironment(Enum):
        PROD = "prod"
        LOCAL = "local"

    @staticmethod
    def get_env() -> ScopeEnvironment:
        """
        Get environment value based on SCOPE environment variable.
        Returns ScopeEnvironment enum value. Defaults to LOCAL.
        """
        scope = os.getenv("SCOPE", "local")

        if scope == "prod":
            return Config.ScopeEnvironment.PROD
        return Config.ScopeEnvironment.LOCAL


config = Config()
