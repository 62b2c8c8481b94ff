import os
from dotenv import dotenv_values

_REPO_ROOT = os.path.dirname(os.path.abspath(__file__))
_ENV_PATH = os.path.join(_REPO_ROOT, ".env")
_DEFAULT_SCENARIO_DIR = os.path.join(_REPO_ROOT, "scenarios")
_DEFAULT_OUTPUT_DIR = "out"


def _get_runtime_env_value(key: str, default: str = "") -> str:
    """Value for ``key``, with .env as source of truth when the file exists.

    A key deleted from .env falls back to ``default`` even if the shell
    still exports it.
    """
    if os.path.exists(_ENV_PATH):
        values = dotenv_values(_ENV_PATH)
        value = values.get(key)
        if value is None:
            return default
        return str(value).strip()
    return os.getenv(key, default).strip()


def scenario_dir() -> str:
    """Directory bare scenario names resolve against (TRACKMPC_SCENARIO_DIR)."""
    return _get_runtime_env_value("TRACKMPC_SCENARIO_DIR", _DEFAULT_SCENARIO_DIR) or _DEFAULT_SCENARIO_DIR


def output_dir() -> str:
    """Fallback output directory when neither --out nor the scenario names one."""
    return _get_runtime_env_value("TRACKMPC_OUTPUT_DIR", _DEFAULT_OUTPUT_DIR) or _DEFAULT_OUTPUT_DIR
