# utils/settings.py
import json
import logging
import os
from typing import Any, Dict, Optional

logger = logging.getLogger(__name__)

SETTINGS_ENV = "UFLOW_SETTINGS"
OUT_DIR_ENV = "UFLOW_OUT_DIR"

DEFAULT_SETTINGS: Dict[str, Any] = {
    "lp_backend": "simplex",
    "output_dir": "results",
    "jobs": 1,
    "beta": 1.1,
    "k_paths": 10,
}


def default_settings_path() -> str:
    return os.environ.get(SETTINGS_ENV) or os.path.join(os.path.expanduser("~"), ".uflow_settings.json")


class Settings:
    """User preferences stored as indented JSON, with a defaults fallback."""

    def __init__(self, settings_path: Optional[str] = None):
        self.settings_path = settings_path or default_settings_path()
        self.settings = self.load_settings()

    def load_settings(self) -> Dict[str, Any]:
        merged = dict(DEFAULT_SETTINGS)
        try:
            with open(self.settings_path, "r", encoding="utf-8") as f:
                stored = json.load(f)
        except FileNotFoundError:
            return merged
        except Exception as e:
            # default fallback
            logger.warning("Ignoring unreadable settings file %s: %s", self.settings_path, e)
            return merged
        if isinstance(stored, dict):
            merged.update({k: v for k, v in stored.items() if k in DEFAULT_SETTINGS})
        return merged

    def save_settings_file(self, d: Optional[Dict[str, Any]] = None) -> bool:
        try:
            with open(self.settings_path, "w", encoding="utf-8") as f:
                json.dump(self.settings if d is None else d, f, indent=2)
            return True
        except Exception as e:
            logger.error("Failed to save settings: %s", e)
            return False

    def get(self, key: str, override: Any = None) -> Any:
        """``override`` (a CLI flag) wins over the stored value."""
        if override is not None:
            return override
        return self.settings.get(key, DEFAULT_SETTINGS.get(key))

    def set(self, key: str, value: Any) -> None:
        if key not in DEFAULT_SETTINGS:
            raise KeyError(f"Unknown setting: {key}")
        self.settings[key] = value

    def output_dir(self, override: Optional[str] = None) -> str:
        return override or os.environ.get(OUT_DIR_ENV) or self.get("output_dir")
