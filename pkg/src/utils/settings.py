#!/usr/bin/env python3

import json
import os
from typing import Optional

from utils.logger import LogLevel, Logger

CONFIG_DIR = os.environ.get("XDG_CONFIG_HOME", os.path.expanduser("~/.config"))
CONFIG_PATH = os.path.join(CONFIG_DIR, "maxmin-alloc")
SETTINGS_FILE = os.path.join(CONFIG_PATH, "settings.json")

DEFAULT_SETTINGS = {
    "guard_nonzeros": 2_000_000,
    "retry_cap": 32,
    "lp_tolerance": 1e-9,
    "brute_guard": 10_000_000,
    "pricing_guard": 1_000_000,
    "subset_sum_cap": 100_000,
    "vector_guard": 200_000,
    "bench_dir": "bench-out",
}

# ? environment variable -> (settings key, parser)
ENV_OVERRIDES = {
    "MAXMIN_GUARD_NONZEROS": ("guard_nonzeros", int),
}


def ensure_config_dir(logging: Logger, path: str = CONFIG_PATH) -> None:
    """Ensure the config directory exists

    Args:
        logging (Logger): Logger instance
        path (str): directory to create
    """
    try:
        logging.log(LogLevel.Debug, f"Ensuring config directory exists at {path}")
        os.makedirs(path, exist_ok=True)
    except Exception as e:
        logging.log(LogLevel.Error, f"Error creating config directory: {e}")


def apply_env_overrides(settings: dict, logging: Logger) -> dict:
    for var, (key, cast) in ENV_OVERRIDES.items():
        raw = os.environ.get(var)
        if raw is None:
            continue
        try:
            settings[key] = cast(raw)
            logging.log(LogLevel.Info, f"{var} overrides {key} = {settings[key]}")
        except ValueError:
            logging.log(LogLevel.Warn, f"Ignoring {var}={raw!r}: not a valid {cast.__name__}")
    return settings


def load_settings(logging: Logger, path: Optional[str] = None) -> dict:
    """Load settings from the settings file with validation

    Missing keys are filled from DEFAULT_SETTINGS, then environment
    overrides are applied on top.
    """
    settings_file = path or SETTINGS_FILE
    if path is None:
        ensure_config_dir(logging)
    defaults = dict(DEFAULT_SETTINGS)

    if not os.path.exists(settings_file):
        logging.log(LogLevel.Debug, "Using default settings (file not found)")
        return apply_env_overrides(defaults, logging)

    try:
        with open(settings_file, "r") as f:
            settings = json.load(f)
            logging.log(LogLevel.Info, f"Loaded settings from {settings_file}")

        if not isinstance(settings, dict):
            logging.log(LogLevel.Warn, "Invalid settings format - using defaults")
            return apply_env_overrides(defaults, logging)

        for key, value in defaults.items():
            if key not in settings:
                settings[key] = value
                logging.log(LogLevel.Debug, f"Added missing setting: {key}")
            elif not isinstance(settings[key], type(value)) and not (
                isinstance(value, float) and isinstance(settings[key], int)
            ):
                logging.log(LogLevel.Warn, f"Setting {key} has the wrong type, using {value}")
                settings[key] = value

        return apply_env_overrides(settings, logging)

    except Exception as e:
        logging.log(LogLevel.Error, f"Error loading settings: {e}")
        return apply_env_overrides(defaults, logging)


def save_settings(settings: dict, logging: Logger, path: Optional[str] = None) -> bool:
    """Save settings to the settings file with atomic write and validation"""
    settings_file = path or SETTINGS_FILE
    temp_path = settings_file + ".tmp"
    try:
        ensure_config_dir(logging, os.path.dirname(settings_file) or ".")

        if not isinstance(settings, dict):
            logging.log(LogLevel.Error, "Invalid settings - not a dictionary")
            return False

        for key, value in DEFAULT_SETTINGS.items():
            settings.setdefault(key, value)

        with open(temp_path, "w") as f:
            json.dump(settings, f, indent=4)

        with open(temp_path, "r") as f:
            json.load(f)

        os.replace(temp_path, settings_file)
        logging.log(LogLevel.Info, f"Settings saved successfully to {settings_file}")
        return True

    except Exception as e:
        logging.log(LogLevel.Error, f"Error saving settings: {e}")
        try:
            if os.path.exists(temp_path):
                os.unlink(temp_path)
        except OSError:
            pass
        return False
