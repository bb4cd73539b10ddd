"""
Configuration Manager for spconv
Handles loading and saving settings files and resolving the effective settings
"""

import json
import os
import pathlib
import logging
from dataclasses import dataclass, asdict, fields
from typing import Dict, Any, Optional

import psutil
import yaml

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_FILE = "spconv.yaml"
THREADS_ENV_VAR = "SPCONV_THREADS"


@dataclass
class Settings:
    """Effective settings used by the library and the CLI"""

    dense_column_cap: int = 16384
    cli_power_iters: int = 1
    clip_delta: float = 1.0
    clip_every: int = 100
    threads: int = 0
    log_file: Optional[str] = None
    log_level: str = "INFO"
    rel_tol: float = 1e-8
    abs_floor: float = 1e-2

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Settings":
        """Build settings from a mapping, ignoring unknown keys"""
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            logger.warning(f"Ignoring unknown settings: {', '.join(unknown)}")
        return cls(**{k: v for k, v in data.items() if k in known})

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def worker_count(self) -> int:
        """Resolve `threads` (0 = auto) to a positive worker count"""
        if self.threads > 0:
            return self.threads
        return psutil.cpu_count(logical=False) or psutil.cpu_count() or 1


class ConfigManager:
    """Manages application configuration"""

    def __init__(self, config_dir: str = "config"):
        self.config_dir = pathlib.Path(config_dir)

    def load_json(self, filename: str, default: Optional[Dict] = None) -> Dict[str, Any]:
        """Load JSON configuration file"""
        filepath = self.config_dir / filename

        try:
            if filepath.exists():
                with open(filepath, 'r', encoding='utf-8') as f:
                    return json.load(f)
            else:
                logger.warning(f"Config file not found: {filename}, using default")
                return default or {}
        except Exception as e:
            logger.error(f"Error loading {filename}: {e}")
            return default or {}

    def save_json(self, filename: str, data: Dict[str, Any]) -> bool:
        """Save data to JSON configuration file"""
        filepath = self.config_dir / filename

        try:
            self.config_dir.mkdir(parents=True, exist_ok=True)
            with open(filepath, 'w', encoding='utf-8') as f:
                json.dump(data, f, indent=2, ensure_ascii=False)
            logger.info(f"Saved configuration to {filename}")
            return True
        except Exception as e:
            logger.error(f"Error saving {filename}: {e}")
            return False

    def load_yaml(self, filename: str, default: Optional[Dict] = None) -> Dict[str, Any]:
        """Load YAML configuration file"""
        filepath = self.config_dir / filename

        try:
            if filepath.exists():
                with open(filepath, 'r', encoding='utf-8') as f:
                    return yaml.safe_load(f) or {}
            else:
                logger.warning(f"Config file not found: {filename}, using default")
                return default or {}
        except Exception as e:
            logger.error(f"Error loading {filename}: {e}")
            return default or {}

    def save_yaml(self, filename: str, data: Dict[str, Any]) -> bool:
        """Save data to YAML configuration file"""
        filepath = self.config_dir / filename

        try:
            self.config_dir.mkdir(parents=True, exist_ok=True)
            with open(filepath, 'w', encoding='utf-8') as f:
                yaml.safe_dump(data, f, sort_keys=False)
            logger.info(f"Saved configuration to {filename}")
            return True
        except Exception as e:
            logger.error(f"Error saving {filename}: {e}")
            return False

    def load(self, filename: str = DEFAULT_CONFIG_FILE) -> Dict[str, Any]:
        """Load a settings file, picking the format from its suffix"""
        if pathlib.Path(filename).suffix.lower() in (".yaml", ".yml"):
            return self.load_yaml(filename, {})
        return self.load_json(filename, {})

    def get_settings(self, filename: str = DEFAULT_CONFIG_FILE,
                     overrides: Optional[Dict[str, Any]] = None) -> Settings:
        """
        Resolve effective settings

        Precedence: defaults < settings file < environment < overrides.

        Args:
            filename: Settings file inside the config directory
            overrides: Values from the command line (None entries are skipped)

        Returns:
            Settings instance
        """
        if (self.config_dir / filename).exists() or filename != DEFAULT_CONFIG_FILE:
            data = dict(self.load(filename))
        else:
            logger.debug(f"No settings file at {self.config_dir / filename}; using defaults")
            data = {}

        env_threads = os.environ.get(THREADS_ENV_VAR)
        if env_threads:
            try:
                data["threads"] = int(env_threads)
            except ValueError:
                logger.warning(f"Ignoring non-integer {THREADS_ENV_VAR}={env_threads!r}")

        for key, value in (overrides or {}).items():
            if value is not None:
                data[key] = value

        return Settings.from_dict(data)

    def save_settings(self, settings: Settings, filename: str = DEFAULT_CONFIG_FILE) -> bool:
        """Write settings back to disk"""
        if pathlib.Path(filename).suffix.lower() in (".yaml", ".yml"):
            return self.save_yaml(filename, settings.to_dict())
        return self.save_json(filename, settings.to_dict())
