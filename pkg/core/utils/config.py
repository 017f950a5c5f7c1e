#!/usr/bin/env python3
"""
Configuration loading for BugForge.

Defaults are merged with an optional YAML file (``~/.bugforge/config.yaml``
unless another path is given) and with environment variables, which may
come from a ``.env`` file.
"""

import os
import copy
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import yaml

try:
    from dotenv import load_dotenv
except ImportError:
    def load_dotenv(*args, **kwargs):
        return False

from core.utils.common import VulnClass

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = os.path.expanduser("~/.bugforge/config.yaml")

DEFAULT_CONFIG: Dict[str, Any] = {
    "analysis": {
        "max_depth": 64,
        "max_paths": 256,
        "cfg_path_limit": 1000,
        "corridor_limit": 1000,
        "memoize": True,
        "sink_classes": [c.value for c in VulnClass],
        "summary_files": [],
        "error_value_pattern": r"err|fail|status",
    },
    "instrument": {
        "magic_constants": [0xDEADC0DE, 0xCAFEBABE, 0x5EED5EED],
    },
    "report": {
        "include_timings": False,
    },
    "verify": {
        "compiler": None,
        "run_timeout": 10,
        "cflags": ["-O0", "-g", "-w"],
    },
    "seed": None,
    "output_dir": "out",
}


def _merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _merge(base[key], value)
        else:
            base[key] = value
    return base


def load_config(path: Optional[str] = None) -> Dict[str, Any]:
    """Load configuration from a YAML file merged over the defaults.

    Args:
        path: Explicit config file; the per-user file is used when omitted.

    Returns:
        Dict[str, Any]: merged configuration. A missing or unreadable file
        leaves the defaults untouched.
    """
    load_dotenv()
    config = copy.deepcopy(DEFAULT_CONFIG)
    config_path = path or DEFAULT_CONFIG_PATH

    if os.path.exists(config_path):
        try:
            with open(config_path, 'r', encoding='utf-8') as f:
                user_config = yaml.safe_load(f) or {}
            if not isinstance(user_config, dict):
                raise ValueError("top-level YAML value must be a mapping")
            _merge(config, user_config)
            logger.debug(f"Loaded config from {config_path}")
        except Exception as e:
            logger.warning(f"Could not load config {config_path}: {e}")
    elif path:
        logger.warning(f"Config file not found: {path}")

    if config.get("seed") is None:
        env_seed = os.getenv("BUGFORGE_SEED")
        if env_seed:
            try:
                config["seed"] = int(env_seed, 0)
            except ValueError:
                logger.warning(f"Ignoring non-integer BUGFORGE_SEED={env_seed!r}")

    if not config["verify"].get("compiler"):
        config["verify"]["compiler"] = os.getenv("BUGFORGE_CC") or os.getenv("CC") or "cc"

    return config


@dataclass
class AnalysisConfig:
    """Budgets and switches consumed by the analysis modules."""
    max_depth: int = 64
    max_paths: int = 256
    cfg_path_limit: int = 1000
    corridor_limit: int = 1000
    memoize: bool = True
    sink_classes: Tuple[VulnClass, ...] = tuple(VulnClass)
    summary_files: List[str] = field(default_factory=list)
    error_value_pattern: str = r"err|fail|status"
    magic_constants: Tuple[int, ...] = (0xDEADC0DE, 0xCAFEBABE, 0x5EED5EED)
    include_timings: bool = False

    @classmethod
    def from_config(cls, config: Dict[str, Any]) -> "AnalysisConfig":
        analysis = config.get("analysis", {})
        instrument = config.get("instrument", {})
        return cls(
            max_depth=int(analysis.get("max_depth", 64)),
            max_paths=int(analysis.get("max_paths", 256)),
            cfg_path_limit=int(analysis.get("cfg_path_limit", 1000)),
            corridor_limit=int(analysis.get("corridor_limit", 1000)),
            memoize=bool(analysis.get("memoize", True)),
            sink_classes=parse_sink_classes(analysis.get("sink_classes")),
            summary_files=list(analysis.get("summary_files") or []),
            error_value_pattern=analysis.get("error_value_pattern", r"err|fail|status"),
            magic_constants=tuple(int(c) for c in instrument.get(
                "magic_constants", (0xDEADC0DE, 0xCAFEBABE, 0x5EED5EED))),
            include_timings=bool(config.get("report", {}).get("include_timings", False)),
        )


def parse_sink_classes(value: Any) -> Tuple[VulnClass, ...]:
    """Accept a CSV string or a list of class names; ``None`` means all classes."""
    if value is None:
        return tuple(VulnClass)
    if isinstance(value, str):
        value = [v for v in (p.strip() for p in value.split(",")) if v]

    lookup = {c.value.lower(): c for c in VulnClass}
    lookup.update({c.name.lower(): c for c in VulnClass})
    classes = []
    for name in value:
        key = str(name).strip().lower()
        if key not in lookup:
            raise ValueError(f"Unknown sink class: {name}. "
                             f"Supported classes: {[c.value for c in VulnClass]}")
        if lookup[key] not in classes:
            classes.append(lookup[key])
    return tuple(classes)
