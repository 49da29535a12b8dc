#!/usr/bin/env python3
"""
Configuration loader for box-sensitivity runs.
Loads run defaults from a config.env file.
"""

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

from dotenv import dotenv_values

from ..exceptions import ValidationError

CONFIG_FILE_NAME = "config.env"


@dataclass(frozen=True)
class RunDefaults:
    """Values used when a command-line flag is not given"""
    seed: int = 0
    threads: int = os.cpu_count() or 1
    output_dir: Path = Path("results")
    sweep_offsets: str = "0..10"
    proportional_offsets: str = "0..1:0.1"
    synthetic_count: int = 1000
    synthetic_size_range: Tuple[float, float] = (4.0, 256.0)


def find_config_file(start: Optional[Path] = None) -> Optional[Path]:
    """
    Look for config.env in `start` (default: cwd) and up to 3 levels up.

    Returns:
        Path or None: first config.env found
    """
    current_dir = Path(start) if start else Path.cwd()
    for _ in range(4):
        potential_config = current_dir / CONFIG_FILE_NAME
        if potential_config.exists():
            return potential_config
        current_dir = current_dir.parent
    return None


def load_config(path: Optional[Union[str, Path]] = None) -> Dict[str, str]:
    """
    Load configuration from a config.env file.

    An explicit path must exist; without one the file is searched for and a
    missing file yields an empty configuration. Blank values are dropped.

    Raises:
        FileNotFoundError: If an explicit config path does not exist
    """
    if path is not None:
        config_file = Path(path)
        if not config_file.exists():
            raise FileNotFoundError(f"Config file not found: {config_file}")
    else:
        config_file = find_config_file()
        if config_file is None:
            return {}

    values = dotenv_values(config_file)
    return {key: value.strip() for key, value in values.items() if value is not None and value.strip()}


def _typed(config: Dict[str, str], key: str, cast, default):
    raw = config.get(key)
    if raw is None:
        return default
    try:
        return cast(raw)
    except ValueError:
        raise ValidationError(f"Invalid value for {key} in config: {raw!r}", [key])


def get_run_defaults(config: Optional[Dict[str, str]] = None) -> RunDefaults:
    """
    Typed run defaults from a loaded configuration.

    Raises:
        ValidationError: If a value cannot be converted
    """
    config = config if config is not None else load_config()
    base = RunDefaults()

    threads = _typed(config, "THREADS", int, base.threads)
    if threads < 1:
        raise ValidationError(f"THREADS must be at least 1, got {threads}", ["THREADS"])
    count = _typed(config, "SYNTHETIC_COUNT", int, base.synthetic_count)
    if count < 1:
        raise ValidationError(f"SYNTHETIC_COUNT must be at least 1, got {count}", ["SYNTHETIC_COUNT"])

    return RunDefaults(
        seed=_typed(config, "SEED", int, base.seed),
        threads=threads,
        output_dir=Path(config.get("OUTPUT_DIR", base.output_dir)),
        sweep_offsets=config.get("SWEEP_OFFSETS", base.sweep_offsets),
        proportional_offsets=config.get("PROPORTIONAL_OFFSETS", base.proportional_offsets),
        synthetic_count=count,
        synthetic_size_range=(
            _typed(config, "SYNTHETIC_MIN_SIZE", float, base.synthetic_size_range[0]),
            _typed(config, "SYNTHETIC_MAX_SIZE", float, base.synthetic_size_range[1]),
        ),
    )


if __name__ == "__main__":
    # Show the effective configuration
    try:
        config_path = find_config_file()
        defaults = get_run_defaults(load_config())
        print(f"✅ Configuration loaded from {config_path or 'built-in defaults'}")
        print(f"🎲 Seed: {defaults.seed}")
        print(f"🧵 Threads: {defaults.threads}")
        print(f"📁 Output dir: {defaults.output_dir}")
        print(f"📐 Sweep offsets: {defaults.sweep_offsets}")
        print(f"📐 Proportional offsets: {defaults.proportional_offsets}")
        print(f"📦 Synthetic boxes: {defaults.synthetic_count} in {defaults.synthetic_size_range} px")
    except Exception as e:
        print(f"❌ Error loading configuration: {e}")
        exit(1)
