"""
Configuration loader for capture analysis
"""
import copy
from pathlib import Path
from typing import Dict, Any

import yaml
from loguru import logger


def load_config(config_path: str = "config/config.yaml") -> Dict[str, Any]:
    """
    Load configuration from YAML file

    Keys missing from the file keep their default values.

    Args:
        config_path: Path to configuration file

    Returns:
        Configuration dictionary
    """
    config_file = Path(config_path)

    if not config_file.exists():
        logger.warning(f"Config file not found: {config_path}, using defaults")
        return get_default_config()

    try:
        with open(config_file, 'r', encoding='utf-8') as f:
            config = yaml.safe_load(f) or {}
        if not isinstance(config, dict):
            raise ValueError(f"top level of {config_path} is not a mapping")
        logger.info(f"Configuration loaded from {config_path}")
        return merge_config(get_default_config(), config)
    except Exception as e:
        logger.error(f"Error loading config: {e}")
        return get_default_config()


def merge_config(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """Recursive merge; override wins, base is left untouched"""
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge_config(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def get_default_config() -> Dict[str, Any]:
    """
    Get default configuration

    Returns:
        Default configuration dictionary
    """
    return {
        "map": {
            "family": "logistic",
            "r": 3.83187405528331556841,
            "domain": [0.0, 1.0],
            "critical": 0.5,
            "check_points": 10000
        },
        "orbit": {
            "p_max": 64,
            "burn_in": 10000,
            "recurrence_tol": 1.0e-8,
            "tol_orbit": 1.0e-11,
            "interval_mode": "figure",
            "cache_maps": 8
        },
        "extrema": {
            "tol_root": 1.0e-12,
            "touch_tol": 1.0e-10,
            "max_q": 20,
            "seed_strategy": "chord",
            "newton_maxiter": 50,
            "bisect_maxiter": 200,
            "monotone_probes": 16,
            "inflection_slope_floor": 1.0e-8,
            "cache_maps": 8
        },
        "capture": {
            "slope_floor": 1.0e-8,
            "backpull_gate": 0.10,
            "tol_measure": 1.0e-12,
            "refine_crossings": True
        },
        "oracle": {
            "n_samples": 1000000,
            "rng_seed": 0xC0FFEE,
            "chunk_size": 65536,
            "grid_resolution": 1000000,
            "min_grid_resolution": 100000,
            "progress": False
        },
        "bifurcation": {
            "r_min": 2.8,
            "r_max": 4.0,
            "r_steps": 600,
            "burn_in": 10000,
            "samples": 200
        },
        "output": {
            "directory": "output",
            "format": "json"
        },
        "logging": {
            "level": "INFO",
            "file": "logs/capture_{time}.log",
            "rotation": "50 MB",
            "retention": "10 days"
        }
    }
