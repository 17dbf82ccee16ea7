"""
Run Configuration - Quartet

Loads config/default_config.json, repairs missing keys from built-in
defaults, merges CLI overrides and parses sweep ranges.
"""

import copy
import json
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from core.errors import DomainError

logger = logging.getLogger('quartet.run_config')

DEFAULT_CONFIG: Dict[str, Any] = {
    'trajectory': {
        'half_span': 20.0,
        'n': 4001,
    },
    'fluctuations': {
        'half_span': 30.0,
        'n': 6001,
        'eps_schedule': [1e-4, 1e-3, 1e-2],
        'rescale_threshold': 1e100,
        'saturation_tol': 1e-8,
    },
    'schrodinger': {
        'extent': 3.0,
        'n': 301,
        'spacing_gate': 0.1,
        'eig_tol': 1e-13,
        'maxiter': None,
        'seed': 0,
    },
    'sweeps': {
        'workers': 0,
    },
    'cache': {
        'enabled': True,
        'db_path': 'data/databases/quartet.db',
    },
    'output': {
        'format': 'csv',
        'dir': 'output',
    },
}

OUTPUT_FORMATS = ('csv', 'json')


def repair_config(cfg: dict) -> dict:
    """Fill every key missing from cfg with its built-in default."""

    def _fill(base, defs, path):
        for k, v in defs.items():
            if k not in base:
                base[k] = copy.deepcopy(v)
                logger.info(f"✓ Config repair: restored missing key '{path}{k}'")
            elif isinstance(v, dict) and isinstance(base.get(k), dict):
                _fill(base[k], v, f"{path}{k}.")

    _fill(cfg, DEFAULT_CONFIG, '')
    return cfg


def deep_merge(base: dict, patch: dict) -> dict:
    """Recursively merge patch into base, returning base."""
    for key, val in patch.items():
        if isinstance(val, dict) and isinstance(base.get(key), dict):
            deep_merge(base[key], val)
        else:
            base[key] = val
    return base


def default_config_path(base_dir: str) -> str:
    return os.path.join(base_dir, 'config', 'default_config.json')


def load_config(path: Optional[str] = None) -> dict:
    """Read a JSON config; a missing file falls back to the built-in defaults."""
    if path and os.path.exists(path):
        with open(path, 'r') as f:
            try:
                cfg = json.load(f)
            except json.JSONDecodeError as e:
                raise DomainError(f"config {path} is not valid JSON: {e}", ['config']) from e
        if not isinstance(cfg, dict):
            raise DomainError(f"config {path} must hold a JSON object", ['config'])
    else:
        if path:
            logger.warning(f"config file {path} not found, using built-in defaults")
        cfg = {}
    return repair_config(cfg)


def parse_range(text: str) -> List[float]:
    """
    'start:stop:count' -> count evenly spaced values, endpoints included.
    A bare number or a comma list is taken literally.
    """
    text = str(text).strip()
    if not text:
        raise DomainError("empty range", ['range'])
    try:
        if ':' in text:
            parts = text.split(':')
            if len(parts) != 3:
                raise DomainError(f"range {text!r} must look like start:stop:count", ['range'])
            start, stop = float(parts[0]), float(parts[1])
            count = int(parts[2])
            if count < 1:
                raise DomainError(f"range {text!r} needs a positive count", ['range'])
            values = np.linspace(start, stop, count).tolist()
        else:
            values = [float(v) for v in text.split(',') if v.strip()]
    except DomainError:
        raise
    except ValueError as e:
        raise DomainError(f"cannot parse range {text!r}: {e}", ['range']) from e
    if not values:
        raise DomainError(f"range {text!r} is empty", ['range'])
    if not all(math.isfinite(v) for v in values):
        raise DomainError(f"range {text!r} has non-finite values", ['range'])
    return values


@dataclass
class RunConfig:
    """One CLI invocation: the command, its parameters and the merged settings."""

    command: str
    params: Dict[str, Any] = field(default_factory=dict)
    settings: Dict[str, Any] = field(default_factory=lambda: copy.deepcopy(DEFAULT_CONFIG))
    output_dir: str = 'output'
    output_format: str = 'csv'
    seed: int = 0
    workers: int = 0

    def __post_init__(self):
        if self.output_format not in OUTPUT_FORMATS:
            raise DomainError(f"output format must be one of {OUTPUT_FORMATS}, got {self.output_format!r}",
                              ['format'])
        if self.workers < 0:
            raise DomainError(f"workers must be >= 0, got {self.workers}", ['workers'])

    @classmethod
    def from_args(cls, command: str, params: Dict[str, Any], settings: dict,
                  out: Optional[str] = None, fmt: Optional[str] = None,
                  seed: Optional[int] = None, workers: Optional[int] = None) -> 'RunConfig':
        """CLI values win over the config file; None means 'not given'."""
        settings = repair_config(copy.deepcopy(settings))
        overrides: Dict[str, Any] = {}
        if out is not None:
            overrides.setdefault('output', {})['dir'] = out
        if fmt is not None:
            overrides.setdefault('output', {})['format'] = fmt
        if seed is not None:
            overrides.setdefault('schrodinger', {})['seed'] = seed
        if workers is not None:
            overrides.setdefault('sweeps', {})['workers'] = workers
        deep_merge(settings, overrides)
        return cls(command=command, params=dict(params), settings=settings,
                   output_dir=settings['output']['dir'],
                   output_format=settings['output']['format'],
                   seed=int(settings['schrodinger']['seed']),
                   workers=int(settings['sweeps']['workers']))

    def section(self, name: str) -> Dict[str, Any]:
        return self.settings.get(name, {})

    def ensure_output_dir(self) -> str:
        try:
            os.makedirs(self.output_dir, exist_ok=True)
        except OSError as e:
            raise DomainError(f"cannot create output directory {self.output_dir}: {e}", ['out']) from e
        if not os.access(self.output_dir, os.W_OK):
            raise DomainError(f"output directory {self.output_dir} is not writable", ['out'])
        return self.output_dir

    def to_dict(self) -> Dict[str, Any]:
        return {'command': self.command, 'params': self.params, 'settings': self.settings,
                'output_dir': self.output_dir, 'output_format': self.output_format,
                'seed': self.seed, 'workers': self.workers}
