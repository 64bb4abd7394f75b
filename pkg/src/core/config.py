"""
Configuration loader for the numerical policy of the laboratory.

This module loads config/doslab.yaml into typed sections (tolerances,
eigensolver settings, caps, report and execution settings) and applies
DOSLAB_* environment overrides through pydantic-settings.
"""

import yaml
from typing import Dict, Any, Optional
from pathlib import Path
from dataclasses import dataclass

from pydantic_settings import BaseSettings, SettingsConfigDict


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances shared by every module."""
    hermitian_strict: float
    hermitian: float
    idempotent: float
    unitary: float
    orthonormal: float
    threshold_snap: float
    spectral_slack: float
    block_check: float
    phase_zero: float


@dataclass(frozen=True)
class EigensolverSettings:
    """Configuration for the Hermitian eigensolver."""
    method: str
    convergence_factor: float
    max_sweeps: int
    jacobi_max_dim: int


@dataclass(frozen=True)
class Caps:
    """Size limits for dense objects and path enumeration."""
    dense_dim: int
    clock_dim: int
    path_cap: int
    raw_gate_arity: int
    total_qubits: int


@dataclass(frozen=True)
class ReportSettings:
    """Configuration for report output."""
    histogram_bins: int
    json_indent: int


@dataclass(frozen=True)
class ExecutionSettings:
    """Configuration for concurrent sweeps."""
    workers: int


class DoslabSettings(BaseSettings):
    """Environment overrides (DOSLAB_PATH_CAP, DOSLAB_CONFIG, DOSLAB_LOG_LEVEL)."""

    model_config = SettingsConfigDict(env_prefix="DOSLAB_")

    path_cap: Optional[int] = None
    config: Optional[Path] = None
    log_level: str = "WARNING"


_DEFAULTS: Dict[str, Dict[str, Any]] = {
    'tolerances': {
        'hermitian_strict': 1e-12, 'hermitian': 1e-10, 'idempotent': 1e-10,
        'unitary': 1e-10, 'orthonormal': 1e-9, 'threshold_snap': 1e-9,
        'spectral_slack': 1e-9, 'block_check': 1e-10, 'phase_zero': 1e-12,
    },
    'eigensolver': {
        'method': 'jacobi', 'convergence_factor': 1e-13,
        'max_sweeps': 60, 'jacobi_max_dim': 96,
    },
    'caps': {
        'dense_dim': 4096, 'clock_dim': 5000, 'path_cap': 100_000_000,
        'raw_gate_arity': 3, 'total_qubits': 12,
    },
    'reports': {'histogram_bins': 20, 'json_indent': 2},
    'execution': {'workers': 4},
}


class ConfigLoader:
    """Loads and manages numerical configuration from YAML files."""

    def __init__(self, config_path: Optional[Path] = None, settings: Optional[DoslabSettings] = None):
        """Initialize with optional config path and environment settings."""
        self.settings = settings or DoslabSettings()

        if config_path is not None:
            self.config_path = config_path
        elif self.settings.config is not None:
            self.config_path = self.settings.config
        else:
            # Default to config/doslab.yaml in project root
            self.config_path = Path(__file__).parent.parent.parent / "config" / "doslab.yaml"

        self._config_data: Optional[Dict[str, Any]] = None

    def load_config(self) -> Dict[str, Any]:
        """Load configuration from YAML file."""
        if self._config_data is None:
            try:
                with open(self.config_path, 'r', encoding='utf-8') as file:
                    self._config_data = yaml.safe_load(file) or {}
            except FileNotFoundError:
                raise FileNotFoundError(f"Configuration file not found: {self.config_path}")
            except yaml.YAMLError as e:
                raise ValueError(f"Invalid YAML in configuration file: {e}")

        return self._config_data

    def get_tolerances(self) -> Tolerances:
        """Get numerical tolerances."""
        return Tolerances(**self._section('tolerances'))

    def get_eigensolver_settings(self) -> EigensolverSettings:
        """Get eigensolver configuration."""
        data = self._section('eigensolver')
        if data['method'] not in ('jacobi', 'lapack'):
            raise ValueError(f"Unknown eigensolver method: {data['method']}")
        return EigensolverSettings(**data)

    def get_caps(self) -> Caps:
        """Get size caps, with DOSLAB_PATH_CAP taking precedence over YAML."""
        data = self._section('caps')
        if self.settings.path_cap is not None:
            if self.settings.path_cap <= 0:
                raise ValueError(f"DOSLAB_PATH_CAP must be positive, got {self.settings.path_cap}")
            data['path_cap'] = self.settings.path_cap
        return Caps(**data)

    def get_report_settings(self) -> ReportSettings:
        """Get report output settings."""
        return ReportSettings(**self._section('reports'))

    def get_execution_settings(self) -> ExecutionSettings:
        """Get concurrency settings."""
        data = self._section('execution')
        return ExecutionSettings(workers=max(1, int(data['workers'])))

    def _section(self, name: str) -> Dict[str, Any]:
        """Merge a YAML section over its defaults, rejecting unknown keys."""
        config = self.load_config()
        section = dict(_DEFAULTS[name])
        overrides = config.get(name) or {}
        unknown = set(overrides) - set(section)
        if unknown:
            raise ValueError(f"Unknown keys in '{name}' section: {', '.join(sorted(unknown))}")
        section.update(overrides)
        return section


# Global configuration loader instance
config_loader = ConfigLoader()
