"""
Configuration management utilities.

The configuration is a flat key/value document in YAML or JSON. Values are
resolved from built-in defaults, then the config file, then environment
variables, then explicit updates (CLI flags).
"""

import os
from pathlib import Path
from typing import Any, Dict, Optional

import yaml

from ..collectors.event_log import CsvDescriptor
from ..nn.model import ModelConfig
from ..nn.pos_encoding import PEMode
from ..synthetic.generator import SynthConfig
from ..training.search import SearchSpace
from ..training.trainer import TrainConfig
from .errors import ConfigurationError
from .logger import setup_logger

ENV_PREFIX = "SPE_MONITOR_"

DEFAULT_CONFIG: Dict[str, Any] = {
    # Paths and event-log columns
    "event_log": "data/event_log.csv",
    "ontology": "data/ontology.json",
    "output_dir": "results",
    "case_column": "case_id",
    "activity_column": "activity",
    "order_column": "event_index",
    # Model
    "pe": "spe",
    "d_model": 64,
    "hidden": 128,
    "heads": 4,
    "layers": 4,
    "dropout": 0.216375,
    "ffn_in_blocks": False,
    "spe_k": 32,
    # Training
    "lr": 0.002836,
    "gamma": 0.989695,
    "step_epochs": 1,
    "weight_decay": 0.01,
    "beta1": 0.9,
    "beta2": 0.999,
    "eps": 1e-8,
    "epochs": 100,
    "batch_size": 32,
    "patience": 10,
    "seed": 0,
    "n_fits": 10,
    "workers": 1,
    "ks": [1, 3, 5],
    "log_level": "INFO",
    # Synthetic data
    "synth_n_types": 22,
    "synth_activities_per_type": 4,
    "synth_n_traces": 5000,
    "synth_min_length": 2,
    "synth_max_length": 25,
    "synth_mean_length": 15.0,
    "synth_std_length": 3.0,
    "synth_uniform_mix": 0.05,
    "synth_temperature": 0.5,
    "synth_stay_bias": 2.0,
    # Hyperparameter search
    "tune_budget": 20,
    "search_lr_min": 1e-4,
    "search_lr_max": 3e-2,
}

# Environment variable suffix -> (config key, type)
ENV_KEYS = {
    "SEED": ("seed", int),
    "LOG_LEVEL": ("log_level", str),
    "OUTPUT_DIR": ("output_dir", str),
    "WORKERS": ("workers", int),
}

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


class ConfigManager:
    """Manages application configuration from files and environment variables."""

    def __init__(self, config_path: Optional[str] = None):
        """
        Initialize configuration manager.

        Args:
            config_path: Path to configuration file; standard locations are
                searched when omitted
        """
        self.logger = setup_logger(__name__)
        self.explicit = config_path is not None
        self.config_path = config_path or self._find_config_file()
        self.config = self._load_config()

    def _find_config_file(self) -> Optional[str]:
        possible_paths = [
            "config/config.yaml",
            "config.yaml",
            os.path.expanduser("~/.spe-monitor/config.yaml"),
        ]
        for path in possible_paths:
            if os.path.exists(path):
                self.logger.info(f"Found configuration file: {path}")
                return path
        self.logger.debug("No configuration file found, using defaults")
        return None

    def _read_file(self) -> Dict[str, Any]:
        if self.config_path is None:
            return {}
        path = Path(self.config_path)
        if not path.is_file():
            if self.explicit:
                raise ConfigurationError(f"Configuration file not found: {path}")
            self.logger.warning(f"Configuration file not found: {path}")
            return {}
        try:
            document = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except (yaml.YAMLError, UnicodeDecodeError) as e:
            raise ConfigurationError(f"Cannot parse configuration file {path}: {e}") from e
        if not isinstance(document, dict):
            raise ConfigurationError(f"Configuration file {path} must hold a key/value mapping")
        self.logger.info(f"Loaded configuration from {path}")
        return document

    def _load_config(self) -> Dict[str, Any]:
        config = dict(DEFAULT_CONFIG)
        config.update(self._read_file())
        config.update(self._load_from_environment())

        unknown = sorted(set(config) - set(DEFAULT_CONFIG))
        if unknown:
            self.logger.warning(f"Ignoring unknown configuration keys: {unknown}")

        self._validate_config(config)
        return config

    def _load_from_environment(self) -> Dict[str, Any]:
        env_config = {}
        for suffix, (key, cast) in ENV_KEYS.items():
            raw = os.getenv(ENV_PREFIX + suffix)
            if raw is None or raw == "":
                continue
            try:
                env_config[key] = cast(raw)
            except ValueError:
                self.logger.warning(f"Invalid {ENV_PREFIX}{suffix} value: {raw}")
        if env_config:
            self.logger.info("Loaded configuration from environment variables")
        return env_config

    def _validate_config(self, config: Dict[str, Any]):
        """
        Validate configuration values.

        Raises:
            ConfigurationError: If configuration is invalid
        """
        try:
            PEMode.parse(config["pe"])
            if config["d_model"] < 1 or config["heads"] < 1 or config["d_model"] % config["heads"]:
                raise ConfigurationError(
                    f"d_model={config['d_model']} must be divisible by heads={config['heads']}"
                )
            if config["layers"] < 1:
                raise ConfigurationError(f"layers must be at least 1, got {config['layers']}")
            if not 0 <= config["dropout"] < 1:
                raise ConfigurationError(f"dropout must be in [0, 1), got {config['dropout']}")
            if not 0 < config["gamma"] <= 1:
                raise ConfigurationError(f"gamma must be in (0, 1], got {config['gamma']}")
            if config["lr"] <= 0:
                raise ConfigurationError(f"lr must be positive, got {config['lr']}")
            if config["patience"] < 1:
                raise ConfigurationError(f"patience must be at least 1, got {config['patience']}")
            if config["spe_k"] < 1:
                raise ConfigurationError(f"spe_k must be at least 1, got {config['spe_k']}")
            if config["n_fits"] < 1 or config["workers"] < 1:
                raise ConfigurationError("n_fits and workers must be at least 1")
            if str(config["log_level"]).upper() not in LOG_LEVELS:
                raise ConfigurationError(f"Unknown log level: {config['log_level']}")
        except TypeError as e:
            raise ConfigurationError(f"Configuration value has the wrong type: {e}") from e

        self.logger.debug("Configuration validation completed")

    def get_config(self) -> Dict[str, Any]:
        return self.config.copy()

    def __getitem__(self, key: str) -> Any:
        return self.config[key]

    def update_config(self, updates: Dict[str, Any]):
        """
        Update configuration with new values; None values are ignored.

        Args:
            updates: Dictionary of configuration updates
        """
        updates = {key: value for key, value in updates.items() if value is not None}
        candidate = dict(self.config)
        candidate.update(updates)
        self._validate_config(candidate)
        self.config = candidate
        if updates:
            self.logger.debug("Configuration updated", keys=sorted(updates))

    def save_config(self, output_path: str):
        """
        Save current configuration to a YAML file that ConfigManager can load.

        Args:
            output_path: Output file path
        """
        path = Path(output_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        known = {key: self.config[key] for key in DEFAULT_CONFIG}
        path.write_text(yaml.safe_dump(known, default_flow_style=False, sort_keys=True),
                        encoding="utf-8")
        self.logger.info(f"Configuration saved to {path}")

    # Typed views

    def pe_mode(self) -> PEMode:
        return PEMode.parse(self.config["pe"])

    def model_config(self, vocab_size: int, pe=None, d_model: Optional[int] = None) -> ModelConfig:
        return ModelConfig(
            vocab_size=vocab_size,
            d_model=int(d_model or self.config["d_model"]),
            hidden=int(self.config["hidden"]),
            heads=int(self.config["heads"]),
            layers=int(self.config["layers"]),
            dropout=float(self.config["dropout"]),
            pe_mode=PEMode.parse(pe if pe is not None else self.config["pe"]),
            spe_k=int(self.config["spe_k"]),
            ffn_in_blocks=bool(self.config["ffn_in_blocks"]),
        )

    def train_config(self) -> TrainConfig:
        c = self.config
        return TrainConfig(
            lr=float(c["lr"]),
            gamma=float(c["gamma"]),
            step_epochs=int(c["step_epochs"]),
            weight_decay=float(c["weight_decay"]),
            betas=(float(c["beta1"]), float(c["beta2"])),
            eps=float(c["eps"]),
            epochs=int(c["epochs"]),
            batch_size=int(c["batch_size"]),
            patience=int(c["patience"]),
            seed=int(c["seed"]),
            ks=tuple(int(k) for k in c["ks"]),
        )

    def synth_config(self) -> SynthConfig:
        c = self.config
        return SynthConfig(
            n_types=int(c["synth_n_types"]),
            activities_per_type=int(c["synth_activities_per_type"]),
            n_traces=int(c["synth_n_traces"]),
            min_length=int(c["synth_min_length"]),
            max_length=int(c["synth_max_length"]),
            mean_length=float(c["synth_mean_length"]),
            std_length=float(c["synth_std_length"]),
            uniform_mix=float(c["synth_uniform_mix"]),
            temperature=float(c["synth_temperature"]),
            stay_bias=float(c["synth_stay_bias"]),
            seed=int(c["seed"]),
        )

    def search_space(self) -> SearchSpace:
        return SearchSpace(lr=(float(self.config["search_lr_min"]), float(self.config["search_lr_max"])))

    def csv_descriptor(self) -> CsvDescriptor:
        return CsvDescriptor(
            case_column=self.config["case_column"],
            activity_column=self.config["activity_column"],
            order_column=self.config["order_column"],
        )
