"""Run configuration: a JSON file whose keys mirror :class:`RunConfig`, plus flag overrides."""

from __future__ import annotations

import dataclasses
import json
import warnings
from dataclasses import dataclass
from pathlib import Path

from .evaluator import SHIPPED_FEATURES_SHA256
from .gateway import MODES, Gateway
from .refine import RefineConfig

__all__ = ["RunConfig", "ConfigError", "load_config", "make_gateway"]


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    generator_model_id: str = "gemini-2.5-pro"
    judge_model_id: str = "o3"
    seed: int = 0
    user_constraint: str = ""
    refine_threshold: int = 9
    refine_max_iterations: int = 10
    gateway_mode: str = "live"
    fixtures_path: str | None = None
    output_dir: str = "out"
    n_languages: int = 1
    independent_translation: bool = True
    jobs: int = 1
    backend: str = "http"  # "http" or "synthetic"
    lexicon_size: int = 50
    max_retries: int = 3
    per_section: int = 5
    features_path: str | None = None
    features_checksum: str = SHIPPED_FEATURES_SHA256
    sentences_path: str | None = None

    def validate(self) -> "RunConfig":
        if self.gateway_mode not in MODES:
            raise ConfigError(f"gateway_mode must be one of {MODES}, got {self.gateway_mode!r}")
        if self.gateway_mode in ("record", "replay") and not self.fixtures_path:
            raise ConfigError(f"{self.gateway_mode} mode requires fixtures_path")
        if self.gateway_mode == "replay" and not Path(self.fixtures_path).is_file():
            raise ConfigError(f"fixtures file {self.fixtures_path} does not exist")
        if self.backend not in ("http", "synthetic"):
            raise ConfigError(f"backend must be 'http' or 'synthetic', got {self.backend!r}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.n_languages < 1 or self.jobs < 1:
            raise ConfigError("n_languages and jobs must be >= 1")
        try:
            self.refine_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.judge_model_id == self.generator_model_id:
            warnings.warn(
                f"judge model equals generator model ({self.judge_model_id}); evaluation may be biased",
                stacklevel=2,
            )
        return self

    def refine_config(self) -> RefineConfig:
        return RefineConfig(self.refine_threshold, self.refine_max_iterations, max_retries=self.max_retries)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_PATH_KEYS = ("fixtures_path", "sentences_path", "features_path")


def load_config(path=None, **overrides) -> RunConfig:
    """Build a config from an optional JSON file; non-``None`` overrides win."""
    data = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected an object")
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for key in _PATH_KEYS:
        # Relative paths inside a config file are relative to that file.
        if path is not None and data.get(key) and not Path(data[key]).is_absolute():
            data[key] = str(Path(path).parent / data[key])
    data.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**data)


def make_gateway(config: RunConfig, backend=None) -> Gateway:
    if backend is None and config.gateway_mode != "replay":
        if config.backend == "synthetic":
            from .testing import SyntheticModel

            backend = SyntheticModel()
        else:
            from .providers import default_backend

            backend = default_backend()
    return Gateway(
        backend=backend,
        mode=config.gateway_mode,
        fixtures_path=config.fixtures_path,
        model_id=config.generator_model_id,
        max_in_flight=config.jobs,
    )
