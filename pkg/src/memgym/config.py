"""Run settings: INI config file plus command-line overrides."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import StorageError, UsageError
from .model import GenConfig

PRESETS = ("base", "extra")


@dataclass
class BackendSettings:
    mode: str = "scripted"
    chat_model: str = "gpt-4.1"
    embed_model: str = "text-embedding-3-small"
    user_model: str = ""
    base_url: str = ""
    timeout_s: float = 120.0
    max_attempts: int = 3

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class Settings:
    preset: str = "base"
    gen_overrides: dict = field(default_factory=dict)
    backend: BackendSettings = field(default_factory=BackendSettings)
    agent: dict = field(default_factory=dict)
    source: str = "defaults"

    def gen_config(self) -> GenConfig:
        return GenConfig.preset(self.preset, **self.gen_overrides)

    def to_dict(self) -> dict:
        return {"preset": self.preset, "gen_overrides": dict(self.gen_overrides),
                "backend": self.backend.to_dict(), "agent": dict(self.agent), "source": self.source}


_GEN_INT_KEYS = {f.name for f in fields(GenConfig) if f.type in ("int", "int | None")}


def _coerce(value: str, like):
    if isinstance(like, bool):
        return value.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(like, int):
        return int(value)
    if isinstance(like, float):
        return float(value)
    return value


def load_settings(choice: str | None) -> Settings:
    """``choice`` is a preset name, a path to an INI file, or None for defaults."""
    if choice is None:
        return Settings()
    if choice in PRESETS:
        return Settings(preset=choice, source=f"preset:{choice}")
    path = Path(choice)
    if not path.is_file():
        raise UsageError(f"--config {choice!r} is neither a preset ({', '.join(PRESETS)}) nor a readable file")
    parser = configparser.ConfigParser()
    try:
        parser.read(path, encoding="utf-8")
    except (OSError, configparser.Error) as exc:
        raise StorageError(f"cannot parse config file {path}: {exc}") from exc
    settings = Settings(source=str(path))
    if parser.has_section("gen"):
        for key, value in parser.items("gen"):
            if key == "preset":
                if value not in PRESETS:
                    raise UsageError(f"unknown preset {value!r} in {path}")
                settings.preset = value
            elif key in _GEN_INT_KEYS:
                settings.gen_overrides[key] = int(value)
            elif key == "language":
                settings.gen_overrides[key] = value
            else:
                raise UsageError(f"unknown [gen] key {key!r} in {path}")
    if parser.has_section("backend"):
        defaults = BackendSettings()
        for key, value in parser.items("backend"):
            if not hasattr(defaults, key):
                raise UsageError(f"unknown [backend] key {key!r} in {path}")
            setattr(settings.backend, key, _coerce(value, getattr(defaults, key)))
    if parser.has_section("agent"):
        for key, value in parser.items("agent"):
            if key not in ("kind", "freq", "ns", "topk", "token_budget"):
                raise UsageError(f"unknown [agent] key {key!r} in {path}")
            settings.agent[key] = value if key == "kind" else int(value)
    if settings.backend.mode not in ("scripted", "live"):
        raise UsageError(f"backend mode must be scripted or live, got {settings.backend.mode!r}")
    return settings
