"""Application configuration.

Values resolve in order: command-line flags, then ``STYLERAG_*`` environment
variables, then a config file, then built-in defaults.  The config file is
plain ``key = value`` text; ``#`` starts a comment and keys are the field
names of :class:`AppConfig`::

    # stylerag.conf
    dim = 128
    n_clusters = 48
    embedder_address = http://127.0.0.1:9000
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, fields
from typing import Any, Mapping

ENV_PREFIX = "STYLERAG_"


@dataclass(frozen=True)
class AppConfig:
    db_dir: str = "styledb"
    dim: int = 256
    index_mode: str = "clustered"
    n_clusters: int | None = None  # None: ceil(sqrt(record count))
    probes: int | None = None  # None: ceil(sqrt(n_clusters))
    seed: int = 0
    max_iters: int = 25
    normalize: bool = False
    quality_threshold: float = 0.6
    k: int = 3
    window: int = 5
    embed_seed: int = 0
    embedder_address: str | None = None  # None: in-process reference embedders
    embedder_timeout_ms: int = 5000
    synthesizer_address: str | None = None  # None: mock synthesizer
    listen: str = "127.0.0.1:8080"
    scripts_dir: str | None = None
    workers: int = 1
    log_level: str = "INFO"

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.index_mode not in ("exact", "clustered"):
            raise ValueError(f"index_mode must be exact or clustered, got {self.index_mode!r}")


_FIELDS = {f.name: f for f in fields(AppConfig)}


def _coerce(name: str, raw: Any) -> Any:
    if raw is None:
        return None
    default = _FIELDS[name].default
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    if text.lower() in ("", "none", "null") and default is None:
        return None
    if isinstance(default, bool):
        return text.lower() in ("1", "true", "yes", "on")
    if name in ("dim", "n_clusters", "probes", "seed", "max_iters", "k", "window",
                "embed_seed", "embedder_timeout_ms", "workers"):
        return int(text)
    if name == "quality_threshold":
        return float(text)
    return text


def read_config_file(path: str) -> dict[str, Any]:
    out: dict[str, Any] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in _FIELDS:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            out[key] = _coerce(key, value)
    return out


def read_env(env: Mapping[str, str]) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for name in _FIELDS:
        key = ENV_PREFIX + name.upper()
        if key in env:
            out[name] = _coerce(name, env[key])
    return out


def load_config(
    flags: Mapping[str, Any] | None = None,
    env: Mapping[str, str] | None = None,
    config_path: str | None = None,
) -> AppConfig:
    """Merge the layers; ``None`` flag values count as "not given"."""
    env = os.environ if env is None else env
    config_path = config_path or env.get(ENV_PREFIX + "CONFIG")
    merged: dict[str, Any] = {}
    if config_path:
        merged.update(read_config_file(config_path))
    merged.update(read_env(env))
    merged.update({k: _coerce(k, v) for k, v in (flags or {}).items() if v is not None and k in _FIELDS})
    return AppConfig(**merged)


def replace(config: AppConfig, **changes: Any) -> AppConfig:
    return dataclasses.replace(config, **changes)
