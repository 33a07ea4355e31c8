"""Service and CLI configuration: file values with environment overrides.

The pseudonymization salt is resolved from the environment or a key file and
is never logged or written into any snapshot.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, replace
from pathlib import Path

from . import wire

ENV_PREFIX = "ADVISOR_"


@dataclass(frozen=True)
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8080
    store_path: str = "advisor_store"
    salt_env: str = "ADVISOR_SALT"
    salt_file: str | None = None
    t_low: float = 0.55
    t_high: float = 0.85


def load_config(path=None, env=None) -> ServiceConfig:
    env = os.environ if env is None else env
    cfg = ServiceConfig()
    if path is not None:
        data = wire.load(path)
        cfg = replace(
            cfg,
            **{k: v for k, v in data.items() if k in ServiceConfig.__dataclass_fields__},
        )
    overrides = {}
    for key, cast in (
        ("host", str),
        ("port", int),
        ("store_path", str),
        ("salt_file", str),
        ("t_low", float),
        ("t_high", float),
    ):
        raw = env.get(ENV_PREFIX + key.upper())
        if raw is not None:
            overrides[key] = cast(raw)
    return replace(cfg, **overrides) if overrides else cfg


def resolve_salt(cfg: ServiceConfig, env=None) -> bytes | None:
    """Environment variable first, then key file; None when unset."""
    env = os.environ if env is None else env
    value = env.get(cfg.salt_env)
    if value:
        return value.encode()
    if cfg.salt_file and Path(cfg.salt_file).exists():
        return Path(cfg.salt_file).read_bytes().strip() or None
    return None
