"""CLI configuration: JSON file plus environment overrides for endpoints.

Config file schema (all fields optional):

    {
      "overpass_url": "https://overpass-api.de/api/interpreter",
      "overpass_timeout": 30.0,
      "fan_nx": 32, "fan_ny": 18,
      "near": 0.1, "far": 500.0,
      "default_building_height": 8.0,
      "eye_height": 1.6,
      "default_hfov": 60.0,
      "host": "127.0.0.1",
      "udp_port": 47701, "ws_port": 47702,
      "assets_dir": "frontend/dist"
    }

Environment overrides: AVESCENE_OVERPASS_URL, AVESCENE_HOST,
AVESCENE_UDP_PORT, AVESCENE_WS_PORT.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ParseError
from . import jsonio
from .scene import ProjectionSettings

DEFAULT_OVERPASS_URL = "https://overpass-api.de/api/interpreter"


@dataclass
class Config:
    overpass_url: str = DEFAULT_OVERPASS_URL
    overpass_timeout: float = 30.0
    fan_nx: int = 32
    fan_ny: int = 18
    near: float = 0.1
    far: float = 500.0
    default_building_height: float = 8.0
    eye_height: float = 1.6
    default_hfov: float = 60.0
    host: str = "127.0.0.1"
    udp_port: int = 47701
    ws_port: int = 47702
    assets_dir: str | None = None

    def settings(self) -> ProjectionSettings:
        return ProjectionSettings(
            fan_nx=self.fan_nx,
            fan_ny=self.fan_ny,
            near=self.near,
            far=self.far,
            eye_height=self.eye_height,
            default_hfov=self.default_hfov,
        )


_VALIDATORS = {
    "fan_nx": lambda v: v >= 2,
    "fan_ny": lambda v: v >= 2,
    "near": lambda v: v > 0,
    "far": lambda v: v > 0,
    "default_building_height": lambda v: v > 0,
    "eye_height": lambda v: v > 0,
    "default_hfov": lambda v: 0 < v < 180,
    "udp_port": lambda v: 0 <= v <= 65535,
    "ws_port": lambda v: 0 <= v <= 65535,
    "overpass_timeout": lambda v: v > 0,
}


def load_config(path: str | Path | None = None, env: dict | None = None) -> Config:
    env = os.environ if env is None else env
    cfg = Config()
    known = {f.name: f.type for f in fields(Config)}

    if path is not None:
        doc = jsonio.loads(Path(path).read_text(), what=f"config {path}")
        if not isinstance(doc, dict):
            raise ParseError("config must be a JSON object", path="$")
        for key, value in doc.items():
            if key not in known:
                raise ParseError(f"unknown config field {key!r}", path=f"$.{key}")
            _set_field(cfg, key, value, f"config field {key!r}")

    for var, field_name in (
        ("AVESCENE_OVERPASS_URL", "overpass_url"),
        ("AVESCENE_HOST", "host"),
        ("AVESCENE_UDP_PORT", "udp_port"),
        ("AVESCENE_WS_PORT", "ws_port"),
    ):
        if var in env:
            _set_field(cfg, field_name, env[var], f"environment variable {var}")

    if cfg.near >= cfg.far:
        raise ParseError(f"config: near ({cfg.near}) must be below far ({cfg.far})")
    return cfg


def _set_field(cfg: Config, name: str, value, context: str) -> None:
    current = getattr(cfg, name)
    try:
        if name == "assets_dir":
            value = None if value is None else str(value)
        elif isinstance(current, bool):
            value = bool(value)
        elif isinstance(current, int):
            value = int(value)
        elif isinstance(current, float):
            value = float(value)
        else:
            value = str(value)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{context}: cannot convert {value!r}: {exc}") from exc
    check = _VALIDATORS.get(name)
    if check is not None and not check(value):
        raise ParseError(f"{context}: value {value!r} out of range")
    setattr(cfg, name, value)
