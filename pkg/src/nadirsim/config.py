"""Layered configuration: command line > config file > built-in defaults."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .errors import ConfigError
from .mission import EDGE_RULES, MAP_TYPES, SPAN_METRICS

PROVIDERS = ("google", "mock")


@dataclass(frozen=True)
class Config:
    coords: str | None = None
    fov: float = 78.8
    aspect_ratio: tuple[int, int] = (4, 3)
    map_type: str = "satellite"
    data_dir: str = "datasets"
    mission_name: str | None = None
    vmargin: float = 0.2
    img_size: tuple[int, int, int] | None = None
    overlap: float = 0.0
    seed: int = 2024
    retry: int = 3
    api_key: str | None = None
    concurrency: int = 4
    entropy_threshold: float = 2.1
    split: tuple[float, float, float] = (0.8, 0.1, 0.1)
    provider: str = "google"
    mock_density: float = 1.0
    hide_labels: bool = True
    edge_rule: str = "cover"
    span_metric: str = "utm"

    def snapshot(self) -> dict:
        """JSON-ready view with the API key redacted."""
        out = asdict(self)
        out["api_key"] = "REDACTED" if self.api_key else None
        for key in ("aspect_ratio", "img_size", "split"):
            if out[key] is not None:
                out[key] = list(out[key])
        return out


FIELD_NAMES = tuple(f.name for f in fields(Config))


def _tuple(value, n, cast, name):
    if isinstance(value, str):
        value = value.replace(",", " ").replace(":", " ").split()
    try:
        items = tuple(cast(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: expected {n} values, got {value!r}") from None
    if len(items) != n:
        raise ConfigError(f"{name}: expected {n} values, got {len(items)}")
    return items


def _coerce(cfg: Config) -> Config:
    try:
        changes = dict(
            fov=float(cfg.fov),
            aspect_ratio=_tuple(cfg.aspect_ratio, 2, int, "aspect_ratio"),
            vmargin=float(cfg.vmargin),
            overlap=float(cfg.overlap),
            seed=int(cfg.seed),
            retry=int(cfg.retry),
            concurrency=int(cfg.concurrency),
            entropy_threshold=float(cfg.entropy_threshold),
            split=_tuple(cfg.split, 3, float, "split"),
            mock_density=float(cfg.mock_density),
            img_size=None if cfg.img_size is None else _tuple(cfg.img_size, 3, int, "img_size"),
            data_dir=str(cfg.data_dir),
            hide_labels=bool(cfg.hide_labels),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad configuration value: {exc}") from None
    cfg = replace(cfg, **changes)

    problems = []
    if not 0 < cfg.fov < 180:
        problems.append(f"fov {cfg.fov} not in (0, 180)")
    if min(cfg.aspect_ratio) <= 0:
        problems.append(f"aspect_ratio {cfg.aspect_ratio} must be positive")
    if cfg.map_type not in MAP_TYPES:
        problems.append(f"map_type {cfg.map_type!r} not one of {MAP_TYPES}")
    if not 0 <= cfg.vmargin < 0.5:
        problems.append(f"vmargin {cfg.vmargin} not in [0, 0.5)")
    if not 0 <= cfg.overlap < 1:
        problems.append(f"overlap {cfg.overlap} not in [0, 1)")
    if cfg.retry < 0:
        problems.append(f"retry {cfg.retry} must be >= 0")
    if cfg.concurrency < 1:
        problems.append(f"concurrency {cfg.concurrency} must be >= 1")
    if cfg.img_size is not None and (min(cfg.img_size[:2]) < 1 or cfg.img_size[2] not in (1, 3)):
        problems.append(f"img_size {cfg.img_size} must be positive width, height and 1 or 3 channels")
    if min(cfg.split) <= 0 or abs(sum(cfg.split) - 1) > 1e-9:
        problems.append(f"split {cfg.split} must be positive and sum to 1")
    if cfg.provider not in PROVIDERS:
        problems.append(f"provider {cfg.provider!r} not one of {PROVIDERS}")
    if not 0 <= cfg.mock_density <= 1:
        problems.append(f"mock_density {cfg.mock_density} not in [0, 1]")
    if cfg.edge_rule not in EDGE_RULES:
        problems.append(f"edge_rule {cfg.edge_rule!r} not one of {EDGE_RULES}")
    if cfg.span_metric not in SPAN_METRICS:
        problems.append(f"span_metric {cfg.span_metric!r} not one of {SPAN_METRICS}")
    if problems:
        raise ConfigError("invalid configuration: " + "; ".join(problems))
    return cfg


def load_config_file(path) -> dict:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return {k.replace("-", "_"): v for k, v in data.items()}


def resolve_config(cli_args: dict | None = None, config_file: dict | None = None,
                   defaults: Config | None = None) -> Config:
    """Merge field by field; a ``None`` CLI value counts as not given."""
    file_values = dict(config_file or {})
    unknown = sorted(set(file_values) - set(FIELD_NAMES))
    if unknown:
        raise ConfigError(f"unknown keys in config file: {', '.join(unknown)}")
    cli_values = {k: v for k, v in (cli_args or {}).items() if v is not None}
    unknown = sorted(set(cli_values) - set(FIELD_NAMES))
    if unknown:
        raise ConfigError(f"unknown options: {', '.join(unknown)}")
    merged = {**file_values, **cli_values}
    return _coerce(replace(defaults or Config(), **merged))
