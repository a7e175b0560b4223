"""Pipeline configuration: a flat key=value file with CLI flag overrides.

Dotted keys address the nested bootstrap/model sections, e.g.::

    city = fixture
    checkins_path = data/checkins-fixture.csv
    pois_path = data/POI-fixture.csv
    bootstrap.replicates = 10000
    model.epochs = 5
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .durations import BootstrapConfig
from .errors import DataError
from .model import ModelConfig


class ConfigError(DataError):
    """Configuration file or override cannot be parsed."""


@dataclass(frozen=True)
class PipelineConfig:
    city: str = "city"
    checkins_path: str = "data/checkins.csv"
    pois_path: str = "data/pois.csv"
    model_path: str = "artifacts/model.bin"
    durations_path: str = "artifacts/durations.csv"
    reports_dir: str = "reports"
    split_fraction: float = 0.8
    min_pois: int = 3
    gap_hours: float = 8.0
    min_duration_s: float = 0.0
    conventional_prf: bool = False
    bootstrap: BootstrapConfig = field(default_factory=BootstrapConfig)
    model: ModelConfig = field(default_factory=ModelConfig)

    def __post_init__(self) -> None:
        if not 0.0 < self.split_fraction < 1.0:
            raise ConfigError(f"split_fraction must be in (0,1), got {self.split_fraction}")
        if self.min_pois < 1:
            raise ConfigError(f"min_pois must be >= 1, got {self.min_pois}")


_BOOL = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}


def _coerce(raw: str, target_type: type):
    if target_type is bool:
        try:
            return _BOOL[raw.lower()]
        except KeyError:
            raise ConfigError(f"expected a boolean, got {raw!r}") from None
    try:
        return target_type(raw)
    except ValueError as exc:
        raise ConfigError(f"cannot parse {raw!r} as {target_type.__name__}") from exc


def apply_overrides(cfg: PipelineConfig, overrides: dict[str, str]) -> PipelineConfig:
    """Apply string key=value overrides (dotted keys reach nested sections)."""
    top: dict[str, object] = {}
    boot: dict[str, object] = {}
    model: dict[str, object] = {}
    top_fields = {f.name: f.type for f in fields(PipelineConfig)}
    boot_fields = {f.name: f.type for f in fields(BootstrapConfig)}
    model_fields = {f.name: f.type for f in fields(ModelConfig)}
    types = {"str": str, "int": int, "float": float, "bool": bool}

    for key, raw in overrides.items():
        section, _, name = key.partition(".")
        if not name:
            if key not in top_fields or key in ("bootstrap", "model"):
                raise ConfigError(f"unknown config key {key!r}")
            top[key] = _coerce(raw, types.get(top_fields[key], str))
        elif section == "bootstrap":
            if name not in boot_fields:
                raise ConfigError(f"unknown config key {key!r}")
            boot[name] = _coerce(raw, types.get(boot_fields[name], str))
        elif section == "model":
            if name not in model_fields:
                raise ConfigError(f"unknown config key {key!r}")
            model[name] = _coerce(raw, types.get(model_fields[name], str))
        else:
            raise ConfigError(f"unknown config section {section!r}")

    try:
        if boot:
            cfg = replace(cfg, bootstrap=replace(cfg.bootstrap, **boot))
        if model:
            cfg = replace(cfg, model=replace(cfg.model, **model))
        if top:
            cfg = replace(cfg, **top)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def load_config(path: str | Path | None, overrides: dict[str, str] | None = None) -> PipelineConfig:
    cfg = PipelineConfig()
    file_overrides: dict[str, str] = {}
    if path is not None:
        text = Path(path).read_text(encoding="utf-8")
        for line_no, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{line_no}: expected key = value, got {line!r}")
            key, _, value = line.partition("=")
            file_overrides[key.strip()] = value.strip()
    cfg = apply_overrides(cfg, file_overrides)
    if overrides:
        cfg = apply_overrides(cfg, overrides)
    return cfg


def config_fingerprint(cfg: PipelineConfig) -> dict[str, object]:
    """Flat dict of every knob, embedded in reports for replayability."""
    out: dict[str, object] = {
        "city": cfg.city,
        "split_fraction": cfg.split_fraction,
        "min_pois": cfg.min_pois,
        "gap_hours": cfg.gap_hours,
        "min_duration_s": cfg.min_duration_s,
        "conventional_prf": cfg.conventional_prf,
    }
    for name in ("replicates", "alpha", "rng_seed"):
        out[f"bootstrap.{name}"] = getattr(cfg.bootstrap, name)
    for f in fields(ModelConfig):
        out[f"model.{f.name}"] = getattr(cfg.model, f.name)
    return out
