"""Pipeline configuration: JSON files, bundled presets and flag overrides."""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from typing import Optional

from ..privatizers import InvalidParameter, is_stochastic, make_privatizer
from ..signal import ScreenBounds

DATA_ENV = "GAZEPRIV_DATA"
DEFAULT_FILENAME_PATTERN = r"S(?P<subject>[^_]+)_(?P<session>[^_]+)_(?P<task>[^_.]+)\.csv$"


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    dataset_path: Optional[str] = None
    privatizers: list = field(default_factory=lambda: [{"op": "identity"}])
    classifiers: list = field(default_factory=lambda: [
        {"name": "idt", "dispersion_threshold": 0.5, "min_duration_ms": 32.0},
        {"name": "ikf", "chi_square": 3.75, "window": 5, "deviation": 1000.0},
    ])
    # real-time labeller feeding the targeted-noise operator
    label_classifier: dict = field(default_factory=lambda: {"name": "ikf"})
    rng_seed: Optional[int] = None
    embedder: dict = field(default_factory=lambda: {"name": "stats"})
    split: dict = field(default_factory=lambda: {"enroll_session": "1", "auth_session": "2"})
    output_dir: str = "gazepriv-out"
    workers: int = 1
    run_privacy: bool = True
    run_utility: bool = True
    utility_task: str = "RAN"
    privacy_tasks: Optional[list] = None  # None = every task
    dwell_ms: float = 100.0
    interaction_window_ms: float = 1000.0
    total_targets: Optional[int] = None
    bounds: dict = field(default_factory=lambda: asdict(ScreenBounds()))
    filename_pattern: str = DEFAULT_FILENAME_PATTERN
    fs: Optional[float] = None  # None = infer from timestamps
    chunk_size: Optional[int] = None

    @property
    def screen_bounds(self) -> ScreenBounds:
        return ScreenBounds(**self.bounds)

    def validate(self) -> "PipelineConfig":
        if not self.privatizers:
            raise ConfigError("at least one privatizer is required")
        for spec in self.privatizers:
            if not isinstance(spec, dict) or "op" not in spec:
                raise ConfigError(f"privatizer spec needs an 'op' field: {spec!r}")
            try:
                if is_stochastic(spec) and self.rng_seed is None:
                    raise ConfigError(f"{spec['op']} is stochastic; set rng_seed or pass --seed")
                make_privatizer(spec, 1000.0, seed=0)
            except KeyError:
                raise ConfigError(f"unknown privatizer {spec['op']!r}") from None
            except InvalidParameter as e:
                raise ConfigError(str(e)) from None
        names = [c.get("name") for c in self.classifiers]
        for n in names:
            if n not in ("idt", "ikf"):
                raise ConfigError(f"unknown classifier {n!r}")
        if len(set(names)) != len(names):
            raise ConfigError("each classifier may appear once")
        if self.label_classifier.get("name") != "ikf":
            raise ConfigError("targeted noise needs per-sample labels at arrival time; only 'ikf' provides them")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        try:
            self.screen_bounds
        except (TypeError, ValueError) as e:
            raise ConfigError(f"bad screen bounds: {e}") from None
        return self

    def to_dict(self) -> dict:
        return asdict(self)


def available_presets() -> list[str]:
    root = resources.files("gazepriv") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_preset(name: str) -> dict:
    path = resources.files("gazepriv") / "presets" / f"{name}.json"
    if not path.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(available_presets())}")
    return json.loads(path.read_text())


def _normalize(d: dict) -> dict:
    # a single "privatizer" entry is shorthand for a one-element list
    d = dict(d)
    if "privatizer" in d:
        if "privatizers" in d:
            raise ConfigError("give either 'privatizer' or 'privatizers', not both")
        d["privatizers"] = [d.pop("privatizer")]
    return d


def build_config(preset: Optional[str] = None, config_path: Optional[str] = None,
                 **overrides) -> PipelineConfig:
    """Merge defaults, a preset, a config file and explicit overrides (in that order)."""
    data: dict = {}
    if preset:
        data.update(_normalize(load_preset(preset)))
    if config_path:
        try:
            with open(config_path) as f:
                data.update(_normalize(json.load(f)))
        except OSError as e:
            raise ConfigError(f"cannot read config {config_path}: {e}") from None
        except json.JSONDecodeError as e:
            raise ConfigError(f"{config_path}: invalid JSON ({e})") from None
    data.update({k: v for k, v in _normalize(overrides).items() if v is not None})
    known = {f.name for f in fields(PipelineConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg = PipelineConfig(**data)
    if cfg.dataset_path is None:
        cfg.dataset_path = os.environ.get(DATA_ENV)
    return cfg.validate()
