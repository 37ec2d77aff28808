"""Run configuration: YAML files layered over documented defaults.

Every parameter has a default, so a config file is optional.  Later files
override earlier ones key by key, and environment variables override both:
``NVB_<SECTION>__<KEY>=value`` (``NVB_SEED=7`` for top-level keys).  Values
from the environment are parsed as YAML scalars, so ``NVB_NOD__K_MAD=2.5``
gives a float and ``NVB_SWEEP__POOLED=true`` a bool.
"""
from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import yaml

from .classifier import DEFAULT_CHANNELS, BoostParams
from .data_model import DEFAULT_CONFIDENCE_FLOOR, ScreenGeometry, ValidationError
from .nod_detector import NodParams

ENV_PREFIX = "NVB_"

DEFAULT_UNITS = {
    "pitch": "radians", "yaw": "radians", "roll": "radians",
    "gaze_angle_x": "radians", "gaze_angle_y": "radians",
    "au04": "likelihood", "au06": "likelihood", "au12_likelihood": "likelihood",
    "eye_contact_score": "likelihood",
}


@dataclass(frozen=True)
class ThresholdConfig:
    smile: float = 0.8          # au12_likelihood >= smile -> smiling
    eye_contact: float = 0.2    # eye_contact_score >= eye_contact -> contact
    gaze_margin: float = 0.5    # geometric margin score >= gaze_margin -> off-screen


@dataclass(frozen=True)
class SweepConfig:
    start: float = 0.1
    stop: float = 0.9
    step: float = 0.1
    pooled: bool = False

    def grid(self) -> tuple[float, ...]:
        """Grid points as ``k * step`` rounded to 12 places, so 0.1..0.9 comes
        out as the exact decimal literals rather than accumulated sums."""
        n = int(round((self.stop - self.start) / self.step))
        return tuple(round(self.start + i * self.step, 12) for i in range(n + 1))


@dataclass(frozen=True)
class GeometryConfig:
    screen_width_mm: float = 300.0
    screen_height_mm: float = 190.0
    resolution_px: tuple[int, int] = (1920, 1200)
    camera_offset_mm: tuple[float, float] = (150.0, -5.0)
    eye_to_screen_mm: float = 500.0
    tolerance_mm: float = 10.0
    score_slope: float = 10.0
    flip_x: bool = False
    flip_y: bool = False

    def screen(self) -> ScreenGeometry:
        return ScreenGeometry(self.screen_width_mm, self.screen_height_mm,
                              tuple(self.resolution_px), tuple(self.camera_offset_mm),
                              self.eye_to_screen_mm)


@dataclass(frozen=True)
class EventsConfig:
    merge_gap_s: float = 0.15
    min_duration_s: float = 0.1
    quorum: int = 2
    consensus_only: bool = False  # restrict percentages to annotator-consensus frames


@dataclass(frozen=True)
class ClassifierConfig:
    enabled: bool = True
    channels: tuple[str, ...] = DEFAULT_CHANNELS
    rounds: int = 100
    learning_rate: float = 0.1
    max_depth: int = 3
    min_leaf: int = 2
    reg_lambda: float = 1.0
    n_seeds: int = 20
    seeds: tuple[int, ...] | None = None  # explicit list; default seed .. seed + n_seeds - 1
    rebalance: bool = False

    def seed_list(self, base_seed: int) -> tuple[int, ...]:
        if self.seeds is not None:
            return tuple(int(s) for s in self.seeds)
        return tuple(range(base_seed, base_seed + self.n_seeds))

    def boost_params(self, seed: int = 0) -> BoostParams:
        return BoostParams(self.rounds, self.learning_rate, self.max_depth,
                           self.min_leaf, self.reg_lambda, seed)


@dataclass(frozen=True)
class ComparisonConfig:
    behavior: str
    kind: str = "parts"
    source: str | None = None
    benchmark: float = 75.0
    alternative: str = "less"


_DEFAULT_COMPARISONS = (
    ComparisonConfig("gaze_off", "benchmark"),
    ComparisonConfig("gaze_off", "parts"),
    ComparisonConfig("gaze_off", "modes"),
    ComparisonConfig("smile", "parts"),
    ComparisonConfig("smile", "modes"),
    ComparisonConfig("nod", "parts"),
    ComparisonConfig("nod", "modes"),
)


@dataclass(frozen=True)
class StatsConfig:
    enabled: bool = True
    alpha: float = 0.05
    routing: str = "auto"
    posthoc: str = "follow_omnibus"
    comparisons: tuple[ComparisonConfig, ...] = _DEFAULT_COMPARISONS


@dataclass(frozen=True)
class NodGridConfig:
    amplitude_coeff: tuple[float, ...] = (1.5, 2.0, 2.5)
    prominence_frac: tuple[float, ...] = (0.5, 0.75)
    dominance_ratio: tuple[float, ...] = (1.5, 2.0)
    min_duration_s: tuple[float, ...] = (0.2,)
    max_duration_s: tuple[float, ...] = (1.5,)


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    workers: int = 1
    confidence_floor: float = DEFAULT_CONFIDENCE_FLOOR
    units: Mapping[str, str] = field(default_factory=lambda: dict(DEFAULT_UNITS))
    nod: NodParams = NodParams()
    thresholds: ThresholdConfig = ThresholdConfig()
    sweep: SweepConfig = SweepConfig()
    geometry: GeometryConfig = GeometryConfig()
    events: EventsConfig = EventsConfig()
    classifier: ClassifierConfig = ClassifierConfig()
    stats: StatsConfig = StatsConfig()
    nod_grid: NodGridConfig = NodGridConfig()
    synth: Mapping[str, Any] = field(default_factory=dict)  # SynthSpec overrides

    def __post_init__(self):
        errors = []
        for name in ("smile", "eye_contact", "gaze_margin"):
            v = getattr(self.thresholds, name)
            if not 0.0 <= v <= 1.0:
                errors.append(f"thresholds.{name} must lie in [0, 1]")
        s = self.sweep
        if not s.step > 0:
            errors.append("sweep.step must be > 0")
        elif not 0.0 < s.start <= s.stop < 1.0:
            errors.append("sweep range must lie inside (0, 1) with start <= stop")
        if not 0.0 <= self.confidence_floor <= 1.0:
            errors.append("confidence_floor must lie in [0, 1]")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int):
            errors.append("seed must be an integer")
        if self.workers < 1:
            errors.append("workers must be >= 1")
        if self.events.quorum < 1:
            errors.append("events.quorum must be >= 1")
        if self.classifier.n_seeds < 1 or self.classifier.seeds == ():
            errors.append("classifier needs at least one seed")
        if errors:
            raise ValidationError(errors)

    def to_dict(self) -> dict:
        return _plain(dataclasses.asdict(self))

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)


def _plain(obj):
    if isinstance(obj, Mapping):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _build(cls, data: Any, path: str):
    """Instantiate dataclass ``cls`` from nested mappings, coercing lists to tuples."""
    if not dataclasses.is_dataclass(cls):
        return data
    if isinstance(data, cls):
        return data
    if not isinstance(data, Mapping):
        raise ValidationError(f"{path or 'config'}: expected a mapping")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        raise ValidationError([f"{path}{k}: unknown key" for k in unknown])
    kwargs = {}
    defaults = cls() if cls is not ComparisonConfig else None
    for name, f in fields.items():
        if name not in data:
            continue
        value = data[name]
        current = getattr(defaults, name, None) if defaults is not None else None
        if dataclasses.is_dataclass(current):
            merged = {**dataclasses.asdict(current), **(value or {})}
            value = _build(type(current), merged, f"{path}{name}.")
        elif name == "comparisons":
            value = tuple(_build(ComparisonConfig, v, f"{path}{name}[{i}].")
                          for i, v in enumerate(value or ()))
        elif isinstance(value, list):
            value = tuple(value)
        kwargs[name] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ValidationError(f"{path or 'config'}: {exc}") from None


def _deep_merge(base: dict, over: Mapping) -> dict:
    out = dict(base)
    for k, v in over.items():
        if isinstance(v, Mapping) and isinstance(out.get(k), Mapping) and k != "units":
            out[k] = _deep_merge(dict(out[k]), v)
        elif k == "units" and isinstance(v, Mapping):
            out[k] = {**out.get(k, {}), **v}
        else:
            out[k] = v
    return out


def env_overrides(environ: Mapping[str, str] | None = None) -> dict:
    """Nested override mapping from ``NVB_SECTION__KEY`` variables."""
    environ = os.environ if environ is None else environ
    out: dict = {}
    for key in sorted(environ):
        if not key.startswith(ENV_PREFIX):
            continue
        path = [p.lower() for p in key[len(ENV_PREFIX):].split("__") if p]
        if not path:
            continue
        node = out
        for p in path[:-1]:
            node = node.setdefault(p, {})
        node[path[-1]] = yaml.safe_load(environ[key])
    return out


def load_config(paths: Sequence[str] = (), environ: Mapping[str, str] | None = None,
                overrides: Mapping | None = None) -> RunConfig:
    """Defaults, then each YAML file in order, then environment, then ``overrides``."""
    data: dict = {}
    for p in paths:
        try:
            with open(p, encoding="utf-8") as fh:
                loaded = yaml.safe_load(fh)
        except OSError as exc:
            raise ValidationError(f"cannot read config {p}: {exc.strerror}") from None
        except yaml.YAMLError as exc:
            raise ValidationError(f"{p}: invalid YAML ({exc})") from None
        if loaded is None:
            continue
        if not isinstance(loaded, Mapping):
            raise ValidationError(f"{p}: top level must be a mapping")
        data = _deep_merge(data, loaded)
    data = _deep_merge(data, env_overrides(environ))
    if overrides:
        data = _deep_merge(data, overrides)
    if "units" in data:
        data["units"] = {**DEFAULT_UNITS, **{str(k).lower(): v for k, v in data["units"].items()}}
    return _build(RunConfig, data, "")
