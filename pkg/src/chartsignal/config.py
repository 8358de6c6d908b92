"""Run configuration: JSON file plus command-line overrides."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .classify import REQUIRED_KINDS, ClassifierKind
from .labeler import RuleKind
from .raster import NATIVE_SIDE, RenderStyle
from .resample import SWEEP_RESOLUTIONS


class ConfigError(ValueError):
    pass


@dataclass
class SynthConfig:
    n_tickers: int = 50
    n_days: int = 2000
    drift: float = 5e-4
    volatility: float = 0.02
    start_price: float = 100.0
    spread: float = 0.01
    volume_mean: float = 1e6
    volume_sigma: float = 0.3
    start_date: str = "2010-01-04"


@dataclass
class RunConfig:
    corpus: str | None = None
    rules: list[str] = field(default_factory=lambda: [r.value for r in RuleKind])
    styles: list[str] = field(default_factory=lambda: [RenderStyle.CANDLE_OHLC.value])
    resolutions: list[int] = field(default_factory=lambda: [30])
    sweep_resolutions: list[int] = field(default_factory=lambda: list(SWEEP_RESOLUTIONS))
    seed: int = 0
    per_ticker: int = 10
    k: int = 5
    train_range: list[str | None] | None = None
    test_range: list[str | None] | None = None
    classifiers: list[str] = field(default_factory=lambda: [k.value for k in REQUIRED_KINDS])
    hyperparameters: dict = field(default_factory=dict)
    threshold: float = 0.5
    exclusion_radius: int = 0
    fixed30: bool = False
    native_side: int = NATIVE_SIDE
    image_format: str = "png"
    forecast_tickers: list[str] | None = None
    out: str = "runs"
    synth: SynthConfig = field(default_factory=SynthConfig)

    def validate(self) -> RunConfig:
        try:
            self.rules = [RuleKind(r).value for r in self.rules]
            self.styles = [RenderStyle(s).value for s in self.styles]
            self.classifiers = [ClassifierKind(c).value for c in self.classifiers]
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if not self.rules or not self.styles or not self.classifiers:
            raise ConfigError("rules, styles and classifiers must be non-empty")
        for r in list(self.resolutions) + list(self.sweep_resolutions):
            if not 2 <= int(r) <= self.native_side:
                raise ConfigError(f"resolution {r} outside [2, {self.native_side}]")
        if self.per_ticker < 1 or self.k < 2:
            raise ConfigError("per_ticker must be >= 1 and k >= 2")
        if self.image_format not in ("png", "raw"):
            raise ConfigError("image_format must be 'png' or 'raw'")
        if not 0.0 <= self.threshold < 1.0:
            raise ConfigError("threshold must lie in [0, 1)")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def fingerprint(self, command: str = "") -> str:
        doc = self.to_dict()
        doc.pop("out")
        blob = json.dumps({"command": command, "config": doc}, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]

    @classmethod
    def from_dict(cls, doc: dict) -> RunConfig:
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        doc = dict(doc)
        if "synth" in doc:
            try:
                doc["synth"] = SynthConfig(**doc["synth"])
            except TypeError as exc:
                raise ConfigError(f"synth: {exc}") from None
        return cls(**doc)

    @classmethod
    def load(cls, path) -> RunConfig:
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"{path}: {exc}") from None
        return cls.from_dict(doc)
