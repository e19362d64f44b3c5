"""Run configuration: one flat YAML document, env overrides, CLI overrides.

Recognised keys (all optional except ``offline_path``):

========================  ==========================================================
offline_path              offline event corpus
offline_format            ``csv`` (default) or ``jsonl``
online_path               online post corpus; absent means zero posts
online_format             ``csv`` (default) or ``jsonl``
manifest_path             source manifest CSV (platform, dataset, expected_count)
annotations_path          annotation CSV (canonical_quote, is_propaganda)
merges_path               manual merge CSV (cluster_a, cluster_b)
stopwords_path            stopword file; defaults to the bundled list
overrides_path            geocoder override CSV (city, state, lat, lon)
geocache_path             geocoder cache JSONL, read and updated by ``geo``
geocoder_base_url         service endpoint (env ``QUOTESPREAD_GEOCODER_URL``)
geocoder_rate_limit       requests per second (env ``QUOTESPREAD_GEOCODER_RATE_LIMIT``)
geocoder_retries          retries after the first failed attempt
geocoder_timeout          per-request timeout, seconds
geocoder_backoff          first retry delay, seconds (doubles per retry)
geocoder_user_agent       User-Agent header
window_start, window_end  ISO dates bounding the temporal analysis
gyration_mode             ``planar`` (default) or ``great_circle``
radius_quantile           region threshold quantile for radius (default 0.75)
lifespan_quantile         region threshold quantile for lifespan (default 0.75)
reference_lat/_lon        reference point (e.g. a mean center of population)
reference_tolerance       coincidence tolerance in degrees (default 1e-6)
top_k                     popularity table size (default 10)
out_dir                   artifact directory (default ``out``)
seed                      RNG seed for any sampling in reports (default 0)
========================  ==========================================================

Relative paths are resolved against the directory holding the config file.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Any

import yaml

from ..geospatial import GeocoderSettings, GyrationMode

ENV_GEOCODER_URL = "QUOTESPREAD_GEOCODER_URL"
ENV_GEOCODER_RATE = "QUOTESPREAD_GEOCODER_RATE_LIMIT"

PATH_KEYS = (
    "offline_path",
    "online_path",
    "manifest_path",
    "annotations_path",
    "merges_path",
    "stopwords_path",
    "overrides_path",
)
FORMAT_VALUES = ("csv", "jsonl")


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    offline_path: str | None = None
    offline_format: str = "csv"
    online_path: str | None = None
    online_format: str = "csv"
    manifest_path: str | None = None
    annotations_path: str | None = None
    merges_path: str | None = None
    stopwords_path: str | None = None
    overrides_path: str | None = None
    geocache_path: str | None = None
    geocoder_base_url: str = GeocoderSettings.base_url
    geocoder_rate_limit: float = GeocoderSettings.rate_limit
    geocoder_retries: int = GeocoderSettings.retries
    geocoder_timeout: float = GeocoderSettings.timeout
    geocoder_backoff: float = GeocoderSettings.backoff
    geocoder_user_agent: str = GeocoderSettings.user_agent
    window_start: str | None = None
    window_end: str | None = None
    gyration_mode: str = "planar"
    radius_quantile: float = 0.75
    lifespan_quantile: float = 0.75
    reference_lat: float | None = None
    reference_lon: float | None = None
    reference_tolerance: float = 1e-6
    top_k: int = 10
    out_dir: str = "out"
    seed: int = 0
    base_dir: str = dataclasses.field(default=".", repr=False, compare=False)

    @classmethod
    def from_mapping(cls, data: dict[str, Any], base_dir: str | Path = ".") -> RunConfig:
        known = {f.name for f in dataclasses.fields(cls)} - {"base_dir"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        values = {k: v for k, v in data.items() if v is not None}
        for key in ("window_start", "window_end"):
            if isinstance(values.get(key), date):
                values[key] = values[key].isoformat()
        return cls(**values, base_dir=str(base_dir))

    @classmethod
    def load(cls, path: str | Path | None) -> RunConfig:
        if path is None:
            config = cls()
        else:
            path = Path(path)
            try:
                data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
            except OSError as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from exc
            except yaml.YAMLError as exc:
                raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
            if not isinstance(data, dict):
                raise ConfigError(f"{path}: config must be a key-value mapping")
            config = cls.from_mapping(data, base_dir=path.parent)
        config.apply_env(os.environ)
        return config

    def apply_env(self, env) -> None:
        if env.get(ENV_GEOCODER_URL):
            self.geocoder_base_url = env[ENV_GEOCODER_URL]
        if env.get(ENV_GEOCODER_RATE):
            try:
                self.geocoder_rate_limit = float(env[ENV_GEOCODER_RATE])
            except ValueError as exc:
                raise ConfigError(f"{ENV_GEOCODER_RATE} is not a number") from exc

    def resolve(self, value: str | None) -> Path | None:
        if value is None:
            return None
        p = Path(value)
        return p if p.is_absolute() else Path(self.base_dir) / p

    @property
    def out(self) -> Path:
        return self.resolve(self.out_dir)

    @property
    def window(self) -> tuple[date, date] | None:
        if self.window_start is None and self.window_end is None:
            return None
        start = date.fromisoformat(self.window_start) if self.window_start else date.min
        end = date.fromisoformat(self.window_end) if self.window_end else date.max
        return start, end

    @property
    def reference(self):
        from ..models import GeoPoint

        if self.reference_lat is None or self.reference_lon is None:
            return None
        return GeoPoint(float(self.reference_lat), float(self.reference_lon))

    def geocoder_settings(self) -> GeocoderSettings:
        return GeocoderSettings(
            base_url=self.geocoder_base_url,
            rate_limit=float(self.geocoder_rate_limit),
            retries=int(self.geocoder_retries),
            timeout=float(self.geocoder_timeout),
            backoff=float(self.geocoder_backoff),
            user_agent=self.geocoder_user_agent,
        )

    def validate(self) -> None:
        """Check every setting and input path before any stage runs."""
        if not self.offline_path:
            raise ConfigError("offline_path is required")
        for key in ("offline_format", "online_format"):
            if getattr(self, key) not in FORMAT_VALUES:
                raise ConfigError(f"{key} must be one of {FORMAT_VALUES}")
        for key in PATH_KEYS:
            path = self.resolve(getattr(self, key))
            if path is not None and not path.is_file():
                raise ConfigError(f"{key}: no such file {path}")
        try:
            GyrationMode(self.gyration_mode)
        except ValueError as exc:
            raise ConfigError(f"gyration_mode must be planar or great_circle, got {self.gyration_mode!r}") from exc
        try:
            window = self.window
        except ValueError as exc:
            raise ConfigError(f"window dates must be ISO dates: {exc}") from exc
        if window and window[0] > window[1]:
            raise ConfigError(f"window start {window[0]} is after end {window[1]}")
        for key in ("radius_quantile", "lifespan_quantile"):
            if not 0.0 <= float(getattr(self, key)) <= 1.0:
                raise ConfigError(f"{key} must lie in [0, 1]")
        if (self.reference_lat is None) != (self.reference_lon is None):
            raise ConfigError("reference_lat and reference_lon must be given together")
        try:
            self.reference
        except ValueError as exc:
            raise ConfigError(f"reference point: {exc}") from exc
        if int(self.top_k) < 1:
            raise ConfigError("top_k must be at least 1")

    def to_dict(self) -> dict[str, Any]:
        data = dataclasses.asdict(self)
        data.pop("base_dir")
        return data

    def serialize(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.serialize().encode("utf-8")).hexdigest()
