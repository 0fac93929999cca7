"""Run configuration: a flat ``key = value`` text file plus CLI overrides.

Blank lines and lines starting with ``#`` are ignored. Lists (``gcl_widths``,
``split``) are comma-separated. Keys are the field names of ``RunConfig``.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any

from rainflag.dataio import DEFAULT_MAX_MISSING, DEFAULT_SPLIT
from rainflag.graph import AdjacencyScheme
from rainflag.model import PRESETS, GcnConfig


@dataclass(frozen=True)
class RunConfig:
    stations: str = "stations.csv"
    records: str = "records.csv"
    checkpoint: str = "checkpoint.json"
    output_dir: str = "out"
    model: str = "A"
    gcl_widths: tuple[int, ...] | None = None  # overrides the preset when set
    fc_width: int = 32
    window_length: int = 7
    learning_rate: float = 0.01
    batch_size: int = 64
    max_epochs: int = 500
    patience: int = 10
    seed: int = 0
    heavy_threshold_mm: float = 8.0
    adjacency: str = "inverse_distance"
    epsilon_km: float = 1.0
    self_loop_weight: float = 1.0
    knn_k: int = 3
    split: tuple[float, float, float] = DEFAULT_SPLIT
    max_missing_frac: float = DEFAULT_MAX_MISSING

    def __post_init__(self):
        if self.model.upper() not in PRESETS:
            raise ValueError(f"model must be one of {sorted(PRESETS)}")

    def gcn_config(self) -> GcnConfig:
        widths = self.gcl_widths if self.gcl_widths else PRESETS[self.model.upper()]
        return GcnConfig(
            gcl_widths=widths,
            fc_width=self.fc_width,
            window_length=self.window_length,
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            max_epochs=self.max_epochs,
            patience=self.patience,
            seed=self.seed,
            heavy_threshold_mm=self.heavy_threshold_mm,
        )

    def adjacency_scheme(self) -> AdjacencyScheme:
        return AdjacencyScheme(
            kind=self.adjacency, epsilon_km=self.epsilon_km, self_loop_weight=self.self_loop_weight, k=self.knn_k
        )

    def output_path(self, name: str) -> Path:
        return Path(self.output_dir) / name

    def merged(self, overrides: dict[str, Any]) -> RunConfig:
        """Copy with every non-None override applied (values may be strings)."""
        updates = {k: _coerce(k, v) for k, v in overrides.items() if v is not None}
        return dataclasses.replace(self, **updates)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None:
                continue
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> RunConfig:
        values: dict[str, str] = {}
        for n, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"config line {n}: expected key = value")
            values[key.strip()] = value.strip()
        return cls().merged(values)

    @classmethod
    def load(cls, path: str | Path) -> RunConfig:
        return cls.from_text(Path(path).read_text(encoding="utf-8"))


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, value: Any) -> Any:
    if key not in _FIELD_TYPES:
        raise ValueError(f"unknown config key {key!r}")
    if not isinstance(value, str):
        return tuple(value) if isinstance(value, list) else value
    kind = _FIELD_TYPES[key]
    if key == "gcl_widths":
        return tuple(int(v) for v in value.split(",") if v.strip()) or None
    if key == "split":
        parts = tuple(float(v) for v in value.split(","))
        if len(parts) != 3:
            raise ValueError("split needs three comma-separated fractions")
        return parts
    if kind == "int":
        return int(value)
    if kind == "float":
        return float(value)
    return value
