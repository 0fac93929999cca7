"""Model checkpoint file.

A checkpoint is a single UTF-8 JSON document written with sorted keys and
two-space indentation. Floats are emitted in Python's shortest round-trip
repr, so loading restores every float64 bit-for-bit. Layout (version 1)::

    {
      "format": "rainflag-checkpoint",
      "version": 1,
      "config": {GcnConfig fields},
      "feature_dim": int,
      "node_order": [station_id, ...],
      "altitude_m": [float per node],
      "altitude_mean": float, "altitude_std": float,
      "standardization": {"mean": [...], "std": [...]},
      "adjacency_scheme": {"kind", "epsilon_km", "self_loop_weight", "k"},
      "normalized_adjacency": [[...], ...],
      "pipeline": {"split_fractions": [...], "max_missing_frac": float},
      "params": {name: {"shape": [...], "data": [row-major floats]}}
    }
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from rainflag.dataio import Standardization
from rainflag.errors import CheckpointError
from rainflag.graph import AdjacencyScheme
from rainflag.model import GcnConfig, GcnModel, param_shapes

FORMAT = "rainflag-checkpoint"
VERSION = 1


@dataclass
class Checkpoint:
    model: GcnModel
    node_order: tuple[str, ...]
    altitude_m: tuple[float, ...]
    altitude_mean: float
    altitude_std: float
    standardization: Standardization
    adjacency_scheme: AdjacencyScheme
    normalized_adjacency: np.ndarray
    split_fractions: tuple[float, float, float]
    max_missing_frac: float

    def to_json(self) -> str:
        cfg = asdict(self.model.config)
        cfg["gcl_widths"] = list(cfg["gcl_widths"])
        doc = {
            "format": FORMAT,
            "version": VERSION,
            "config": cfg,
            "feature_dim": self.model.feature_dim,
            "node_order": list(self.node_order),
            "altitude_m": [float(a) for a in self.altitude_m],
            "altitude_mean": float(self.altitude_mean),
            "altitude_std": float(self.altitude_std),
            "standardization": {
                "mean": self.standardization.mean.tolist(),
                "std": self.standardization.std.tolist(),
            },
            "adjacency_scheme": asdict(self.adjacency_scheme),
            "normalized_adjacency": self.normalized_adjacency.tolist(),
            "pipeline": {
                "split_fractions": list(self.split_fractions),
                "max_missing_frac": self.max_missing_frac,
            },
            "params": {
                name: {"shape": list(arr.shape), "data": arr.ravel().tolist()}
                for name, arr in self.model.params.items()
            },
        }
        return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> Checkpoint:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CheckpointError(f"checkpoint is not valid JSON: {exc}") from None
        if doc.get("format") != FORMAT:
            raise CheckpointError("not a rainflag checkpoint")
        if doc.get("version") != VERSION:
            raise CheckpointError(f"unsupported checkpoint version {doc.get('version')}")
        try:
            config = GcnConfig(**doc["config"])
            feature_dim = int(doc["feature_dim"])
            expected = param_shapes(config, feature_dim)
            params = {}
            for name, shape in expected.items():
                entry = doc["params"][name]
                if tuple(entry["shape"]) != shape:
                    raise CheckpointError(f"{name}: shape {entry['shape']} != {list(shape)}")
                params[name] = np.array(entry["data"], dtype=float).reshape(shape)
            if set(doc["params"]) != set(expected):
                raise CheckpointError("unexpected parameter names in checkpoint")
            std = doc["standardization"]
            return cls(
                model=GcnModel(config, feature_dim, params),
                node_order=tuple(doc["node_order"]),
                altitude_m=tuple(float(a) for a in doc["altitude_m"]),
                altitude_mean=float(doc["altitude_mean"]),
                altitude_std=float(doc["altitude_std"]),
                standardization=Standardization(np.array(std["mean"], dtype=float), np.array(std["std"], dtype=float)),
                adjacency_scheme=AdjacencyScheme(**doc["adjacency_scheme"]),
                normalized_adjacency=np.array(doc["normalized_adjacency"], dtype=float),
                split_fractions=tuple(doc["pipeline"]["split_fractions"]),
                max_missing_frac=float(doc["pipeline"]["max_missing_frac"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CheckpointError(f"corrupt checkpoint: {exc}") from None

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> Checkpoint:
        return cls.from_json(Path(path).read_text(encoding="utf-8"))
