"""Station graph: great-circle distances, weighted adjacency, normalization."""
from __future__ import annotations

import csv
import math
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from rainflag.dataio import Station
from rainflag.errors import DuplicateCoordinates, IsolatedNode, ShapeMismatch

EARTH_RADIUS_KM = 6371.0
SCHEMES = ("inverse_distance", "knn", "distance")


def haversine_km(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Great-circle distance between two (lat, lon) points in degrees."""
    lat1, lon1 = map(math.radians, a)
    lat2, lon2 = map(math.radians, b)
    h = math.sin((lat2 - lat1) / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2
    # clamp guards against h creeping past 1 through rounding for antipodes
    return 2 * EARTH_RADIUS_KM * math.asin(math.sqrt(min(1.0, h)))


def distance_matrix(stations: Sequence[Station]) -> np.ndarray:
    n = len(stations)
    d = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            a = (stations[i].latitude_deg, stations[i].longitude_deg)
            b = (stations[j].latitude_deg, stations[j].longitude_deg)
            d[i, j] = d[j, i] = haversine_km(a, b)
    return d


@dataclass(frozen=True)
class AdjacencyScheme:
    """Edge weighting rule.

    ``inverse_distance``: every pair connected with weight 1/(d + epsilon_km).
    ``knn``: same weights but only each node's k nearest neighbours, then
    symmetrized by elementwise max.
    ``distance``: raw distance in km as the weight (kept for comparison only).
    """

    kind: str = "inverse_distance"
    epsilon_km: float = 1.0
    self_loop_weight: float = 1.0
    k: int = 3

    def __post_init__(self):
        if self.kind not in SCHEMES:
            raise ValueError(f"unknown adjacency scheme {self.kind!r}; choose from {SCHEMES}")
        if self.epsilon_km < 0 or self.self_loop_weight < 0:
            raise ValueError("epsilon_km and self_loop_weight must be non-negative")
        if self.kind == "knn" and self.k < 1:
            raise ValueError("k must be positive")


@dataclass(frozen=True)
class StationGraph:
    node_order: tuple[str, ...]
    distances_km: np.ndarray
    adjacency: np.ndarray
    degrees: np.ndarray
    normalized_adjacency: np.ndarray


def normalize_adjacency(adjacency: np.ndarray) -> np.ndarray:
    """Symmetric degree normalization D^-1/2 A D^-1/2."""
    a = np.asarray(adjacency, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeMismatch(f"adjacency must be square, got {a.shape}")
    deg = a.sum(axis=1)
    if np.any(deg <= 0):
        raise IsolatedNode(f"nodes {np.nonzero(deg <= 0)[0].tolist()} have zero degree")
    # outer product is exactly symmetric, so the result is too
    return a / np.sqrt(np.outer(deg, deg))


def _weights(dist: np.ndarray, scheme: AdjacencyScheme) -> np.ndarray:
    n = dist.shape[0]
    off = ~np.eye(n, dtype=bool)
    if scheme.kind == "distance":
        w = dist.copy()
    else:
        if scheme.epsilon_km == 0 and np.any(dist[off] == 0):
            raise DuplicateCoordinates("two stations share coordinates and epsilon_km is 0")
        w = np.zeros_like(dist)
        w[off] = 1.0 / (dist[off] + scheme.epsilon_km)
        if scheme.kind == "knn":
            keep = np.zeros_like(w, dtype=bool)
            for i in range(n):
                others = [j for j in np.argsort(dist[i], kind="stable") if j != i]
                keep[i, others[: scheme.k]] = True
            keep |= keep.T
            w = np.where(keep, w, 0.0)
    np.fill_diagonal(w, scheme.self_loop_weight)
    return w


def build_adjacency(stations: Sequence[Station], scheme: AdjacencyScheme | None = None) -> StationGraph:
    if not stations:
        raise ValueError("need at least one station")
    scheme = scheme or AdjacencyScheme()
    dist = distance_matrix(stations)
    adj = _weights(dist, scheme)
    return StationGraph(
        node_order=tuple(s.station_id for s in stations),
        distances_km=dist,
        adjacency=adj,
        degrees=adj.sum(axis=1),
        normalized_adjacency=normalize_adjacency(adj),
    )


def write_edges(path: str | Path, graph: StationGraph) -> int:
    """Write ``station_i,station_j,distance_km,weight`` for each weighted pair i < j."""
    rows = 0
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["station_i", "station_j", "distance_km", "weight"])
        n = len(graph.node_order)
        for i in range(n):
            for j in range(i + 1, n):
                if graph.adjacency[i, j] > 0:
                    writer.writerow(
                        [graph.node_order[i], graph.node_order[j],
                         f"{graph.distances_km[i, j]:.6f}", repr(float(graph.adjacency[i, j]))]
                    )
                    rows += 1
    return rows
