"""Graph convolutional regressor with hand-written backpropagation.

Architecture, per graph snapshot with normalized adjacency ``A_hat``::

    H0 = X                                   (nodes x features)
    H(l+1) = relu(A_hat @ H(l) @ W(l))       one per entry of gcl_widths
    F = relu(H(L) @ W_fc + b_fc)             shared across nodes
    y_hat = F @ w_out + b_out                one scalar per node, in mm

All arrays are float64. Every function accepts either a single snapshot
(X of shape (N, F)) or a batch (B, N, F).
"""
from __future__ import annotations

import logging
from collections.abc import Collection, Sequence
from dataclasses import dataclass, field, replace

import numpy as np

from rainflag.dataio import SampleSet
from rainflag.errors import EmptySplit, ShapeMismatch

log = logging.getLogger(__name__)

PRESETS: dict[str, tuple[int, ...]] = {
    "A": (10, 10, 10, 10),
    "B": (16, 32, 64, 128),
    "C": (128, 64, 32),
    "D": (32, 64, 128),
}

IMPROVEMENT_TOL = 1e-6


@dataclass(frozen=True)
class GcnConfig:
    gcl_widths: tuple[int, ...] = PRESETS["A"]
    fc_width: int = 32
    window_length: int = 7
    learning_rate: float = 0.01
    batch_size: int = 64
    max_epochs: int = 500
    patience: int = 10
    seed: int = 0
    heavy_threshold_mm: float = 8.0

    def __post_init__(self):
        object.__setattr__(self, "gcl_widths", tuple(int(w) for w in self.gcl_widths))
        if not self.gcl_widths or any(w <= 0 for w in self.gcl_widths):
            raise ValueError("gcl_widths must be a non-empty list of positive integers")
        for name in ("fc_width", "window_length", "batch_size", "max_epochs", "patience"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.heavy_threshold_mm < 0:
            raise ValueError("heavy_threshold_mm must be non-negative")

    @classmethod
    def preset(cls, name: str, **overrides) -> GcnConfig:
        return cls(gcl_widths=PRESETS[name.upper()], **overrides)

    @property
    def feature_dim(self) -> int:
        return self.window_length + 1


@dataclass
class GcnModel:
    config: GcnConfig
    feature_dim: int
    params: dict[str, np.ndarray]

    @property
    def num_gcl(self) -> int:
        return len(self.config.gcl_widths)

    @property
    def gcl_weights(self) -> list[np.ndarray]:
        return [self.params[f"gcl{i}.W"] for i in range(self.num_gcl)]

    def copy(self) -> GcnModel:
        return GcnModel(self.config, self.feature_dim, {k: v.copy() for k, v in self.params.items()})


def param_shapes(config: GcnConfig, feature_dim: int) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {}
    prev = feature_dim
    for i, width in enumerate(config.gcl_widths):
        shapes[f"gcl{i}.W"] = (prev, width)
        prev = width
    shapes["fc.W"] = (prev, config.fc_width)
    shapes["fc.b"] = (config.fc_width,)
    shapes["out.W"] = (config.fc_width, 1)
    shapes["out.b"] = (1,)
    return shapes


def glorot_bound(fan_in: int, fan_out: int) -> float:
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def init_model(config: GcnConfig, feature_dim: int, rng_seed: int | None = None) -> GcnModel:
    """Glorot-uniform weights, zero biases. ``rng_seed`` defaults to config.seed."""
    if feature_dim < 1:
        raise ValueError("feature_dim must be at least 1")
    rng = np.random.default_rng(config.seed if rng_seed is None else rng_seed)
    params = {}
    for name, shape in param_shapes(config, feature_dim).items():
        if name.endswith(".b"):
            params[name] = np.zeros(shape)
        else:
            bound = glorot_bound(*shape)
            params[name] = rng.uniform(-bound, bound, size=shape)
    return GcnModel(config, feature_dim, params)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def _check_graph_input(a_hat: np.ndarray, h: np.ndarray, in_dim: int | None = None) -> None:
    if a_hat.ndim != 2 or a_hat.shape[0] != a_hat.shape[1]:
        raise ShapeMismatch(f"normalized adjacency must be square, got {a_hat.shape}")
    if h.ndim not in (2, 3) or h.shape[-2] != a_hat.shape[0]:
        raise ShapeMismatch(f"node features {h.shape} do not match {a_hat.shape[0]} nodes")
    if in_dim is not None and h.shape[-1] != in_dim:
        raise ShapeMismatch(f"expected feature dim {in_dim}, got {h.shape[-1]}")


def gcl_forward(h: np.ndarray, a_hat: np.ndarray, w: np.ndarray) -> np.ndarray:
    """One graph convolution with ReLU: relu(A_hat @ H @ W)."""
    h = np.asarray(h, dtype=float)
    a_hat = np.asarray(a_hat, dtype=float)
    w = np.asarray(w, dtype=float)
    _check_graph_input(a_hat, h)
    if w.ndim != 2 or w.shape[0] != h.shape[-1]:
        raise ShapeMismatch(f"weight {w.shape} does not match feature dim {h.shape[-1]}")
    return relu(a_hat @ h @ w)


def _forward(model: GcnModel, a_hat: np.ndarray, x: np.ndarray):
    x = np.asarray(x, dtype=float)
    a_hat = np.asarray(a_hat, dtype=float)
    _check_graph_input(a_hat, x, model.feature_dim)
    p = model.params
    cache = {"inputs": [], "mixed": [], "pre": []}
    h = x
    for i in range(model.num_gcl):
        mixed = a_hat @ h
        pre = mixed @ p[f"gcl{i}.W"]
        cache["inputs"].append(h)
        cache["mixed"].append(mixed)
        cache["pre"].append(pre)
        h = relu(pre)
    fc_pre = h @ p["fc.W"] + p["fc.b"]
    fc = relu(fc_pre)
    y_hat = (fc @ p["out.W"])[..., 0] + p["out.b"][0]
    cache.update(last=h, fc_pre=fc_pre, fc=fc)
    return y_hat, cache


def forward(model: GcnModel, a_hat: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Raw per-node rainfall prediction (mm), unclamped."""
    return _forward(model, a_hat, x)[0]


def mse_loss(model: GcnModel, a_hat: np.ndarray, x: np.ndarray, y: np.ndarray) -> float:
    y_hat = forward(model, a_hat, x)
    return float(np.mean((y_hat - y) ** 2))


def backward(model: GcnModel, a_hat: np.ndarray, x: np.ndarray, y: np.ndarray) -> tuple[float, dict[str, np.ndarray]]:
    """Loss and exact gradients of the mean squared error over all nodes and snapshots.

    The ReLU derivative at exactly 0 is taken as 0.
    """
    a_hat = np.asarray(a_hat, dtype=float)
    y = np.asarray(y, dtype=float)
    y_hat, cache = _forward(model, a_hat, x)
    if y.shape != y_hat.shape:
        raise ShapeMismatch(f"targets {y.shape} do not match predictions {y_hat.shape}")
    p = model.params
    diff = y_hat - y
    loss = float(np.mean(diff**2))
    d_out = 2.0 * diff / diff.size

    def flat(arr):
        return arr.reshape(-1, arr.shape[-1])

    grads: dict[str, np.ndarray] = {}
    grads["out.W"] = flat(cache["fc"]).T @ d_out.reshape(-1, 1)
    grads["out.b"] = np.array([d_out.sum()])
    d_fc_pre = d_out[..., None] * p["out.W"][:, 0] * (cache["fc_pre"] > 0)
    grads["fc.W"] = flat(cache["last"]).T @ flat(d_fc_pre)
    grads["fc.b"] = flat(d_fc_pre).sum(axis=0)
    d_h = d_fc_pre @ p["fc.W"].T
    for i in reversed(range(model.num_gcl)):
        w = p[f"gcl{i}.W"]
        d_pre = d_h * (cache["pre"][i] > 0)
        grads[f"gcl{i}.W"] = flat(cache["mixed"][i]).T @ flat(d_pre)
        if i > 0:
            d_h = a_hat.T @ (d_pre @ w.T)
    return loss, {name: grads[name] for name in p}


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, params: dict[str, np.ndarray]) -> AdamState:
        return cls({k: np.zeros_like(v) for k, v in params.items()}, {k: np.zeros_like(v) for k, v in params.items()})


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float = 0.01,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    frozen: Collection[str] = (),
) -> tuple[dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam update. Returns new params and state; inputs are untouched."""
    t = state.t + 1
    new_params, m, v = {}, {}, {}
    for name, value in params.items():
        if name in frozen:
            new_params[name], m[name], v[name] = value, state.m[name], state.v[name]
            continue
        g = grads[name]
        m[name] = beta1 * state.m[name] + (1 - beta1) * g
        v[name] = beta2 * state.v[name] + (1 - beta2) * g * g
        m_hat = m[name] / (1 - beta1**t)
        v_hat = v[name] / (1 - beta2**t)
        new_params[name] = value - lr * m_hat / (np.sqrt(v_hat) + eps)
    return new_params, AdamState(m, v, t)


@dataclass
class TrainReport:
    epochs_run: int = 0
    train_loss_history: list[float] = field(default_factory=list)
    val_loss_history: list[float] = field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False

    def as_dict(self) -> dict:
        return {
            "epochs_run": self.epochs_run,
            "train_loss_history": list(self.train_loss_history),
            "val_loss_history": list(self.val_loss_history),
            "best_epoch": self.best_epoch,
            "stopped_early": self.stopped_early,
        }


def train(
    model: GcnModel,
    a_hat: np.ndarray,
    train_set: SampleSet,
    val_set: SampleSet,
    config: GcnConfig | None = None,
    frozen: Collection[str] = (),
) -> tuple[GcnModel, TrainReport]:
    """Mini-batch Adam with early stopping on validation MSE.

    Batches are consecutive runs of ``batch_size`` snapshots in date order;
    nothing is shuffled. Training halts once validation MSE has failed to
    improve by more than 1e-6 for ``patience`` epochs, and the returned
    model carries the best-epoch weights.
    """
    config = config or model.config
    if len(train_set) == 0 or len(val_set) == 0:
        raise EmptySplit("training and validation blocks must be non-empty")
    model = model.copy()
    state = AdamState.zeros_like(model.params)
    report = TrainReport()
    best_val = np.inf
    best_params = {k: v.copy() for k, v in model.params.items()}
    wait = 0
    x_train, y_train = train_set.features, train_set.targets
    for epoch in range(config.max_epochs):
        for start in range(0, len(train_set), config.batch_size):
            stop = start + config.batch_size
            _, grads = backward(model, a_hat, x_train[start:stop], y_train[start:stop])
            model.params, state = adam_step(model.params, grads, state, lr=config.learning_rate, frozen=frozen)
        train_loss = mse_loss(model, a_hat, x_train, y_train)
        val_loss = mse_loss(model, a_hat, val_set.features, val_set.targets)
        report.train_loss_history.append(train_loss)
        report.val_loss_history.append(val_loss)
        report.epochs_run = epoch + 1
        log.debug("epoch %d train_mse=%.6f val_mse=%.6f", epoch + 1, train_loss, val_loss)
        if val_loss < best_val - IMPROVEMENT_TOL:
            best_val = val_loss
            report.best_epoch = epoch
            best_params = {k: v.copy() for k, v in model.params.items()}
            wait = 0
        else:
            wait += 1
            if wait >= config.patience:
                report.stopped_early = True
                break
    # a val loss that never beat the initial inf still leaves best_epoch at 0
    if not np.isfinite(best_val):
        report.best_epoch = int(np.argmin(report.val_loss_history))
        best_params = {k: v.copy() for k, v in model.params.items()}
    model.params = best_params
    return model, report


@dataclass(frozen=True)
class StationForecast:
    station_id: str
    rain_mm: float
    heavy: bool


def flag_heavy(raw: np.ndarray, threshold_mm: float = 8.0) -> tuple[np.ndarray, np.ndarray]:
    """Clamp raw predictions at 0 and flag values at or above the threshold."""
    rain = np.maximum(np.asarray(raw, dtype=float), 0.0)
    return rain, rain >= threshold_mm


def predict_with_flags(
    model: GcnModel,
    a_hat: np.ndarray,
    x: np.ndarray,
    threshold_mm: float | None = None,
    node_order: Sequence[str] | None = None,
) -> list[StationForecast]:
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ShapeMismatch("predict_with_flags takes a single snapshot (nodes x features)")
    threshold = model.config.heavy_threshold_mm if threshold_mm is None else threshold_mm
    rain, heavy = flag_heavy(forward(model, a_hat, x), threshold)
    ids = list(node_order) if node_order is not None else [str(i) for i in range(len(rain))]
    if len(ids) != len(rain):
        raise ShapeMismatch(f"{len(ids)} station ids for {len(rain)} nodes")
    return [StationForecast(sid, float(r), bool(h)) for sid, r, h in zip(ids, rain, heavy)]


def with_config(model: GcnModel, **changes) -> GcnModel:
    return GcnModel(replace(model.config, **changes), model.feature_dim, model.params)
