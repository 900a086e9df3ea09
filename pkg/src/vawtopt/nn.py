"""Fully connected tanh network trained by full-batch gradient descent.

Implements the layer composition f = affine_out o tanh o affine_{n} o ... o
tanh o affine_1 with reverse-mode gradients of the mean squared error, plus
the fixed 32-configuration hyperparameter grid (hidden layers x learning
rate x width).  Inputs and targets are standardized to zero mean / unit
variance on the training split; the model carries both transforms so the
forward pass returns torque-coefficient units.

Everything is seeded and full-batch, so training runs are bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .design_space import DesignPoint
from .errors import DatasetTooSmall, ShapeMismatch
from .fileio import atomic_write_text
from .oracle import Dataset

N_INPUTS = 6

GRID_HIDDEN_LAYERS = (1, 2)
GRID_LEARNING_RATES = (0.01, 0.001)
GRID_WIDTHS = (10, 20, 30, 40, 50, 64, 80, 128)

# Early stop: training halts once the full-batch MSE improves by less than
# this over a 100-epoch lookback.
_EARLY_STOP_LOOKBACK = 100
_EARLY_STOP_DELTA = 1e-10

_MODEL_FMT = "%.17g"


@dataclass(frozen=True)
class MlpConfig:
    hidden_layers: int = 1
    width: int = 64
    learning_rate: float = 0.01
    epochs: int = 20000
    seed: int = 0
    train_fraction: float = 0.8
    activation: str = "tanh"

    def __post_init__(self):
        if self.hidden_layers < 1 or self.width < 1:
            raise ValueError("hidden_layers and width must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must be in (0, 1)")
        if self.activation != "tanh":
            raise ValueError("only the tanh activation is supported")


@dataclass
class MlpModel:
    """Weights/biases per affine layer plus the standardization transforms.

    Shape chain: W[0] is (width, 6), intermediate W[i] are (width, width),
    W[-1] is (1, width); biases match the row counts.  ``history`` holds the
    full-batch training MSE in C_T units, entry 0 at initialization.
    """

    weights: list
    biases: list
    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: float
    y_std: float
    config: MlpConfig | None = None
    history: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def n_parameters(self) -> int:
        return int(sum(w.size for w in self.weights) + sum(b.size for b in self.biases))

    def validate_shapes(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ShapeMismatch("weights/biases layer counts differ")
        prev = N_INPUTS
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.ndim != 1 or w.shape != (b.shape[0], prev):
                raise ShapeMismatch(
                    f"layer {i}: weight {w.shape} / bias {b.shape} inconsistent with fan-in {prev}"
                )
            prev = w.shape[0]
        if prev != 1:
            raise ShapeMismatch("output layer must have a single unit")


@dataclass(frozen=True)
class TrainReport:
    final_train_mse: float
    final_test_mse: float
    epochs_run: int
    diverged: bool


def standardize_outputs(model: MlpModel, y: np.ndarray) -> np.ndarray:
    return (y - model.y_mean) / model.y_std


def destandardize_outputs(model: MlpModel, y_std: np.ndarray):
    return y_std * model.y_std + model.y_mean


def _forward_std(model: MlpModel, x_std: np.ndarray):
    """Batch forward pass on standardized inputs; returns the standardized
    outputs and the per-layer activations needed by backprop."""
    activations = [x_std]
    a = x_std
    for w, b in zip(model.weights[:-1], model.biases[:-1]):
        a = np.tanh(a @ w.T + b)
        activations.append(a)
    out = a @ model.weights[-1].T + model.biases[-1]
    return out[:, 0], activations


def forward(model: MlpModel, x: DesignPoint) -> float:
    """Network prediction in C_T units for a single design point."""
    model.validate_shapes()
    z = (x.as_array() - model.x_mean) / model.x_std
    out, _ = _forward_std(model, z[None, :])
    return float(out[0] * model.y_std + model.y_mean)


def predict_batch(model: MlpModel, points) -> np.ndarray:
    z = (np.array([p.as_array() for p in points]) - model.x_mean) / model.x_std
    out, _ = _forward_std(model, z)
    return out * model.y_std + model.y_mean


def _as_xy(batch):
    if isinstance(batch, Dataset):
        return batch.x_matrix(), batch.y_array()
    pts, ys = zip(*batch)
    return np.array([p.as_array() for p in pts]), np.array(ys, dtype=float)


def batch_loss(model: MlpModel, batch) -> float:
    """Training objective: mean squared error in standardized output space."""
    x, y = _as_xy(batch)
    x_std = (x - model.x_mean) / model.x_std
    out, _ = _forward_std(model, x_std)
    return float(np.mean((out - standardize_outputs(model, y)) ** 2))


def _backward_arrays(model: MlpModel, x_std: np.ndarray, y_std: np.ndarray):
    out, activations = _forward_std(model, x_std)
    resid = out - y_std
    m = len(y_std)
    grad_w = [None] * len(model.weights)
    grad_b = [None] * len(model.biases)
    # output layer: E = mean(resid^2), delta has shape (m, 1)
    delta = (2.0 / m) * resid[:, None]
    grad_w[-1] = delta.T @ activations[-1]
    grad_b[-1] = delta.sum(axis=0)
    for i in range(len(model.weights) - 2, -1, -1):
        delta = (delta @ model.weights[i + 1]) * (1.0 - activations[i + 1] ** 2)
        grad_w[i] = delta.T @ activations[i]
        grad_b[i] = delta.sum(axis=0)
    return grad_w, grad_b


def backward(model: MlpModel, batch):
    """Gradients of :func:`batch_loss` with respect to every weight matrix
    and bias vector, via reverse-mode differentiation through the tanh
    layers.  Returns (grad_weights, grad_biases) with matching shapes."""
    model.validate_shapes()
    x, y = _as_xy(batch)
    if len(y) == 0:
        raise ValueError("batch must be non-empty")
    x_std = (x - model.x_mean) / model.x_std
    return _backward_arrays(model, x_std, standardize_outputs(model, y))


def _init_model(config: MlpConfig, x_mean, x_std, y_mean, y_std, rng) -> MlpModel:
    """Symmetric uniform init scaled by 1/sqrt(fan-in); biases start at zero."""
    sizes = [N_INPUTS] + [config.width] * config.hidden_layers + [1]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        s = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-s, s, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpModel(weights, biases, x_mean, x_std, y_mean, y_std, config=config)


def _guard(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return np.where(v == 0.0, 1.0, v)


def train(data, config: MlpConfig) -> tuple:
    """Full-batch gradient descent: W(t+1) = W(t) - l_r * dE/dW.

    The dataset is split train/test by a seeded shuffle at train_fraction;
    standardization statistics come from the training split only.  Training
    halts early on a vanishing MSE improvement, or immediately when the loss
    goes non-finite (the last finite parameters are kept and the report is
    flagged as diverged).
    """
    x, y = _as_xy(data)
    n = len(y)
    if n < 10:
        raise DatasetTooSmall(f"need at least 10 rows, got {n}")
    rng = np.random.Generator(np.random.PCG64(config.seed))
    perm = rng.permutation(n)
    n_train = min(max(1, int(config.train_fraction * n)), n - 1)
    train_idx, test_idx = perm[:n_train], perm[n_train:]

    x_mean = x[train_idx].mean(axis=0)
    x_std = _guard(x[train_idx].std(axis=0))
    y_mean = float(y[train_idx].mean())
    y_std = float(_guard(y[train_idx].std()))

    model = _init_model(config, x_mean, x_std, y_mean, y_std, rng)
    xt = (x[train_idx] - x_mean) / x_std
    yt = (y[train_idx] - y_mean) / y_std

    def train_mse():
        out, _ = _forward_std(model, xt)
        return float(np.mean((out - yt) ** 2))

    to_ct = y_std**2  # standardized MSE -> C_T-unit MSE
    history = [train_mse() * to_ct]
    diverged = False
    # overflow inside the loop is the divergence signal, not an error
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(config.epochs):
            grad_w, grad_b = _backward_arrays(model, xt, yt)
            snapshot = (
                [w.copy() for w in model.weights],
                [b.copy() for b in model.biases],
            )
            for i in range(len(model.weights)):
                model.weights[i] -= config.learning_rate * grad_w[i]
                model.biases[i] -= config.learning_rate * grad_b[i]
            mse = train_mse()
            if not np.isfinite(mse) or any(
                not np.isfinite(w).all() for w in model.weights
            ):
                # restore the last finite parameters and stop
                model.weights, model.biases = snapshot
                diverged = True
                break
            history.append(mse * to_ct)
            if (
                len(history) > _EARLY_STOP_LOOKBACK
                and history[-_EARLY_STOP_LOOKBACK - 1] - history[-1] < _EARLY_STOP_DELTA
            ):
                break
    model.history = np.array(history)

    test_pred = predict_batch(model, [DesignPoint(*row) for row in x[test_idx]])
    report = TrainReport(
        final_train_mse=float(history[-1]),
        final_test_mse=float(np.mean((test_pred - y[test_idx]) ** 2)),
        epochs_run=len(history) - 1,
        diverged=diverged,
    )
    return model, report


@dataclass(frozen=True)
class GridSearchRow:
    config: MlpConfig
    report: TrainReport
    test_mse: float  # on the externally supplied test set


def grid_configs(epochs: int = 20000, seed: int = 0, train_fraction: float = 0.8):
    """The fixed 2 x 2 x 8 lattice, in enumeration order."""
    return [
        MlpConfig(
            hidden_layers=n,
            width=w,
            learning_rate=lr,
            epochs=epochs,
            seed=seed,
            train_fraction=train_fraction,
        )
        for n in GRID_HIDDEN_LAYERS
        for lr in GRID_LEARNING_RATES
        for w in GRID_WIDTHS
    ]


def grid_search(
    data,
    test_points: Dataset,
    epochs: int = 20000,
    seed: int = 0,
    train_fraction: float = 0.8,
) -> tuple:
    """Train all 32 grid configurations on identical splits and seeds.

    Returns (best_config, rows); the winner minimizes the MSE on the
    external ``test_points``, with ties broken toward smaller width, then
    fewer hidden layers, then the larger learning rate.  Row order follows
    the fixed enumeration, never completion order.
    """
    rows = []
    for config in grid_configs(epochs=epochs, seed=seed, train_fraction=train_fraction):
        model, report = train(data, config)
        pred = predict_batch(model, test_points.points)
        test_mse = float(np.mean((pred - test_points.y_array()) ** 2))
        rows.append(GridSearchRow(config=config, report=report, test_mse=test_mse))
    best = min(
        rows,
        key=lambda r: (
            r.test_mse,
            r.config.width,
            r.config.hidden_layers,
            -r.config.learning_rate,
        ),
    )
    return best.config, rows


def save_model(model: MlpModel, path):
    """Flat text persistence: config echo plus row-major weight/bias blocks
    at 17 significant digits (reload reproduces outputs bit-identically)."""
    model.validate_shapes()
    cfg = model.config or MlpConfig(
        hidden_layers=len(model.weights) - 1, width=model.weights[0].shape[0]
    )
    lines = [
        "format=mlp-model-v1",
        f"hidden_layers={cfg.hidden_layers}",
        f"width={cfg.width}",
        f"learning_rate={_MODEL_FMT % cfg.learning_rate}",
        f"epochs={cfg.epochs}",
        f"seed={cfg.seed}",
        f"train_fraction={_MODEL_FMT % cfg.train_fraction}",
        "x_mean=" + ",".join(_MODEL_FMT % v for v in model.x_mean),
        "x_std=" + ",".join(_MODEL_FMT % v for v in model.x_std),
        f"y_mean={_MODEL_FMT % model.y_mean}",
        f"y_std={_MODEL_FMT % model.y_std}",
    ]
    for i, (w, b) in enumerate(zip(model.weights, model.biases), start=1):
        lines.append(f"[W{i} {w.shape[0]}x{w.shape[1]}]")
        for row in w:
            lines.append(",".join(_MODEL_FMT % v for v in row))
        lines.append(f"[b{i} {b.shape[0]}]")
        lines.append(",".join(_MODEL_FMT % v for v in b))
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_model(path) -> MlpModel:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines or lines[0] != "format=mlp-model-v1":
        raise ValueError(f"{path}: not an mlp-model-v1 file")
    kv = {}
    i = 1
    while i < len(lines) and not lines[i].startswith("["):
        k, v = lines[i].split("=", 1)
        kv[k] = v
        i += 1
    config = MlpConfig(
        hidden_layers=int(kv["hidden_layers"]),
        width=int(kv["width"]),
        learning_rate=float(kv["learning_rate"]),
        epochs=int(kv["epochs"]),
        seed=int(kv["seed"]),
        train_fraction=float(kv["train_fraction"]),
    )
    weights, biases = [], []
    current = None
    buf = []
    def flush():
        if current is None:
            return
        arr = np.array([[float(c) for c in row.split(",")] for row in buf])
        if current.startswith("W"):
            weights.append(arr)
        else:
            biases.append(arr[0])
    for ln in lines[i:]:
        if ln.startswith("["):
            flush()
            current = ln.strip("[]").split()[0]
            buf = []
        else:
            buf.append(ln)
    flush()
    model = MlpModel(
        weights=weights,
        biases=biases,
        x_mean=np.array([float(c) for c in kv["x_mean"].split(",")]),
        x_std=np.array([float(c) for c in kv["x_std"].split(",")]),
        y_mean=float(kv["y_mean"]),
        y_std=float(kv["y_std"]),
        config=config,
    )
    model.validate_shapes()
    return model
