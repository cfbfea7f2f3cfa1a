"""
Feed-forward sigmoid network trained by batch backpropagation.

Weights follow the W_pq convention: ``weights[l][p, q]`` connects node p of
layer l to node q of layer l + 1. Every non-input node also carries a bias,
a weight against a constant input of 1.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from numbers import Integral
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from config import (
    EPOCH_LOG_INTERVAL,
    GRAD_CHECK_EPSILON,
    GRAD_CHECK_FLOOR,
    MLPConfig,
    format_floats,
    parse_floats,
    read_kv_file,
    write_kv_file,
)
from error_handling import (
    InvalidConfigError,
    InvalidModelFileError,
    ShapeMismatchError,
    UnnormalizedInputError,
)
from logger import get_logger
from timeseries_data import SupervisedMatrix

logger = get_logger("epiforecast.mlp")

MODEL_FORMAT = "mlp/1"

_SIGMOID_LOW = np.finfo(float).tiny
_SIGMOID_HIGH = np.nextafter(1.0, 0.0)


@dataclass(frozen=True, eq=False)
class MLPModel:
    """Layered weights and biases of a sigmoid network"""

    weights: Tuple[np.ndarray, ...]
    biases: Tuple[np.ndarray, ...]

    activation = "sigmoid"

    def __post_init__(self):
        weights = tuple(np.array(w, dtype=float) for w in self.weights)
        biases = tuple(np.array(b, dtype=float).reshape(-1) for b in self.biases)
        if not weights or len(weights) != len(biases):
            raise ShapeMismatchError("need one bias vector per weight matrix")
        for layer, (w, b) in enumerate(zip(weights, biases)):
            if w.ndim != 2 or w.shape[1] != len(b):
                raise ShapeMismatchError(
                    f"layer {layer}: weights {w.shape}, bias {b.shape}"
                )
            if layer and weights[layer - 1].shape[1] != w.shape[0]:
                raise ShapeMismatchError(f"layer {layer}: input size does not chain")
            w.setflags(write=False)
            b.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "biases", biases)

    @property
    def layer_sizes(self) -> Tuple[int, ...]:
        return (self.weights[0].shape[0],) + tuple(w.shape[1] for w in self.weights)

    @property
    def n_weights(self) -> int:
        """Total trainable parameters, biases included"""
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))


@dataclass(frozen=True)
class TrainReport:
    layer_sizes: Tuple[int, ...]
    epochs_run: int
    train_mse_per_epoch: Tuple[float, ...]
    final_train_mse: float
    final_validation_mse: Optional[float] = None


@dataclass(frozen=True)
class CandidateResult:
    """One trained topology from an architecture search"""

    layer_sizes: Tuple[int, ...]
    model: MLPModel
    report: TrainReport
    n_weights: int
    score: float
    selected: bool = False


def init_weights(cfg: MLPConfig) -> MLPModel:
    """Uniform [init_low, init_high) draws from a generator seeded by cfg.seed"""
    rng = np.random.default_rng(cfg.seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(cfg.layer_sizes, cfg.layer_sizes[1:]):
        weights.append(rng.uniform(cfg.init_low, cfg.init_high, size=(fan_in, fan_out)))
        biases.append(rng.uniform(cfg.init_low, cfg.init_high, size=fan_out))
    return MLPModel(tuple(weights), tuple(biases))


def sigmoid(x):
    """1 / (1 + e^-x), computed without overflow and kept inside (0, 1)"""
    z = np.asarray(x, dtype=float)
    e = np.exp(-np.abs(z))
    out = np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    out = np.clip(out, _SIGMOID_LOW, _SIGMOID_HIGH)
    return float(out) if out.ndim == 0 else out


def sigmoid_derivative(o):
    """dY/dX expressed through the output: o * (1 - o)"""
    return o * (1.0 - o)


def _forward_arrays(weights, biases, X: np.ndarray) -> List[np.ndarray]:
    activations = [X]
    for w, b in zip(weights, biases):
        activations.append(sigmoid(activations[-1] @ w + b))
    return activations


def forward_batch(model: MLPModel, X) -> List[np.ndarray]:
    """Activations of every layer for a batch of rows; index 0 is the input"""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.layer_sizes[0]:
        raise ShapeMismatchError(
            f"network expects {model.layer_sizes[0]} inputs, got {X.shape[1]}"
        )
    return _forward_arrays(model.weights, model.biases, X)


def forward(model: MLPModel, x) -> Tuple[List[np.ndarray], float]:
    """Forward pass of one pattern: per-layer activations and the output o"""
    x = np.asarray(x, dtype=float).reshape(-1)
    activations = [a[0] for a in forward_batch(model, x.reshape(1, -1))]
    return activations, float(activations[-1][0])


def predict_normalized(model: MLPModel, X) -> np.ndarray:
    """Network outputs in (0, 1) for each row"""
    return forward_batch(model, X)[-1][:, 0]


def output_delta(d, o):
    """Error signal of an output node: (d - o) * o * (1 - o)"""
    return (d - o) * sigmoid_derivative(o)


def hidden_delta(o_j, downstream: Sequence[Tuple[float, float]]):
    """Error signal of a hidden node from its (w_ji, delta_i) downstream pairs"""
    total = sum(w * delta for w, delta in downstream)
    return sigmoid_derivative(o_j) * total


def _backprop_arrays(weights, activations, d: np.ndarray) -> List[np.ndarray]:
    delta = output_delta(d, activations[-1])
    deltas = [delta]
    for layer in range(len(weights) - 1, 0, -1):
        a = activations[layer]
        delta = sigmoid_derivative(a) * (delta @ weights[layer].T)
        deltas.insert(0, delta)
    return deltas


def backpropagate(model: MLPModel, X, d) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    """Activations and per-layer deltas for a batch; deltas[l] belongs to layer l + 1"""
    activations = forward_batch(model, X)
    d = np.asarray(d, dtype=float).reshape(-1, 1)
    if d.shape[0] != activations[0].shape[0]:
        raise ShapeMismatchError(
            f"{activations[0].shape[0]} patterns, {d.shape[0]} targets"
        )
    return activations, _backprop_arrays(model.weights, activations, d)


def update_weights(
    model: MLPModel,
    activations: Sequence[np.ndarray],
    deltas: Sequence[np.ndarray],
    learning_rate: float,
) -> MLPModel:
    """W_pq += eta * sum over the batch of delta_q * o_p; biases use o_p = 1"""
    if len(activations) != len(model.weights) + 1 or len(deltas) != len(model.weights):
        raise ShapeMismatchError("activations/deltas do not match the topology")
    weights, biases = [], []
    for layer, (w, b) in enumerate(zip(model.weights, model.biases)):
        upstream = np.atleast_2d(activations[layer])
        delta = np.atleast_2d(deltas[layer])
        if upstream.shape[1] != w.shape[0] or delta.shape[1] != w.shape[1]:
            raise ShapeMismatchError(
                f"layer {layer}: signal shapes do not match weights"
            )
        if upstream.shape[0] != delta.shape[0]:
            raise ShapeMismatchError(f"layer {layer}: batch sizes differ")
        weights.append(w + learning_rate * (upstream.T @ delta))
        biases.append(b + learning_rate * delta.sum(axis=0))
    return MLPModel(tuple(weights), tuple(biases))


def _check_unit_interval(m: SupervisedMatrix, label: str) -> None:
    for name, values in (("features", m.X), ("target", m.y)):
        if values is None:
            raise UnnormalizedInputError(f"{label} set has no target")
        finite = np.all(np.isfinite(values))
        if not finite or np.any(values < 0.0) or np.any(values > 1.0):
            raise UnnormalizedInputError(f"{label} {name} fall outside [0, 1]")


def _mse(model: MLPModel, m: SupervisedMatrix) -> float:
    err = m.y - predict_normalized(model, m.X)
    return float(np.mean(err**2))


def train(
    model: MLPModel,
    train_set: SupervisedMatrix,
    cfg: MLPConfig,
    validation: Optional[SupervisedMatrix] = None,
) -> Tuple[MLPModel, TrainReport]:
    """Batch backpropagation for exactly cfg.max_epochs epochs"""
    _check_unit_interval(train_set, "training")
    if validation is not None:
        _check_unit_interval(validation, "validation")
    if train_set.n_features != model.layer_sizes[0]:
        raise ShapeMismatchError(
            f"network expects {model.layer_sizes[0]} inputs, "
            f"training set has {train_set.n_features}"
        )

    X = train_set.X
    d = train_set.y.reshape(-1, 1)
    history = []
    for epoch in range(1, cfg.max_epochs + 1):
        activations = _forward_arrays(model.weights, model.biases, X)
        history.append(float(np.mean((d - activations[-1]) ** 2)))
        deltas = _backprop_arrays(model.weights, activations, d)
        model = update_weights(model, activations, deltas, cfg.learning_rate)
        if epoch % EPOCH_LOG_INTERVAL == 0:
            logger.debug(
                "layers=%s epoch %d train mse %.6g",
                model.layer_sizes,
                epoch,
                history[-1],
            )

    report = TrainReport(
        layer_sizes=model.layer_sizes,
        epochs_run=cfg.max_epochs,
        train_mse_per_epoch=tuple(history),
        final_train_mse=_mse(model, train_set),
        final_validation_mse=None if validation is None else _mse(model, validation),
    )
    return model, report


def candidate_layouts(
    n_inputs: int, hidden_layouts: Sequence[Union[int, Sequence[int]]]
) -> List[Tuple[int, ...]]:
    """Topologies [p, h1, ..., hk, 1]; a bare int is a single hidden layer"""
    layouts = []
    for hidden in hidden_layouts:
        if isinstance(hidden, Integral):
            hidden = (hidden,)
        layouts.append((n_inputs,) + tuple(int(h) for h in hidden) + (1,))
    return layouts


def select_architecture(
    candidates: Sequence[Sequence[int]],
    train_set: SupervisedMatrix,
    validation: Optional[SupervisedMatrix],
    cfg: MLPConfig,
    workers: int = 1,
) -> Tuple[MLPModel, List[CandidateResult]]:
    """Train every candidate from its own seeded init; keep the least validation MSE"""
    if not candidates:
        raise InvalidConfigError("at least one candidate topology is required")
    configs = [replace(cfg, layer_sizes=tuple(sizes)) for sizes in candidates]
    if validation is None:
        logger.warning("No validation data; selecting on final training MSE")

    def run(candidate_cfg: MLPConfig) -> Tuple[MLPModel, TrainReport]:
        return train(init_weights(candidate_cfg), train_set, candidate_cfg, validation)

    if workers > 1 and len(configs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            trained = list(pool.map(run, configs))
    else:
        trained = [run(c) for c in configs]

    scored = []
    for candidate_cfg, (model, report) in zip(configs, trained):
        score = report.final_validation_mse
        if score is None:
            score = report.final_train_mse
        scored.append((candidate_cfg.layer_sizes, model, report, score))

    best = min(
        range(len(scored)),
        key=lambda i: (scored[i][3], scored[i][1].n_weights, i),
    )
    results = [
        CandidateResult(
            layer_sizes=sizes,
            model=model,
            report=report,
            n_weights=model.n_weights,
            score=score,
            selected=(i == best),
        )
        for i, (sizes, model, report, score) in enumerate(scored)
    ]
    logger.info(
        "Selected layers %s (score %.6g) from %d candidate(s)",
        results[best].layer_sizes,
        results[best].score,
        len(results),
    )
    return results[best].model, results


def bp_gradients(model: MLPModel, x, d) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    """Gradient of 0.5 * (d - o)^2 from the deltas: dL/dW_pq = -delta_q * o_p"""
    activations, deltas = backpropagate(model, np.atleast_2d(x), np.atleast_1d(d))
    weight_grads = [-(a.T @ delta) for a, delta in zip(activations, deltas)]
    bias_grads = [-delta.sum(axis=0) for delta in deltas]
    return weight_grads, bias_grads


def _pattern_loss(weights, biases, x: np.ndarray, d: float) -> float:
    o = _forward_arrays(weights, biases, x)[-1][0, 0]
    return 0.5 * (d - o) ** 2


def gradient_check(model: MLPModel, pattern, eps: float = GRAD_CHECK_EPSILON) -> float:
    """Worst relative gap between BP gradients and central finite differences"""
    if not eps > 0:
        raise InvalidConfigError(f"eps must be > 0, got {eps}")
    x, d = pattern
    x = np.asarray(x, dtype=float).reshape(1, -1)
    d = float(d)
    weight_grads, bias_grads = bp_gradients(model, x, d)

    weights = [w.copy() for w in model.weights]
    biases = [b.copy() for b in model.biases]
    worst = 0.0
    for params, grads in ((weights, weight_grads), (biases, bias_grads)):
        for array, grad in zip(params, grads):
            flat = array.reshape(-1)
            for i, analytic in enumerate(grad.reshape(-1)):
                original = flat[i]
                flat[i] = original + eps
                loss_plus = _pattern_loss(weights, biases, x, d)
                flat[i] = original - eps
                loss_minus = _pattern_loss(weights, biases, x, d)
                flat[i] = original
                numeric = (loss_plus - loss_minus) / (2.0 * eps)
                scale = max(abs(analytic), abs(numeric), GRAD_CHECK_FLOOR)
                worst = max(worst, abs(analytic - numeric) / scale)
    return worst


def save_mlp_model(model: MLPModel, path) -> None:
    items = {
        "format": MODEL_FORMAT,
        "layer_sizes": ",".join(str(s) for s in model.layer_sizes),
    }
    for layer, (w, b) in enumerate(zip(model.weights, model.biases)):
        items[f"weights.{layer}"] = format_floats(w.reshape(-1))
        items[f"biases.{layer}"] = format_floats(b)
    write_kv_file(path, items)


def load_mlp_model(path) -> MLPModel:
    values = read_kv_file(path)
    if values.get("format") != MODEL_FORMAT:
        raise InvalidModelFileError(f"{path}: not a {MODEL_FORMAT} file")
    try:
        sizes = [int(s) for s in values["layer_sizes"].split(",")]
        weights, biases = [], []
        for layer, (fan_in, fan_out) in enumerate(zip(sizes, sizes[1:])):
            w = np.array(parse_floats(values[f"weights.{layer}"]), dtype=float)
            weights.append(w.reshape(fan_in, fan_out))
            b = np.array(parse_floats(values[f"biases.{layer}"]), dtype=float)
            biases.append(b)
        return MLPModel(tuple(weights), tuple(biases))
    except (KeyError, ValueError) as e:
        raise InvalidModelFileError(f"{path}: {e}") from None
