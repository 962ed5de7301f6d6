"""Fully connected surrogate mapping an STL spectrum to the six circuit
parameters of a two-order resonator.

Hidden layers are dense -> batchnorm -> ReLU -> dropout, the output layer is
dense and linear. Inputs are z-scored spectra, outputs are EEPs scaled to
[0, 1] by the configured EEP ranges.
"""
import itertools
import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from tqdm import trange

from thr_design import layers
from thr_design.acoustics import EquivalentElectricalParams, StlSpectrum
from thr_design.data import NormalizationStats, dataset_arrays
from thr_design.errors import (
    GridMismatchError,
    NonFiniteError,
    ShapeMismatchError,
    StaleCacheError,
    ValidationError,
)
from thr_design.learning_curve import LearningCurve

logger = logging.getLogger(__name__)

HIDDEN_WIDTHS = (450, 250, 220)
N_OUTPUTS = 6


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 256
    max_epochs: int = 500
    patience: int = 20
    dropout: float = 0.1
    learning_rate: float = 1e-3
    seed: int = 0
    hidden: tuple = HIDDEN_WIDTHS
    log_every: int = 10

    def __post_init__(self):
        object.__setattr__(self, 'hidden', tuple(int(w) for w in self.hidden))
        if int(self.batch_size) < 1:
            raise ValidationError(f"batch size must be at least 1, got {self.batch_size}")
        if int(self.patience) < 1:
            raise ValidationError(f"patience must be at least 1, got {self.patience}")
        if int(self.max_epochs) < 1:
            raise ValidationError(f"max epochs must be at least 1, got {self.max_epochs}")
        if not 0. <= self.dropout < 1.:
            raise ValidationError(f"dropout rate must be in [0, 1), got {self.dropout}")
        if not self.learning_rate > 0:
            raise ValidationError(f"learning rate must be positive, got {self.learning_rate}")
        if not self.hidden or min(self.hidden) < 1:
            raise ValidationError(f"invalid hidden widths {self.hidden}")

    def to_dict(self) -> dict:
        values = asdict(self)
        values['hidden'] = list(self.hidden)
        return values


class MLPModel:
    """Layer widths, parameters, batchnorm running statistics and the
    normalization statistics of the data it was trained on.

    Every parameter update goes through set_params, which advances
    `generation`; a forward cache is only valid for the generation it was
    computed at.
    """
    _tokens = itertools.count()

    def __init__(self, widths, params: dict, bn_state: list, norm_stats: NormalizationStats = None,
                 config: TrainConfig = None) -> None:
        self.widths = [int(w) for w in widths]
        self.params = params
        self.bn_state = bn_state
        self.norm_stats = norm_stats
        self.config = config or TrainConfig()
        self.generation = 0
        self._token = next(self._tokens)

    @property
    def n_layers(self) -> int:
        return len(self.widths) - 1

    @property
    def n_parameters(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def set_params(self, params: dict) -> None:
        self.params = params
        self.generation += 1

    def snapshot(self) -> (dict, list):
        return ({k: v.copy() for k, v in self.params.items()},
                [{k: v.copy() for k, v in s.items()} for s in self.bn_state])

    def restore(self, snapshot) -> None:
        params, bn_state = snapshot
        self.set_params({k: v.copy() for k, v in params.items()})
        self.bn_state = [{k: v.copy() for k, v in s.items()} for s in bn_state]

    def __repr__(self):
        return f"MLPModel(widths={self.widths}, parameters={self.n_parameters})"


@dataclass(eq=False)
class ForwardCache:
    token: int
    generation: int
    mode: str
    output_shape: tuple
    layers: list = field(default_factory=list)


def build_model(widths=None, config: TrainConfig = None, norm_stats: NormalizationStats = None,
                seed: int = None) -> MLPModel:
    """He-uniform initialized model, W ~ U(-sqrt(6/fan_in), sqrt(6/fan_in)),
    zero biases, unit batchnorm scale and running variance.

    Args:
        widths: list[int]
            all layer widths including input and output; defaults to
            [grid count, *config.hidden, 6]
        seed: int
            initialization seed, config.seed when None
    """
    config = config or TrainConfig()
    if widths is None:
        n_inputs = norm_stats.grid.count if norm_stats is not None else 500
        widths = [n_inputs, *config.hidden, N_OUTPUTS]
    widths = [int(w) for w in widths]
    if len(widths) < 2 or min(widths) < 1:
        raise ValidationError(f"invalid layer widths {widths}")
    rng = np.random.default_rng(config.seed if seed is None else seed)
    params, bn_state = {}, []
    for i, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:]), start=1):
        limit = np.sqrt(6. / fan_in)
        params[f"W{i}"] = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        params[f"b{i}"] = np.zeros(fan_out)
        if i < len(widths) - 1:
            params[f"gamma{i}"] = np.ones(fan_out)
            params[f"beta{i}"] = np.zeros(fan_out)
            bn_state.append({'running_mean': np.zeros(fan_out), 'running_var': np.ones(fan_out)})
    return MLPModel(widths, params, bn_state, norm_stats, config)


def forward(model: MLPModel, x, mode: str = 'infer', rng: np.random.Generator = None,
            masks: list = None) -> (np.ndarray, ForwardCache):
    """Forward pass.

    Train mode normalizes with batch statistics (updating the running ones)
    and applies dropout masks drawn from rng, or the given masks. Infer mode
    uses the running statistics and no dropout, and leaves the model
    untouched.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != model.widths[0]:
        raise ShapeMismatchError(f"expected input of shape (n, {model.widths[0]}), got {x.shape}")
    if mode not in ('train', 'infer'):
        raise ValueError(f"invalid mode '{mode}'")
    rate = model.config.dropout
    if mode == 'train' and rate > 0 and rng is None and masks is None:
        raise ValidationError("train-mode forward with dropout needs an rng or masks")
    p = model.params
    cache = ForwardCache(token=model._token, generation=model.generation, mode=mode, output_shape=())
    out = x
    for i in range(1, model.n_layers + 1):
        out, affine_cache = layers.affine_forward(out, p[f"W{i}"], p[f"b{i}"])
        if i == model.n_layers:
            cache.layers.append((affine_cache,))
            break
        out, bn_cache = layers.batchnorm_forward(out, p[f"gamma{i}"], p[f"beta{i}"],
                                                 model.bn_state[i - 1], mode)
        out, relu_cache = layers.relu_forward(out)
        mask = masks[i - 1] if masks is not None else None
        out, drop_cache = layers.dropout_forward(out, rate, mode, rng, mask)
        cache.layers.append((affine_cache, bn_cache, relu_cache, drop_cache))
    cache.output_shape = out.shape
    return out, cache


def backward(model: MLPModel, cache: ForwardCache, dout) -> dict:
    """Exact gradients of every parameter given the gradient of the loss
    with respect to the output of a train-mode forward pass."""
    if cache.token != model._token or cache.generation != model.generation:
        raise StaleCacheError("forward cache does not belong to the current model parameters")
    if cache.mode != 'train':
        raise StaleCacheError("backward needs the cache of a train-mode forward pass")
    dout = np.asarray(dout, dtype=float)
    if dout.shape != cache.output_shape:
        raise ShapeMismatchError(f"output gradient shape {dout.shape} != output shape {cache.output_shape}")
    grads = {}
    n = model.n_layers
    (affine_cache,) = cache.layers[n - 1]
    dx, grads[f"W{n}"], grads[f"b{n}"] = layers.affine_backward(dout, affine_cache)
    for i in range(n - 1, 0, -1):
        affine_cache, bn_cache, relu_cache, drop_cache = cache.layers[i - 1]
        dx = layers.dropout_backward(dx, drop_cache)
        dx = layers.relu_backward(dx, relu_cache)
        dx, grads[f"gamma{i}"], grads[f"beta{i}"] = layers.batchnorm_backward(dx, bn_cache)
        dx, grads[f"W{i}"], grads[f"b{i}"] = layers.affine_backward(dx, affine_cache)
    return grads


def mse_loss(pred, target) -> (float, np.ndarray):
    """Mean squared error over batch and outputs, and its gradient."""
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape:
        raise ShapeMismatchError(f"prediction shape {pred.shape} != target shape {target.shape}")
    diff = pred - target
    return float(np.mean(diff**2)), 2. * diff / diff.size


@dataclass(eq=False)
class AdamState:
    m: dict
    v: dict
    step: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, params: dict, learning_rate: float = 1e-3):
        return cls(m={k: np.zeros_like(v) for k, v in params.items()},
                   v={k: np.zeros_like(v) for k, v in params.items()},
                   learning_rate=learning_rate)


def adam_step(state: AdamState, params: dict, grads: dict) -> (dict, AdamState):
    """Bias-corrected Adam update. Inputs are left untouched; new parameter
    and state objects are returned."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"non-finite gradient of {name} at step {state.step + 1}")
    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    new_params, m, v = {}, {}, {}
    for name, p in params.items():
        g = grads[name]
        m[name] = b1 * state.m[name] + (1. - b1) * g
        v[name] = b2 * state.v[name] + (1. - b2) * g**2
        m_hat = m[name] / (1. - b1**t)
        v_hat = v[name] / (1. - b2**t)
        new_params[name] = p - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
    return new_params, AdamState(m=m, v=v, step=t, learning_rate=state.learning_rate,
                                 beta1=b1, beta2=b2, eps=state.eps)


def evaluate(model: MLPModel, x, y, batch_size: int = 4096) -> float:
    """Infer-mode MSE over a whole partition."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    total = 0.
    for start in range(0, len(x), batch_size):
        out, _ = forward(model, x[start:start + batch_size], 'infer')
        total += np.sum((out - y[start:start + batch_size])**2)
    return float(total / y.size)


def prepare_arrays(df, norm_stats: NormalizationStats) -> (np.ndarray, np.ndarray):
    """Normalized (inputs, outputs) of a dataset frame."""
    spectra, eeps = dataset_arrays(df)
    return norm_stats.normalize_inputs(spectra), norm_stats.normalize_outputs(eeps)


def fit(model: MLPModel, train_part, val_part, config: TrainConfig = None) -> (MLPModel, LearningCurve):
    """Mini-batch Adam on the MSE with early stopping on the validation MSE.

    The parameters with the lowest validation MSE are restored at the end.
    Epoch 0 of the curve is the untrained model; its train MSE is measured
    in infer mode, later ones are the mean train-mode batch losses.

    Args:
        train_part: tuple[numpy.ndarray]
            normalized (inputs, outputs) of the training partition
        val_part: tuple[numpy.ndarray]
            normalized (inputs, outputs) of the validation partition
    """
    config = config or model.config
    x_train, y_train = (np.asarray(a, dtype=float) for a in train_part)
    x_val, y_val = (np.asarray(a, dtype=float) for a in val_part)
    if len(x_train) == 0 or len(x_val) == 0:
        raise ValidationError("training and validation partitions must not be empty")
    if len(x_train) != len(y_train) or len(x_val) != len(y_val):
        raise ShapeMismatchError("inputs and outputs of a partition differ in length")

    rng = np.random.default_rng(config.seed)
    state = AdamState.zeros(model.params, config.learning_rate)
    curve = LearningCurve()
    best_val = evaluate(model, x_val, y_val)
    curve.append(0, evaluate(model, x_train, y_train), best_val)
    best = model.snapshot()
    n = len(x_train)
    wait = 0
    for epoch in trange(1, int(config.max_epochs) + 1, desc='training', disable=None):
        perm = rng.permutation(n)
        total = 0.
        for start in range(0, n, int(config.batch_size)):
            idx = perm[start:start + int(config.batch_size)]
            out, cache = forward(model, x_train[idx], 'train', rng)
            loss, dout = mse_loss(out, y_train[idx])
            if not np.isfinite(loss):
                raise NonFiniteError(f"non-finite training loss at epoch {epoch}")
            params, state = adam_step(state, model.params, backward(model, cache, dout))
            model.set_params(params)
            total += loss * len(idx)
        val = evaluate(model, x_val, y_val)
        curve.append(epoch, total / n, val)
        if epoch % int(config.log_every) == 0:
            logger.info(f"epoch {epoch}: train MSE {total / n:.4g}, validation MSE {val:.4g}")
        if val < best_val:
            best_val = val
            best = model.snapshot()
            wait = 0
        else:
            wait += 1
            if wait >= int(config.patience):
                logger.info(f"validation MSE stopped decreasing, stopping at epoch {epoch}")
                break
    model.restore(best)
    logger.info(f"best validation MSE {best_val:.4g} at epoch {curve.best_epoch()}")
    return model, curve


def _check_grid(model: MLPModel, start: float, step: float, count: int) -> None:
    grid = model.norm_stats.grid
    if count != grid.count or not np.isclose(start, grid.start) or not np.isclose(step, grid.step):
        raise GridMismatchError(f"spectrum grid (start={start}, step={step}, count={count}) differs from "
                                f"the model grid (start={grid.start}, step={grid.step}, count={grid.count})")


def predict_batch(model: MLPModel, spectra) -> np.ndarray:
    """EEPs (n, 6) in SI, clipped to the configured ranges, for spectra
    sampled on the model grid."""
    if model.norm_stats is None:
        raise ValidationError("model has no normalization statistics")
    spectra = np.atleast_2d(np.asarray(spectra, dtype=float))
    _check_grid(model, model.norm_stats.grid.start, model.norm_stats.grid.step, spectra.shape[1])
    out, _ = forward(model, model.norm_stats.normalize_inputs(spectra), 'infer')
    stats = model.norm_stats
    return np.clip(stats.denormalize_outputs(out), stats.output_min, stats.output_max)


def predict(model: MLPModel, spectrum: StlSpectrum) -> EquivalentElectricalParams:
    if model.norm_stats is None:
        raise ValidationError("model has no normalization statistics")
    _check_grid(model, spectrum.start_freq, spectrum.step, len(spectrum))
    return EquivalentElectricalParams.from_array(predict_batch(model, spectrum.values)[0])
