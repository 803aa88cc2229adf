"""
Augur - Autoencoder
License: GNU GPL

Tied-weight autoencoder layers trained from scratch with per-sample
stochastic gradient descent on the weight-decayed reconstruction objective,
and greedy layer-wise stacking of those layers into a deep feature extractor.

Only the encoder matrix W is ever stored. The decoder always uses W
transposed, and the gradient that flows through the decoder path is folded
back into W.
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.special import expit

from augur.errors import ConfigError, InputError, TrainingDivergedError

ACTIVATIONS = ('sigmoid', 'tanh')
LOSSES = ('square', 'cross_entropy')
PROBABILITY_CLAMP = 1e-12
MODEL_FORMAT = 'augur-autoencoder'


def activate(x, kind='sigmoid'):
    """Componentwise sigmoid or tanh"""
    if kind == 'sigmoid':
        return expit(x)
    if kind == 'tanh':
        return np.tanh(x)
    raise ConfigError(f"Unknown activation {kind!r}, expected one of {ACTIVATIONS}")


def _activation_slope(output, kind):
    # derivative expressed through the activation output
    if kind == 'sigmoid':
        return output * (1.0 - output)
    return 1.0 - output * output


@dataclass(frozen=True, eq=False)
class LayerParams:
    """Encoder weight W (d_f x d_s), encoder bias b_e (d_f) and decoder bias b_d (d_s)"""
    W: np.ndarray
    b_e: np.ndarray
    b_d: np.ndarray
    activation: str = 'sigmoid'

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"Unknown activation {self.activation!r}, expected one of {ACTIVATIONS}")
        W = np.array(self.W, dtype=np.float64)
        b_e = np.array(self.b_e, dtype=np.float64)
        b_d = np.array(self.b_d, dtype=np.float64)
        if W.ndim != 2 or b_e.shape != (W.shape[0],) or b_d.shape != (W.shape[1],):
            raise InputError(
                f"Inconsistent layer shapes: W {W.shape}, b_e {b_e.shape}, b_d {b_d.shape}"
            )
        for name, array in (('W', W), ('b_e', b_e), ('b_d', b_d)):
            if not np.all(np.isfinite(array)):
                raise InputError(f"Layer parameter {name} has non-finite entries")
            array.flags.writeable = False
        object.__setattr__(self, 'W', W)
        object.__setattr__(self, 'b_e', b_e)
        object.__setattr__(self, 'b_d', b_d)

    @property
    def feature_dim(self):
        return self.W.shape[0]

    @property
    def input_dim(self):
        return self.W.shape[1]

    @property
    def decoder_weight(self):
        return self.W.T


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    weight_decay: float = 1e-4
    epochs: int = 50
    seed: int = 0
    loss: str = 'square'
    init_scale: float = 0.05
    activation: str = 'sigmoid'

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError(f"Learning rate must be positive, got {self.learning_rate}")
        if not self.weight_decay >= 0:
            raise ConfigError(f"Weight decay must be non-negative, got {self.weight_decay}")
        if int(self.epochs) < 1:
            raise ConfigError(f"Epochs must be at least 1, got {self.epochs}")
        if not self.init_scale > 0:
            raise ConfigError(f"Init scale must be positive, got {self.init_scale}")
        if int(self.seed) < 0:
            raise ConfigError(f"Seed must be a non-negative integer, got {self.seed}")
        if self.loss not in LOSSES:
            raise ConfigError(f"Unknown loss {self.loss!r}, expected one of {LOSSES}")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"Unknown activation {self.activation!r}, expected one of {ACTIVATIONS}")
        if self.loss == 'cross_entropy' and self.activation == 'tanh':
            raise ConfigError("Cross-entropy loss needs sigmoid outputs in (0,1), not tanh")
        object.__setattr__(self, 'epochs', int(self.epochs))
        object.__setattr__(self, 'seed', int(self.seed))


def codebook_dims(input_dim, depth=2, ratio=0.1):
    """Feature size per layer: max(1, round(ratio * previous size)), halves rounded up"""
    dims = []
    previous = input_dim
    for _ in range(depth):
        previous = max(1, int(math.floor(ratio * previous + 0.5)))
        dims.append(previous)
    return tuple(dims)


@dataclass(frozen=True)
class StackConfig:
    layer_feature_dims: tuple = None
    train: TrainConfig = field(default_factory=TrainConfig)
    depth: int = 2
    codebook_ratio: float = 0.1

    def __post_init__(self):
        if self.layer_feature_dims is not None:
            dims = tuple(int(d) for d in self.layer_feature_dims)
            if not dims or min(dims) < 1:
                raise ConfigError(f"Layer feature sizes must be a non-empty list of counts >= 1, got {dims}")
            object.__setattr__(self, 'layer_feature_dims', dims)
            object.__setattr__(self, 'depth', len(dims))
        if int(self.depth) < 1:
            raise ConfigError(f"Stack depth must be at least 1, got {self.depth}")
        if not 0 < self.codebook_ratio <= 1:
            raise ConfigError(f"Codebook ratio must lie in (0, 1], got {self.codebook_ratio}")

    def resolve_dims(self, input_dim):
        if self.layer_feature_dims is not None:
            return self.layer_feature_dims
        return codebook_dims(input_dim, self.depth, self.codebook_ratio)


@dataclass(frozen=True, eq=False)
class AutoencoderStack:
    layers: tuple
    loss_history: tuple = ()
    config: StackConfig = None

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise InputError("An autoencoder stack needs at least one layer")
        for below, above in zip(layers, layers[1:]):
            if above.input_dim != below.feature_dim:
                raise InputError(
                    f"Layer dimensions do not chain: {below.feature_dim} features feed "
                    f"a layer expecting {above.input_dim}"
                )
        object.__setattr__(self, 'layers', layers)
        object.__setattr__(self, 'loss_history', tuple(tuple(h) for h in self.loss_history))

    @property
    def input_dim(self):
        return self.layers[0].input_dim

    @property
    def feature_dim(self):
        return self.layers[-1].feature_dim


def _check_dim(array, expected, what):
    if array.shape[-1] != expected:
        raise InputError(f"{what} has dimension {array.shape[-1]}, layer expects {expected}")


def encode(layer, s):
    """g(W s + b_e); accepts one vector or a matrix of row vectors"""
    s = np.asarray(s, dtype=np.float64)
    _check_dim(s, layer.input_dim, 'Encoder input')
    return activate(s @ layer.W.T + layer.b_e, layer.activation)


def decode(layer, f):
    """g(W^T f + b_d); accepts one vector or a matrix of row vectors"""
    f = np.asarray(f, dtype=np.float64)
    _check_dim(f, layer.feature_dim, 'Decoder input')
    return activate(f @ layer.W + layer.b_d, layer.activation)


def reconstruct(layer, s):
    return decode(layer, encode(layer, s))


def loss(u, v, kind='square'):
    """Reconstruction error summed over all components"""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise InputError(f"Loss operands differ in shape: {u.shape} vs {v.shape}")
    if kind == 'square':
        return float(np.sum((u - v) ** 2))
    if kind == 'cross_entropy':
        v = np.clip(v, PROBABILITY_CLAMP, 1.0 - PROBABILITY_CLAMP)
        return float(-np.sum(u * np.log(v) + (1.0 - u) * np.log(1.0 - v)))
    raise ConfigError(f"Unknown loss {kind!r}, expected one of {LOSSES}")


def _loss_slope(u, v, kind):
    if kind == 'square':
        return 2.0 * (v - u)
    v = np.clip(v, PROBABILITY_CLAMP, 1.0 - PROBABILITY_CLAMP)
    return (v - u) / (v * (1.0 - v))


def _objective(W, b_e, b_d, data, activation, kind, weight_decay):
    hidden = activate(data @ W.T + b_e, activation)
    output = activate(hidden @ W + b_d, activation)
    return loss(data, output, kind) + weight_decay * float(np.sum(W * W))


def _gradients(W, b_e, b_d, batch, activation, kind, weight_decay):
    hidden = activate(batch @ W.T + b_e, activation)
    output = activate(hidden @ W + b_d, activation)
    delta_out = _loss_slope(batch, output, kind) * _activation_slope(output, activation)
    delta_hidden = (delta_out @ W.T) * _activation_slope(hidden, activation)
    # decoder path (W^T)^T plus encoder path plus weight decay
    grad_W = hidden.T @ delta_out + delta_hidden.T @ batch + 2.0 * weight_decay * W
    return grad_W, delta_hidden.sum(axis=0), delta_out.sum(axis=0)


def _as_matrix(data):
    data = np.asarray(data, dtype=np.float64)
    if data.ndim == 1:
        data = data[np.newaxis, :]
    if data.ndim != 2 or data.shape[0] == 0:
        raise InputError("Training data must be a non-empty matrix of row vectors")
    return data


def objective(layer, data, cfg):
    """Summed reconstruction loss plus weight decay on W"""
    data = _as_matrix(data)
    _check_dim(data, layer.input_dim, 'Training data')
    return _objective(layer.W, layer.b_e, layer.b_d, data, layer.activation,
                      cfg.loss, cfg.weight_decay)


def gradients(layer, batch, cfg):
    """Exact gradient of objective(layer, batch, cfg) with respect to W, b_e and b_d"""
    batch = _as_matrix(batch)
    _check_dim(batch, layer.input_dim, 'Batch')
    return _gradients(layer.W, layer.b_e, layer.b_d, batch, layer.activation,
                      cfg.loss, cfg.weight_decay)


def fit_layer(data, feature_dim, cfg, layer_index=0):
    """Train one layer and return it with its objective history (entry 0 is before training)"""
    data = _as_matrix(data)
    if int(feature_dim) < 1:
        raise ConfigError(f"Feature size must be at least 1, got {feature_dim}")
    rng = np.random.default_rng(cfg.seed)
    input_dim = data.shape[1]
    scale = cfg.init_scale
    W = rng.uniform(-scale, scale, size=(int(feature_dim), input_dim))
    b_e = rng.uniform(-scale, scale, size=int(feature_dim))
    b_d = rng.uniform(-scale, scale, size=input_dim)
    args = (cfg.activation, cfg.loss, cfg.weight_decay)

    history = [_objective(W, b_e, b_d, data, *args)]
    for epoch in range(1, cfg.epochs + 1):
        for index in rng.permutation(data.shape[0]):
            grad_W, grad_e, grad_d = _gradients(W, b_e, b_d, data[index:index + 1], *args)
            W -= cfg.learning_rate * grad_W
            b_e -= cfg.learning_rate * grad_e
            b_d -= cfg.learning_rate * grad_d
        value = _objective(W, b_e, b_d, data, *args)
        if not math.isfinite(value):
            raise TrainingDivergedError(
                f"Layer {layer_index} training diverged at epoch {epoch}: objective is {value}",
                layer=layer_index, epoch=epoch,
            )
        history.append(value)

    if history[-1] > history[0]:
        raise TrainingDivergedError(
            f"Layer {layer_index} training diverged: objective rose from "
            f"{history[0]:.6g} to {history[-1]:.6g} after epoch {cfg.epochs}",
            layer=layer_index, epoch=cfg.epochs,
        )
    logging.info(
        f"Layer {layer_index} ({input_dim} -> {feature_dim}): objective "
        f"{history[0]:.6g} -> {history[-1]:.6g} over {cfg.epochs} epochs"
    )
    return LayerParams(W=W, b_e=b_e, b_d=b_d, activation=cfg.activation), history


def train_layer(data, feature_dim, cfg):
    """Seeded SGD training of one tied-weight layer"""
    return fit_layer(data, feature_dim, cfg)[0]


def train_stack(data, stack_cfg):
    """Greedy layer-wise training: layer k learns from the features of layers 0..k-1"""
    inputs = _as_matrix(data)
    dims = stack_cfg.resolve_dims(inputs.shape[1])
    layers, histories = [], []
    for index, feature_dim in enumerate(dims):
        cfg = replace(stack_cfg.train, seed=stack_cfg.train.seed + index)
        layer, history = fit_layer(inputs, feature_dim, cfg, layer_index=index)
        layers.append(layer)
        histories.append(history)
        inputs = encode(layer, inputs)
    resolved = replace(stack_cfg, layer_feature_dims=dims)
    return AutoencoderStack(layers=layers, loss_history=histories, config=resolved)


def encode_stack(stack, s):
    """Top-layer features: the composition of every layer's encoder"""
    features = np.asarray(s, dtype=np.float64)
    for layer in stack.layers:
        features = encode(layer, features)
    return features


def stack_to_dict(stack):
    config = asdict(stack.config) if stack.config is not None else None
    return {
        'format': MODEL_FORMAT,
        'version': 1,
        'seed': stack.config.train.seed if stack.config is not None else None,
        'config': config,
        'layers': [
            {
                'input_dim': layer.input_dim,
                'feature_dim': layer.feature_dim,
                'activation': layer.activation,
                'W': layer.W.ravel().tolist(),
                'b_e': layer.b_e.tolist(),
                'b_d': layer.b_d.tolist(),
            }
            for layer in stack.layers
        ],
        'loss_history': [list(h) for h in stack.loss_history],
    }


def stack_from_dict(document):
    if document.get('format') != MODEL_FORMAT:
        raise InputError(f"Not an Augur model document (format {document.get('format')!r})")
    layers = []
    for entry in document['layers']:
        W = np.array(entry['W'], dtype=np.float64).reshape(entry['feature_dim'], entry['input_dim'])
        layers.append(LayerParams(W=W, b_e=entry['b_e'], b_d=entry['b_d'],
                                  activation=entry['activation']))
    config = None
    if document.get('config'):
        raw = dict(document['config'])
        raw['train'] = TrainConfig(**raw['train'])
        config = StackConfig(**raw)
    return AutoencoderStack(layers=layers, loss_history=document.get('loss_history', ()),
                            config=config)


def save_stack(stack, path):
    """Persist a stack as JSON; floats keep their exact round-trip representation"""
    path = Path(path)
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        json.dump(stack_to_dict(stack), f, indent=1)
        f.write('\n')
    logging.info(f"Model saved to {path}")
    return path


def load_stack(path):
    path = Path(path)
    try:
        with open(path, 'r', encoding='utf-8') as f:
            document = json.load(f)
    except FileNotFoundError:
        raise InputError(f"Model file {path} not found")
    except json.JSONDecodeError as e:
        raise InputError(f"Cannot parse model file {path}: {e}")
    return stack_from_dict(document)
