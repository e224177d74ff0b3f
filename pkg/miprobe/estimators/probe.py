import os
import numpy as np
from dataclasses import dataclass, asdict, field, fields
from typing import Dict, Optional, Tuple
from scipy.special import log_softmax
from miprobe.formats import open_text, ensure_parent_dir, FormatError
from miprobe.formats.fmat import FeatureMatrix, load_feature_matrix, store_feature_matrix
from miprobe.common import log, timing

LOGGER = log.get_logger()
PROBE_LOGISTIC, PROBE_MLP = 'logistic', 'mlp'
SUPPORTED_PROBES = [PROBE_LOGISTIC, PROBE_MLP]
PARAM_NAMES = {
    PROBE_LOGISTIC: ('weight', 'bias'),
    PROBE_MLP: ('w1', 'b1', 'w2', 'b2', 'w3', 'b3')
}
# rows per chunk for full-set evaluation passes
EVAL_CHUNK_ROWS = 8192
# SeedSequence stream ids, so init, shuffling and dropout never share draws
STREAM_INIT, STREAM_SHUFFLE, STREAM_DROPOUT = 0, 1, 2
SIDECAR_NAME = 'probe.txt'
# SGD arithmetic precision; ProbeModel keeps float64 parameters
TRAIN_DTYPE = np.float32
LN2 = np.log(2.0)


class ProbeError(Exception):
    """A general class for issues configuring, training or applying a probe"""


@dataclass(frozen=True)
class ProbeConfig:
    kind: str = PROBE_LOGISTIC
    hidden_dim: int = 512
    dropout_rate: float = 0.1
    learning_rate: float = 0.1
    epochs: int = 10
    batch_size: int = 256
    seed: int = 0

    def __post_init__(self):
        if self.kind not in SUPPORTED_PROBES:
            raise ProbeError(f'probe kind \'{self.kind}\' is not supported. Please use one of {SUPPORTED_PROBES}')
        if not self.learning_rate > 0:
            raise ProbeError(f'learning_rate must be > 0, got {self.learning_rate}')
        if self.epochs < 1:
            raise ProbeError(f'epochs must be >= 1, got {self.epochs}')
        if self.batch_size < 1:
            raise ProbeError(f'batch_size must be >= 1, got {self.batch_size}')
        if self.hidden_dim < 1:
            raise ProbeError(f'hidden_dim must be >= 1, got {self.hidden_dim}')
        if not 0 <= self.dropout_rate < 1:
            raise ProbeError(f'dropout_rate must lie in [0, 1), got {self.dropout_rate}')
        if self.seed < 0:
            raise ProbeError(f'seed must be non-negative, got {self.seed}')

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for name, value in d.items():
            if name not in types:
                continue
            caster = {'str': str, 'int': int, 'float': float}.get(
                getattr(types[name], '__name__', types[name]), str)
            kwargs[name] = caster(value)
        return cls(**kwargs)


@dataclass(frozen=True, eq=False)
class ProbeModel:
    kind: str
    params: Dict[str, np.ndarray]
    num_classes: int
    config: Optional[ProbeConfig] = None
    # initial and final full-set training cross-entropy, nats
    history: Tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.kind not in SUPPORTED_PROBES:
            raise ProbeError(f'probe kind \'{self.kind}\' is not supported')
        names = PARAM_NAMES[self.kind]
        if set(self.params) != set(names):
            raise ProbeError(f'{self.kind} probe needs parameters {names}, got {sorted(self.params)}')
        params = {}
        for name in names:
            arr = np.array(self.params[name], dtype=np.float64)
            if not np.isfinite(arr).all():
                raise ProbeError(f'parameter {name} is not finite')
            arr.setflags(write=False)
            params[name] = arr
        last_w, last_b = names[-2], names[-1]
        if params[last_w].shape[0] != self.num_classes or params[last_b].shape != (self.num_classes,):
            raise ProbeError(f'output layer does not produce {self.num_classes} classes')
        object.__setattr__(self, 'params', params)

    @property
    def dim(self):
        return self.params[PARAM_NAMES[self.kind][0]].shape[1]


def _glorot(rng, fan_out, fan_in):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


def init_params(kind, dim, num_classes, cfg, dtype=np.float64):
    """Seeded Glorot-uniform weights and zero biases."""
    rng = np.random.default_rng([cfg.seed, STREAM_INIT])
    if kind == PROBE_LOGISTIC:
        params = {
            'weight': _glorot(rng, num_classes, dim),
            'bias': np.zeros(num_classes)
        }
    else:
        h = cfg.hidden_dim
        params = {
            'w1': _glorot(rng, h, dim), 'b1': np.zeros(h),
            'w2': _glorot(rng, h, h), 'b2': np.zeros(h),
            'w3': _glorot(rng, num_classes, h), 'b3': np.zeros(num_classes)
        }
    return {name: arr.astype(dtype) for name, arr in params.items()}


def _dropout_mask(shape, rate, rng, dtype):
    if rng is None or rate == 0:
        return None
    keep = rng.random(shape, dtype=np.float32) >= rate
    return keep.astype(dtype) / dtype(1.0 - rate)


def _forward(kind, params, x, dropout_rate=0.0, rng=None):
    """Returns logits and the cache the backward pass needs."""
    if kind == PROBE_LOGISTIC:
        return x @ params['weight'].T + params['bias'], {'x': x}
    pre1 = x @ params['w1'].T + params['b1']
    h1 = np.maximum(pre1, 0.0)
    mask1 = _dropout_mask(h1.shape, dropout_rate, rng, h1.dtype.type)
    if mask1 is not None:
        h1 = h1 * mask1
    pre2 = h1 @ params['w2'].T + params['b2']
    h2 = np.maximum(pre2, 0.0)
    mask2 = _dropout_mask(h2.shape, dropout_rate, rng, h2.dtype.type)
    if mask2 is not None:
        h2 = h2 * mask2
    logits = h2 @ params['w3'].T + params['b3']
    cache = {'x': x, 'pre1': pre1, 'h1': h1, 'mask1': mask1,
             'pre2': pre2, 'h2': h2, 'mask2': mask2}
    return logits, cache


def _loss_and_grads(kind, params, x, targets, dropout_rate=0.0, rng=None):
    """Mean cross-entropy (nats) and its analytic parameter gradients."""
    n = x.shape[0]
    logits, cache = _forward(kind, params, x, dropout_rate, rng)
    log_probs = log_softmax(logits, axis=1)
    rows = np.arange(n)
    loss = -log_probs[rows, targets].mean()
    g = np.exp(log_probs)
    g[rows, targets] -= 1.0
    g /= n
    if kind == PROBE_LOGISTIC:
        return loss, {'weight': g.T @ cache['x'], 'bias': g.sum(axis=0)}
    grads = {'w3': g.T @ cache['h2'], 'b3': g.sum(axis=0)}
    d = g @ params['w3']
    if cache['mask2'] is not None:
        d = d * cache['mask2']
    d = d * (cache['pre2'] > 0)
    grads['w2'], grads['b2'] = d.T @ cache['h1'], d.sum(axis=0)
    d = d @ params['w2']
    if cache['mask1'] is not None:
        d = d * cache['mask1']
    d = d * (cache['pre1'] > 0)
    grads['w1'], grads['b1'] = d.T @ cache['x'], d.sum(axis=0)
    return loss, grads


def _check_inputs(features, targets, num_classes, dim=None, dtype=np.float64):
    features = np.asarray(features, dtype=dtype)
    if features.ndim != 2:
        raise ProbeError(f'features must be N x D, got shape {features.shape}')
    if dim is not None and features.shape[1] != dim:
        raise ProbeError(f'features have dimension {features.shape[1]} but the probe expects {dim}')
    if targets is None:
        return features, None
    targets = np.asarray(targets)
    if targets.shape != (features.shape[0],):
        raise ProbeError(f'{targets.shape[0] if targets.ndim else 0} targets for {features.shape[0]} frames')
    if not np.issubdtype(targets.dtype, np.integer):
        raise ProbeError(f'targets must be integer ids, got dtype {targets.dtype}')
    if targets.size and (targets.min() < 0 or targets.max() >= num_classes):
        raise ProbeError(f'targets must lie in [0, {num_classes})')
    return features, targets.astype(np.int64)


def _mean_nats(kind, params, features, targets):
    total = 0.0
    for start in range(0, features.shape[0], EVAL_CHUNK_ROWS):
        stop = start + EVAL_CHUNK_ROWS
        logits, _ = _forward(kind, params, features[start:stop])
        lp = log_softmax(logits, axis=1)
        total -= float(lp[np.arange(lp.shape[0]), targets[start:stop]].sum(dtype=np.float64))
    return total / features.shape[0]


@timing.timeit
def train_probe(inputs, targets, num_classes, cfg=ProbeConfig()):
    """
    Trains q(y|z) by minibatch SGD on mean cross-entropy. Each epoch visits
    the frames in an order that is a pure function of cfg.seed and the
    epoch; dropout applies in training only.

    Args:
        inputs (numpy.ndarray): N x D finite features, N >= 1
        targets (numpy.ndarray): length-N ids in [0, num_classes)
        num_classes (int): the declared class count C, >= 2
        cfg (ProbeConfig): probe architecture and optimization settings

    Returns:
        (ProbeModel): the trained probe

    Raises:
        (ProbeError): for invalid inputs, C < 2, or a non-finite loss or
            parameter during training (reported with epoch and batch)
    """
    if num_classes < 2:
        raise ProbeError(f'a probe needs at least 2 classes, got {num_classes}')
    inputs, targets = _check_inputs(inputs, targets, num_classes, dtype=TRAIN_DTYPE)
    n = inputs.shape[0]
    if n < 1:
        raise ProbeError('cannot train a probe on 0 frames')
    if not np.isfinite(inputs).all():
        raise ProbeError('inputs contain non-finite values')

    kind = cfg.kind
    params = init_params(kind, inputs.shape[1], num_classes, cfg, dtype=TRAIN_DTYPE)
    lr = TRAIN_DTYPE(cfg.learning_rate)
    dropout = cfg.dropout_rate if kind == PROBE_MLP else 0.0
    initial = _mean_nats(kind, params, inputs, targets)
    LOGGER.debug(f'{kind} probe: initial training cross-entropy {initial:.6f} nats')
    for epoch in range(cfg.epochs):
        order = np.random.default_rng([cfg.seed, STREAM_SHUFFLE, epoch]).permutation(n)
        drop_rng = np.random.default_rng([cfg.seed, STREAM_DROPOUT, epoch]) if dropout else None
        epoch_loss = 0.0
        for batch, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start:start + cfg.batch_size]
            loss, grads = _loss_and_grads(kind, params, inputs[idx], targets[idx], dropout, drop_rng)
            if not np.isfinite(loss):
                raise ProbeError(f'non-finite loss at epoch {epoch}, batch {batch}')
            for name, grad in grads.items():
                params[name] -= lr * grad.astype(TRAIN_DTYPE, copy=False)
                if not np.isfinite(params[name]).all():
                    raise ProbeError(f'parameter {name} became non-finite at epoch {epoch}, batch {batch}')
            epoch_loss += float(loss) * idx.size
        LOGGER.debug(f'{kind} probe epoch {epoch}: mean minibatch loss {epoch_loss / n:.6f} nats')
    final = _mean_nats(kind, params, inputs, targets)
    if final > initial:
        LOGGER.warning(
            f'{kind} probe ended above its initial training cross-entropy '
            f'({final:.6f} > {initial:.6f} nats)')
    LOGGER.info(
        f'trained {kind} probe on {n} frames, {num_classes} classes: training cross-entropy '
        f'{initial:.4f} -> {final:.4f} nats')
    return ProbeModel(kind=kind, params=params, num_classes=num_classes,
                      config=cfg, history=(initial, final))


def predict_log_probs(model, features):
    """
    Evaluation-mode (no dropout) log-softmax outputs.

    Returns:
        (numpy.ndarray): T x C log-probabilities
    """
    features, _ = _check_inputs(features, None, model.num_classes, model.dim)
    out = np.empty((features.shape[0], model.num_classes))
    for start in range(0, features.shape[0], EVAL_CHUNK_ROWS):
        stop = start + EVAL_CHUNK_ROWS
        logits, _ = _forward(model.kind, model.params, features[start:stop])
        out[start:stop] = log_softmax(logits, axis=1)
    return out


def cross_entropy_bits(model, features, targets):
    """
    Mean over frames of -log2 q(target | feature), in evaluation mode.

    Raises:
        (ProbeError): on a dimension mismatch or no frames
    """
    features, targets = _check_inputs(features, targets, model.num_classes, model.dim)
    if features.shape[0] < 1:
        raise ProbeError('cross-entropy needs at least 1 frame')
    return float(_mean_nats(model.kind, model.params, features, targets) / LN2)


def gradient_check(model, features, targets, epsilon=1e-4):
    """
    Compares analytic gradients of mean cross-entropy against central
    finite differences, dropout disabled.

    Returns:
        (float): the largest per-tensor relative error
            ||analytic - numeric|| / max(||analytic||, ||numeric||)
    """
    features, targets = _check_inputs(features, targets, model.num_classes, model.dim)
    params = {name: np.array(arr) for name, arr in model.params.items()}
    _, analytic = _loss_and_grads(model.kind, params, features, targets)
    worst = 0.0
    for name, arr in params.items():
        numeric = np.zeros_like(arr)
        flat, grad_flat = arr.reshape(-1), numeric.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + epsilon
            plus = _mean_nats(model.kind, params, features, targets)
            flat[i] = orig - epsilon
            minus = _mean_nats(model.kind, params, features, targets)
            flat[i] = orig
            grad_flat[i] = (plus - minus) / (2.0 * epsilon)
        denom = max(np.linalg.norm(analytic[name]), np.linalg.norm(numeric))
        err = 0.0 if denom < 1e-12 else np.linalg.norm(analytic[name] - numeric) / denom
        LOGGER.debug(f'gradient check {name}: relative error {err:.3e}')
        worst = max(worst, float(err))
    return worst


def save_probe(model, directory):
    """
    Writes one FMAT file per parameter tensor plus a probe.txt sidecar
    holding the config fields and the class count.
    """
    for name, arr in model.params.items():
        store_feature_matrix(FeatureMatrix(np.atleast_2d(arr)), os.path.join(directory, f'{name}.fmat'))
    cfg = model.config or ProbeConfig(kind=model.kind)
    meta = dict(cfg.to_dict(), num_classes=model.num_classes)
    sidecar = os.path.join(directory, SIDECAR_NAME)
    ensure_parent_dir(sidecar)
    with open_text(sidecar, 'w') as f:
        f.write(' '.join(f'{k}={v}' for k, v in meta.items()) + '\n')


def load_probe(directory):
    with open_text(os.path.join(directory, SIDECAR_NAME)) as f:
        meta = dict(token.split('=', 1) for token in f.read().split())
    try:
        cfg = ProbeConfig.from_dict(meta)
        num_classes = int(meta['num_classes'])
    except (KeyError, ValueError) as e:
        raise FormatError(f'{directory}: malformed {SIDECAR_NAME}: {str(e)}')
    params = {}
    for name in PARAM_NAMES[cfg.kind]:
        arr = load_feature_matrix(os.path.join(directory, f'{name}.fmat')).values
        params[name] = arr[0] if name.startswith('b') else arr
    return ProbeModel(kind=cfg.kind, params=params, num_classes=num_classes, config=cfg)
