import json
import numpy as np
import pandas as pd
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, Tuple
from scipy.stats import entropy
from miprobe.estimators.cluster import fit_kmeans, assign, FeatureScaler, DEFAULT_NUM_CLUSTERS, DEFAULT_MAX_ITER
from miprobe.estimators.probe import ProbeConfig, train_probe, cross_entropy_bits
from miprobe.formats.fmat import FeatureMatrix
from miprobe.formats.labels import FrameLabels
from miprobe.common import log

LOGGER = log.get_logger()
KIND_SUPERVISED, KIND_UNSUPERVISED = 'supervised', 'unsupervised'
DEFAULT_SEEDS = (0, 1, 2, 3, 4)
CSV_COLUMNS = [
    'kind', 'probe_kind', 'num_classes', 'value_bits', 'entropy_term_bits',
    'cross_entropy_bits', 'seed_variance', 'per_seed_values_bits',
    'n_fit_frames', 'n_eval_frames', 'is_negative'
]


class EstimationError(Exception):
    """A general class for issues assembling a mutual information bound"""


@dataclass(frozen=True)
class MIEstimate:
    kind: str
    probe_kind: str
    value_bits: float
    entropy_term_bits: float
    cross_entropy_bits: float
    per_seed_values_bits: Tuple[float, ...]
    seed_variance: float
    n_fit_frames: int
    n_eval_frames: int
    # C for the supervised bound, k for the unsupervised one
    num_classes: int
    config: Dict = field(default_factory=dict)

    @property
    def is_negative(self):
        return self.value_bits < 0

    def to_dict(self):
        return {
            'kind': self.kind,
            'probe_kind': self.probe_kind,
            'value_bits': self.value_bits,
            'entropy_term_bits': self.entropy_term_bits,
            'cross_entropy_bits': self.cross_entropy_bits,
            'per_seed_values_bits': list(self.per_seed_values_bits),
            'seed_variance': self.seed_variance,
            'n_fit_frames': self.n_fit_frames,
            'n_eval_frames': self.n_eval_frames,
            'num_classes': self.num_classes,
            'is_negative': self.is_negative,
            'config': dict(self.config)
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            kind=d['kind'],
            probe_kind=d['probe_kind'],
            value_bits=float(d['value_bits']),
            entropy_term_bits=float(d['entropy_term_bits']),
            cross_entropy_bits=float(d['cross_entropy_bits']),
            per_seed_values_bits=tuple(float(v) for v in d['per_seed_values_bits']),
            seed_variance=float(d['seed_variance']),
            n_fit_frames=int(d['n_fit_frames']),
            n_eval_frames=int(d['n_eval_frames']),
            num_classes=int(d['num_classes']),
            config=dict(d.get('config', {}))
        )

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    def to_row(self):
        row = self.to_dict()
        row['per_seed_values_bits'] = ';'.join(repr(v) for v in self.per_seed_values_bits)
        return {c: row[c] for c in CSV_COLUMNS}

    @staticmethod
    def csv_header():
        return ','.join(CSV_COLUMNS)

    def to_csv_row(self):
        df = pd.DataFrame([self.to_row()], columns=CSV_COLUMNS)
        return df.to_csv(header=False, index=False, float_format='%.17g').strip()


def empirical_entropy_bits(ids, num_classes):
    """
    Entropy of the empirical distribution of ids, in bits. Classes with no
    occurrences contribute nothing.

    Raises:
        (EstimationError): for an empty sequence or ids outside
            [0, num_classes)
    """
    ids = np.asarray(ids)
    if ids.size == 0:
        raise EstimationError('entropy of an empty sequence is undefined')
    if ids.min() < 0 or ids.max() >= num_classes:
        raise EstimationError(f'ids must lie in [0, {num_classes})')
    counts = np.bincount(ids, minlength=num_classes)
    return float(entropy(counts, base=2))


def _as_array(values):
    if isinstance(values, FeatureMatrix):
        return values.values
    return np.asarray(values)


def _pool_labeled(pairs, what):
    features, ids, num_classes = [], [], set()
    for idx, (feats, labels) in enumerate(pairs):
        feats = _as_array(feats)
        if not isinstance(labels, FrameLabels):
            raise EstimationError(f'{what} pair {idx}: labels must be FrameLabels')
        if feats.ndim != 2 or feats.shape[0] != len(labels):
            raise EstimationError(
                f'{what} pair {idx}: {feats.shape[0] if feats.ndim else 0} frames '
                f'but {len(labels)} labels')
        features.append(feats)
        ids.append(labels.ids)
        num_classes.add(labels.num_classes)
    if not features or sum(f.shape[0] for f in features) == 0:
        raise EstimationError(f'the {what} set holds no frames')
    if len({f.shape[1] for f in features}) > 1:
        raise EstimationError(f'{what} features disagree on dimension')
    if len(num_classes) > 1:
        raise EstimationError(f'{what} labels disagree on num_classes: {sorted(num_classes)}')
    return np.concatenate(features).astype(np.float64), np.concatenate(ids), num_classes.pop()


def _pool_views(pairs, what):
    za, zb = [], []
    for idx, (a, b) in enumerate(pairs):
        a, b = _as_array(a), _as_array(b)
        if a.ndim != 2 or b.ndim != 2 or a.shape[0] != b.shape[0]:
            raise EstimationError(f'{what} pair {idx}: view rows are not frame-aligned')
        za.append(a)
        zb.append(b)
    if not za or sum(a.shape[0] for a in za) == 0:
        raise EstimationError(f'the {what} set holds no frame pairs')
    if len({a.shape[1] for a in za}) > 1 or len({b.shape[1] for b in zb}) > 1:
        raise EstimationError(f'{what} views disagree on dimension')
    return np.concatenate(za).astype(np.float64), np.concatenate(zb).astype(np.float64)


def _single(kind, cfg, entropy_bits, ce_bits, n_fit, n_eval, num_classes, config):
    value = entropy_bits - ce_bits
    return MIEstimate(
        kind=kind,
        probe_kind=cfg.kind,
        value_bits=value,
        entropy_term_bits=entropy_bits,
        cross_entropy_bits=ce_bits,
        per_seed_values_bits=(value,),
        seed_variance=0.0,
        n_fit_frames=n_fit,
        n_eval_frames=n_eval,
        num_classes=num_classes,
        config=config
    )


def supervised_lower_bound(fit_set, eval_set, cfg=ProbeConfig()):
    """
    Lower-bounds I(Z;Y) by H(Y) - CE(q), both measured on the eval split,
    with the probe q trained on the fit split. Frames from all utterances
    are pooled. The value is not clamped at zero.

    Args:
        fit_set (list): (features, FrameLabels) pairs, one per utterance
        eval_set (list): (features, FrameLabels) pairs, one per utterance
        cfg (ProbeConfig): the probe settings, including the seed

    Returns:
        (MIEstimate): a single-seed estimate

    Raises:
        (EstimationError): for empty sets, misaligned frames, or fit and
            eval labels that disagree on num_classes
    """
    x_fit, y_fit, c_fit = _pool_labeled(fit_set, 'fit')
    x_eval, y_eval, c_eval = _pool_labeled(eval_set, 'eval')
    if c_fit != c_eval:
        raise EstimationError(f'fit labels declare {c_fit} classes but eval labels declare {c_eval}')
    if x_fit.shape[1] != x_eval.shape[1]:
        raise EstimationError(
            f'fit features have dimension {x_fit.shape[1]}, eval features {x_eval.shape[1]}')
    probe = train_probe(x_fit, y_fit, c_fit, cfg)
    h = empirical_entropy_bits(y_eval, c_eval)
    ce = cross_entropy_bits(probe, x_eval, y_eval)
    LOGGER.info(f'supervised bound ({cfg.kind}, seed {cfg.seed}): {h:.4f} - {ce:.4f} = {h - ce:.4f} bits')
    return _single(
        KIND_SUPERVISED, cfg, h, ce, x_fit.shape[0], x_eval.shape[0], c_fit,
        {'probe': cfg.to_dict(), 'num_classes': c_fit})


def unsupervised_lower_bound(fit_pairs, eval_pairs, k=DEFAULT_NUM_CLUSTERS, cfg=ProbeConfig(),
                             max_iter=DEFAULT_MAX_ITER, normalize=False):
    """
    Lower-bounds I(Za;Zb) by H(f(Zb)) - CE(q(f(Zb)|Za)), where f is k-means
    fitted on the fit split's Zb frames (seeded by cfg.seed) and q a probe
    trained on the fit split. Both terms are measured on the eval split.

    Args:
        fit_pairs (list): (za_rows, zb_rows) frame-aligned arrays per utterance
        eval_pairs (list): (za_rows, zb_rows) frame-aligned arrays per utterance
        k (int): the number of clusters
        cfg (ProbeConfig): the probe settings, including the seed
        max_iter (int): the k-means iteration cap
        normalize (bool): standardize Zb with fit-split statistics before
            clustering

    Returns:
        (MIEstimate): a single-seed estimate; k = 1 gives exactly 0

    Raises:
        (EstimationError): for empty sets, fewer fit frames than k, or
            inconsistent view dimensions
    """
    za_fit, zb_fit = _pool_views(fit_pairs, 'fit')
    za_eval, zb_eval = _pool_views(eval_pairs, 'eval')
    if za_fit.shape[1] != za_eval.shape[1] or zb_fit.shape[1] != zb_eval.shape[1]:
        raise EstimationError('fit and eval views disagree on dimension')
    if k < 1:
        raise EstimationError(f'k must be >= 1, got {k}')
    if za_fit.shape[0] < k:
        raise EstimationError(f'{za_fit.shape[0]} fit frames are fewer than k={k}')
    config = {'probe': cfg.to_dict(), 'k': k, 'max_iter': max_iter, 'normalize': normalize}
    n_fit, n_eval = za_fit.shape[0], za_eval.shape[0]
    if k == 1:
        # one cluster carries no information
        LOGGER.info('unsupervised bound with k=1 is 0 by convention')
        return _single(KIND_UNSUPERVISED, cfg, 0.0, 0.0, n_fit, n_eval, k, config)

    if normalize:
        scaler = FeatureScaler(zb_fit)
        zb_fit, zb_eval = scaler.transform(zb_fit), scaler.transform(zb_eval)
    model = fit_kmeans(zb_fit, k=k, max_iter=max_iter, seed=cfg.seed)
    targets = assign(model, zb_fit)
    probe = train_probe(za_fit, targets, k, cfg)
    eval_ids = assign(model, zb_eval)
    h = empirical_entropy_bits(eval_ids, k)
    ce = cross_entropy_bits(probe, za_eval, eval_ids)
    LOGGER.info(
        f'unsupervised bound ({cfg.kind}, k={k}, seed {cfg.seed}): '
        f'{h:.4f} - {ce:.4f} = {h - ce:.4f} bits')
    return _single(KIND_UNSUPERVISED, cfg, h, ce, n_fit, n_eval, k, config)


def run_seeded(estimator, seeds=DEFAULT_SEEDS, max_workers=1):
    """
    Runs a single-seed estimator once per seed and aggregates: the value is
    the mean over seeds and seed_variance the population variance.

    Args:
        estimator (callable): maps a seed to a single-seed MIEstimate
        seeds (iterable): at least one integer seed
        max_workers (int): seeds run in parallel when > 1; the result does
            not depend on it

    Returns:
        (MIEstimate): the aggregate, config extended with the seed list

    Raises:
        (EstimationError): with no seeds
    """
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise EstimationError('at least one seed is required')
    if max_workers > 1 and len(seeds) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            runs = list(pool.map(estimator, seeds))
    else:
        runs = [estimator(s) for s in seeds]
    values = np.array([r.value_bits for r in runs])
    first = runs[0]
    config = dict(first.config, seeds=seeds)
    if 'probe' in config:
        config['probe'] = {k: v for k, v in config['probe'].items() if k != 'seed'}
    aggregate = replace(
        first,
        value_bits=float(values.mean()),
        entropy_term_bits=float(np.mean([r.entropy_term_bits for r in runs])),
        cross_entropy_bits=float(np.mean([r.cross_entropy_bits for r in runs])),
        per_seed_values_bits=tuple(float(v) for v in values),
        seed_variance=float(values.var()),
        config=config
    )
    LOGGER.info(
        f'{first.kind} bound over {len(seeds)} seeds: {aggregate.value_bits:.4f} bits '
        f'(variance {aggregate.seed_variance:.2e})')
    return aggregate
