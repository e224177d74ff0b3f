import numpy as np
from dataclasses import dataclass, field
from typing import Tuple
from miprobe.formats import open_text, FormatError
from miprobe.formats.fmat import FeatureMatrix, load_feature_matrix, store_feature_matrix
from miprobe.common import log, timing

LOGGER = log.get_logger()
DEFAULT_NUM_CLUSTERS = 50
DEFAULT_MAX_ITER = 100
# relative gap under which the two nearest centroids are re-compared exactly
TIE_TOLERANCE = 1e-9
EXACT_BLOCK_ROWS = 1024
SIDECAR_SUFFIX = '.txt'


class ClusterError(Exception):
    """A general class for issues fitting or applying k-means"""


@dataclass(frozen=True, eq=False)
class KMeansModel:
    centroids: np.ndarray
    seed: int
    inertia: float
    iterations_run: int
    inertia_history: Tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self):
        centroids = np.array(self.centroids, dtype=np.float64)
        if centroids.ndim != 2 or centroids.shape[0] < 1:
            raise ClusterError(f'centroids must be a K x D matrix with K >= 1, got {centroids.shape}')
        if not np.isfinite(centroids).all():
            raise ClusterError('centroids must be finite')
        centroids.setflags(write=False)
        object.__setattr__(self, 'centroids', centroids)

    @property
    def k(self):
        return self.centroids.shape[0]

    @property
    def dim(self):
        return self.centroids.shape[1]


class FeatureScaler():
    """Per-dimension standardization fitted on one matrix."""
    def __init__(self, data):
        data = np.asarray(data, dtype=np.float64)
        self._mean = data.mean(axis=0)
        std = data.std(axis=0)
        self._std = np.where(std > 0, std, 1.0)

    def transform(self, data):
        return (np.asarray(data, dtype=np.float64) - self._mean) / self._std


def _squared_distances(data, centroids):
    sq = (np.einsum('nd,nd->n', data, data)[:, None]
          - 2.0 * data @ centroids.T
          + np.einsum('kd,kd->k', centroids, centroids)[None, :])
    return np.maximum(sq, 0.0)


def _exact_squared_distances(data, centroids):
    diff = data[:, None, :] - centroids[None, :, :]
    return np.einsum('nkd,nkd->nk', diff, diff)


def _nearest(data, centroids):
    dist = _squared_distances(data, centroids)
    ids = np.argmin(dist, axis=1)
    if centroids.shape[0] > 1:
        two_best = np.partition(dist, 1, axis=1)[:, :2]
        scale = dist.max(axis=1) + 1.0
        close = np.flatnonzero(two_best[:, 1] - two_best[:, 0] <= TIE_TOLERANCE * scale)
        for start in range(0, close.size, EXACT_BLOCK_ROWS):
            rows = close[start:start + EXACT_BLOCK_ROWS]
            ids[rows] = np.argmin(_exact_squared_distances(data[rows], centroids), axis=1)
    diff = data - centroids[ids]
    return ids, np.einsum('nd,nd->n', diff, diff)


def _kmeans_plusplus(data, k, rng):
    """Greedy k-means++: each new center is the best of several D^2 draws."""
    n = data.shape[0]
    n_trials = 2 + int(np.log(k))
    centers = np.empty((k, data.shape[1]))
    centers[0] = data[rng.integers(n)]
    closest = _squared_distances(data, centers[:1])[:, 0]
    for c in range(1, k):
        potential = closest.sum()
        if potential > 0:
            cum = np.cumsum(closest)
            draws = rng.random(n_trials) * potential
            candidates = np.minimum(np.searchsorted(cum, draws, side='right'), n - 1)
        else:
            # every point already sits on a center
            candidates = rng.integers(n, size=n_trials)
        cand_dist = np.minimum(closest[:, None], _squared_distances(data, data[candidates]))
        best = int(np.argmin(cand_dist.sum(axis=0)))
        centers[c] = data[candidates[best]]
        closest = cand_dist[:, best]
    return centers


def recompute_centroids(data, ids, k, previous=None, sq_dist=None):
    """
    One Lloyd update: each centroid becomes the mean of its members. A
    cluster left without members is re-seeded with the point farthest from
    its nearest centroid, so K stays constant.

    Args:
        data (numpy.ndarray): N x D points
        ids (numpy.ndarray): length-N assignments in [0, k)
        k (int): the number of clusters
        previous (numpy.ndarray): the centroids the ids were computed from;
            required only when a cluster can end up empty
        sq_dist (numpy.ndarray): each point's squared distance to its
            assigned centroid, used to pick re-seed points

    Returns:
        (numpy.ndarray): the k x D updated centroids
    """
    data = np.asarray(data, dtype=np.float64)
    ids = np.asarray(ids)
    order = np.argsort(ids, kind='stable')
    counts = np.bincount(ids, minlength=k)
    present = np.flatnonzero(counts)
    starts = np.concatenate(([0], np.cumsum(counts[present])[:-1]))
    centroids = np.empty((k, data.shape[1]))
    centroids[present] = np.add.reduceat(data[order], starts, axis=0) / counts[present, None]
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        if sq_dist is None:
            if previous is None:
                raise ClusterError(f'{empty.size} empty clusters and no previous centroids to repair from')
            sq_dist = _nearest(data, previous)[1]
        # farthest first; stable order keeps ties deterministic
        farthest = np.argsort(-sq_dist, kind='stable')[:empty.size]
        LOGGER.debug(f're-seeding {empty.size} empty clusters')
        centroids[empty] = data[farthest]
    return centroids


@timing.timeit
def fit_kmeans(data, k=DEFAULT_NUM_CLUSTERS, max_iter=DEFAULT_MAX_ITER, seed=0):
    """
    Fits k-means with Lloyd's algorithm from a seeded k-means++ start.
    Stops after max_iter updates or once assignments stop changing.

    Args:
        data (numpy.ndarray): N x D finite points, N >= k
        k (int): the number of clusters
        max_iter (int): the maximum number of Lloyd updates
        seed (int): seeds the initialization

    Returns:
        (KMeansModel): the fitted model with its inertia history

    Raises:
        (ClusterError): if k < 1, N < k, max_iter < 1 or data isn't finite
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2:
        raise ClusterError(f'data must be N x D, got shape {data.shape}')
    if k < 1:
        raise ClusterError(f'k must be >= 1, got {k}')
    if data.shape[0] < k:
        raise ClusterError(f'need at least k={k} points, got {data.shape[0]}')
    if max_iter < 1:
        raise ClusterError(f'max_iter must be >= 1, got {max_iter}')
    if not np.isfinite(data).all():
        raise ClusterError('data contains non-finite values')

    rng = np.random.default_rng(seed)
    centroids = _kmeans_plusplus(data, k, rng)
    ids, sq_dist = _nearest(data, centroids)
    history = [float(sq_dist.sum())]
    iterations = 0
    converged = False
    while iterations < max_iter:
        centroids = recompute_centroids(data, ids, k, sq_dist=sq_dist)
        iterations += 1
        new_ids, sq_dist = _nearest(data, centroids)
        history.append(float(sq_dist.sum()))
        LOGGER.debug(f'k-means iteration {iterations}: inertia {history[-1]:.6f}')
        if np.array_equal(new_ids, ids):
            converged = True
            break
        ids = new_ids
    LOGGER.info(
        f'k-means with k={k} on {data.shape[0]} points: inertia {history[-1]:.4f} after '
        f'{iterations} iterations ({"converged" if converged else "hit max_iter"})')
    return KMeansModel(
        centroids=centroids,
        seed=seed,
        inertia=history[-1],
        iterations_run=iterations,
        inertia_history=tuple(history)
    )


def assign(model, features):
    """
    Maps each frame to its nearest centroid by squared Euclidean distance;
    ties go to the lowest centroid index.

    Returns:
        (numpy.ndarray): length-T cluster ids

    Raises:
        (ClusterError): on a dimension mismatch
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != model.dim:
        raise ClusterError(
            f'features of shape {features.shape} do not match centroid dimension {model.dim}')
    return _nearest(features, model.centroids)[0]


def save_kmeans(model, path):
    """
    Persists centroids as an FMAT matrix plus a 'k=<k> seed=<s> inertia=<v>'
    text sidecar at <path>.txt.
    """
    store_feature_matrix(FeatureMatrix(model.centroids), path)
    with open_text(f'{path}{SIDECAR_SUFFIX}', 'w') as f:
        f.write(f'k={model.k} seed={model.seed} inertia={model.inertia!r}\n')


def load_kmeans(path):
    centroids = load_feature_matrix(path).values
    with open_text(f'{path}{SIDECAR_SUFFIX}') as f:
        fields = dict(token.split('=', 1) for token in f.read().split())
    try:
        k, seed, inertia = int(fields['k']), int(fields['seed']), float(fields['inertia'])
    except (KeyError, ValueError) as e:
        raise FormatError(f'{path}{SIDECAR_SUFFIX}: malformed sidecar: {str(e)}')
    if k != centroids.shape[0]:
        raise FormatError(f'sidecar declares k={k} but {path} holds {centroids.shape[0]} centroids')
    return KMeansModel(centroids=centroids, seed=seed, inertia=inertia, iterations_run=0)
