import numpy as np
from dataclasses import dataclass
from scipy.spatial.distance import pdist
from scipy.stats import ortho_group
from miprobe.oracle import OracleError
from miprobe.oracle.joint import JointTable, exact_mi_bits
from miprobe.formats.fmat import FeatureMatrix
from miprobe.formats.labels import FrameLabels
from miprobe.common import log

LOGGER = log.get_logger()
# key words of the counter-based generator: (seed, stream)
STREAM_SYMBOLS, STREAM_NOISE_A, STREAM_NOISE_B = 0, 1, 2
STREAM_LAYER_BASE = 16
SEPARABLE_SCALE = 5.0
SEPARABLE_SIGMA_FRACTION = 1.0 / 20
MAX_SEPARABLE_SIGMA_FRACTION = 1.0 / 10
TWO_PI = 2.0 * np.pi


def uniforms(seed, stream, n):
    """
    n uniforms in the open interval (0, 1) from a Philox counter-based
    generator keyed by (seed, stream); the i-th value depends only on the
    key and i.
    """
    if seed < 0 or stream < 0:
        raise OracleError(f'seed and stream must be non-negative, got {seed}, {stream}')
    bitgen = np.random.Philox(key=np.array([seed, stream], dtype=np.uint64))
    raw = bitgen.random_raw(n)
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53


def gaussian_noise(seed, stream, shape):
    """Standard normal draws by the Box-Muller transform."""
    n = int(np.prod(shape))
    half = (n + 1) // 2
    u = uniforms(seed, stream, 2 * half)
    radius = np.sqrt(-2.0 * np.log(u[0::2]))
    angle = TWO_PI * u[1::2]
    z = np.empty(2 * half)
    z[0::2] = radius * np.cos(angle)
    z[1::2] = radius * np.sin(angle)
    return z[:n].reshape(shape)


def draw_cells(joint, seed, n):
    """Draws n i.i.d. (row, col) cells from a joint table."""
    u = uniforms(seed, STREAM_SYMBOLS, n)
    cum = np.cumsum(joint.probs.reshape(-1))
    flat = np.minimum(np.searchsorted(cum, u * cum[-1], side='right'), cum.size - 1)
    return np.divmod(flat, joint.shape[1])


@dataclass(frozen=True, eq=False)
class EmbeddingSpec:
    """Maps discrete symbols to centroids blurred by isotropic Gaussian noise."""
    symbol_centroids: np.ndarray
    noise_sigma: float

    def __post_init__(self):
        centroids = np.array(self.symbol_centroids, dtype=np.float64)
        if centroids.ndim != 2 or centroids.shape[0] < 1 or centroids.shape[1] < 1:
            raise OracleError(f'symbol centroids must be an S x D matrix, got shape {centroids.shape}')
        if not np.isfinite(centroids).all():
            raise OracleError('symbol centroids must be finite')
        if centroids.shape[0] > 1 and pdist(centroids).min() <= 0:
            raise OracleError('symbol centroids must be pairwise distinct')
        if not self.noise_sigma >= 0:
            raise OracleError(f'noise_sigma must be >= 0, got {self.noise_sigma}')
        centroids.setflags(write=False)
        object.__setattr__(self, 'symbol_centroids', centroids)

    @property
    def num_symbols(self):
        return self.symbol_centroids.shape[0]

    @property
    def dim(self):
        return self.symbol_centroids.shape[1]

    @property
    def min_pairwise_distance(self):
        if self.num_symbols < 2:
            return float('inf')
        return float(pdist(self.symbol_centroids).min())

    @classmethod
    def separable(cls, num_symbols, dim=None, sigma_fraction=SEPARABLE_SIGMA_FRACTION,
                  scale=SEPARABLE_SCALE, rotation_seed=None):
        """
        Scaled one-hot centroids, optionally rotated by a seeded random
        orthogonal matrix, with noise_sigma = sigma_fraction times the
        minimum pairwise distance.

        Raises:
            (OracleError): if sigma_fraction exceeds 1/10 or dim < num_symbols
        """
        dim = num_symbols if dim is None else dim
        if num_symbols < 1 or dim < num_symbols:
            raise OracleError(f'need 1 <= num_symbols <= dim, got {num_symbols} symbols in {dim} dims')
        if not 0 <= sigma_fraction <= MAX_SEPARABLE_SIGMA_FRACTION:
            raise OracleError(
                f'a separable spec needs sigma <= min distance / 10, got fraction {sigma_fraction}')
        centroids = scale * np.eye(num_symbols, dim)
        if rotation_seed is not None and dim > 1:
            centroids = centroids @ ortho_group.rvs(dim, random_state=rotation_seed)
        min_dist = scale * np.sqrt(2.0) if num_symbols > 1 else scale
        return cls(centroids, sigma_fraction * min_dist)

    def embed(self, symbols, seed, stream):
        symbols = np.asarray(symbols)
        noise = gaussian_noise(seed, stream, (symbols.shape[0], self.dim))
        return self.symbol_centroids[symbols] + self.noise_sigma * noise


def _check_frames(n_frames):
    if n_frames < 1:
        raise OracleError(f'n_frames must be >= 1, got {n_frames}')


def sample_labeled(joint, embed, n_frames, seed=0):
    """
    Draws (y, c) pairs from the joint (rows are labels Y, columns channel
    symbols) and embeds each c as a noisy centroid.

    Returns:
        features, labels, mi (tuple): a FeatureMatrix, FrameLabels with
            num_classes = rows, and exact_mi_bits of the joint
    """
    _check_frames(n_frames)
    if embed.num_symbols != joint.shape[1]:
        raise OracleError(
            f'embedding has {embed.num_symbols} centroids but the joint has {joint.shape[1]} columns')
    labels, symbols = draw_cells(joint, seed, n_frames)
    features = embed.embed(symbols, seed, STREAM_NOISE_A)
    return FeatureMatrix(features), FrameLabels(labels, joint.shape[0]), exact_mi_bits(joint)


def sample_view_pair(joint, embed_a, embed_b, n_frames, seed=0):
    """
    Draws frame-aligned symbol pairs (a, b) from the joint and embeds each
    stream with its own spec and noise stream.

    Returns:
        za, zb, mi (tuple): two FeatureMatrix objects and exact_mi_bits
    """
    _check_frames(n_frames)
    if embed_a.num_symbols != joint.shape[0] or embed_b.num_symbols != joint.shape[1]:
        raise OracleError(
            f'embeddings hold {embed_a.num_symbols} and {embed_b.num_symbols} centroids '
            f'but the joint is {joint.shape[0]} x {joint.shape[1]}')
    a, b = draw_cells(joint, seed, n_frames)
    za = embed_a.embed(a, seed, STREAM_NOISE_A)
    zb = embed_b.embed(b, seed, STREAM_NOISE_B)
    return FeatureMatrix(za), FeatureMatrix(zb), exact_mi_bits(joint)


def sample_lagged_symbols(channel, n_frames, shift, seed=0):
    """
    A symbol stream where frame t + shift is drawn through the channel from
    frame t; the first `shift` frames come from the source marginal. Every
    (t, t + shift) pair is then distributed as the channel's joint.

    Raises:
        (OracleError): if the channel's marginals differ, shift < 1 or
            n_frames < 1
    """
    _check_frames(n_frames)
    if shift < 1:
        raise OracleError(f'shift must be >= 1, got {shift}')
    if channel.shape[0] != channel.shape[1]:
        raise OracleError(f'a lagged stream needs a square channel, got {channel.shape}')
    source = channel.row_marginal
    if not np.allclose(source, channel.col_marginal, atol=1e-12, rtol=0):
        raise OracleError('a lagged stream needs a channel whose two marginals agree')
    if (source <= 0).any():
        raise OracleError('every symbol needs positive source probability')
    u = uniforms(seed, STREAM_SYMBOLS, n_frames)
    s = source.size
    symbols = np.empty(n_frames, dtype=np.int64)
    head = min(shift, n_frames)
    cum = np.cumsum(source)
    symbols[:head] = np.minimum(np.searchsorted(cum, u[:head] * cum[-1], side='right'), s - 1)
    cond_cum = np.cumsum(channel.probs / source[:, None], axis=1)
    for start in range(shift, n_frames, shift):
        stop = min(start + shift, n_frames)
        prev = symbols[start - shift:stop - shift]
        rows = cond_cum[prev]
        draws = (rows <= u[start:stop, None] * rows[:, -1:]).sum(axis=1)
        symbols[start:stop] = np.minimum(draws, s - 1)
    return symbols


def sample_lagged_stream(channel, embed, n_frames, shift, seed=0):
    """
    Embeds a lagged symbol stream, so time-shift pairing with the same shift
    has exact MI equal to exact_mi_bits(channel).

    Returns:
        features, symbols, mi (tuple): a FeatureMatrix, the symbol ids and
            exact_mi_bits of the channel
    """
    if embed.num_symbols != channel.shape[0]:
        raise OracleError(
            f'embedding has {embed.num_symbols} centroids but the channel has {channel.shape[0]} symbols')
    symbols = sample_lagged_symbols(channel, n_frames, shift, seed)
    features = embed.embed(symbols, seed, STREAM_NOISE_A)
    return FeatureMatrix(features), symbols, exact_mi_bits(channel)
