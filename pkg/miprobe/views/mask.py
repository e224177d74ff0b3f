import re
import numpy as np
from dataclasses import dataclass
from miprobe.views import ViewPairing, ViewError
from miprobe.formats import open_text, ensure_parent_dir, FormatError
from miprobe.common import log

LOGGER = log.get_logger()
DEFAULT_MASK_PERIOD = 40
DEFAULT_MASKED_PER_PERIOD = 30
POSITIONS_MASKED, POSITIONS_ALL = 'masked_only', 'all_frames'
SUPPORTED_POSITIONS = [POSITIONS_MASKED, POSITIONS_ALL]
HEADER_PATTERN = re.compile(r'^T=(\d+) period=(\d+) masked=(\d+)$')


@dataclass(frozen=True, eq=False)
class MaskSpec:
    """
    Deterministic block mask: in every period the last masked_per_period
    frames are masked (true) in view a.
    """
    masked: np.ndarray
    period: int
    masked_per_period: int

    def __post_init__(self):
        masked = np.asarray(self.masked, dtype=bool)
        if masked.ndim != 1:
            raise ViewError(f'mask must be 1D, got shape {masked.shape}')
        if self.period < 1 or not 0 <= self.masked_per_period <= self.period:
            raise ViewError(
                f'invalid tiling: period={self.period}, masked_per_period={self.masked_per_period}')
        if not np.array_equal(masked, _tile(masked.shape[0], self.period, self.masked_per_period)):
            raise ViewError('mask does not follow the block tiling rule')
        masked.setflags(write=False)
        object.__setattr__(self, 'masked', masked)

    def __len__(self):
        return self.masked.shape[0]

    def __eq__(self, other):
        if not isinstance(other, MaskSpec):
            return NotImplemented
        return (self.period == other.period
                and self.masked_per_period == other.masked_per_period
                and np.array_equal(self.masked, other.masked))

    @property
    def num_masked(self):
        return int(self.masked.sum())


def _tile(T, period, masked_per_period):
    return (np.arange(T) % period) >= (period - masked_per_period)


def block_mask_spec(T, period=DEFAULT_MASK_PERIOD, masked_per_period=DEFAULT_MASKED_PER_PERIOD):
    """
    Builds the block mask: frame t is masked iff
    (t mod period) >= period - masked_per_period. A partial final period
    follows the same rule.

    Raises:
        (ViewError): unless 0 < masked_per_period < period and T >= 1
    """
    if T < 1:
        raise ViewError(f'T must be >= 1, got {T}')
    if masked_per_period >= period:
        raise ViewError(
            f'masked_per_period ({masked_per_period}) must be less than period ({period})')
    if masked_per_period <= 0:
        raise ViewError(f'masked_per_period must be positive, got {masked_per_period}')
    return MaskSpec(_tile(T, period, masked_per_period), period, masked_per_period)


def masked_pairing(spec, positions=POSITIONS_MASKED):
    """
    Pairs frame t of the masked-pass dump (view a) with frame t of the
    unmasked-pass dump (view b).

    Args:
        spec (MaskSpec): the mask used for the masked pass
        positions (str): 'masked_only' keeps masked frames, 'all_frames'
            keeps every frame

    Returns:
        (ViewPairing): the identity pairs over the selected frames

    Raises:
        (ViewError): for an unknown position set or no masked frames under
            masked_only
    """
    if positions == POSITIONS_MASKED:
        index = np.flatnonzero(spec.masked)
        if index.size == 0:
            raise ViewError('mask spec has no masked frames to pair')
    elif positions == POSITIONS_ALL:
        index = np.arange(len(spec))
    else:
        raise ViewError(f'positions \'{positions}\' is not supported. Please use one of {SUPPORTED_POSITIONS}')
    return ViewPairing(index, index, len(spec))


def mask_ratio(spec):
    if len(spec) < 1:
        raise ViewError('mask ratio is undefined for T = 0')
    return spec.num_masked / len(spec)


def write_mask_spec(spec, path):
    ensure_parent_dir(path)
    bits = ''.join('1' if m else '0' for m in spec.masked.tolist())
    with open_text(path, 'w') as f:
        f.write(f'T={len(spec)} period={spec.period} masked={spec.masked_per_period}\n{bits}\n')
    LOGGER.debug(f'wrote mask spec {path} ({spec.num_masked}/{len(spec)} masked)')


def read_mask_spec(path):
    with open_text(path) as f:
        lines = f.read().split('\n')
    match = HEADER_PATTERN.match(lines[0].strip()) if lines else None
    if not match:
        raise FormatError(f'{path}: line 1 is not a "T=<T> period=<p> masked=<m>" header')
    T, period, masked = (int(g) for g in match.groups())
    bits = lines[1].strip() if len(lines) > 1 else ''
    if len(bits) != T or set(bits) - {'0', '1'}:
        raise FormatError(f'{path}: line 2 must hold exactly {T} characters of 0/1')
    try:
        return MaskSpec(np.array([b == '1' for b in bits], dtype=bool), period, masked)
    except ViewError as e:
        raise FormatError(f'{path}: {str(e)}')
