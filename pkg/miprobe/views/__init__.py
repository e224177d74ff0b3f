import numpy as np
from dataclasses import dataclass
from miprobe.common import log

LOGGER = log.get_logger()
INDEX_DTYPE = np.dtype('int64')


class ViewError(Exception):
    """A general class for invalid view pairings or mask specs"""


@dataclass(frozen=True, eq=False)
class ViewPairing:
    """
    Frame index pairs aligning a view-a dump to a view-b dump of the same
    utterance; unique and sorted by index_a.
    """
    index_a: np.ndarray
    index_b: np.ndarray
    source_T: int

    def __post_init__(self):
        a = np.asarray(self.index_a, dtype=INDEX_DTYPE)
        b = np.asarray(self.index_b, dtype=INDEX_DTYPE)
        if a.ndim != 1 or a.shape != b.shape:
            raise ViewError(f'index arrays must be 1D and equal length, got {a.shape} and {b.shape}')
        if a.size:
            if a.min() < 0 or b.min() < 0 or a.max() >= self.source_T or b.max() >= self.source_T:
                raise ViewError(f'pair indices must lie in [0, {self.source_T})')
            if np.any(np.diff(a) < 0):
                raise ViewError('pairs must be sorted by index_a')
            if len(set(zip(a.tolist(), b.tolist()))) != a.size:
                raise ViewError('pairs must be unique')
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, 'index_a', a)
        object.__setattr__(self, 'index_b', b)

    def __len__(self):
        return self.index_a.shape[0]

    def __eq__(self, other):
        if not isinstance(other, ViewPairing):
            return NotImplemented
        return (self.source_T == other.source_T
                and np.array_equal(self.index_a, other.index_a)
                and np.array_equal(self.index_b, other.index_b))

    @property
    def pairs(self):
        return list(zip(self.index_a.tolist(), self.index_b.tolist()))


def pair_features(za, zb, pairing):
    """
    Gathers the paired frames of two dumps of one utterance.

    Args:
        za (numpy.ndarray): the view-a dump, shape (T, Da)
        zb (numpy.ndarray): the view-b dump, shape (T, Db)
        pairing (ViewPairing): the frame alignment

    Returns:
        za_rows, zb_rows (tuple): arrays with one row per pair
    """
    za, zb = np.asarray(za), np.asarray(zb)
    if za.shape[0] != pairing.source_T or zb.shape[0] != pairing.source_T:
        raise ViewError(
            f'dumps have T={za.shape[0]} and T={zb.shape[0]} but the pairing '
            f'was built for T={pairing.source_T}')
    return za[pairing.index_a], zb[pairing.index_b]
