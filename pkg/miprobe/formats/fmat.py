import struct
import numpy as np
from miprobe.formats import (
    FileFormat, open_binary, ensure_parent_dir, FORMAT_FMAT, FORMAT_FMAT_EXT,
    MODE_WRITE, MalformedHeaderError, ShapeMismatchError, NonFiniteValueError,
    FormatError
)
from miprobe.common import log

LOGGER = log.get_logger()
FMAT_MAGIC = b'FMAT'
FMAT_VERSION = 1
# magic, version, 3 padding bytes, T, D
FMAT_HEADER = struct.Struct('<4sB3sII')
FMAT_HEADER_BYTES = FMAT_HEADER.size
FMAT_DTYPE = np.dtype('<f4')
MAX_DIMENSION = 2 ** 32 - 1


class FeatureMatrix(FileFormat):
    """
    A T x D matrix of finite float32 representation vectors for one
    utterance, one layer and one view.
    """
    def __init__(self, values):
        self._format = FORMAT_FMAT
        self._ext = FORMAT_FMAT_EXT
        arr = np.asarray(values)
        if arr.ndim != 2:
            raise FormatError(f'feature matrix must be 2D, got shape {arr.shape}')
        frames, dim = arr.shape
        if frames < 1 or dim < 1:
            raise FormatError(
                f'feature matrix needs T >= 1 and D >= 1, got T={frames}, D={dim}')
        if frames > MAX_DIMENSION or dim > MAX_DIMENSION:
            raise FormatError(f'feature matrix shape {arr.shape} exceeds 32-bit header fields')
        arr = np.array(arr, dtype=FMAT_DTYPE, order='C')
        _check_finite(arr)
        arr.setflags(write=False)
        self._values = arr

    def __repr__(self):
        return f'{self.__module__}.{self.__class__.__name__}(T={self.frames}, D={self.dim})'

    def __eq__(self, other):
        if not isinstance(other, FeatureMatrix):
            return NotImplemented
        return (self.values.shape == other.values.shape
                and self.values.tobytes() == other.values.tobytes())

    @property
    def frames(self):
        return self._values.shape[0]

    @property
    def dim(self):
        return self._values.shape[1]

    @property
    def values(self):
        return self._values

    def to_file(self, path):
        store_feature_matrix(self, path)

    @classmethod
    def from_file(cls, path):
        return load_feature_matrix(path)


def _check_finite(arr, payload_offset=None):
    finite = np.isfinite(arr)
    if finite.all():
        return
    flat_idx = int(np.argmin(finite.reshape(-1)))
    row, col = divmod(flat_idx, arr.shape[1])
    offset = None
    if payload_offset is not None:
        offset = payload_offset + flat_idx * FMAT_DTYPE.itemsize
    raise NonFiniteValueError(
        f'non-finite value {arr[row, col]} at row {row}, column {col}', offset=offset)


def encode_header(frames, dim):
    return FMAT_HEADER.pack(FMAT_MAGIC, FMAT_VERSION, b'\x00\x00\x00', frames, dim)


def decode_header(buf):
    """
    Decodes and validates the 16-byte FMAT header.

    Args:
        buf (bytes): at least the first 16 bytes of the file

    Returns:
        frames, dim (tuple): the declared T and D

    Raises:
        (MalformedHeaderError): for a short buffer, wrong magic, unknown
            version, non-zero padding or a zero dimension
    """
    if len(buf) < FMAT_HEADER_BYTES:
        raise MalformedHeaderError(
            f'file holds {len(buf)} bytes, fewer than the {FMAT_HEADER_BYTES}-byte header',
            offset=len(buf))
    magic, version, padding, frames, dim = FMAT_HEADER.unpack_from(buf)
    if magic != FMAT_MAGIC:
        raise MalformedHeaderError(f'bad magic {magic!r}, expected {FMAT_MAGIC!r}', offset=0)
    if version != FMAT_VERSION:
        raise MalformedHeaderError(f'unsupported version {version}', offset=4)
    if padding != b'\x00\x00\x00':
        raise MalformedHeaderError(f'non-zero padding {padding!r}', offset=5)
    if frames < 1:
        raise MalformedHeaderError('declared T is 0', offset=8)
    if dim < 1:
        raise MalformedHeaderError('declared D is 0', offset=12)
    return frames, dim


def load_feature_matrix(path):
    """
    Loads a feature matrix from an FMAT file.

    Args:
        path (str): the path to the FMAT file

    Returns:
        (FeatureMatrix): the matrix with the header-declared shape

    Raises:
        (MalformedHeaderError): if the header fails validation
        (ShapeMismatchError): if the payload size disagrees with T x D
        (NonFiniteValueError): if any value is NaN or infinite
        (FormatIOError): if the file can't be read
    """
    with open_binary(path) as f:
        buf = f.read()
    frames, dim = decode_header(buf)
    expected = FMAT_HEADER_BYTES + frames * dim * FMAT_DTYPE.itemsize
    if len(buf) != expected:
        raise ShapeMismatchError(
            f'{path}: header declares T={frames}, D={dim} ({expected} bytes) '
            f'but the file holds {len(buf)} bytes',
            offset=min(len(buf), expected))
    values = np.frombuffer(buf, dtype=FMAT_DTYPE, offset=FMAT_HEADER_BYTES).reshape(frames, dim)
    _check_finite(values, payload_offset=FMAT_HEADER_BYTES)
    LOGGER.debug(f'loaded {path} with T={frames}, D={dim}')
    return FeatureMatrix(values)


def store_feature_matrix(matrix, path):
    """
    Writes a feature matrix as an FMAT file; any existing file is replaced.

    Args:
        matrix (FeatureMatrix or numpy.ndarray): the matrix to write
        path (str): the destination path
    """
    if not isinstance(matrix, FeatureMatrix):
        matrix = FeatureMatrix(matrix)
    ensure_parent_dir(path)
    with open_binary(path, MODE_WRITE) as f:
        f.write(encode_header(matrix.frames, matrix.dim))
        f.write(matrix.values.tobytes(order='C'))
    LOGGER.debug(f'wrote {path} with T={matrix.frames}, D={matrix.dim}')
