import re
import numpy as np
from miprobe.formats import (
    FileFormat, open_text, ensure_parent_dir, FORMAT_LABELS, FORMAT_LABELS_EXT,
    LabelFormatError
)
from miprobe.common import log

LOGGER = log.get_logger()
HEADER_PATTERN = re.compile(r'^num_classes=(\d+)$')
LABEL_DTYPE = np.dtype('int64')


class FrameLabels(FileFormat):
    """Per-frame integer class ids in [0, num_classes)."""
    def __init__(self, ids, num_classes):
        self._format = FORMAT_LABELS
        self._ext = FORMAT_LABELS_EXT
        num_classes = int(num_classes)
        if num_classes < 1:
            raise LabelFormatError(f'num_classes must be >= 1, got {num_classes}')
        arr = np.asarray(ids)
        if arr.size == 0:
            arr = np.zeros(0, dtype=LABEL_DTYPE)
        if arr.ndim != 1:
            raise LabelFormatError(f'labels must be 1D, got shape {arr.shape}')
        if not np.issubdtype(arr.dtype, np.integer):
            raise LabelFormatError(f'labels must be integers, got dtype {arr.dtype}')
        arr = arr.astype(LABEL_DTYPE)
        if arr.size and (arr.min() < 0 or arr.max() >= num_classes):
            bad = int(np.argmax((arr < 0) | (arr >= num_classes)))
            raise LabelFormatError(
                f'label {arr[bad]} at frame {bad} is outside [0, {num_classes})')
        arr.setflags(write=False)
        self._ids = arr
        self._num_classes = num_classes

    def __repr__(self):
        return (f'{self.__module__}.{self.__class__.__name__}'
                f'(T={len(self)}, num_classes={self.num_classes})')

    def __len__(self):
        return self._ids.shape[0]

    def __eq__(self, other):
        if not isinstance(other, FrameLabels):
            return NotImplemented
        return (self.num_classes == other.num_classes
                and np.array_equal(self.ids, other.ids))

    @property
    def ids(self):
        return self._ids

    @property
    def num_classes(self):
        return self._num_classes

    def to_file(self, path):
        store_labels(self, path)

    @classmethod
    def from_file(cls, path):
        return load_labels(path)


def load_labels(path):
    """
    Loads frame labels from a text file whose first line is
    'num_classes=<K>' followed by one non-negative integer per line.

    Args:
        path (str): the path to the label file

    Returns:
        (FrameLabels): the labels; an empty body gives zero-length labels

    Raises:
        (LabelFormatError): for a bad header, a non-integer token or an id
            outside [0, K)
    """
    with open_text(path) as f:
        lines = f.read().split('\n')
    # trailing blank lines carry no frames
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise LabelFormatError(f'{path}: missing num_classes header')
    match = HEADER_PATTERN.match(lines[0].strip())
    if not match:
        raise LabelFormatError(f'{path}: line 1 is not a num_classes=<K> header: {lines[0]!r}')
    num_classes = int(match.group(1))
    ids = []
    for line_no, line in enumerate(lines[1:], start=2):
        token = line.strip()
        if not re.fullmatch(r'\d+', token):
            raise LabelFormatError(f'{path}: line {line_no} is not a non-negative integer: {line!r}')
        value = int(token)
        if value >= num_classes:
            raise LabelFormatError(
                f'{path}: line {line_no} holds id {value}, outside [0, {num_classes})')
        ids.append(value)
    return FrameLabels(np.array(ids, dtype=LABEL_DTYPE), num_classes)


def store_labels(labels, path):
    ensure_parent_dir(path)
    body = ''.join(f'{i}\n' for i in labels.ids.tolist())
    with open_text(path, 'w') as f:
        f.write(f'num_classes={labels.num_classes}\n{body}')
    LOGGER.debug(f'wrote {len(labels)} labels to {path}')
