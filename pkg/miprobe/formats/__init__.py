import os
from abc import ABC, abstractmethod
from contextlib import contextmanager
from miprobe.common import log

LOGGER = log.get_logger()
FORMAT_FMAT, FORMAT_FMAT_EXT = 'FMAT', 'fmat'
FORMAT_LABELS, FORMAT_LABELS_EXT = 'Labels', 'lab'
FORMAT_MASK, FORMAT_MASK_EXT = 'MaskSpec', 'mask'
FORMAT_MANIFEST, FORMAT_MANIFEST_EXT = 'Manifest', 'json'
SUPPORTED_FORMATS = {
    FORMAT_FMAT: FORMAT_FMAT_EXT,
    FORMAT_LABELS: FORMAT_LABELS_EXT,
    FORMAT_MASK: FORMAT_MASK_EXT,
    FORMAT_MANIFEST: FORMAT_MANIFEST_EXT
}
MODE_READ, MODE_WRITE = 'rb', 'wb'


@contextmanager
def open_binary(path, mode=MODE_READ):
    resource = None
    try:
        LOGGER.debug(f'opening {path} (mode: {mode}) ...')
        resource = open(path, mode)
        yield resource
    except OSError as e:
        raise FormatIOError(f'{e.__class__.__name__}: {str(e)}')
    finally:
        if resource is not None and not resource.closed:
            resource.close()


@contextmanager
def open_text(path, mode='r'):
    resource = None
    try:
        LOGGER.debug(f'opening {path} (mode: {mode}) ...')
        resource = open(path, mode, encoding='utf-8', newline='\n')
        yield resource
    except OSError as e:
        raise FormatIOError(f'{e.__class__.__name__}: {str(e)}')
    except UnicodeError as e:
        raise FormatError(f'{path}: not valid UTF-8 text: {e.__class__.__name__}: {str(e)}')
    finally:
        if resource is not None and not resource.closed:
            resource.close()


def file_has_ext(file_name, ext):
    return str(file_name).endswith(f'.{ext}')


def ensure_parent_dir(path):
    parent = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(parent, exist_ok=True)
    except OSError as e:
        raise FormatIOError(f'{e.__class__.__name__}: {str(e)}')


class FormatError(Exception):
    """A general class for malformed toolkit files"""
    def __init__(self, message, offset=None):
        if offset is not None:
            message = f'{message} (byte offset {offset})'
        super().__init__(message)
        self.offset = offset


class FormatIOError(FormatError):
    """Any OS-level failure reading or writing a toolkit file"""


class MalformedHeaderError(FormatError):
    """An FMAT header that does not match the format definition"""


class ShapeMismatchError(FormatError):
    """An FMAT payload whose size disagrees with the header-declared shape"""


class NonFiniteValueError(FormatError):
    """A NaN or infinite value in a feature matrix"""


class LabelFormatError(FormatError):
    """A malformed or out-of-range label file"""


class ManifestError(FormatError):
    """A manifest document that cannot be parsed into records"""


class FileFormat(ABC):
    """Base for objects that own one on-disk toolkit file."""
    @property
    def format(self):
        return self._format

    @property
    def extension(self):
        return self._ext

    def __str__(self):
        return f'{self.__class__.__name__} ({self.format})'

    @abstractmethod
    def to_file(self, path):
        pass

    @classmethod
    @abstractmethod
    def from_file(cls, path):
        pass
