EXIT_OK, EXIT_VALIDATION, EXIT_DATA = 0, 1, 2


class DataError(Exception):
    """Input data that cannot be estimated on, e.g. missing labels or view dumps"""


class ValidationFailure(Exception):
    """A failed manifest validation, acceptance check or replay comparison"""
