import os
import pandas as pd

VERSIONS_CSV = os.path.join(os.path.dirname(__file__), 'data', 'versions.csv')
IDENTIFIER_PREFIX = 'miprobe v'


def _get_versions_from_csv():
    """
    Reads the release history, one row per version. Exactly one row has
    Current set; it names the installed release.

    Returns:
        (pandas.DataFrame): Version, CreatedDate, Current and Notes columns
    """
    return pd.read_csv(VERSIONS_CSV, dtype={'Version': str, 'CreatedDate': str})


def _first_record(df):
    if df.empty:
        return None
    return df.to_dict(orient='records')[0]


def get_current_version():
    df = _get_versions_from_csv()
    return _first_record(df[df.Current.astype(bool)])


def get_version(ver):
    """
    Looks up one release, e.g. the one a stored run report was produced by.

    Returns:
        (dict): the release's row, or None when the version is unknown
    """
    df = _get_versions_from_csv()
    return _first_record(df[df.Version == str(ver)])


def get_library_identifier():
    return f'{IDENTIFIER_PREFIX}{get_current_version()["Version"]}'


def parse_library_identifier(identifier):
    # 'miprobe v0.2.0' -> '0.2.0'
    if not isinstance(identifier, str) or not identifier.startswith(IDENTIFIER_PREFIX):
        return None
    return identifier[len(IDENTIFIER_PREFIX):]
