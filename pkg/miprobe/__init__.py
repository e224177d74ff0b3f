"""miprobe"""
from miprobe.common import log, version
from miprobe.estimators.mi import (
    MIEstimate, supervised_lower_bound, unsupervised_lower_bound, run_seeded,
    empirical_entropy_bits
)
from miprobe.estimators.probe import ProbeConfig
from miprobe.oracle.joint import exact_mi_bits

version_info = version.get_current_version()
__version__ = version_info['Version']
__version_date__ = version_info['CreatedDate']
__version_notes__ = version_info['Notes']
LOGGER = log.get_logger()
