class OracleError(Exception):
    """A general class for invalid synthetic distributions or sampling requests"""
