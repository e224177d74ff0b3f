import numpy as np
from dataclasses import dataclass
from scipy.special import rel_entr
from scipy.stats import entropy
from miprobe.oracle import OracleError

SUM_TOLERANCE = 1e-9
LN2 = np.log(2.0)


@dataclass(frozen=True, eq=False)
class JointTable:
    """A discrete joint distribution p(row, col)."""
    probs: np.ndarray

    def __post_init__(self):
        probs = np.array(self.probs, dtype=np.float64)
        if probs.ndim != 2 or min(probs.shape) < 1:
            raise OracleError(f'a joint table must be a non-empty R x C matrix, got shape {probs.shape}')
        if not np.isfinite(probs).all() or (probs < 0).any():
            raise OracleError('joint probabilities must be finite and non-negative')
        total = probs.sum()
        if abs(total - 1.0) > SUM_TOLERANCE:
            raise OracleError(f'joint probabilities sum to {total!r}, not 1')
        probs.setflags(write=False)
        object.__setattr__(self, 'probs', probs)

    @property
    def shape(self):
        return self.probs.shape

    @property
    def row_marginal(self):
        return self.probs.sum(axis=1)

    @property
    def col_marginal(self):
        return self.probs.sum(axis=0)

    def transpose(self):
        return JointTable(self.probs.T)


def exact_mi_bits(joint):
    """
    Mutual information of a discrete joint table in bits; cells with zero
    probability contribute nothing.

    Raises:
        (OracleError): if joint isn't a valid JointTable
    """
    if not isinstance(joint, JointTable):
        joint = JointTable(joint)
    independent = np.outer(joint.row_marginal, joint.col_marginal)
    # rounding can leave a tiny negative sum for independent tables
    return max(0.0, float(rel_entr(joint.probs, independent).sum() / LN2))


def marginal_entropies_bits(joint):
    return float(entropy(joint.row_marginal, base=2)), float(entropy(joint.col_marginal, base=2))


def mixture_channel(num_symbols, fidelity):
    """
    Uniform source through a channel that copies the symbol with probability
    `fidelity` and otherwise emits a uniformly drawn symbol.

    Args:
        num_symbols (int): S >= 2
        fidelity (float): p in [0, 1]

    Returns:
        (JointTable): the S x S joint of (input, output)
    """
    if num_symbols < 2:
        raise OracleError(f'a mixture channel needs at least 2 symbols, got {num_symbols}')
    if not 0.0 <= fidelity <= 1.0:
        raise OracleError(f'fidelity must lie in [0, 1], got {fidelity}')
    s = num_symbols
    conditional = fidelity * np.eye(s) + (1.0 - fidelity) / s
    return JointTable(conditional / s)


def random_joint(rows, cols, seed=0):
    """A flat-Dirichlet random joint table, for property checks."""
    if rows < 1 or cols < 1:
        raise OracleError(f'table shape must be positive, got {rows} x {cols}')
    probs = np.random.default_rng(seed).dirichlet(np.ones(rows * cols)).reshape(rows, cols)
    return JointTable(probs / probs.sum())
