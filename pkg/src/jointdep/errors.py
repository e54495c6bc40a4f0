"""Exception hierarchy shared across the package.

The CLI maps these onto exit-code categories, so new errors should
subclass one of the existing branches rather than raising bare builtins.
"""


class JointdepError(Exception):
    """Base class for all package errors."""


class ConfigError(JointdepError):
    """Invalid configuration, missing assets, bad CLI arguments."""


class DataError(JointdepError):
    """Malformed input data (treebanks, lexicons, embedding files)."""


class LatticeError(JointdepError):
    """Structurally invalid lattice or lattice index out of range."""


class EmbeddingError(JointdepError):
    """An embedding provider failed to produce a vector for a node."""


class GoldPathError(DataError):
    """The gold segmentation of a token is not a path in its lattice."""


class TrainingError(JointdepError):
    """Optimization failed in a way worth aborting on (non-finite grads)."""
