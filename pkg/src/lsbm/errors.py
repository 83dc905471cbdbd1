"""Exception hierarchy shared by every module of the package."""


class LSBMError(Exception):
    """Base class for all errors raised by :mod:`lsbm`."""


class ModelError(LSBMError, ValueError):
    """Model parameters violate a structural invariant."""


class DegenerateModel(ModelError):
    """A label distribution p(i, j, .) is not a probability distribution."""


class OutOfRange(ModelError):
    """A scaled model produced a probability outside [0, 1]."""


class DegenerateSupport(LSBMError, ValueError):
    """A geometric mixture has zero total mass (disjoint supports)."""


class SingleCluster(LSBMError, ValueError):
    """The divergence needs at least two clusters."""


class ZeroOverlap(LSBMError, ValueError):
    """The Bhattacharyya coefficient of two label distributions is zero."""


class DomainError(LSBMError, ValueError):
    """Constants passed to a closed-form rate are outside its domain."""


class ThresholdUndefined(LSBMError, ValueError):
    """The singular value threshold needs n * p_tilde > 1."""


class NoClusters(LSBMError):
    """Reference-column clustering did not extract a single cluster."""


class EmptyCluster(LSBMError, ValueError):
    """Parameter estimation was handed a partition with an empty cluster."""


class SizeMismatch(LSBMError, ValueError):
    """Two partitions cover different item counts."""


class TooLarge(LSBMError, ValueError):
    """The exhaustive oracle would enumerate too many assignments."""


class ZeroLikelihood(LSBMError):
    """Every assignment has probability zero under the model."""


class DataFormatError(LSBMError, ValueError):
    """A model, graph or partition file is malformed."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:"
            if line is not None:
                where += f"{line}:"
            where += " "
        super().__init__(where + message)
