"""Exception types raised across the package."""


class MinMaxHEError(Exception):
    """Base class for all package errors."""


class ShapeMismatch(MinMaxHEError, ValueError):
    pass


class NonFinite(MinMaxHEError, ValueError):
    pass


class InvalidAxis(MinMaxHEError, ValueError):
    pass


class DegenerateInterval(MinMaxHEError, ValueError):
    pass


class InsufficientSamples(MinMaxHEError, ValueError):
    pass


class EmptyBatch(MinMaxHEError, ValueError):
    pass


class Uninitialized(MinMaxHEError, RuntimeError):
    """A Min-Max layer was used in inference mode before seeing any batch."""


class CacheMismatch(MinMaxHEError, ValueError):
    pass


class InvalidOneHot(MinMaxHEError, ValueError):
    pass


class EmptyDataset(MinMaxHEError, ValueError):
    pass


class IndexNotActivation(MinMaxHEError, ValueError):
    pass


class UnfoldableTopology(MinMaxHEError, ValueError):
    pass


class NoDownstreamLayer(MinMaxHEError, ValueError):
    pass


class NotHECompatible(MinMaxHEError, ValueError):
    def __init__(self, offenders):
        # offenders: list of (index, description)
        self.offenders = list(offenders)
        listing = ", ".join(f"#{i} {d}" for i, d in self.offenders)
        super().__init__(f"layers not expressible under HE: {listing}")


class BadMagic(MinMaxHEError, ValueError):
    pass


class Truncated(MinMaxHEError, ValueError):
    pass


class IOFailure(MinMaxHEError, OSError):
    pass


class LabelOutOfRange(MinMaxHEError, ValueError):
    pass


class ConfigError(MinMaxHEError, ValueError):
    pass
