"""Exception types shared across the package."""


class VFBoostError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(VFBoostError, ValueError):
    """An argument violates a documented precondition."""


class IngestionError(VFBoostError, ValueError):
    """A CSV file could not be turned into a dataset."""


class SamplingError(VFBoostError, ValueError):
    """A sampling request cannot be satisfied by the available instances."""


class MetricError(VFBoostError, ValueError):
    """A metric is undefined for the given inputs."""


class IntegrityError(VFBoostError):
    """A ciphertext was used with a key it was not produced under."""


class FixedPointRangeError(VFBoostError, OverflowError):
    """A value does not fit the fixed-point message space."""


class ConfigError(VFBoostError, ValueError):
    """An experiment configuration failed validation."""


class SchemaError(VFBoostError, ValueError):
    """A serialized artifact has an unsupported or malformed schema."""
