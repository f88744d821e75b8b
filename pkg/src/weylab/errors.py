"""Exception types shared across the package."""


class WeylabError(Exception):
    """Base class for all package errors."""


class MeshError(WeylabError):
    """Invalid mesh topology (non-manifold, wrong genus, bad indices)."""


class MetricError(WeylabError):
    """Invalid metric data (triangle inequality violation, bad lengths)."""


class SolverError(WeylabError):
    """A linear or nonlinear solve failed to converge or broke down."""


class SchemaError(WeylabError):
    """Persisted file does not match the expected schema or hash."""


class InputError(WeylabError):
    """Bad user input (missing file, malformed parameter)."""
