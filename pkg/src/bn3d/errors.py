"""Typed errors shared across the pipeline."""


class Bn3dError(Exception):
    """Base class for all pipeline errors."""


class SpecError(Bn3dError):
    """A building spec violates its invariants (overlapping windows, bad polygon...)."""


class PoseSamplingError(Bn3dError):
    """Valid camera poses could not be found within the iteration budget."""

    def __init__(self, message: str, failing_constraint: str):
        super().__init__(message)
        self.failing_constraint = failing_constraint


class NonFiniteError(Bn3dError):
    """A non-finite value appeared in a forward or backward pass."""

    def __init__(self, message: str, block: str):
        super().__init__(message)
        self.block = block


class GeometryError(Bn3dError):
    """Degenerate geometry (empty isosurface, zero wall area, bad quadrilateral)."""


class UnsupportedGeometryError(Bn3dError):
    """The requested method cannot handle this building geometry (e.g. curved facades)."""


class ManifestError(Bn3dError):
    """A dataset manifest is missing, inconsistent, or fails its hash check."""
