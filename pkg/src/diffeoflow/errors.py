"""Exception hierarchy for diffeoflow.

The CLI maps these onto exit codes, so operations raise typed errors
rather than bare ValueErrors whenever the failure is meaningful to a
caller (non-diffeo result, flow blow-up, bad input file, ...).
"""


class EngineError(Exception):
    """Base class for all diffeoflow errors."""


class DescriptorError(EngineError):
    """Malformed or non-whitelisted closed-form descriptor."""


class FieldError(EngineError):
    """Invalid field data (non-finite samples, shape mismatch, bad grid)."""


class UnsupportedOrderError(EngineError):
    """Requested derivative / tensor degree above the supported cap."""


class InsufficientAnnuliError(EngineError):
    """Grid too small to host the dyadic annuli the decay classifier needs."""


class JetError(EngineError):
    """Jet dimension / order / base-point mismatch."""


class SingularJacobianError(EngineError):
    """Linear part is singular where an inverse is required."""


class NonDiffeoError(EngineError):
    """An operation produced a map that fails the orientation / det check."""


class UnderResolvedError(EngineError):
    """The grid box is too small for the requested operation.

    Raised when a composition would need field values far outside the box,
    or generally when truncation error would dominate the result.
    """


class InversionError(EngineError):
    """Displacement inversion did not reach the residual tolerance."""


class FlowDomainError(EngineError):
    """A flow trajectory left the enlarged computational box."""


class FlowBlowupError(EngineError):
    """A flow trajectory became non-finite."""


class FileFormatError(EngineError):
    """Corrupt or inconsistent field / jet file."""
