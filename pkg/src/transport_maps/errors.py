"""Exception hierarchy shared by every module of the package."""


class TransportError(Exception):
    """Base class for all errors raised by transport_maps."""


class DomainError(TransportError, ValueError):
    """A point lies outside the box it was supposed to live in."""


class NumericError(TransportError, ArithmeticError):
    """Base class for failures of a numerical procedure."""


class SingularFactorError(NumericError):
    """A factor or frame matrix is numerically singular."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class IntegrationError(NumericError):
    """The ODE integrator failed to meet its error contract."""


class SignatureError(NumericError):
    """Inertia of a Hermitian matrix field is not constant over the samples."""


class GaugeError(NumericError):
    """A gauge choice violates its defining relation."""

    def __init__(self, message, defect=None):
        super().__init__(message)
        self.defect = defect


class HermiticityError(NumericError):
    """Factor maps do not satisfy the Hermitian compatibility gauge."""

    def __init__(self, message, defect=None):
        super().__init__(message)
        self.defect = defect


class SmoothnessError(TransportError):
    """A section or map is not smooth enough for the requested operator."""


class AxiomError(TransportError):
    """A transport (or transport-like family) violates a composition law."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
