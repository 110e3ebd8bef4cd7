"""Exception hierarchy shared across the palpas packages."""


class PalpasError(Exception):
    """Base class for all palpas-specific errors."""


class AuthenticationError(PalpasError):
    """MAC verification failed, wrong master password, or rejected credential."""


class CorruptionError(PalpasError):
    """Data authenticated correctly but its payload is malformed."""


class PolicyParseError(PalpasError):
    """Policy document is not well-formed."""


class PolicyValidationError(PalpasError):
    """Policy document parsed but violates a structural rule."""


class PolicyRejectedError(PalpasError):
    """Policy submission refused by the policy service's sanity checks."""


class UnsatisfiablePolicyError(PalpasError):
    """Draft cap exceeded without producing a compliant password."""


class EnrollmentError(PalpasError):
    """Device registration failed (bad, expired, or consumed token)."""


class NotFoundError(PalpasError):
    """Referenced record, device, or policy does not exist."""


class ProtocolError(PalpasError):
    """Malformed request or response on a service interface."""


class NoAccountError(PalpasError):
    """No record stored for this service: the user has no account there."""


class PolicyMissingError(PalpasError):
    """No published password policy exists for the service."""


class StateError(PalpasError):
    """Operation invoked in the wrong client state (e.g. commit before propose)."""


class BundleFormatError(PalpasError):
    """Device-transfer bundle is malformed."""


class TransportError(PalpasError):
    """Network-level failure talking to a service."""
