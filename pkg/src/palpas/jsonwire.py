"""Error envelope shared by both services' HTTP/JSON interfaces.

Failures travel as `{"error": {"code": ..., "message": ...}}` with a status
code; client transports map the code back onto the exception hierarchy so
in-process and HTTP transports raise identically.
"""

from __future__ import annotations

from . import errors

_CODE_FOR_EXCEPTION: list[tuple[type[Exception], str, int]] = [
    (errors.AuthenticationError, "authentication", 401),
    (errors.EnrollmentError, "enrollment", 403),
    (errors.NotFoundError, "not_found", 404),
    (errors.StateError, "state", 409),
    (errors.PolicyRejectedError, "policy_rejected", 422),
    (errors.PolicyParseError, "policy_parse", 400),
    (errors.PolicyValidationError, "policy_validation", 400),
    (errors.ProtocolError, "protocol", 400),
    (ValueError, "protocol", 400),
]

_EXCEPTION_FOR_CODE: dict[str, type[Exception]] = {
    "authentication": errors.AuthenticationError,
    "enrollment": errors.EnrollmentError,
    "not_found": errors.NotFoundError,
    "state": errors.StateError,
    "policy_rejected": errors.PolicyRejectedError,
    "policy_parse": errors.PolicyParseError,
    "policy_validation": errors.PolicyValidationError,
    "protocol": errors.ProtocolError,
}


def error_response(exc: Exception) -> tuple[int, dict]:
    for exc_type, code, status in _CODE_FOR_EXCEPTION:
        if isinstance(exc, exc_type):
            return status, {"error": {"code": code, "message": str(exc)}}
    return 500, {"error": {"code": "internal", "message": str(exc)}}


def raise_for_error(status: int, payload: dict) -> None:
    if status < 400:
        return
    info = payload.get("error", {}) if isinstance(payload, dict) else {}
    code = info.get("code", "protocol")
    message = info.get("message", f"request failed with status {status}")
    raise _EXCEPTION_FOR_CODE.get(code, errors.ProtocolError)(message)
