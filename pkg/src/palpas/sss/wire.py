"""HTTP/JSON interface of the sync service.

One dispatch function serves both deployments: the TLS listener hands it the
peer certificate's fingerprint, and the in-process transport used by tests
routes the same method/path/body tuples through it directly. Endpoints:

    POST   /accounts               create account from a CSR (no client cert)
    POST   /tokens                 issue a device-enrollment token
    POST   /devices                register a new device (CSR + token)
    PUT    /records/{id-hex}       store or replace a salt record
    GET    /records/{id-hex}       fetch all records for an identifier
    DELETE /records/{id-hex}       delete one record by handle
    POST   /revocations            revoke a device key
    GET    /devices                list enrolled devices
    GET    /ca                     fetch the service's issuing certificate

Identifiers are 64 lowercase hex characters. All bodies are JSON; binary
fields are hex-encoded.
"""

from __future__ import annotations

import json
import re

from ..crypto import ProtectedUsername
from ..errors import ProtocolError
from ..jsonwire import error_response
from .server import SaltRecord, SaltSyncService

_RECORD_PATH = re.compile(r"^/records/([0-9a-f]{64})$")


def _parse_body(body: bytes) -> dict:
    if not body:
        return {}
    try:
        payload = json.loads(body.decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as exc:
        raise ProtocolError("request body is not valid JSON") from exc
    if not isinstance(payload, dict):
        raise ProtocolError("request body must be a JSON object")
    return payload


def _require(payload: dict, key: str) -> str:
    value = payload.get(key)
    if not isinstance(value, str) or not value:
        raise ProtocolError(f"field {key!r} is required")
    return value


def _username_from_json(payload: dict) -> ProtectedUsername:
    blob = payload.get("username")
    if not isinstance(blob, dict):
        raise ProtocolError("field 'username' is required")
    try:
        return ProtectedUsername(
            iv=bytes.fromhex(_require(blob, "iv")),
            ciphertext=bytes.fromhex(_require(blob, "ciphertext")),
            mac=bytes.fromhex(_require(blob, "mac")),
        )
    except ValueError as exc:
        raise ProtocolError(f"malformed username blob: {exc}") from exc


def _record_to_json(record: SaltRecord) -> dict:
    return {
        "handle": record.handle,
        "salt": record.salt.hex(),
        "username": {
            "iv": record.username.iv.hex(),
            "ciphertext": record.username.ciphertext.hex(),
            "mac": record.username.mac.hex(),
        },
    }


def handle_request(
    service: SaltSyncService,
    method: str,
    path: str,
    body: bytes,
    client_fingerprint: str | None,
) -> tuple[int, dict]:
    """Dispatch one request; returns (status, JSON-serializable body)."""
    try:
        return _dispatch(service, method.upper(), path, body, client_fingerprint)
    except Exception as exc:  # noqa: BLE001 - wire boundary maps all failures
        return error_response(exc)


def _dispatch(
    service: SaltSyncService,
    method: str,
    path: str,
    body: bytes,
    fingerprint: str | None,
) -> tuple[int, dict]:
    if method == "POST" and path == "/accounts":
        payload = _parse_body(body)
        account_id, certificate = service.create_account(_require(payload, "csr"))
        return 201, {
            "account_id": account_id,
            "certificate": certificate,
            "ca_certificate": service.ca.certificate_pem,
        }

    if method == "POST" and path == "/tokens":
        token = service.issue_token(fingerprint)
        return 200, {"token": token.value, "expires_at": token.expires_at}

    if method == "POST" and path == "/devices":
        payload = _parse_body(body)
        certificate = service.register_device(
            _require(payload, "csr"), _require(payload, "token")
        )
        return 201, {
            "certificate": certificate,
            "ca_certificate": service.ca.certificate_pem,
        }

    match = _RECORD_PATH.match(path)
    if match:
        identifier = bytes.fromhex(match.group(1))
        if method == "PUT":
            payload = _parse_body(body)
            replace_handle = payload.get("handle")
            if payload.get("replace"):
                if not replace_handle:
                    raise ProtocolError("replace requires a record handle")
            elif replace_handle:
                raise ProtocolError("handle is only valid with replace")
            else:
                replace_handle = None
            handle = service.put_record(
                fingerprint,
                identifier,
                bytes.fromhex(_require(payload, "salt")),
                _username_from_json(payload),
                replace_handle=replace_handle,
            )
            return 200, {"handle": handle}
        if method == "GET":
            records = service.get_records(fingerprint, identifier)
            return 200, {"records": [_record_to_json(r) for r in records]}
        if method == "DELETE":
            payload = _parse_body(body)
            service.delete_record(fingerprint, identifier, _require(payload, "handle"))
            return 200, {"deleted": True}

    if method == "POST" and path == "/revocations":
        payload = _parse_body(body)
        service.revoke_device(
            fingerprint,
            _require(payload, "fingerprint"),
            confirm_last=bool(payload.get("confirm_last", False)),
        )
        return 200, {"revoked": True}

    if method == "GET" and path == "/devices":
        devices = service.list_devices(fingerprint)
        return 200, {
            "devices": [
                {
                    "fingerprint": d.fingerprint,
                    "enrolled_at": d.enrolled_at,
                    "revoked": d.revoked,
                }
                for d in devices
            ]
        }

    if method == "GET" and path == "/ca":
        return 200, {"ca_certificate": service.ca.certificate_pem}

    return 404, {"error": {"code": "not_found", "message": f"no endpoint {method} {path}"}}
