"""Client-side transports for the sync service.

Two implementations of the same surface: an in-process transport that
serializes each call to the real wire format and feeds it straight into the
service's dispatcher (used by tests, which also tap the serialized traffic),
and an HTTPS transport with mutual-certificate authentication.
"""

from __future__ import annotations

import http.client
import json
import socket
import ssl
import tempfile
from dataclasses import dataclass, field

from ..crypto import ProtectedUsername
from ..errors import TransportError
from ..jsonwire import raise_for_error
from .certs import certificate_fingerprint
from .server import SaltRecord, SaltSyncService
from .wire import handle_request


@dataclass(frozen=True)
class CapturedRequest:
    service: str
    method: str
    path: str
    headers: dict[str, str]
    body: bytes


@dataclass
class TransportCapture:
    """Tap recording every request a client sends, for traffic assertions."""

    requests: list[CapturedRequest] = field(default_factory=list)

    def record(self, service: str, method: str, path: str, headers: dict[str, str], body: bytes) -> None:
        self.requests.append(CapturedRequest(service, method, path, dict(headers), body))

    def all_bytes(self) -> bytes:
        chunks = []
        for req in self.requests:
            header_text = "".join(f"{k}:{v}\n" for k, v in sorted(req.headers.items()))
            chunks.append(
                f"{req.method} {req.path}\n{header_text}".encode("utf-8") + req.body
            )
        return b"\n".join(chunks)


def _record_from_json(blob: dict) -> SaltRecord:
    username = blob["username"]
    return SaltRecord(
        handle=blob["handle"],
        salt=bytes.fromhex(blob["salt"]),
        username=ProtectedUsername(
            iv=bytes.fromhex(username["iv"]),
            ciphertext=bytes.fromhex(username["ciphertext"]),
            mac=bytes.fromhex(username["mac"]),
        ),
    )


class _SssCalls:
    """Operation surface shared by both transports; _call does the I/O."""

    def _call(self, method: str, path: str, payload: dict | None = None) -> dict:
        raise NotImplementedError

    def create_account(self, csr_pem: str) -> tuple[str, str, str]:
        response = self._call("POST", "/accounts", {"csr": csr_pem})
        return response["account_id"], response["certificate"], response["ca_certificate"]

    def register_device(self, csr_pem: str, token_hex: str) -> tuple[str, str]:
        response = self._call("POST", "/devices", {"csr": csr_pem, "token": token_hex})
        return response["certificate"], response["ca_certificate"]

    def issue_token(self) -> str:
        return self._call("POST", "/tokens", {})["token"]

    def put_record(
        self,
        identifier: bytes,
        salt: bytes,
        username: ProtectedUsername,
        replace_handle: str | None = None,
    ) -> str:
        payload = {
            "salt": salt.hex(),
            "username": {
                "iv": username.iv.hex(),
                "ciphertext": username.ciphertext.hex(),
                "mac": username.mac.hex(),
            },
        }
        if replace_handle is not None:
            payload["replace"] = True
            payload["handle"] = replace_handle
        return self._call("PUT", f"/records/{identifier.hex()}", payload)["handle"]

    def get_records(self, identifier: bytes) -> list[SaltRecord]:
        response = self._call("GET", f"/records/{identifier.hex()}")
        return [_record_from_json(r) for r in response["records"]]

    def delete_record(self, identifier: bytes, handle: str) -> None:
        self._call("DELETE", f"/records/{identifier.hex()}", {"handle": handle})

    def revoke_device(self, fingerprint: str, confirm_last: bool = False) -> None:
        self._call(
            "POST", "/revocations", {"fingerprint": fingerprint, "confirm_last": confirm_last}
        )

    def list_devices(self) -> list[dict]:
        return self._call("GET", "/devices")["devices"]

    def fetch_ca(self) -> str:
        return self._call("GET", "/ca")["ca_certificate"]


class InProcessSssTransport(_SssCalls):
    def __init__(
        self,
        service: SaltSyncService,
        certificate_pem: str | None = None,
        key_pem: str | None = None,
        capture: TransportCapture | None = None,
    ):
        self._service = service
        self._certificate_pem = certificate_pem
        self._key_pem = key_pem
        self._capture = capture
        self._fingerprint = (
            certificate_fingerprint(certificate_pem) if certificate_pem else None
        )

    def bound(self, certificate_pem: str, key_pem: str) -> "InProcessSssTransport":
        return InProcessSssTransport(
            self._service, certificate_pem, key_pem, capture=self._capture
        )

    def _call(self, method: str, path: str, payload: dict | None = None) -> dict:
        body = b"" if payload is None else json.dumps(payload, sort_keys=True).encode("utf-8")
        if self._capture is not None:
            self._capture.record(
                "sss", method, path, {"content-type": "application/json"}, body
            )
        status, response = handle_request(self._service, method, path, body, self._fingerprint)
        raise_for_error(status, response)
        return response


class HttpSssTransport(_SssCalls):
    """HTTPS with mutual-certificate authentication.

    The CA certificate pins the server; the device certificate and key (when
    bound) authenticate the client during the TLS handshake.
    """

    def __init__(
        self,
        base_url: str,
        ca_pem: str | None = None,
        certificate_pem: str | None = None,
        key_pem: str | None = None,
        timeout: float = 10.0,
    ):
        if not base_url.startswith("https://"):
            raise ValueError("sync service address must be https://")
        self._base_url = base_url.rstrip("/")
        self._ca_pem = ca_pem
        self._certificate_pem = certificate_pem
        self._key_pem = key_pem
        self._timeout = timeout

    def bound(self, certificate_pem: str, key_pem: str) -> "HttpSssTransport":
        return HttpSssTransport(
            self._base_url,
            ca_pem=self._ca_pem,
            certificate_pem=certificate_pem,
            key_pem=key_pem,
            timeout=self._timeout,
        )

    def with_ca(self, ca_pem: str) -> "HttpSssTransport":
        return HttpSssTransport(
            self._base_url,
            ca_pem=ca_pem,
            certificate_pem=self._certificate_pem,
            key_pem=self._key_pem,
            timeout=self._timeout,
        )

    def _context(self) -> ssl.SSLContext:
        context = ssl.create_default_context()
        if self._ca_pem:
            context.load_verify_locations(cadata=self._ca_pem)
        else:
            # Bootstrap before the CA is known (first /accounts or /ca call);
            # afterwards the pinned CA from the vault is always used.
            context.check_hostname = False
            context.verify_mode = ssl.CERT_NONE
        if self._certificate_pem and self._key_pem:
            with tempfile.NamedTemporaryFile("w", suffix=".pem") as cert_file, \
                    tempfile.NamedTemporaryFile("w", suffix=".pem") as key_file:
                cert_file.write(self._certificate_pem)
                cert_file.flush()
                key_file.write(self._key_pem)
                key_file.flush()
                context.load_cert_chain(cert_file.name, key_file.name)
        return context

    def _call(self, method: str, path: str, payload: dict | None = None) -> dict:
        from urllib.parse import urlparse

        parsed = urlparse(self._base_url)
        body = b"" if payload is None else json.dumps(payload, sort_keys=True).encode("utf-8")
        try:
            connection = http.client.HTTPSConnection(
                parsed.hostname,
                parsed.port or 443,
                timeout=self._timeout,
                context=self._context(),
            )
            try:
                connection.request(
                    method,
                    path,
                    body=body,
                    headers={"Content-Type": "application/json"},
                )
                response = connection.getresponse()
                raw = response.read()
                status = response.status
            finally:
                connection.close()
        except (OSError, socket.timeout, ssl.SSLError, http.client.HTTPException) as exc:
            raise TransportError(f"sync service unreachable: {exc}") from exc
        decoded = json.loads(raw.decode("utf-8")) if raw else {}
        raise_for_error(status, decoded)
        return decoded
