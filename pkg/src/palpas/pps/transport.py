"""Client-side transports for the policy service."""

from __future__ import annotations

import http.client
import json
import socket
import ssl
from urllib.parse import quote, urlparse

from ..errors import TransportError
from ..jsonwire import raise_for_error
from .service import PolicyService
from .wire import handle_request

try:  # reuse the capture type so one tap can observe both services
    from ..sss.transport import TransportCapture
except ImportError:  # pragma: no cover
    TransportCapture = None  # type: ignore[assignment]


class _PpsCalls:
    """Operation surface shared by both transports; _call does the I/O."""

    client_id: str

    def _call(
        self, method: str, target: str, body: bytes, headers: dict[str, str]
    ) -> tuple[int, dict[str, str], bytes]:
        raise NotImplementedError

    def fetch_policy(self, url: str, min_version: int | None = None) -> tuple[bytes, int] | None:
        """(policy XML, version) of the newest published policy, or None."""
        target = f"/policies?url={quote(url, safe='')}"
        if min_version is not None:
            target += f"&min_version={min_version}"
        status, headers, body = self._call("GET", target, b"", {})
        if status == 404:
            return None
        self._raise_for_status(status, body)
        return body, int(headers["x-policy-version"])

    def submit_policy(self, url: str, document: bytes) -> str:
        target = f"/policies?url={quote(url, safe='')}"
        status, _, body = self._call(
            "POST", target, document, {"X-Client-Id": self.client_id}
        )
        self._raise_for_status(status, body)
        return json.loads(body.decode("utf-8"))["status"]

    def rate_policy(self, url: str, version: int, rating: int) -> None:
        target = f"/policies/{quote(url, safe='')}/{version}/ratings"
        payload = json.dumps({"rating": rating, "submitter": self.client_id}).encode()
        status, _, body = self._call("POST", target, payload, {"Content-Type": "application/json"})
        self._raise_for_status(status, body)

    def fetch_rating(self, url: str) -> tuple[int, int]:
        """(rating_sum, rating_count) of the latest published policy."""
        target = f"/policies?url={quote(url, safe='')}"
        status, headers, body = self._call("GET", target, b"", {})
        self._raise_for_status(status, body)
        return int(headers["x-rating-sum"]), int(headers["x-rating-count"])

    @staticmethod
    def _raise_for_status(status: int, body: bytes) -> None:
        if status >= 400:
            try:
                payload = json.loads(body.decode("utf-8"))
            except ValueError:
                payload = {}
            raise_for_error(status, payload)


class InProcessPpsTransport(_PpsCalls):
    def __init__(self, service: PolicyService, client_id: str = "anonymous", capture=None):
        self._service = service
        self.client_id = client_id
        self._capture = capture

    def _call(self, method, target, body, headers):
        if self._capture is not None:
            self._capture.record("pps", method, target, headers, body)
        status, content_type, response_headers, response = handle_request(
            self._service, method, target, headers, body
        )
        lowered = {k.lower(): v for k, v in response_headers.items()}
        lowered["content-type"] = content_type
        return status, lowered, response


class HttpPpsTransport(_PpsCalls):
    def __init__(self, base_url: str, client_id: str = "anonymous", timeout: float = 10.0):
        parsed = urlparse(base_url)
        if parsed.scheme not in ("http", "https"):
            raise ValueError("policy service address must be http:// or https://")
        self._parsed = parsed
        self.client_id = client_id
        self._timeout = timeout

    def _call(self, method, target, body, headers):
        try:
            if self._parsed.scheme == "https":
                connection = http.client.HTTPSConnection(
                    self._parsed.hostname,
                    self._parsed.port or 443,
                    timeout=self._timeout,
                    context=ssl.create_default_context(),
                )
            else:
                connection = http.client.HTTPConnection(
                    self._parsed.hostname, self._parsed.port or 80, timeout=self._timeout
                )
            try:
                connection.request(method, target, body=body, headers=headers)
                response = connection.getresponse()
                raw = response.read()
                return (
                    response.status,
                    {k.lower(): v for k, v in response.getheaders()},
                    raw,
                )
            finally:
                connection.close()
        except (OSError, socket.timeout, http.client.HTTPException) as exc:
            raise TransportError(f"policy service unreachable: {exc}") from exc
