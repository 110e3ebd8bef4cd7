"""TLS listener for the sync service.

Client certificates are requested on every connection but enforced per
endpoint: account creation and device registration work without one, all
other operations require a certificate issued by this service's CA. The
handler passes the peer certificate's fingerprint to the shared dispatcher.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import ssl
import tempfile
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .certs import CertificateAuthority
from .server import SaltSyncService
from .store import AppendLog
from .wire import handle_request


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    service: SaltSyncService

    def _peer_fingerprint(self) -> str | None:
        der = self.connection.getpeercert(binary_form=True)
        if der is None:
            return None
        return hashlib.sha256(der).hexdigest()

    def _serve(self) -> None:
        length = int(self.headers.get("Content-Length") or 0)
        body = self.rfile.read(length) if length else b""
        status, payload = handle_request(
            self.service, self.command, self.path, body, self._peer_fingerprint()
        )
        raw = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(raw)))
        self.end_headers()
        self.wfile.write(raw)

    do_GET = do_POST = do_PUT = do_DELETE = _serve

    def log_message(self, format: str, *args) -> None:  # noqa: A002 - stdlib signature
        pass


def build_ssl_context(ca: CertificateAuthority, hostname: str = "localhost") -> ssl.SSLContext:
    key_pem, cert_pem = ca.issue_server_certificate(hostname)
    context = ssl.SSLContext(ssl.PROTOCOL_TLS_SERVER)
    with tempfile.NamedTemporaryFile("w", suffix=".pem") as cert_file, \
            tempfile.NamedTemporaryFile("w", suffix=".pem") as key_file:
        cert_file.write(cert_pem)
        cert_file.flush()
        key_file.write(key_pem)
        key_file.flush()
        context.load_cert_chain(cert_file.name, key_file.name)
    context.load_verify_locations(cadata=ca.certificate_pem)
    context.verify_mode = ssl.CERT_OPTIONAL
    return context


class SssHttpServer:
    """Owns the listening socket; `serve_forever` runs in a daemon thread."""

    def __init__(self, service: SaltSyncService, host: str = "127.0.0.1", port: int = 0):
        handler = type("BoundHandler", (_Handler,), {"service": service})
        self._httpd = ThreadingHTTPServer((host, port), handler)
        self._httpd.socket = build_ssl_context(service.ca).wrap_socket(
            self._httpd.socket, server_side=True
        )
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self._httpd.server_address[1]

    @property
    def base_url(self) -> str:
        return f"https://127.0.0.1:{self.port}"

    def start(self) -> None:
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="Run the palpas salt synchronization service")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8443)
    parser.add_argument(
        "--state-dir",
        default="./sss-state",
        help="directory holding the CA key pair and the record log",
    )
    args = parser.parse_args(argv)

    state = Path(args.state_dir)
    if (state / "ca_key.pem").exists():
        ca = CertificateAuthority.load(state)
    else:
        ca = CertificateAuthority.generate()
        ca.save(state)
    service = SaltSyncService(ca=ca, log=AppendLog(state / "records.log"))
    server = SssHttpServer(service, host=args.host, port=args.port)
    print(f"salt synchronization service listening on {server.base_url}")
    print(f"state in {state.resolve()}")
    server._httpd.serve_forever()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
