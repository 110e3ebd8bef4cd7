from .certs import CertificateAuthority, build_csr, certificate_fingerprint, generate_device_key
from .server import SaltRecord, SaltSyncService
from .store import AppendLog
from .transport import HttpSssTransport, InProcessSssTransport, TransportCapture

__all__ = [
    "AppendLog",
    "CertificateAuthority",
    "HttpSssTransport",
    "InProcessSssTransport",
    "SaltRecord",
    "SaltSyncService",
    "TransportCapture",
    "build_csr",
    "certificate_fingerprint",
    "generate_device_key",
]
