"""Device credentials and the sync service's built-in certificate authority.

Devices authenticate with per-device EC P-256 key pairs. Enrollment sends a
CSR that carries only the public key: the server refuses any CSR with
subject attributes, and names issued certificates after a digest of the key
itself, so no personal data ever reaches the certificate layer.
"""

from __future__ import annotations

import datetime
import hashlib
from pathlib import Path

from cryptography import x509
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import ec
from cryptography.x509.oid import ExtendedKeyUsageOID

from ..errors import ProtocolError

CA_VALIDITY_DAYS = 3650
CERT_VALIDITY_DAYS = 1825


def generate_device_key() -> str:
    """Fresh EC P-256 private key, PEM-encoded (PKCS#8, unencrypted)."""
    key = ec.generate_private_key(ec.SECP256R1())
    return key.private_bytes(
        serialization.Encoding.PEM,
        serialization.PrivateFormat.PKCS8,
        serialization.NoEncryption(),
    ).decode("ascii")


def build_csr(private_key_pem: str) -> str:
    """CSR with an empty subject: the public key and nothing else."""
    key = serialization.load_pem_private_key(private_key_pem.encode("ascii"), password=None)
    csr = (
        x509.CertificateSigningRequestBuilder()
        .subject_name(x509.Name([]))
        .sign(key, hashes.SHA256())
    )
    return csr.public_bytes(serialization.Encoding.PEM).decode("ascii")


def certificate_fingerprint(certificate_pem: str) -> str:
    """Lowercase hex SHA-256 over the certificate's DER encoding."""
    cert = x509.load_pem_x509_certificate(certificate_pem.encode("ascii"))
    return cert.fingerprint(hashes.SHA256()).hex()


def public_key_fingerprint(public_key) -> str:
    spki = public_key.public_bytes(
        serialization.Encoding.DER, serialization.PublicFormat.SubjectPublicKeyInfo
    )
    return hashlib.sha256(spki).hexdigest()


def _now() -> datetime.datetime:
    return datetime.datetime.now(datetime.timezone.utc)


class CertificateAuthority:
    """Issues device and server certificates for one sync service deployment."""

    def __init__(self, key, certificate):
        self._key = key
        self._certificate = certificate

    @classmethod
    def generate(cls) -> "CertificateAuthority":
        key = ec.generate_private_key(ec.SECP256R1())
        name = x509.Name([x509.NameAttribute(x509.NameOID.COMMON_NAME, "palpas-sss-ca")])
        now = _now()
        certificate = (
            x509.CertificateBuilder()
            .subject_name(name)
            .issuer_name(name)
            .public_key(key.public_key())
            .serial_number(x509.random_serial_number())
            .not_valid_before(now - datetime.timedelta(minutes=5))
            .not_valid_after(now + datetime.timedelta(days=CA_VALIDITY_DAYS))
            .add_extension(x509.BasicConstraints(ca=True, path_length=0), critical=True)
            .add_extension(
                x509.KeyUsage(
                    digital_signature=False,
                    content_commitment=False,
                    key_encipherment=False,
                    data_encipherment=False,
                    key_agreement=False,
                    key_cert_sign=True,
                    crl_sign=True,
                    encipher_only=False,
                    decipher_only=False,
                ),
                critical=True,
            )
            .sign(key, hashes.SHA256())
        )
        return cls(key, certificate)

    @property
    def certificate_pem(self) -> str:
        return self._certificate.public_bytes(serialization.Encoding.PEM).decode("ascii")

    def issue_device_certificate(self, csr_pem: str) -> str:
        """Validate an enrollment CSR and issue a client certificate.

        Rejected outright: unparseable CSRs, invalid proof-of-possession
        signatures, and CSRs whose subject carries any attribute at all.
        """
        try:
            csr = x509.load_pem_x509_csr(csr_pem.encode("ascii"))
        except (ValueError, UnicodeEncodeError) as exc:
            raise ProtocolError("malformed certificate signing request") from exc
        if not csr.is_signature_valid:
            raise ProtocolError("certificate signing request signature is invalid")
        if list(csr.subject):
            raise ProtocolError(
                "certificate signing request must not carry subject attributes"
            )
        key_id = public_key_fingerprint(csr.public_key())[:16]
        now = _now()
        certificate = (
            x509.CertificateBuilder()
            .subject_name(
                x509.Name([x509.NameAttribute(x509.NameOID.COMMON_NAME, f"device-{key_id}")])
            )
            .issuer_name(self._certificate.subject)
            .public_key(csr.public_key())
            .serial_number(x509.random_serial_number())
            .not_valid_before(now - datetime.timedelta(minutes=5))
            .not_valid_after(now + datetime.timedelta(days=CERT_VALIDITY_DAYS))
            .add_extension(x509.BasicConstraints(ca=False, path_length=None), critical=True)
            .add_extension(
                x509.ExtendedKeyUsage([ExtendedKeyUsageOID.CLIENT_AUTH]), critical=False
            )
            .sign(self._key, hashes.SHA256())
        )
        return certificate.public_bytes(serialization.Encoding.PEM).decode("ascii")

    def issue_server_certificate(self, hostname: str = "localhost") -> tuple[str, str]:
        """(key PEM, certificate PEM) for the TLS listener."""
        import ipaddress

        key = ec.generate_private_key(ec.SECP256R1())
        now = _now()
        certificate = (
            x509.CertificateBuilder()
            .subject_name(
                x509.Name([x509.NameAttribute(x509.NameOID.COMMON_NAME, "palpas-sss")])
            )
            .issuer_name(self._certificate.subject)
            .public_key(key.public_key())
            .serial_number(x509.random_serial_number())
            .not_valid_before(now - datetime.timedelta(minutes=5))
            .not_valid_after(now + datetime.timedelta(days=CERT_VALIDITY_DAYS))
            .add_extension(
                x509.SubjectAlternativeName(
                    [
                        x509.DNSName(hostname),
                        x509.IPAddress(ipaddress.ip_address("127.0.0.1")),
                    ]
                ),
                critical=False,
            )
            .add_extension(x509.BasicConstraints(ca=False, path_length=None), critical=True)
            .add_extension(
                x509.ExtendedKeyUsage([ExtendedKeyUsageOID.SERVER_AUTH]), critical=False
            )
            .sign(self._key, hashes.SHA256())
        )
        key_pem = key.private_bytes(
            serialization.Encoding.PEM,
            serialization.PrivateFormat.PKCS8,
            serialization.NoEncryption(),
        ).decode("ascii")
        return key_pem, certificate.public_bytes(serialization.Encoding.PEM).decode("ascii")

    def verify_issued(self, certificate_pem: str) -> bool:
        """True iff the certificate was signed by this authority's key."""
        cert = x509.load_pem_x509_certificate(certificate_pem.encode("ascii"))
        try:
            cert.verify_directly_issued_by(self._certificate)
            return True
        except Exception:
            return False

    def save(self, directory: str | Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        key_pem = self._key.private_bytes(
            serialization.Encoding.PEM,
            serialization.PrivateFormat.PKCS8,
            serialization.NoEncryption(),
        )
        (directory / "ca_key.pem").write_bytes(key_pem)
        (directory / "ca_cert.pem").write_bytes(
            self._certificate.public_bytes(serialization.Encoding.PEM)
        )

    @classmethod
    def load(cls, directory: str | Path) -> "CertificateAuthority":
        directory = Path(directory)
        key = serialization.load_pem_private_key(
            (directory / "ca_key.pem").read_bytes(), password=None
        )
        certificate = x509.load_pem_x509_certificate((directory / "ca_cert.pem").read_bytes())
        return cls(key, certificate)
