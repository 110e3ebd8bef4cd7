"""Encrypted on-device storage for the seed, link key, device credential,
and cached policies.

File layout (all integers big-endian, MAC covers every preceding byte):

    magic "PALPAS" | version u8 | kdf_salt 16B | iterations u32 | iv 16B
    | ciphertext_len u64 | ciphertext | mac 32B

The payload is canonical JSON (sorted keys), encrypted AES-256-CBC under an
encryption subkey of the master key, then HMAC-SHA256 under the MAC subkey.
Wrong master password and file tampering are indistinguishable: both fail
the MAC check.
"""

from __future__ import annotations

import hashlib
import hmac
import json
import os
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

from . import crypto
from .crypto import MasterKey, Rng
from .errors import AuthenticationError, CorruptionError

VAULT_MAGIC = b"PALPAS"
VAULT_FORMAT_VERSION = 1

_HEADER = struct.Struct(">6sB16sI16sQ")


@dataclass(frozen=True)
class CachedPolicy:
    """Policy document cached after first fetch, with its service version."""

    xml: bytes
    version: int


@dataclass(frozen=True)
class PendingUpdate:
    """Salt proposed for a password change, not yet committed to the server."""

    url: str
    salt: bytes


@dataclass(frozen=True)
class VaultPayload:
    seed: bytes
    link_key: bytes
    device_key_pem: str
    certificate_pem: str
    ca_certificate_pem: str = ""
    cached_policies: dict[str, CachedPolicy] = field(default_factory=dict)
    pending_updates: dict[str, PendingUpdate] = field(default_factory=dict)


@dataclass(frozen=True)
class VaultEnvelope:
    magic: bytes
    format_version: int
    kdf_salt: bytes
    iterations: int
    iv: bytes
    ciphertext: bytes
    mac: bytes


def _encode_payload(payload: VaultPayload) -> bytes:
    doc = {
        "seed": payload.seed.hex(),
        "link_key": payload.link_key.hex(),
        "device_key_pem": payload.device_key_pem,
        "certificate_pem": payload.certificate_pem,
        "ca_certificate_pem": payload.ca_certificate_pem,
        "cached_policies": {
            url: {"xml": entry.xml.decode("utf-8"), "version": entry.version}
            for url, entry in payload.cached_policies.items()
        },
        "pending_updates": {
            handle: {"url": entry.url, "salt": entry.salt.hex()}
            for handle, entry in payload.pending_updates.items()
        },
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _decode_payload(raw: bytes) -> VaultPayload:
    doc = json.loads(raw.decode("utf-8"))
    return VaultPayload(
        seed=bytes.fromhex(doc["seed"]),
        link_key=bytes.fromhex(doc["link_key"]),
        device_key_pem=doc["device_key_pem"],
        certificate_pem=doc["certificate_pem"],
        ca_certificate_pem=doc.get("ca_certificate_pem", ""),
        cached_policies={
            url: CachedPolicy(xml=entry["xml"].encode("utf-8"), version=entry["version"])
            for url, entry in doc.get("cached_policies", {}).items()
        },
        pending_updates={
            handle: PendingUpdate(url=entry["url"], salt=bytes.fromhex(entry["salt"]))
            for handle, entry in doc.get("pending_updates", {}).items()
        },
    )


def _header_bytes(envelope: VaultEnvelope) -> bytes:
    return _HEADER.pack(
        envelope.magic,
        envelope.format_version,
        envelope.kdf_salt,
        envelope.iterations,
        envelope.iv,
        len(envelope.ciphertext),
    )


def seal_payload(master: MasterKey, payload: VaultPayload, rng: Rng = os.urandom) -> VaultEnvelope:
    """Encrypt-then-MAC a payload under an already-derived master key."""
    enc_key, mac_key = crypto.derive_subkeys(master.key)
    iv = rng(crypto.AES_BLOCK)
    ciphertext = crypto.cbc_encrypt(enc_key, iv, _encode_payload(payload))
    envelope = VaultEnvelope(
        magic=VAULT_MAGIC,
        format_version=VAULT_FORMAT_VERSION,
        kdf_salt=master.kdf_salt,
        iterations=master.iterations,
        iv=iv,
        ciphertext=ciphertext,
        mac=b"",
    )
    mac = hmac.new(mac_key, _header_bytes(envelope) + ciphertext, hashlib.sha256).digest()
    return replace(envelope, mac=mac)


def unseal_payload(master: MasterKey, envelope: VaultEnvelope) -> VaultPayload:
    """Verify the envelope MAC, then decrypt; MAC failure reveals nothing
    about whether the password was wrong or the file was tampered with."""
    enc_key, mac_key = crypto.derive_subkeys(master.key)
    expected = hmac.new(
        mac_key, _header_bytes(envelope) + envelope.ciphertext, hashlib.sha256
    ).digest()
    if not hmac.compare_digest(expected, envelope.mac):
        raise AuthenticationError("vault authentication failed")
    try:
        return _decode_payload(crypto.cbc_decrypt(enc_key, envelope.iv, envelope.ciphertext))
    except Exception as exc:
        raise CorruptionError("vault payload is malformed") from exc


def create_vault(
    mpw: str,
    payload: VaultPayload,
    iterations: int = crypto.DEFAULT_KDF_ITERATIONS,
    rng: Rng = os.urandom,
) -> VaultEnvelope:
    """Seal a payload under a fresh KDF salt and IV."""
    master = crypto.derive_master_key(mpw, rng(crypto.KDF_SALT_BYTES), iterations)
    return seal_payload(master, payload, rng)


def open_vault(mpw: str, envelope: VaultEnvelope) -> VaultPayload:
    master = crypto.derive_master_key(mpw, envelope.kdf_salt, envelope.iterations)
    return unseal_payload(master, envelope)


def update_vault(
    mpw: str,
    envelope: VaultEnvelope,
    mutate: Callable[[VaultPayload], VaultPayload],
    new_mpw: str | None = None,
    rng: Rng = os.urandom,
) -> VaultEnvelope:
    """Open, apply a mutation, and reseal.

    Routine updates keep the KDF salt (so callers may cache the derived
    master key); changing the master password rotates it.
    """
    master = crypto.derive_master_key(mpw, envelope.kdf_salt, envelope.iterations)
    payload = mutate(unseal_payload(master, envelope))
    if new_mpw is not None:
        master = crypto.derive_master_key(new_mpw, rng(crypto.KDF_SALT_BYTES), envelope.iterations)
    return seal_payload(master, payload, rng)


def encode_envelope(envelope: VaultEnvelope) -> bytes:
    return _header_bytes(envelope) + envelope.ciphertext + envelope.mac


def decode_envelope(raw: bytes) -> VaultEnvelope:
    if len(raw) < _HEADER.size + 32:
        raise CorruptionError("vault file truncated")
    magic, version, kdf_salt, iterations, iv, ct_len = _HEADER.unpack_from(raw)
    if magic != VAULT_MAGIC:
        raise CorruptionError("not a vault file")
    body = raw[_HEADER.size:]
    if len(body) != ct_len + 32:
        raise CorruptionError("vault file length mismatch")
    return VaultEnvelope(
        magic=magic,
        format_version=version,
        kdf_salt=kdf_salt,
        iterations=iterations,
        iv=iv,
        ciphertext=body[:ct_len],
        mac=body[ct_len:],
    )


def save_vault(envelope: VaultEnvelope, path: str | Path) -> None:
    """Replace-on-write: temp file, fsync, atomic rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(encode_envelope(envelope))
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def load_vault(path: str | Path) -> VaultEnvelope:
    return decode_envelope(Path(path).read_bytes())
