"""Core cryptographic primitives: seed and salt generation, master-key
derivation, service identifiers, the deterministic keystream generator, and
authenticated username encryption.

Key material conventions:
  - seed, link key, salt: 32 uniformly random bytes each
  - master key: PBKDF2-HMAC-SHA256 over the master password
  - keystream block i: AES-256-CBC(key=seed, iv=0) of the 32-byte big-endian
    counter (salt + i) mod 2^256
  - usernames: encrypt-then-MAC with subkeys separated from the link key
"""

from __future__ import annotations

import hashlib
import hmac
import os
from dataclasses import dataclass
from typing import Callable

from cryptography.hazmat.primitives import padding
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from .errors import AuthenticationError, CorruptionError

Rng = Callable[[int], bytes]

SEED_BYTES = 32
LINK_KEY_BYTES = 32
SALT_BYTES = 32
IDENTIFIER_BYTES = 32
KDF_SALT_BYTES = 16
DEFAULT_KDF_ITERATIONS = 600_000

AES_BLOCK = 16
PRG_BLOCK_BYTES = 32
_ZERO_IV = bytes(AES_BLOCK)
_COUNTER_MOD = 1 << 256

SUBKEY_ENC_LABEL = b"palpas/enc"
SUBKEY_MAC_LABEL = b"palpas/mac"


@dataclass(frozen=True)
class MasterKey:
    """Key derived from the master password; protects local data only."""

    key: bytes
    kdf_salt: bytes
    iterations: int


@dataclass(frozen=True)
class ProtectedUsername:
    """Encrypt-then-MAC envelope for one username."""

    iv: bytes
    ciphertext: bytes
    mac: bytes

    def __post_init__(self) -> None:
        if len(self.iv) != AES_BLOCK:
            raise ValueError("iv must be 16 bytes")
        if not self.ciphertext or len(self.ciphertext) % AES_BLOCK != 0:
            raise ValueError("ciphertext must be a non-empty multiple of 16 bytes")
        if len(self.mac) != 32:
            raise ValueError("mac must be 32 bytes")


def _require_len(name: str, value: bytes, expected: int) -> None:
    if len(value) != expected:
        raise ValueError(f"{name} must be {expected} bytes, got {len(value)}")


def generate_seed(rng: Rng = os.urandom) -> bytes:
    """Return 32 fresh bytes from the injected randomness source."""
    seed = rng(SEED_BYTES)
    _require_len("seed", seed, SEED_BYTES)
    return seed


def generate_link_key(rng: Rng = os.urandom) -> bytes:
    """Return a fresh 32-byte key for identifiers and username protection."""
    key = rng(LINK_KEY_BYTES)
    _require_len("link key", key, LINK_KEY_BYTES)
    return key


def derive_master_key(
    mpw: str, kdf_salt: bytes, iterations: int = DEFAULT_KDF_ITERATIONS
) -> MasterKey:
    """Derive the 32-byte master key via PBKDF2-HMAC-SHA256."""
    if not mpw:
        raise ValueError("master password must not be empty")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    key = hashlib.pbkdf2_hmac("sha256", mpw.encode("utf-8"), kdf_salt, iterations, 32)
    return MasterKey(key=key, kdf_salt=kdf_salt, iterations=iterations)


def compute_identifier(link_key: bytes, url: str) -> bytes:
    """Service identifier: SHA-256 over the link key followed by the URL.

    The URL is the service's scheme+domain form (e.g. "http://example.org");
    prepending the secret key makes preimage search for the URL intractable.
    """
    _require_len("link key", link_key, LINK_KEY_BYTES)
    if not url:
        raise ValueError("url must not be empty")
    return hashlib.sha256(link_key + url.encode("utf-8")).digest()


def prg_block(seed: bytes, salt: bytes, index: int) -> bytes:
    """Keystream block ``index``: AES-256-CBC of the incremented salt counter."""
    _require_len("seed", seed, SEED_BYTES)
    _require_len("salt", salt, SALT_BYTES)
    if index < 0:
        raise ValueError("block index must be >= 0")
    counter = (int.from_bytes(salt, "big") + index) % _COUNTER_MOD
    encryptor = Cipher(algorithms.AES(seed), modes.CBC(_ZERO_IV)).encryptor()
    return encryptor.update(counter.to_bytes(PRG_BLOCK_BYTES, "big")) + encryptor.finalize()


def prg_generate(seed: bytes, salt: bytes, n_bits: int) -> bytes:
    """First ``n_bits`` bits of the keystream, zero-padded to a whole byte.

    Pure function of (seed, salt, n_bits); shorter outputs are prefixes of
    longer ones.
    """
    if n_bits < 1:
        raise ValueError("n_bits must be >= 1")
    n_bytes = (n_bits + 7) // 8
    blocks = []
    for index in range((n_bytes + PRG_BLOCK_BYTES - 1) // PRG_BLOCK_BYTES):
        blocks.append(prg_block(seed, salt, index))
    stream = b"".join(blocks)[:n_bytes]
    spare = n_bytes * 8 - n_bits
    if spare:
        stream = stream[:-1] + bytes([stream[-1] & (0xFF << spare) & 0xFF])
    return stream


def derive_subkeys(key: bytes) -> tuple[bytes, bytes]:
    """Split one 32-byte secret into (encryption key, MAC key) via labeled HMAC."""
    _require_len("key", key, 32)
    enc_key = hmac.new(key, SUBKEY_ENC_LABEL, hashlib.sha256).digest()
    mac_key = hmac.new(key, SUBKEY_MAC_LABEL, hashlib.sha256).digest()
    return enc_key, mac_key


def cbc_encrypt(key: bytes, iv: bytes, plaintext: bytes) -> bytes:
    padder = padding.PKCS7(AES_BLOCK * 8).padder()
    padded = padder.update(plaintext) + padder.finalize()
    encryptor = Cipher(algorithms.AES(key), modes.CBC(iv)).encryptor()
    return encryptor.update(padded) + encryptor.finalize()


def cbc_decrypt(key: bytes, iv: bytes, ciphertext: bytes) -> bytes:
    decryptor = Cipher(algorithms.AES(key), modes.CBC(iv)).decryptor()
    padded = decryptor.update(ciphertext) + decryptor.finalize()
    unpadder = padding.PKCS7(AES_BLOCK * 8).unpadder()
    return unpadder.update(padded) + unpadder.finalize()


def encrypt_username(
    link_key: bytes, username: str, rng: Rng = os.urandom
) -> ProtectedUsername:
    """Encrypt a username under the link key with a fresh IV, then MAC it."""
    _require_len("link key", link_key, LINK_KEY_BYTES)
    if not username:
        raise ValueError("username must not be empty")
    enc_key, mac_key = derive_subkeys(link_key)
    iv = rng(AES_BLOCK)
    _require_len("iv", iv, AES_BLOCK)
    ciphertext = cbc_encrypt(enc_key, iv, username.encode("utf-8"))
    mac = hmac.new(mac_key, iv + ciphertext, hashlib.sha256).digest()
    return ProtectedUsername(iv=iv, ciphertext=ciphertext, mac=mac)


def decrypt_username(link_key: bytes, blob: ProtectedUsername) -> str:
    """Verify the MAC over iv plus ciphertext, then decrypt.

    The tag comparison is constant-time and happens before any decryption;
    a padding failure after a valid tag is reported as corruption, never as
    an authentication problem.
    """
    _require_len("link key", link_key, LINK_KEY_BYTES)
    enc_key, mac_key = derive_subkeys(link_key)
    expected = hmac.new(mac_key, blob.iv + blob.ciphertext, hashlib.sha256).digest()
    if not hmac.compare_digest(expected, blob.mac):
        raise AuthenticationError("username record failed authentication")
    try:
        plaintext = cbc_decrypt(enc_key, blob.iv, blob.ciphertext)
        return plaintext.decode("utf-8")
    except Exception as exc:
        raise CorruptionError("authenticated username record is malformed") from exc
