"""Deterministic password generation from (seed, salt, policy).

Each draft consumes a fixed-width chunk of the keystream: 100 bits more than
the size of the password space, so the modulo reduction biases any single
character by at most 2^-100. Drafts violating the policy's occurrence
constraints are rejected and the next chunk is used; taking characters
uniformly and rejecting whole drafts keeps the accepted passwords uniform
over the compliant set, which per-character fix-ups would not.
"""

from __future__ import annotations

import os

from . import crypto
from .crypto import Rng
from .errors import UnsatisfiablePolicyError
from .policy import PasswordPolicy, validate_password

DRAFT_CAP = 10_000
BIAS_MARGIN_BITS = 100


def required_bits(alphabet_size: int, length: int) -> int:
    """Bits consumed per draft: 100 plus the exact ceiling of log2(phi^ell).

    Computed with integer arithmetic only; a floating-point ceiling would be
    wrong for large phi^ell.
    """
    if alphabet_size < 1:
        raise ValueError("alphabet_size must be >= 1")
    if length < 1:
        raise ValueError("length must be >= 1")
    return BIAS_MARGIN_BITS + (alphabet_size**length - 1).bit_length()


def _render(value: int, alphabet_size: int, length: int, alphabet: str) -> str:
    """Write ``value`` as exactly ``length`` base-phi digits, most significant
    first, mapping digit i to alphabet[i]."""
    digits = [0] * length
    for position in range(length - 1, -1, -1):
        value, digit = divmod(value, alphabet_size)
        digits[position] = digit
    return "".join(alphabet[d] for d in digits)


def draft_password(chunk: bytes, alphabet_size: int, length: int, alphabet: str) -> str:
    """Map one keystream chunk to a candidate password.

    ``chunk`` carries exactly required_bits(alphabet_size, length) bits,
    big-endian, zero-padded at the end to a whole byte. The chunk's integer
    value is reduced modulo phi^ell and rendered as base-phi digits.
    """
    if len(alphabet) != alphabet_size:
        raise ValueError("alphabet length disagrees with alphabet_size")
    bits = required_bits(alphabet_size, length)
    if len(chunk) != (bits + 7) // 8:
        raise ValueError(f"chunk must hold exactly {bits} bits")
    value = int.from_bytes(chunk, "big") >> (len(chunk) * 8 - bits)
    return _render(value % alphabet_size**length, alphabet_size, length, alphabet)


def generate_password(seed: bytes, salt: bytes, policy: PasswordPolicy) -> str:
    """Deterministically derive the policy-compliant password for one account."""
    password, _ = generate_with_draft_count(seed, salt, policy)
    return password


def generate_with_draft_count(
    seed: bytes, salt: bytes, policy: PasswordPolicy
) -> tuple[str, int]:
    """As generate_password, also reporting how many drafts were consumed."""
    alphabet = policy.alphabet
    phi = len(alphabet)
    length = policy.max_length
    bits = required_bits(phi, length)
    space = phi**length
    mask = (1 << bits) - 1

    stream_int = 0
    stream_bits = 0
    for draft in range(DRAFT_CAP):
        needed = (draft + 1) * bits
        while stream_bits < needed:
            block = crypto.prg_block(seed, salt, stream_bits // (crypto.PRG_BLOCK_BYTES * 8))
            stream_int = (stream_int << (crypto.PRG_BLOCK_BYTES * 8)) | int.from_bytes(block, "big")
            stream_bits += crypto.PRG_BLOCK_BYTES * 8
        value = (stream_int >> (stream_bits - needed)) & mask
        candidate = _render(value % space, phi, length, alphabet)
        if validate_password(candidate, policy):
            return candidate, draft + 1
    raise UnsatisfiablePolicyError(
        f"no compliant password within {DRAFT_CAP} drafts; policy is unsatisfiable in practice"
    )


def generate_salt(rng: Rng = os.urandom) -> bytes:
    """Fresh 32-byte salt, independent of seed and password state."""
    salt = rng(crypto.SALT_BYTES)
    if len(salt) != crypto.SALT_BYTES:
        raise ValueError(f"salt must be {crypto.SALT_BYTES} bytes")
    return salt
