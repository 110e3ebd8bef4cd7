#!/usr/bin/env python3
"""Regenerate the frozen test vectors in tests/vectors/.

Every value is produced by an implementation independent of the palpas
package: the openssl command-line tool computes all AES/HMAC/SHA-256/PBKDF2
outputs, and the end-to-end password is derived by the straight-line code
below (naive loop arithmetic, no shared helpers). This script never imports
palpas.

Run from the repository root:

    python tools/gen_vectors.py
"""

from __future__ import annotations

import json
import subprocess
from pathlib import Path

VECTOR_DIR = Path(__file__).resolve().parent.parent / "tests" / "vectors"

ZERO32 = "00" * 32
ZERO16 = "00" * 16


def openssl(args: list[str], stdin: bytes = b"") -> bytes:
    return subprocess.run(
        ["openssl", *args], input=stdin, capture_output=True, check=True
    ).stdout


def aes256cbc(key_hex: str, iv_hex: str, plaintext: bytes, pad: bool) -> bytes:
    args = ["enc", "-aes-256-cbc", "-K", key_hex, "-iv", iv_hex]
    if not pad:
        args.append("-nopad")
    return openssl(args, plaintext)


def hmac_sha256(key_hex: str, message: bytes) -> str:
    out = openssl(
        ["dgst", "-sha256", "-mac", "hmac", "-macopt", f"hexkey:{key_hex}"],
        message,
    )
    return out.decode().rsplit(" ", 1)[1].strip()


def sha256(message: bytes) -> str:
    out = openssl(["dgst", "-sha256"], message)
    return out.decode().rsplit(" ", 1)[1].strip()


def pbkdf2(password: str, salt_hex: str, iterations: int) -> str:
    out = openssl(
        [
            "kdf", "-keylen", "32",
            "-kdfopt", "digest:SHA256",
            "-kdfopt", f"pass:{password}",
            "-kdfopt", f"hexsalt:{salt_hex}",
            "-kdfopt", f"iter:{iterations}",
            "PBKDF2",
        ]
    )
    return out.decode().strip().replace(":", "").lower()


def write_jsonl(name: str, rows: list[dict]) -> None:
    path = VECTOR_DIR / name
    with path.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    print(f"wrote {path} ({len(rows)} vectors)")


def prg_block(seed_hex: str, salt_hex: str, index: int) -> str:
    counter = (int(salt_hex, 16) + index) % (1 << 256)
    plaintext = counter.to_bytes(32, "big")
    return aes256cbc(seed_hex, ZERO16, plaintext, pad=False).hex()


def kdf_vectors() -> list[dict]:
    # First three match the published PBKDF2-HMAC-SHA256 known-answer values
    # (password "password", salt "salt"); openssl recomputes them here.
    cases = [
        ("password", b"salt", 1),
        ("password", b"salt", 2),
        ("password", b"salt", 4096),
        ("password", b"pepper", 1),
        ("correct horse battery staple", bytes(range(16)), 1000),
    ]
    rows = []
    for password, salt, iterations in cases:
        rows.append(
            {
                "password": password,
                "salt_hex": salt.hex(),
                "iterations": iterations,
                "expected_hex": pbkdf2(password, salt.hex(), iterations),
            }
        )
    return rows


def identifier_vectors() -> list[dict]:
    cases = [
        (ZERO32, "http://example.org"),
        ("a1" * 32, "http://a.example"),
        ("a1" * 32, "http://b.example"),
    ]
    rows = []
    for key_hex, url in cases:
        digest = sha256(bytes.fromhex(key_hex) + url.encode("utf-8"))
        rows.append({"key_hex": key_hex, "url": url, "expected_hex": digest})
    return rows


def prg_vectors() -> list[dict]:
    cases = [
        (ZERO32, ZERO32, 0),
        (ZERO32, ZERO32, 1),
        (ZERO32, "00" * 31 + "01", 0),  # equals block 1 of the salt-0 stream
        ("11" * 32, "ff" * 32, 0),      # counter wraps to zero at index 1
        ("11" * 32, "ff" * 32, 1),
    ]
    rows = []
    for seed_hex, salt_hex, index in cases:
        rows.append(
            {
                "seed_hex": seed_hex,
                "salt_hex": salt_hex,
                "block_index": index,
                "expected_hex": prg_block(seed_hex, salt_hex, index),
            }
        )
    return rows


def subkey_vectors() -> list[dict]:
    rows = []
    for key_hex in (ZERO32, "2b" * 32):
        for label in ("palpas/enc", "palpas/mac"):
            rows.append(
                {
                    "key_hex": key_hex,
                    "label": label,
                    "expected_hex": hmac_sha256(key_hex, label.encode()),
                }
            )
    return rows


def username_ae_vectors() -> list[dict]:
    rows = []
    cases = [
        (ZERO32, "000102030405060708090a0b0c0d0e0f", "alice"),
        ("7f" * 32, "f0" * 16, "bob@example.org"),
    ]
    for key_hex, iv_hex, username in cases:
        enc_key = hmac_sha256(key_hex, b"palpas/enc")
        mac_key = hmac_sha256(key_hex, b"palpas/mac")
        ciphertext = aes256cbc(enc_key, iv_hex, username.encode("utf-8"), pad=True)
        mac = hmac_sha256(mac_key, bytes.fromhex(iv_hex) + ciphertext)
        rows.append(
            {
                "key_hex": key_hex,
                "iv_hex": iv_hex,
                "username": username,
                "expected_ciphertext_hex": ciphertext.hex(),
                "expected_mac_hex": mac,
            }
        )
    return rows


LISTING_POLICY = {
    "min_length": 6,
    "max_length": 12,
    "sets": [
        {"name": "LowercaseLetters", "characters": "abcdefghijklmnopqrstuvwxyz", "min_occurrence": 0},
        {"name": "UppercaseLetters", "characters": "ABCDEFGHIJKLMNOPQRSTUVWXYZ", "min_occurrence": 0},
        {"name": "Digits", "characters": "0123456789", "min_occurrence": 1},
    ],
}


def derive_password_straight_line(seed_hex: str, salt_hex: str, policy: dict) -> str:
    """Straight-line reference: keystream -> modulo -> digits -> rejection."""
    alphabet = "".join(s["characters"] for s in policy["sets"])
    phi = len(alphabet)
    ell = policy["max_length"]

    space = phi**ell
    bits = 0
    while 2**bits < space:
        bits += 1
    bits += 100

    stream = b""
    for draft in range(10_000):
        needed_bytes = ((draft + 1) * bits + 7) // 8
        while len(stream) < needed_bytes:
            stream += bytes.fromhex(
                prg_block(seed_hex, salt_hex, len(stream) // 32)
            )
        total_bits = len(stream) * 8
        as_int = int.from_bytes(stream, "big")
        chunk = (as_int >> (total_bits - (draft + 1) * bits)) % (2**bits)
        value = chunk % space

        digits = []
        for _ in range(ell):
            digits.append(value % phi)
            value //= phi
        digits.reverse()
        candidate = "".join(alphabet[d] for d in digits)

        ok = policy["min_length"] <= len(candidate) <= policy["max_length"]
        for charset in policy["sets"]:
            count = sum(1 for c in candidate if c in charset["characters"])
            if count < charset["min_occurrence"]:
                ok = False
        if ok:
            return candidate
    raise RuntimeError("no compliant draft within 10000 attempts")


def end_to_end_vectors() -> list[dict]:
    rows = []
    for seed_hex, salt_hex in [
        (ZERO32, ZERO32),
        ("5a" * 32, "c3" * 32),
    ]:
        password = derive_password_straight_line(seed_hex, salt_hex, LISTING_POLICY)
        rows.append(
            {
                "seed_hex": seed_hex,
                "salt_hex": salt_hex,
                "policy": LISTING_POLICY,
                "expected_password": password,
            }
        )
    return rows


def main() -> None:
    VECTOR_DIR.mkdir(parents=True, exist_ok=True)
    write_jsonl("kdf.jsonl", kdf_vectors())
    write_jsonl("identifier.jsonl", identifier_vectors())
    write_jsonl("prg.jsonl", prg_vectors())
    write_jsonl("subkeys.jsonl", subkey_vectors())
    write_jsonl("username_ae.jsonl", username_ae_vectors())
    write_jsonl("end_to_end.jsonl", end_to_end_vectors())


if __name__ == "__main__":
    main()
