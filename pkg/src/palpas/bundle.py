"""One-time transfer bundle moved manually to a new device.

Raw layout: version byte 0x01 | seed 32B | link key 32B | auth token 32B,
97 bytes total; the text form is standard Base64 (132 characters).
"""

from __future__ import annotations

import base64
import binascii
from dataclasses import dataclass

from .errors import BundleFormatError

BUNDLE_VERSION = 0x01
BUNDLE_RAW_LEN = 97
BUNDLE_TEXT_LEN = 132


@dataclass(frozen=True)
class TransferBundle:
    seed: bytes
    link_key: bytes
    token: bytes

    def __post_init__(self) -> None:
        for name, value in (("seed", self.seed), ("link_key", self.link_key), ("token", self.token)):
            if len(value) != 32:
                raise ValueError(f"{name} must be 32 bytes")


def encode_bundle(bundle: TransferBundle) -> str:
    raw = bytes([BUNDLE_VERSION]) + bundle.seed + bundle.link_key + bundle.token
    assert len(raw) == BUNDLE_RAW_LEN
    return base64.b64encode(raw).decode("ascii")


def decode_bundle(text: str) -> TransferBundle:
    try:
        raw = base64.b64decode(text.strip().encode("ascii"), validate=True)
    except (binascii.Error, UnicodeEncodeError) as exc:
        raise BundleFormatError("bundle is not valid Base64") from exc
    if len(raw) != BUNDLE_RAW_LEN:
        raise BundleFormatError(
            f"bundle must decode to {BUNDLE_RAW_LEN} bytes, got {len(raw)}"
        )
    if raw[0] != BUNDLE_VERSION:
        raise BundleFormatError(f"unsupported bundle version {raw[0]}")
    return TransferBundle(seed=raw[1:33], link_key=raw[33:65], token=raw[65:97])
