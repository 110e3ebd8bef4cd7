from __future__ import annotations

import hashlib
import json
from pathlib import Path

import pytest

from palpas.policy import CharacterSet, PasswordPolicy

VECTOR_DIR = Path(__file__).parent / "vectors"

LOWER = "abcdefghijklmnopqrstuvwxyz"
UPPER = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
DIGITS = "0123456789"

STANDARD_POLICY_XML = b"""<PasswordPolicy>
  <MinLength>6</MinLength>
  <MaxLength>12</MaxLength>
  <CharacterSets>
    <CharacterSet name="LowercaseLetters">
      <Characters>abcdefghijklmnopqrstuvwxyz</Characters>
    </CharacterSet>
    <CharacterSet name="UppercaseLetters">
      <Characters>ABCDEFGHIJKLMNOPQRSTUVWXYZ</Characters>
    </CharacterSet>
    <CharacterSet name="Digits" minOccurrence="1">
      <Characters>0123456789</Characters>
    </CharacterSet>
  </CharacterSets>
</PasswordPolicy>
"""


def standard_policy() -> PasswordPolicy:
    """The alphanumeric reference policy: 6-12 chars, at least one digit."""
    return PasswordPolicy(
        min_length=6,
        max_length=12,
        sets=(
            CharacterSet("LowercaseLetters", LOWER),
            CharacterSet("UppercaseLetters", UPPER),
            CharacterSet("Digits", DIGITS, min_occurrence=1),
        ),
    )


@pytest.fixture
def policy62() -> PasswordPolicy:
    return standard_policy()


def load_vectors(name: str) -> list[dict]:
    rows = []
    with open(VECTOR_DIR / name, encoding="utf-8") as fh:
        for line in fh:
            rows.append(json.loads(line))
    return rows


class RecordingRng:
    """Randomness source that records every byte it hands out."""

    def __init__(self, source=None):
        import os

        self._source = source or os.urandom
        self.calls: list[int] = []
        self.outputs: list[bytes] = []

    def __call__(self, n: int) -> bytes:
        out = self._source(n)
        self.calls.append(n)
        self.outputs.append(out)
        return out


def salt_stream(label: str, count: int) -> list[bytes]:
    """Deterministic stream of 32-byte salts for reproducible statistics."""
    return [
        hashlib.sha256(f"{label}/{i}".encode()).digest() for i in range(count)
    ]
