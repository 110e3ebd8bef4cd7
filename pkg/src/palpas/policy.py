"""Password policy model, its XML wire format, and password validation.

A policy declares length bounds and an ordered list of character sets; set
order is significant because the concatenated sets form the generator's
alphabet (index i maps to the i-th character in declaration order).
"""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

from .errors import PolicyParseError, PolicyValidationError

POLICY_TAG = "PasswordPolicy"


@dataclass(frozen=True)
class CharacterSet:
    name: str
    characters: str
    min_occurrence: int = 0

    def __post_init__(self) -> None:
        if not self.name:
            raise PolicyValidationError("character set name must not be empty")
        if not self.characters:
            raise PolicyValidationError(
                f"character set {self.name!r} has no characters"
            )
        if len(set(self.characters)) != len(self.characters):
            raise PolicyValidationError(
                f"character set {self.name!r} contains duplicate characters"
            )
        if self.min_occurrence < 0:
            raise PolicyValidationError(
                f"character set {self.name!r} has negative minOccurrence"
            )


@dataclass(frozen=True)
class PasswordPolicy:
    min_length: int
    max_length: int
    sets: tuple[CharacterSet, ...]
    version: int = field(default=0, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "sets", tuple(self.sets))
        if self.min_length < 1:
            raise PolicyValidationError("MinLength must be at least 1")
        if self.min_length > self.max_length:
            raise PolicyValidationError("MinLength exceeds MaxLength")
        if not self.sets:
            raise PolicyValidationError("policy declares no character sets")
        seen: set[str] = set()
        for charset in self.sets:
            overlap = seen.intersection(charset.characters)
            if overlap:
                raise PolicyValidationError(
                    f"character {next(iter(overlap))!r} appears in two sets"
                )
            seen.update(charset.characters)
        if sum(s.min_occurrence for s in self.sets) > self.max_length:
            raise PolicyValidationError(
                "sum of minOccurrence constraints exceeds MaxLength"
            )

    @property
    def alphabet(self) -> str:
        """Character sets concatenated in declaration order."""
        return "".join(s.characters for s in self.sets)

    @property
    def alphabet_size(self) -> int:
        return len(self.alphabet)


def _int_child(root: ET.Element, tag: str) -> int:
    node = root.find(tag)
    if node is None or node.text is None:
        raise PolicyValidationError(f"{tag} element missing")
    try:
        return int(node.text.strip())
    except ValueError:
        raise PolicyValidationError(f"{tag} is not an integer") from None


def parse_policy(document: bytes | str) -> PasswordPolicy:
    """Parse an XML policy document into a validated model."""
    try:
        root = ET.fromstring(document)
    except ET.ParseError as exc:
        raise PolicyParseError(f"malformed policy XML: {exc}") from exc
    if root.tag != POLICY_TAG:
        raise PolicyValidationError(f"root element must be {POLICY_TAG}")

    min_length = _int_child(root, "MinLength")
    max_length = _int_child(root, "MaxLength")

    sets_node = root.find("CharacterSets")
    if sets_node is None:
        raise PolicyValidationError("CharacterSets element missing")
    sets = []
    for node in sets_node.findall("CharacterSet"):
        name = node.get("name")
        if not name:
            raise PolicyValidationError("CharacterSet lacks a name attribute")
        raw_min = node.get("minOccurrence", "0")
        try:
            min_occurrence = int(raw_min)
        except ValueError:
            raise PolicyValidationError(
                f"minOccurrence of {name!r} is not an integer"
            ) from None
        chars_node = node.find("Characters")
        if chars_node is None or not chars_node.text:
            raise PolicyValidationError(f"Characters element missing in {name!r}")
        sets.append(
            CharacterSet(name=name, characters=chars_node.text, min_occurrence=min_occurrence)
        )
    return PasswordPolicy(min_length=min_length, max_length=max_length, sets=tuple(sets))


def serialize_policy(policy: PasswordPolicy) -> bytes:
    """Canonical XML form: fixed element order, minOccurrence omitted when 0."""
    root = ET.Element(POLICY_TAG)
    ET.SubElement(root, "MinLength").text = str(policy.min_length)
    ET.SubElement(root, "MaxLength").text = str(policy.max_length)
    sets_node = ET.SubElement(root, "CharacterSets")
    for charset in policy.sets:
        attrs = {"name": charset.name}
        if charset.min_occurrence:
            attrs["minOccurrence"] = str(charset.min_occurrence)
        set_node = ET.SubElement(sets_node, "CharacterSet", attrs)
        ET.SubElement(set_node, "Characters").text = charset.characters
    tree = ET.ElementTree(root)
    ET.indent(tree, space="  ")
    return ET.tostring(root, encoding="utf-8")


def validate_password(password: str, policy: PasswordPolicy) -> bool:
    """True iff length, alphabet membership, and occurrence minima all hold."""
    if not policy.min_length <= len(password) <= policy.max_length:
        return False
    alphabet = set(policy.alphabet)
    if any(c not in alphabet for c in password):
        return False
    for charset in policy.sets:
        if charset.min_occurrence == 0:
            continue
        members = set(charset.characters)
        if sum(1 for c in password if c in members) < charset.min_occurrence:
            return False
    return True


def max_entropy_bits(policy: PasswordPolicy) -> float:
    """Upper bound on password entropy: max_length * log2(alphabet size)."""
    return policy.max_length * math.log2(policy.alphabet_size)
