"""palpas: deterministic per-service passwords synchronized across devices
via a server that never stores passwords or password-equivalent data.

Library entry points:

    PalpasClient          one device: setup, transfer, add, login, update
    generate_password     the deterministic (seed, salt, policy) -> password map
    PasswordPolicy        policy model with XML parse/serialize helpers
"""

from .client import LoginResult, PalpasClient, UpdateProposal
from .generator import generate_password, generate_salt, required_bits
from .policy import (
    CharacterSet,
    PasswordPolicy,
    max_entropy_bits,
    parse_policy,
    serialize_policy,
    validate_password,
)

__version__ = "0.1.0"

__all__ = [
    "CharacterSet",
    "LoginResult",
    "PalpasClient",
    "PasswordPolicy",
    "UpdateProposal",
    "generate_password",
    "generate_salt",
    "max_entropy_bits",
    "parse_policy",
    "required_bits",
    "serialize_policy",
    "validate_password",
    "__version__",
]
