"""The salt synchronization service: accounts, device enrollment, salt
records, and revocation.

The service stores, per account, a list of trusted device keys and a map
from service identifier to salt records. It never sees passwords, seeds,
plaintext usernames, or URLs; devices authenticate by certificate, never by
anything a user could be phished out of. Enrollment of additional devices
rides on single-use, short-lived tokens handed from an existing device.
"""

from __future__ import annotations

import secrets
import threading
import time
from dataclasses import dataclass, field, replace
from typing import Callable

from ..crypto import ProtectedUsername
from ..errors import AuthenticationError, EnrollmentError, NotFoundError, StateError
from .certs import CertificateAuthority, certificate_fingerprint
from .store import AppendLog

TOKEN_TTL_SECONDS = 15 * 60
TOKEN_BYTES = 32


@dataclass
class TrustedKey:
    fingerprint: str
    certificate_pem: str
    enrolled_at: float
    revoked: bool = False


@dataclass(frozen=True)
class SaltRecord:
    handle: str
    salt: bytes
    username: ProtectedUsername


@dataclass
class AuthToken:
    value: str
    account_id: str
    issued_at: float
    expires_at: float
    consumed: bool = False


@dataclass
class Account:
    account_id: str
    trusted_keys: dict[str, TrustedKey] = field(default_factory=dict)
    records: dict[str, list[SaltRecord]] = field(default_factory=dict)

    def active_keys(self) -> list[TrustedKey]:
        return [k for k in self.trusted_keys.values() if not k.revoked]


def _record_to_event(identifier_hex: str, record: SaltRecord) -> dict:
    return {
        "identifier": identifier_hex,
        "handle": record.handle,
        "salt": record.salt.hex(),
        "username_iv": record.username.iv.hex(),
        "username_ct": record.username.ciphertext.hex(),
        "username_mac": record.username.mac.hex(),
    }


def _record_from_event(event: dict) -> SaltRecord:
    return SaltRecord(
        handle=event["handle"],
        salt=bytes.fromhex(event["salt"]),
        username=ProtectedUsername(
            iv=bytes.fromhex(event["username_iv"]),
            ciphertext=bytes.fromhex(event["username_ct"]),
            mac=bytes.fromhex(event["username_mac"]),
        ),
    )


class SaltSyncService:
    """In-process service core; the wire layer is a thin adapter over it.

    All mutations run under one lock, which linearizes them per account (and
    more). Enrollment tokens are held in memory only: they expire within
    minutes, and persisting secrets would widen what a stolen store reveals.
    """

    def __init__(
        self,
        ca: CertificateAuthority | None = None,
        log: AppendLog | None = None,
        clock: Callable[[], float] = time.time,
        token_ttl: float = TOKEN_TTL_SECONDS,
    ):
        self.ca = ca or CertificateAuthority.generate()
        self._log = log
        self._clock = clock
        self._token_ttl = token_ttl
        self._lock = threading.Lock()
        self._accounts: dict[str, Account] = {}
        self._by_fingerprint: dict[str, str] = {}
        self._tokens: dict[str, AuthToken] = {}
        if log is not None:
            for event in log.replay():
                self._apply(event)

    # ------------------------------------------------------------------
    # event log

    def _apply(self, event: dict) -> None:
        kind = event["kind"]
        if kind == "account_created":
            account = Account(account_id=event["account_id"])
            key = TrustedKey(
                fingerprint=event["fingerprint"],
                certificate_pem=event["certificate_pem"],
                enrolled_at=event["enrolled_at"],
            )
            account.trusted_keys[key.fingerprint] = key
            self._accounts[account.account_id] = account
            self._by_fingerprint[key.fingerprint] = account.account_id
        elif kind == "device_registered":
            account = self._accounts[event["account_id"]]
            key = TrustedKey(
                fingerprint=event["fingerprint"],
                certificate_pem=event["certificate_pem"],
                enrolled_at=event["enrolled_at"],
            )
            account.trusted_keys[key.fingerprint] = key
            self._by_fingerprint[key.fingerprint] = account.account_id
        elif kind == "record_put":
            account = self._accounts[event["account_id"]]
            records = account.records.setdefault(event["identifier"], [])
            record = _record_from_event(event)
            for i, existing in enumerate(records):
                if existing.handle == record.handle:
                    records[i] = record
                    break
            else:
                records.append(record)
        elif kind == "record_deleted":
            account = self._accounts[event["account_id"]]
            records = account.records.get(event["identifier"], [])
            account.records[event["identifier"]] = [
                r for r in records if r.handle != event["handle"]
            ]
        elif kind == "device_revoked":
            account = self._accounts[event["account_id"]]
            account.trusted_keys[event["fingerprint"]].revoked = True
        else:
            raise ValueError(f"unknown event kind {kind!r}")

    def _commit(self, event: dict) -> None:
        if self._log is not None:
            self._log.append(event)
        self._apply(event)

    # ------------------------------------------------------------------
    # authentication

    def _authenticate(self, fingerprint: str | None) -> Account:
        if not fingerprint:
            raise AuthenticationError("client certificate required")
        account_id = self._by_fingerprint.get(fingerprint)
        if account_id is None:
            raise AuthenticationError("unknown device credential")
        account = self._accounts[account_id]
        key = account.trusted_keys[fingerprint]
        if key.revoked:
            raise AuthenticationError("device credential has been revoked")
        return account

    # ------------------------------------------------------------------
    # operations

    def create_account(self, csr_pem: str) -> tuple[str, str]:
        certificate_pem = self.ca.issue_device_certificate(csr_pem)
        fingerprint = certificate_fingerprint(certificate_pem)
        account_id = secrets.token_hex(16)
        with self._lock:
            self._commit(
                {
                    "kind": "account_created",
                    "account_id": account_id,
                    "fingerprint": fingerprint,
                    "certificate_pem": certificate_pem,
                    "enrolled_at": self._clock(),
                }
            )
        return account_id, certificate_pem

    def issue_token(self, fingerprint: str | None) -> AuthToken:
        with self._lock:
            account = self._authenticate(fingerprint)
            now = self._clock()
            token = AuthToken(
                value=secrets.token_bytes(TOKEN_BYTES).hex(),
                account_id=account.account_id,
                issued_at=now,
                expires_at=now + self._token_ttl,
            )
            self._tokens[token.value] = token
        return token

    def _check_token(self, token_value: str) -> AuthToken:
        token = self._tokens.get(token_value)
        if token is None:
            raise EnrollmentError("unknown enrollment token")
        if token.consumed:
            raise EnrollmentError("enrollment token already used")
        if self._clock() >= token.expires_at:
            raise EnrollmentError("enrollment token expired")
        return token

    def register_device(self, csr_pem: str, token_value: str) -> str:
        # No certificate is signed unless the token looks redeemable; the
        # consume inside the second critical section settles races.
        with self._lock:
            self._check_token(token_value)
        certificate_pem = self.ca.issue_device_certificate(csr_pem)
        fingerprint = certificate_fingerprint(certificate_pem)
        with self._lock:
            token = self._check_token(token_value)
            token.consumed = True
            self._commit(
                {
                    "kind": "device_registered",
                    "account_id": token.account_id,
                    "fingerprint": fingerprint,
                    "certificate_pem": certificate_pem,
                    "enrolled_at": self._clock(),
                }
            )
        return certificate_pem

    def put_record(
        self,
        fingerprint: str | None,
        identifier: bytes,
        salt: bytes,
        username: ProtectedUsername,
        replace_handle: str | None = None,
    ) -> str:
        _check_identifier(identifier)
        if len(salt) != 32:
            raise ValueError("salt must be 32 bytes")
        identifier_hex = identifier.hex()
        with self._lock:
            account = self._authenticate(fingerprint)
            if replace_handle is None:
                handle = secrets.token_hex(8)
            else:
                existing = account.records.get(identifier_hex, [])
                if not any(r.handle == replace_handle for r in existing):
                    raise NotFoundError("no record with that handle to replace")
                handle = replace_handle
            event = {
                "kind": "record_put",
                "account_id": account.account_id,
                **_record_to_event(
                    identifier_hex, SaltRecord(handle=handle, salt=salt, username=username)
                ),
            }
            self._commit(event)
        return handle

    def get_records(self, fingerprint: str | None, identifier: bytes) -> list[SaltRecord]:
        _check_identifier(identifier)
        with self._lock:
            account = self._authenticate(fingerprint)
            return list(account.records.get(identifier.hex(), []))

    def delete_record(self, fingerprint: str | None, identifier: bytes, handle: str) -> None:
        _check_identifier(identifier)
        with self._lock:
            account = self._authenticate(fingerprint)
            records = account.records.get(identifier.hex(), [])
            if not any(r.handle == handle for r in records):
                raise NotFoundError("no record with that handle")
            self._commit(
                {
                    "kind": "record_deleted",
                    "account_id": account.account_id,
                    "identifier": identifier.hex(),
                    "handle": handle,
                }
            )

    def revoke_device(
        self, fingerprint: str | None, target_fingerprint: str, confirm_last: bool = False
    ) -> None:
        """Mark a device key revoked. Idempotent; revoking the final active
        key of an account requires the explicit confirmation flag."""
        with self._lock:
            account = self._authenticate(fingerprint)
            target = account.trusted_keys.get(target_fingerprint)
            if target is None:
                raise NotFoundError("no enrolled device with that fingerprint")
            if target.revoked:
                return
            active = account.active_keys()
            if len(active) == 1 and active[0].fingerprint == target_fingerprint and not confirm_last:
                raise StateError(
                    "revoking the last active device locks the account; pass the confirmation flag"
                )
            self._commit(
                {
                    "kind": "device_revoked",
                    "account_id": account.account_id,
                    "fingerprint": target_fingerprint,
                }
            )

    def list_devices(self, fingerprint: str | None) -> list[TrustedKey]:
        with self._lock:
            account = self._authenticate(fingerprint)
            return [replace(k) for k in account.trusted_keys.values()]


def _check_identifier(identifier: bytes) -> None:
    if len(identifier) != 32:
        raise ValueError("identifier must be 32 bytes")
