"""Device-side orchestration: setup, device transfer, adding services,
logging in, two-phase password updates, and revocation.

Every password is recomputed on demand from the vault's seed plus the salt
fetched from the sync service; nothing password-derived is ever sent
anywhere. Policy documents are fetched from the policy service once, cached
in the vault, and re-checked only when a password is being changed.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass
from pathlib import Path

from . import crypto, vault
from .bundle import TransferBundle, decode_bundle, encode_bundle
from .crypto import MasterKey, Rng
from .errors import (
    AuthenticationError,
    CorruptionError,
    NoAccountError,
    NotFoundError,
    PolicyMissingError,
    StateError,
)
from .generator import generate_password, generate_salt
from .policy import PasswordPolicy, parse_policy
from .sss.certs import build_csr, certificate_fingerprint, generate_device_key
from .vault import CachedPolicy, PendingUpdate, VaultPayload


@dataclass(frozen=True)
class LoginResult:
    username: str
    password: str
    identifier: bytes
    handle: str


@dataclass(frozen=True)
class UpdateProposal:
    url: str
    handle: str
    old_password: str
    new_password: str


class PalpasClient:
    """One device. The vault file is the only local state; the transports
    talk to the two services."""

    def __init__(
        self,
        vault_path: str | Path,
        sss,
        pps,
        kdf_iterations: int = crypto.DEFAULT_KDF_ITERATIONS,
        rng: Rng = os.urandom,
    ):
        self.vault_path = Path(vault_path)
        self._sss = sss
        self._pps = pps
        self._iterations = kdf_iterations
        self._rng = rng
        self._master_cache: dict[tuple[str, bytes, int], MasterKey] = {}

    # ------------------------------------------------------------------
    # vault plumbing

    def _master(self, mpw: str, kdf_salt: bytes, iterations: int) -> MasterKey:
        key = (mpw, kdf_salt, iterations)
        if key not in self._master_cache:
            self._master_cache[key] = crypto.derive_master_key(mpw, kdf_salt, iterations)
        return self._master_cache[key]

    def _open(self, mpw: str) -> tuple[MasterKey, VaultPayload]:
        if not self.vault_path.exists():
            raise StateError(f"no vault at {self.vault_path}; run setup first")
        envelope = vault.load_vault(self.vault_path)
        master = self._master(mpw, envelope.kdf_salt, envelope.iterations)
        return master, vault.unseal_payload(master, envelope)

    def _store(self, master: MasterKey, payload: VaultPayload) -> None:
        vault.save_vault(vault.seal_payload(master, payload, self._rng), self.vault_path)

    def _create_vault(self, mpw: str, payload: VaultPayload) -> None:
        kdf_salt = self._rng(crypto.KDF_SALT_BYTES)
        master = self._master(mpw, kdf_salt, self._iterations)
        self._store(master, payload)

    def _bound_sss(self, payload: VaultPayload):
        transport = self._sss
        if payload.ca_certificate_pem and hasattr(transport, "with_ca"):
            transport = transport.with_ca(payload.ca_certificate_pem)
        return transport.bound(payload.certificate_pem, payload.device_key_pem)

    # ------------------------------------------------------------------
    # policies

    def _policy_for(
        self, payload: VaultPayload, url: str, refresh: bool = False
    ) -> tuple[PasswordPolicy, VaultPayload, bool]:
        """Resolve the policy for a URL from the vault cache, fetching it on
        first use (and on refresh for password changes). Returns the policy,
        the possibly-updated payload, and whether the cache changed."""
        cached = payload.cached_policies.get(url)
        fetched = None
        if cached is None:
            fetched = self._pps.fetch_policy(url)
            if fetched is None:
                raise PolicyMissingError(
                    f"no published password policy for {url}; "
                    "submit the service's requirements to the policy service first"
                )
        elif refresh:
            fetched = self._pps.fetch_policy(url, min_version=cached.version)

        changed = False
        if fetched is not None:
            xml, version = fetched
            cached = CachedPolicy(xml=xml, version=version)
            policies = dict(payload.cached_policies)
            policies[url] = cached
            payload = dataclasses.replace(payload, cached_policies=policies)
            changed = True
        policy = parse_policy(cached.xml)
        return dataclasses.replace(policy, version=cached.version), payload, changed

    # ------------------------------------------------------------------
    # flows

    def setup(self, mpw: str) -> str:
        """First use on the first device: generate all secrets, create the
        account, persist the vault. Returns the device fingerprint."""
        if self.vault_path.exists():
            raise StateError(f"vault already exists at {self.vault_path}")
        if not mpw:
            raise ValueError("master password must not be empty")
        seed = crypto.generate_seed(self._rng)
        link_key = crypto.generate_link_key(self._rng)
        device_key = generate_device_key()
        _, certificate, ca_certificate = self._sss.create_account(build_csr(device_key))
        payload = VaultPayload(
            seed=seed,
            link_key=link_key,
            device_key_pem=device_key,
            certificate_pem=certificate,
            ca_certificate_pem=ca_certificate,
        )
        self._create_vault(mpw, payload)
        return certificate_fingerprint(certificate)

    def export_bundle(self, mpw: str) -> str:
        """Fetch a fresh enrollment token and encode the transfer bundle."""
        _, payload = self._open(mpw)
        token_hex = self._bound_sss(payload).issue_token()
        return encode_bundle(
            TransferBundle(
                seed=payload.seed,
                link_key=payload.link_key,
                token=bytes.fromhex(token_hex),
            )
        )

    def import_bundle(self, bundle_text: str, mpw: str) -> str:
        """Enroll this device from a bundle; the master password here is this
        device's own choice. Returns the device fingerprint."""
        if self.vault_path.exists():
            raise StateError(f"vault already exists at {self.vault_path}")
        if not mpw:
            raise ValueError("master password must not be empty")
        bundle = decode_bundle(bundle_text)
        device_key = generate_device_key()
        certificate, ca_certificate = self._sss.register_device(
            build_csr(device_key), bundle.token.hex()
        )
        payload = VaultPayload(
            seed=bundle.seed,
            link_key=bundle.link_key,
            device_key_pem=device_key,
            certificate_pem=certificate,
            ca_certificate_pem=ca_certificate,
        )
        self._create_vault(mpw, payload)
        return certificate_fingerprint(certificate)

    def add_password(
        self, mpw: str, url: str, username: str, allow_multiple: bool = False
    ) -> str:
        """Create the password for a new account at a service and store its
        salt record; the password is only returned once the record is safely
        at the sync service."""
        master, payload = self._open(mpw)
        identifier = crypto.compute_identifier(payload.link_key, url)
        sss = self._bound_sss(payload)
        if not allow_multiple and sss.get_records(identifier):
            raise StateError(
                f"a record for {url} already exists; pass allow_multiple to add another account"
            )
        policy, payload, cache_changed = self._policy_for(payload, url)
        salt = generate_salt(self._rng)
        password = generate_password(payload.seed, salt, policy)
        protected = crypto.encrypt_username(payload.link_key, username, self._rng)
        sss.put_record(identifier, salt, protected)
        if cache_changed:
            self._store(master, payload)
        return password

    def login(self, mpw: str, url: str) -> list[LoginResult]:
        """Recompute the password(s) for a service; several results mean the
        user has several accounts there and picks one."""
        master, payload = self._open(mpw)
        identifier = crypto.compute_identifier(payload.link_key, url)
        records = self._bound_sss(payload).get_records(identifier)
        if not records:
            raise NoAccountError(f"no account at this service: {url}")
        policy, payload, cache_changed = self._policy_for(payload, url)
        results = []
        for record in records:
            try:
                username = crypto.decrypt_username(payload.link_key, record.username)
            except AuthenticationError as exc:
                raise CorruptionError(
                    f"stored username for record {record.handle} failed authentication"
                ) from exc
            results.append(
                LoginResult(
                    username=username,
                    password=generate_password(payload.seed, record.salt, policy),
                    identifier=identifier,
                    handle=record.handle,
                )
            )
        if cache_changed:
            self._store(master, payload)
        return results

    # ------------------------------------------------------------------
    # two-phase password update

    def _resolve_handle(self, records, url: str, handle: str | None) -> str:
        if handle is not None:
            if not any(r.handle == handle for r in records):
                raise NotFoundError(f"no record {handle} for {url}")
            return handle
        if len(records) > 1:
            raise StateError(f"multiple accounts at {url}; specify a record handle")
        return records[0].handle

    def propose_update(self, mpw: str, url: str, handle: str | None = None) -> UpdateProposal:
        """Phase one: pick the new salt and compute both passwords. Nothing
        changes at the sync service until commit; the proposal survives in
        the vault so commit can happen in a later session."""
        master, payload = self._open(mpw)
        identifier = crypto.compute_identifier(payload.link_key, url)
        records = self._bound_sss(payload).get_records(identifier)
        if not records:
            raise NoAccountError(f"no account at this service: {url}")
        handle = self._resolve_handle(records, url, handle)
        record = next(r for r in records if r.handle == handle)
        # A password change must satisfy the service's current requirements,
        # so this is the one spot that re-checks the policy service.
        policy, payload, _ = self._policy_for(payload, url, refresh=True)
        new_salt = generate_salt(self._rng)
        proposal = UpdateProposal(
            url=url,
            handle=handle,
            old_password=generate_password(payload.seed, record.salt, policy),
            new_password=generate_password(payload.seed, new_salt, policy),
        )
        pending = dict(payload.pending_updates)
        pending[handle] = PendingUpdate(url=url, salt=new_salt)
        self._store(master, dataclasses.replace(payload, pending_updates=pending))
        return proposal

    def commit_update(self, mpw: str, url: str, handle: str | None = None) -> UpdateProposal:
        """Phase two, after the service accepted the change: replace the salt
        at the sync service, then clear the proposal. Safe to retry."""
        master, payload = self._open(mpw)
        handle = self._pending_handle(payload, url, handle)
        pending = payload.pending_updates[handle]
        identifier = crypto.compute_identifier(payload.link_key, pending.url)
        sss = self._bound_sss(payload)
        records = sss.get_records(identifier)
        record = next((r for r in records if r.handle == handle), None)
        if record is None:
            raise NotFoundError(f"record {handle} no longer exists at the sync service")
        policy, payload, _ = self._policy_for(payload, pending.url)
        proposal = UpdateProposal(
            url=pending.url,
            handle=handle,
            old_password=generate_password(payload.seed, record.salt, policy),
            new_password=generate_password(payload.seed, pending.salt, policy),
        )
        sss.put_record(identifier, pending.salt, record.username, replace_handle=handle)
        remaining = dict(payload.pending_updates)
        del remaining[handle]
        self._store(master, dataclasses.replace(payload, pending_updates=remaining))
        return proposal

    def abandon_update(self, mpw: str, url: str, handle: str | None = None) -> None:
        """Drop a proposal; the old password remains the only password."""
        master, payload = self._open(mpw)
        handle = self._pending_handle(payload, url, handle)
        remaining = dict(payload.pending_updates)
        del remaining[handle]
        self._store(master, dataclasses.replace(payload, pending_updates=remaining))

    @staticmethod
    def _pending_handle(payload: VaultPayload, url: str, handle: str | None) -> str:
        if handle is not None:
            if handle not in payload.pending_updates:
                raise StateError(f"no proposed update for record {handle}")
            return handle
        matches = [h for h, p in payload.pending_updates.items() if p.url == url]
        if not matches:
            raise StateError(f"no proposed update for {url}; propose one first")
        if len(matches) > 1:
            raise StateError(f"several proposed updates for {url}; specify a record handle")
        return matches[0]

    # ------------------------------------------------------------------
    # device administration

    def revoke(self, mpw: str, fingerprint: str, confirm_last: bool = False) -> None:
        _, payload = self._open(mpw)
        self._bound_sss(payload).revoke_device(fingerprint, confirm_last=confirm_last)

    def list_devices(self, mpw: str) -> list[dict]:
        _, payload = self._open(mpw)
        return self._bound_sss(payload).list_devices()

    def device_fingerprint(self, mpw: str) -> str:
        _, payload = self._open(mpw)
        return certificate_fingerprint(payload.certificate_pem)
