from __future__ import annotations

import dataclasses

import pytest

from palpas.bundle import decode_bundle
from palpas.client import PalpasClient
from palpas.errors import (
    AuthenticationError,
    BundleFormatError,
    EnrollmentError,
    NoAccountError,
    NotFoundError,
    PolicyMissingError,
    StateError,
    TransportError,
)
from palpas.policy import parse_policy, validate_password
from palpas.pps import InProcessPpsTransport, PolicyService
from palpas.sss import InProcessSssTransport, SaltSyncService, TransportCapture

from conftest import STANDARD_POLICY_XML

ITER = 128  # cheap PBKDF2 for tests; KDF correctness is pinned by vectors
URL = "https://service.example"


class World:
    """One sync service, one policy service, shared traffic capture."""

    def __init__(self, tmp_path):
        self.tmp_path = tmp_path
        self.sss = SaltSyncService()
        self.pps = PolicyService()
        self.capture = TransportCapture()
        self._counter = 0

    def publish_policy(self, url: str, document: bytes = STANDARD_POLICY_XML) -> None:
        for submitter in ("seed-1", "seed-2", "seed-3"):
            self.pps.submit_policy(url, document, submitter)

    def client(self, name: str) -> PalpasClient:
        self._counter += 1
        return PalpasClient(
            self.tmp_path / f"vault-{name}",
            InProcessSssTransport(self.sss, capture=self.capture),
            InProcessPpsTransport(self.pps, client_id=name, capture=self.capture),
            kdf_iterations=ITER,
        )


@pytest.fixture
def world(tmp_path) -> World:
    w = World(tmp_path)
    w.publish_policy(URL)
    return w


class TestSetup:
    def test_setup_creates_vault_and_account(self, world):
        client = world.client("a")
        fingerprint = client.setup("mpw-a")
        assert client.vault_path.exists()
        assert len(world.sss._accounts) == 1
        (account,) = world.sss._accounts.values()
        assert list(account.trusted_keys) == [fingerprint]

    def test_setup_twice_refused(self, world):
        client = world.client("a")
        client.setup("mpw-a")
        with pytest.raises(StateError, match="already exists"):
            client.setup("mpw-a")

    def test_setup_failure_leaves_no_vault(self, world):
        class DeadTransport:
            def create_account(self, csr):
                raise TransportError("unreachable")

        client = PalpasClient(
            world.tmp_path / "vault-dead",
            DeadTransport(),
            InProcessPpsTransport(world.pps),
            kdf_iterations=ITER,
        )
        with pytest.raises(TransportError):
            client.setup("mpw")
        assert not client.vault_path.exists()


class TestBundles:
    def test_export_format(self, world):
        client = world.client("a")
        client.setup("mpw-a")
        text = client.export_bundle("mpw-a")
        assert len(text) == 132

    def test_two_exports_same_secrets_fresh_tokens(self, world):
        client = world.client("a")
        client.setup("mpw-a")
        first = decode_bundle(client.export_bundle("mpw-a"))
        second = decode_bundle(client.export_bundle("mpw-a"))
        assert first.seed == second.seed
        assert first.link_key == second.link_key
        assert first.token != second.token

    def test_import_creates_second_device(self, world):
        a = world.client("a")
        a.setup("mpw-a")
        b = world.client("b")
        b.import_bundle(a.export_bundle("mpw-a"), "different-mpw-b")
        assert b.vault_path.exists()
        (account,) = world.sss._accounts.values()
        assert len(account.trusted_keys) == 2

    def test_reused_bundle_fails_and_writes_no_vault(self, world):
        a = world.client("a")
        a.setup("mpw-a")
        text = a.export_bundle("mpw-a")
        world.client("b").import_bundle(text, "mpw-b")
        c = world.client("c")
        with pytest.raises(EnrollmentError):
            c.import_bundle(text, "mpw-c")
        assert not c.vault_path.exists()

    def test_tampered_bundle(self, world):
        a = world.client("a")
        a.setup("mpw-a")
        text = a.export_bundle("mpw-a")
        with pytest.raises(BundleFormatError):
            world.client("b").import_bundle(text[:100], "mpw-b")


class TestAddAndLogin:
    def test_add_then_login_same_device(self, world):
        client = world.client("a")
        client.setup("mpw-a")
        password = client.add_password("mpw-a", URL, "alice")
        (result,) = client.login("mpw-a", URL)
        assert result.password == password
        assert result.username == "alice"

    def test_cross_device_same_password(self, world):
        a = world.client("a")
        a.setup("mpw-a")
        b = world.client("b")
        b.import_bundle(a.export_bundle("mpw-a"), "mpw-b")
        password = a.add_password("mpw-a", URL, "alice")
        (result,) = b.login("mpw-b", URL)
        assert result.password == password
        assert result.username == "alice"

    def test_password_satisfies_policy(self, world):
        client = world.client("a")
        client.setup("mpw-a")
        password = client.add_password("mpw-a", URL, "alice")
        assert validate_password(password, parse_policy(STANDARD_POLICY_XML))

    def test_add_without_policy(self, world):
        client = world.client("a")
        client.setup("mpw-a")
        with pytest.raises(PolicyMissingError, match="no published password policy"):
            client.add_password("mpw-a", "https://unknown.example", "alice")

    def test_add_twice_requires_multi_account_flag(self, world):
        client = world.client("a")
        client.setup("mpw-a")
        client.add_password("mpw-a", URL, "alice")
        with pytest.raises(StateError, match="allow_multiple"):
            client.add_password("mpw-a", URL, "alice-the-second")

    def test_multiple_accounts_at_one_service(self, world):
        client = world.client("a")
        client.setup("mpw-a")
        pw_alice = client.add_password("mpw-a", URL, "alice")
        pw_backup = client.add_password("mpw-a", URL, "alice-backup", allow_multiple=True)
        results = client.login("mpw-a", URL)
        assert len(results) == 2
        assert {r.username for r in results} == {"alice", "alice-backup"}
        assert {r.password for r in results} == {pw_alice, pw_backup}

    def test_login_unknown_service(self, world):
        client = world.client("a")
        client.setup("mpw-a")
        with pytest.raises(NoAccountError, match="no account at this service"):
            client.login("mpw-a", "https://never-added.example")

    def test_policy_fetched_once_then_cached(self, world):
        client = world.client("a")
        client.setup("mpw-a")
        client.add_password("mpw-a", URL, "alice")
        client.login("mpw-a", URL)
        client.login("mpw-a", URL)
        pps_requests = [r for r in world.capture.requests if r.service == "pps"]
        assert len(pps_requests) == 1

    def test_wrong_master_password(self, world):
        client = world.client("a")
        client.setup("mpw-a")
        with pytest.raises(AuthenticationError):
            client.login("wrong", URL)


class TestUpdateFlow:
    def _device_with_account(self, world):
        client = world.client("a")
        client.setup("mpw-a")
        password = client.add_password("mpw-a", URL, "alice")
        return client, password

    def test_propose_commit_changes_password(self, world):
        client, old_password = self._device_with_account(world)
        proposal = client.propose_update("mpw-a", URL)
        assert proposal.old_password == old_password
        assert proposal.new_password != old_password
        committed = client.commit_update("mpw-a", URL)
        assert committed.new_password == proposal.new_password
        (result,) = client.login("mpw-a", URL)
        assert result.password == proposal.new_password

    def test_other_device_sees_new_password(self, world):
        client, _ = self._device_with_account(world)
        b = world.client("b")
        b.import_bundle(client.export_bundle("mpw-a"), "mpw-b")
        proposal = client.propose_update("mpw-a", URL)
        client.commit_update("mpw-a", URL)
        (result,) = b.login("mpw-b", URL)
        assert result.password == proposal.new_password

    def test_abandon_keeps_old_password(self, world):
        client, old_password = self._device_with_account(world)
        client.propose_update("mpw-a", URL)
        client.abandon_update("mpw-a", URL)
        (result,) = client.login("mpw-a", URL)
        assert result.password == old_password

    def test_commit_without_propose(self, world):
        client, _ = self._device_with_account(world)
        with pytest.raises(StateError, match="propose"):
            client.commit_update("mpw-a", URL)

    def test_proposal_survives_client_restart(self, world):
        client, _ = self._device_with_account(world)
        proposal = client.propose_update("mpw-a", URL)
        fresh = PalpasClient(
            client.vault_path,
            InProcessSssTransport(world.sss, capture=world.capture),
            InProcessPpsTransport(world.pps, client_id="a", capture=world.capture),
            kdf_iterations=ITER,
        )
        committed = fresh.commit_update("mpw-a", URL)
        assert committed.new_password == proposal.new_password

    def test_commit_retry_after_local_failure(self, world, monkeypatch):
        client, _ = self._device_with_account(world)
        proposal = client.propose_update("mpw-a", URL)

        original_store = client._store
        calls = {"n": 0}

        def flaky_store(master, payload):
            calls["n"] += 1
            raise OSError("disk full")

        monkeypatch.setattr(client, "_store", flaky_store)
        with pytest.raises(OSError):
            client.commit_update("mpw-a", URL)
        monkeypatch.setattr(client, "_store", original_store)

        committed = client.commit_update("mpw-a", URL)
        assert committed.new_password == proposal.new_password
        (result,) = client.login("mpw-a", URL)
        assert result.password == proposal.new_password

    def test_update_respects_newer_policy(self, world):
        client, _ = self._device_with_account(world)
        longer = STANDARD_POLICY_XML.replace(b"<MaxLength>12<", b"<MaxLength>16<")
        world.publish_policy(URL, longer)
        proposal = client.propose_update("mpw-a", URL)
        assert len(proposal.new_password) == 16
        assert validate_password(proposal.new_password, parse_policy(longer))
        client.commit_update("mpw-a", URL)
        (result,) = client.login("mpw-a", URL)
        assert result.password == proposal.new_password

    def test_update_unknown_service(self, world):
        client, _ = self._device_with_account(world)
        with pytest.raises(NoAccountError):
            client.propose_update("mpw-a", "https://never.example")


class TestRevocation:
    def test_revoked_device_cannot_login(self, world):
        a = world.client("a")
        a.setup("mpw-a")
        a.add_password("mpw-a", URL, "alice")
        b = world.client("b")
        b.import_bundle(a.export_bundle("mpw-a"), "mpw-b")
        fingerprint_b = b.device_fingerprint("mpw-b")
        a.revoke("mpw-a", fingerprint_b)
        with pytest.raises(AuthenticationError):
            b.login("mpw-b", URL)

    def test_devices_listing_marks_revoked(self, world):
        a = world.client("a")
        a.setup("mpw-a")
        b = world.client("b")
        b.import_bundle(a.export_bundle("mpw-a"), "mpw-b")
        fingerprint_b = b.device_fingerprint("mpw-b")
        a.revoke("mpw-a", fingerprint_b)
        listing = {d["fingerprint"]: d["revoked"] for d in a.list_devices("mpw-a")}
        assert listing[fingerprint_b] is True
        assert listing[a.device_fingerprint("mpw-a")] is False

    def test_revoke_unknown_fingerprint(self, world):
        a = world.client("a")
        a.setup("mpw-a")
        with pytest.raises(NotFoundError):
            a.revoke("mpw-a", "00" * 32)


class TestTrafficHygiene:
    def test_no_secret_ever_leaves_the_device(self, world):
        a = world.client("a")
        a.setup("mpw-a")
        b = world.client("b")
        b.import_bundle(a.export_bundle("mpw-a"), "mpw-b")
        urls = [f"https://svc{i}.example" for i in range(3)]
        usernames = [f"user-{i}@mail.example" for i in range(3)]
        passwords = []
        for url, username in zip(urls, usernames):
            world.publish_policy(url)
            passwords.append(a.add_password("mpw-a", url, username))
        for url in urls:
            b.login("mpw-b", url)
        proposal = a.propose_update("mpw-a", urls[0])
        a.commit_update("mpw-a", urls[0])
        passwords += [proposal.old_password, proposal.new_password]

        import palpas.vault as vault_module

        payload = vault_module.open_vault("mpw-a", vault_module.load_vault(a.vault_path))

        everything = world.capture.all_bytes()
        sss_traffic = b"".join(
            r.body + r.path.encode() for r in world.capture.requests if r.service == "sss"
        )
        for secret in [payload.seed, payload.link_key]:
            assert secret not in everything
            assert secret.hex().encode() not in everything
        for mpw in (b"mpw-a", b"mpw-b"):
            assert mpw not in everything
        for password in passwords:
            assert password.encode() not in everything
        for username in usernames:
            assert username.encode() not in sss_traffic
        for url in urls:
            assert url.encode() not in sss_traffic

    def test_corrupted_username_record_names_the_record(self, world):
        from palpas.errors import CorruptionError

        a = world.client("a")
        a.setup("mpw-a")
        a.add_password("mpw-a", URL, "alice")
        (account,) = world.sss._accounts.values()
        ((identifier_hex, records),) = account.records.items()
        record = records[0]
        tampered = dataclasses.replace(
            record,
            username=dataclasses.replace(
                record.username, mac=bytes(32)
            ),
        )
        records[0] = tampered
        with pytest.raises(CorruptionError, match=record.handle):
            a.login("mpw-a", URL)
