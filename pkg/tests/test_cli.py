from __future__ import annotations

import json

import pytest

from palpas import cli
from palpas.policy import parse_policy
from palpas.pps import PolicyService
from palpas.pps.httpd import PpsHttpServer
from palpas.sss import SaltSyncService
from palpas.sss.httpd import SssHttpServer

from conftest import STANDARD_POLICY_XML

URL = "https://cli-service.example"


@pytest.fixture(scope="module")
def servers():
    sss_service = SaltSyncService()
    pps_service = PolicyService()
    sss_server = SssHttpServer(sss_service)
    pps_server = PpsHttpServer(pps_service)
    sss_server.start()
    pps_server.start()
    for submitter in ("s1", "s2", "s3"):
        pps_service.submit_policy(URL, STANDARD_POLICY_XML, submitter)
    yield sss_server, pps_server, sss_service, pps_service
    sss_server.stop()
    pps_server.stop()


@pytest.fixture
def env(servers, tmp_path, monkeypatch):
    sss_server, pps_server, *_ = servers
    monkeypatch.setenv("PALPAS_MPW", "correct horse")
    monkeypatch.setenv("PALPAS_VAULT", str(tmp_path / "vault"))
    return ["--sss", sss_server.base_url, "--pps", pps_server.base_url]


def run_cli(flags, *command) -> int:
    return cli.run([*flags, *command])


class TestLifecycle:
    def test_full_session(self, env, tmp_path, capsys, monkeypatch):
        assert run_cli(env, "setup") == 0
        assert (tmp_path / "vault").exists()
        capsys.readouterr()

        assert run_cli(env, "add", URL, "alice@mail.example") == 0
        password = capsys.readouterr().out.strip()
        assert len(password) == 12

        assert run_cli(env, "login", URL) == 0
        out = capsys.readouterr().out
        assert f"username: alice@mail.example" in out
        assert f"password: {password}" in out

        assert run_cli(env, "--json", "login", URL) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["command"] == "login"
        assert payload["accounts"][0]["password"] == password

        # two-phase update
        assert run_cli(env, "update", URL) == 0
        update_out = capsys.readouterr().out
        assert f"old password: {password}" in update_out
        assert run_cli(env, "--json", "update", URL, "--commit") == 0
        committed = json.loads(capsys.readouterr().out)
        assert committed["state"] == "committed"
        assert committed["old_password"] == password
        assert run_cli(env, "login", URL) == 0
        assert committed["new_password"] in capsys.readouterr().out

        # second device via bundle, different master password
        assert run_cli(env, "export-bundle") == 0
        bundle = capsys.readouterr().out.strip()
        monkeypatch.setenv("PALPAS_VAULT", str(tmp_path / "vault-b"))
        monkeypatch.setenv("PALPAS_MPW", "other password")
        assert run_cli(env, "import-bundle", bundle) == 0
        capsys.readouterr()
        assert run_cli(env, "--json", "login", URL) == 0
        second = json.loads(capsys.readouterr().out)
        assert second["accounts"][0]["password"] == committed["new_password"]

        # device listing, then revoke B (the newer enrollment) from A
        assert run_cli(env, "--json", "devices") == 0
        devices = json.loads(capsys.readouterr().out)["devices"]
        assert len(devices) == 2
        monkeypatch.setenv("PALPAS_VAULT", str(tmp_path / "vault"))
        monkeypatch.setenv("PALPAS_MPW", "correct horse")
        newest = max(devices, key=lambda d: d["enrolled_at"])
        assert run_cli(env, "revoke", newest["fingerprint"]) == 0
        capsys.readouterr()

        monkeypatch.setenv("PALPAS_VAULT", str(tmp_path / "vault-b"))
        monkeypatch.setenv("PALPAS_MPW", "other password")
        assert run_cli(env, "login", URL) == 3

    def test_setup_twice(self, env, capsys):
        assert run_cli(env, "setup") == 0
        assert run_cli(env, "setup") == 1
        assert "already exists" in capsys.readouterr().err


class TestExitCodes:
    def test_login_without_account_is_not_found(self, env, capsys):
        run_cli(env, "setup")
        capsys.readouterr()
        assert run_cli(env, "login", "https://nowhere.example") == 4
        assert "no account at this service" in capsys.readouterr().err

    def test_add_without_policy_is_policy_missing(self, env, capsys):
        run_cli(env, "setup")
        capsys.readouterr()
        assert run_cli(env, "add", "https://no-policy.example", "alice") == 6
        err = capsys.readouterr().err
        assert "policy submit" in err

    def test_wrong_master_password_is_auth_error(self, env, capsys, monkeypatch):
        run_cli(env, "setup")
        monkeypatch.setenv("PALPAS_MPW", "wrong")
        assert run_cli(env, "login", URL) == 3

    def test_unreachable_service_is_network_error(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("PALPAS_MPW", "x")
        monkeypatch.setenv("PALPAS_VAULT", str(tmp_path / "vault"))
        code = cli.run(
            ["--sss", "https://127.0.0.1:1", "--pps", "http://127.0.0.1:1", "setup"]
        )
        assert code == 5

    def test_usage_error(self, env):
        with pytest.raises(SystemExit) as excinfo:
            run_cli(env, "frobnicate")
        assert excinfo.value.code == 2

    def test_revoke_unknown_fingerprint(self, env, capsys):
        run_cli(env, "setup")
        capsys.readouterr()
        assert run_cli(env, "revoke", "00" * 32) == 4


class TestPolicyCommands:
    def test_submit_and_get(self, env, tmp_path, capsys):
        url = "https://fresh-policy.example"
        document = tmp_path / "policy.xml"
        document.write_bytes(STANDARD_POLICY_XML)
        assert run_cli(env, "policy", "submit", url, str(document)) == 0
        assert "pending" in capsys.readouterr().out

        # distinct client ids come from distinct vault directories
        for peer in ("p2", "p3"):
            flags = [*env]
            assert (
                cli.run(
                    [
                        *flags,
                        "--vault",
                        str(tmp_path / peer / "vault"),
                        "policy",
                        "submit",
                        url,
                        str(document),
                    ]
                )
                == 0
            )
        out = capsys.readouterr().out
        assert "published" in out

        assert run_cli(env, "--json", "policy", "get", url) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["version"] == 1
        assert parse_policy(payload["policy_xml"].encode()) == parse_policy(STANDARD_POLICY_XML)

    def test_get_missing_policy(self, env, capsys):
        assert run_cli(env, "policy", "get", "https://missing.example") == 6


class TestJsonMode:
    def test_every_command_emits_parseable_json(self, env, tmp_path, capsys, monkeypatch):
        url = "https://json-mode.example"
        document = tmp_path / "policy.xml"
        document.write_bytes(STANDARD_POLICY_XML)
        for peer in ("j1", "j2", "j3"):
            cli.run([*env, "--vault", str(tmp_path / peer / "vault"),
                     "policy", "submit", url, str(document)])
        capsys.readouterr()

        def emit(*command) -> dict:
            assert run_cli(["--json", *env], *command) == 0
            return json.loads(capsys.readouterr().out)

        assert emit("setup")["command"] == "setup"
        assert emit("policy", "submit", url, str(document))["status"] == "published"
        assert emit("policy", "get", url)["version"] == 1
        assert emit("add", url, "alice")["password"]
        assert emit("login", url)["accounts"]
        assert emit("update", url)["state"] == "proposed"
        assert emit("update", url, "--abandon")["state"] == "abandoned"
        bundle = emit("export-bundle")["bundle"]
        devices = emit("devices")["devices"]
        assert len(devices) == 1
        monkeypatch.setenv("PALPAS_VAULT", str(tmp_path / "vault-import"))
        imported = emit("import-bundle", bundle)
        assert imported["fingerprint"]
        monkeypatch.setenv("PALPAS_VAULT", str(tmp_path / "vault"))
        assert emit("revoke", imported["fingerprint"])["fingerprint"]


class TestOutputHygiene:
    def test_passwords_only_on_stdout(self, env, capsys):
        run_cli(env, "setup")
        run_cli(env, "add", URL, "alice")
        captured = capsys.readouterr()
        password = captured.out.strip().splitlines()[-1]
        assert password not in captured.err
        run_cli(env, "login", URL)
        captured = capsys.readouterr()
        assert password in captured.out
        assert password not in captured.err
