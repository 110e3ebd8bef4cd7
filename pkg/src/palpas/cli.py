"""Command-line interface.

One command per protocol flow plus service administration:

    palpas setup
    palpas export-bundle
    palpas import-bundle
    palpas add <url> <username>
    palpas login <url>
    palpas update <url> [--commit | --abandon] [--handle H]
    palpas revoke <fingerprint> [--confirm-last]
    palpas devices
    palpas policy submit <url> <file>
    palpas policy get <url>

The master password is read from an interactive no-echo prompt, or from
PALPAS_MPW (test automation only: environment variables leak into process
listings and shell history). Exit codes: 0 success, 2 usage, 3
authentication, 4 not found, 5 network, 6 missing policy, 1 anything else.
"""

from __future__ import annotations

import argparse
import getpass
import json
import os
import sys
from pathlib import Path

from . import errors
from .client import PalpasClient
from .pps.transport import HttpPpsTransport
from .sss.transport import HttpSssTransport

EXIT_OK = 0
EXIT_OTHER = 1
EXIT_USAGE = 2
EXIT_AUTH = 3
EXIT_NOT_FOUND = 4
EXIT_NETWORK = 5
EXIT_POLICY_MISSING = 6

DEFAULT_VAULT = "~/.palpas/vault"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="palpas", description=__doc__.split("\n")[0])
    parser.add_argument("--vault", help="vault file path (or PALPAS_VAULT)")
    parser.add_argument("--sss", help="salt synchronization service address (https://...)")
    parser.add_argument("--pps", help="password policy service address (http[s]://...)")
    parser.add_argument("--json", action="store_true", help="machine-readable output")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("setup", help="initialize this device and create an account")
    sub.add_parser("export-bundle", help="emit a transfer bundle for a new device")

    p = sub.add_parser("import-bundle", help="initialize this device from a bundle")
    p.add_argument("bundle", nargs="?", help="bundle text (read from stdin when omitted)")

    p = sub.add_parser("add", help="create and store a password for a new service account")
    p.add_argument("url")
    p.add_argument("username")
    p.add_argument("--allow-multiple", action="store_true", help="add another account at the same service")

    p = sub.add_parser("login", help="recompute the password(s) for a service")
    p.add_argument("url")

    p = sub.add_parser("update", help="two-phase password change")
    p.add_argument("url")
    p.add_argument("--handle", help="record handle when the service has several accounts")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--commit", action="store_true", help="push the proposed change")
    group.add_argument("--abandon", action="store_true", help="drop the proposed change")

    p = sub.add_parser("revoke", help="revoke a device's access")
    p.add_argument("fingerprint")
    p.add_argument("--confirm-last", action="store_true", help="allow revoking the final active device")

    sub.add_parser("devices", help="list enrolled devices")

    p = sub.add_parser("policy", help="password policy service operations")
    policy_sub = p.add_subparsers(dest="policy_command", required=True)
    ps = policy_sub.add_parser("submit", help="submit a policy document for a service")
    ps.add_argument("url")
    ps.add_argument("file")
    pg = policy_sub.add_parser("get", help="fetch the published policy for a service")
    pg.add_argument("url")
    return parser


def _master_password() -> str:
    mpw = os.environ.get("PALPAS_MPW")
    if mpw:
        return mpw
    return getpass.getpass("Master password: ")


def _make_client(args) -> PalpasClient:
    vault_path = args.vault or os.environ.get("PALPAS_VAULT") or DEFAULT_VAULT
    if not args.sss:
        raise errors.TransportError("no sync service address; pass --sss https://...")
    if not args.pps:
        raise errors.TransportError("no policy service address; pass --pps http[s]://...")
    sss = HttpSssTransport(args.sss)
    vault_file = Path(vault_path).expanduser()
    pps = HttpPpsTransport(args.pps, client_id=_policy_client_id(vault_file))
    return PalpasClient(vault_file, sss, pps)


def _policy_client_id(vault_file: Path) -> str:
    """Stable, self-chosen, non-identifying submitter id for the policy
    service, kept beside the vault."""
    id_file = vault_file.parent / "policy-client-id"
    if id_file.exists():
        return id_file.read_text().strip()
    import secrets

    client_id = secrets.token_hex(8)
    id_file.parent.mkdir(parents=True, exist_ok=True)
    id_file.write_text(client_id + "\n")
    return client_id


def _emit(args, payload: dict, plain: str) -> None:
    if args.json:
        print(json.dumps(payload, sort_keys=True))
    else:
        print(plain)


def _run_command(args) -> int:
    client = _make_client(args)

    if args.command == "setup":
        fingerprint = client.setup(_master_password())
        _emit(
            args,
            {"command": "setup", "fingerprint": fingerprint},
            f"device enrolled; fingerprint {fingerprint}",
        )
        return EXIT_OK

    if args.command == "export-bundle":
        text = client.export_bundle(_master_password())
        _emit(args, {"command": "export-bundle", "bundle": text}, text)
        return EXIT_OK

    if args.command == "import-bundle":
        text = args.bundle if args.bundle else sys.stdin.read()
        fingerprint = client.import_bundle(text.strip(), _master_password())
        _emit(
            args,
            {"command": "import-bundle", "fingerprint": fingerprint},
            f"device enrolled; fingerprint {fingerprint}",
        )
        return EXIT_OK

    if args.command == "add":
        password = client.add_password(
            _master_password(), args.url, args.username, allow_multiple=args.allow_multiple
        )
        _emit(args, {"command": "add", "url": args.url, "password": password}, password)
        return EXIT_OK

    if args.command == "login":
        results = client.login(_master_password(), args.url)
        payload = {
            "command": "login",
            "url": args.url,
            "accounts": [
                {"username": r.username, "password": r.password, "handle": r.handle}
                for r in results
            ],
        }
        plain = "\n".join(
            f"username: {r.username}\npassword: {r.password}"
            + (f"\nhandle: {r.handle}" if len(results) > 1 else "")
            for r in results
        )
        _emit(args, payload, plain)
        return EXIT_OK

    if args.command == "update":
        mpw = _master_password()
        if args.abandon:
            client.abandon_update(mpw, args.url, handle=args.handle)
            _emit(
                args,
                {"command": "update", "url": args.url, "state": "abandoned"},
                "proposed update abandoned; the old password stays active",
            )
            return EXIT_OK
        if args.commit:
            proposal = client.commit_update(mpw, args.url, handle=args.handle)
            state = "committed"
            hint = "change committed; all devices now derive the new password"
        else:
            proposal = client.propose_update(mpw, args.url, handle=args.handle)
            state = "proposed"
            hint = (
                "change the password at the service, then run again with --commit\n"
                "(or --abandon to keep the old password)"
            )
        _emit(
            args,
            {
                "command": "update",
                "url": args.url,
                "state": state,
                "handle": proposal.handle,
                "old_password": proposal.old_password,
                "new_password": proposal.new_password,
            },
            f"old password: {proposal.old_password}\n"
            f"new password: {proposal.new_password}\n{hint}",
        )
        return EXIT_OK

    if args.command == "revoke":
        client.revoke(_master_password(), args.fingerprint, confirm_last=args.confirm_last)
        _emit(
            args,
            {"command": "revoke", "fingerprint": args.fingerprint},
            f"revoked {args.fingerprint}",
        )
        return EXIT_OK

    if args.command == "devices":
        devices = client.list_devices(_master_password())
        plain = "\n".join(
            f"{d['fingerprint']}  {'revoked' if d['revoked'] else 'active'}" for d in devices
        )
        _emit(args, {"command": "devices", "devices": devices}, plain)
        return EXIT_OK

    if args.command == "policy":
        pps = HttpPpsTransport(args.pps, client_id=_policy_client_id(
            Path(args.vault or os.environ.get("PALPAS_VAULT") or DEFAULT_VAULT).expanduser()
        ))
        if args.policy_command == "submit":
            document = Path(args.file).read_bytes()
            status = pps.submit_policy(args.url, document)
            _emit(
                args,
                {"command": "policy-submit", "url": args.url, "status": status},
                f"submission recorded; policy is {status}",
            )
            return EXIT_OK
        if args.policy_command == "get":
            fetched = pps.fetch_policy(args.url)
            if fetched is None:
                raise errors.PolicyMissingError(f"no published policy for {args.url}")
            xml, version = fetched
            if args.json:
                print(
                    json.dumps(
                        {
                            "command": "policy-get",
                            "url": args.url,
                            "version": version,
                            "policy_xml": xml.decode("utf-8"),
                        },
                        sort_keys=True,
                    )
                )
            else:
                print(f"version: {version}", file=sys.stderr)
                sys.stdout.write(xml.decode("utf-8"))
                if not xml.endswith(b"\n"):
                    print()
            return EXIT_OK

    raise AssertionError(f"unhandled command {args.command}")


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _run_command(args)
    except (errors.AuthenticationError,) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_AUTH
    except (errors.NotFoundError, errors.NoAccountError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_FOUND
    except errors.PolicyMissingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print("hint: palpas policy submit <url> <policy.xml>", file=sys.stderr)
        return EXIT_POLICY_MISSING
    except errors.TransportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NETWORK
    except errors.PalpasError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OTHER
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OTHER


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
