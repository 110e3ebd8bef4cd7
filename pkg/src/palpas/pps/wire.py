"""RESTful interface of the policy service.

    GET  /policies?url=...&min_version=N   latest policy as an XML body;
                                           version and rating aggregates in
                                           X-Policy-* response headers
    POST /policies?url=...                 submit an XML policy document;
                                           submitter identity in X-Client-Id
    POST /policies/{url}/{version}/ratings JSON body {"rating": 1..5,
                                           "submitter": ...}

Policies travel in their XML format; metadata rides in headers or JSON.
"""

from __future__ import annotations

import json
from urllib.parse import parse_qs, unquote, urlsplit

from ..errors import NotFoundError, ProtocolError
from ..jsonwire import error_response
from .service import PolicyService

_JSON = "application/json"
_XML = "application/xml"


def handle_request(
    service: PolicyService,
    method: str,
    target: str,
    headers: dict[str, str],
    body: bytes,
) -> tuple[int, str, dict[str, str], bytes]:
    """Dispatch one request; returns (status, content-type, headers, body)."""
    try:
        return _dispatch(service, method.upper(), target, headers, body)
    except Exception as exc:  # noqa: BLE001 - wire boundary maps all failures
        status, payload = error_response(exc)
        return status, _JSON, {}, json.dumps(payload).encode("utf-8")


def _json_body(status: int, payload: dict) -> tuple[int, str, dict[str, str], bytes]:
    return status, _JSON, {}, json.dumps(payload).encode("utf-8")


def _dispatch(
    service: PolicyService,
    method: str,
    target: str,
    headers: dict[str, str],
    body: bytes,
) -> tuple[int, str, dict[str, str], bytes]:
    split = urlsplit(target)
    path = split.path
    query = {k: v[0] for k, v in parse_qs(split.query).items()}
    header_map = {k.lower(): v for k, v in headers.items()}

    if path == "/policies" and method == "GET":
        url = query.get("url")
        if not url:
            raise ProtocolError("query parameter 'url' is required")
        min_version = None
        if "min_version" in query:
            try:
                min_version = int(query["min_version"])
            except ValueError:
                raise ProtocolError("min_version must be an integer") from None
        published = service.fetch_policy(url, min_version=min_version)
        if published is None:
            raise NotFoundError(f"no published policy for {url!r}")
        meta = {
            "X-Policy-Version": str(published.version),
            "X-Policy-Published-At": repr(published.published_at),
            "X-Rating-Sum": str(published.rating_sum),
            "X-Rating-Count": str(published.rating_count),
        }
        return 200, _XML, meta, published.xml

    if path == "/policies" and method == "POST":
        url = query.get("url")
        if not url:
            raise ProtocolError("query parameter 'url' is required")
        submitter = header_map.get("x-client-id")
        if not submitter:
            raise ProtocolError("X-Client-Id header is required")
        status = service.submit_policy(url, body, submitter)
        return _json_body(200, {"status": status})

    parts = path.split("/")
    if (
        method == "POST"
        and len(parts) == 5
        and parts[1] == "policies"
        and parts[4] == "ratings"
    ):
        url = unquote(parts[2])
        try:
            version = int(parts[3])
        except ValueError:
            raise ProtocolError("version must be an integer") from None
        try:
            payload = json.loads(body.decode("utf-8")) if body else {}
        except (ValueError, UnicodeDecodeError) as exc:
            raise ProtocolError("request body is not valid JSON") from exc
        rating = payload.get("rating")
        submitter = payload.get("submitter")
        if not isinstance(rating, int):
            raise ProtocolError("field 'rating' must be an integer")
        if not isinstance(submitter, str) or not submitter:
            raise ProtocolError("field 'submitter' is required")
        service.rate_policy(url, version, rating, submitter)
        return _json_body(200, {"rated": True})

    return _json_body(
        404, {"error": {"code": "not_found", "message": f"no endpoint {method} {path}"}}
    )
