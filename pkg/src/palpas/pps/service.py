"""The password policy service: community-submitted policies become
fetchable once enough distinct submitters agree on the same document.

Submissions are validated structurally, gated on attainable entropy, and
counted by canonical serialization: a policy publishes when the threshold
number of distinct submitters have submitted byte-identical canonical forms.
Each publication bumps the service's version for that URL; ratings are
display-only aggregates.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field, replace
from typing import Callable

from ..errors import NotFoundError, PolicyRejectedError
from ..policy import PasswordPolicy, max_entropy_bits, parse_policy, serialize_policy

PUBLICATION_THRESHOLD = 3
MIN_ENTROPY_BITS = 40.0


@dataclass(frozen=True)
class PublishedPolicy:
    service_url: str
    version: int
    xml: bytes
    published_at: float
    rating_sum: int = 0
    rating_count: int = 0

    @property
    def policy(self) -> PasswordPolicy:
        parsed = parse_policy(self.xml)
        return replace(parsed, version=self.version)

    @property
    def mean_rating(self) -> float | None:
        if not self.rating_count:
            return None
        return self.rating_sum / self.rating_count


@dataclass
class _UrlState:
    votes: dict[str, bytes] = field(default_factory=dict)  # submitter -> canonical form
    published: list[PublishedPolicy] = field(default_factory=list)
    ratings: dict[tuple[int, str], int] = field(default_factory=dict)  # (version, submitter)


class PolicyService:
    def __init__(
        self,
        threshold: int = PUBLICATION_THRESHOLD,
        min_entropy_bits: float = MIN_ENTROPY_BITS,
        clock: Callable[[], float] = time.time,
    ):
        self._threshold = threshold
        self._min_entropy = min_entropy_bits
        self._clock = clock
        self._lock = threading.Lock()
        self._urls: dict[str, _UrlState] = {}

    def submit_policy(self, service_url: str, document: bytes | str, submitter: str) -> str:
        """Record one submitter's policy for a URL; returns "published" when
        the submitted form is (or just became) the live policy, else
        "pending"."""
        if not service_url:
            raise ValueError("service_url must not be empty")
        if not submitter:
            raise ValueError("submitter must not be empty")
        policy = parse_policy(document)
        entropy = max_entropy_bits(policy)
        if entropy < self._min_entropy:
            raise PolicyRejectedError(
                f"policy allows at most {entropy:.1f} bits of entropy; "
                f"minimum is {self._min_entropy:.0f}"
            )
        canonical = serialize_policy(policy)
        with self._lock:
            state = self._urls.setdefault(service_url, _UrlState())
            current = state.published[-1] if state.published else None
            if current is not None and current.xml == canonical:
                return "published"
            state.votes[submitter] = canonical
            support = sum(1 for form in state.votes.values() if form == canonical)
            if support >= self._threshold:
                state.published.append(
                    PublishedPolicy(
                        service_url=service_url,
                        version=(current.version if current else 0) + 1,
                        xml=canonical,
                        published_at=self._clock(),
                    )
                )
                state.votes.clear()
                return "published"
            return "pending"

    def fetch_policy(self, service_url: str, min_version: int | None = None) -> PublishedPolicy | None:
        """Latest published policy, or None; with min_version, only a strictly
        newer version is returned (the no-update case is None, not an error)."""
        with self._lock:
            state = self._urls.get(service_url)
            if state is None or not state.published:
                return None
            latest = state.published[-1]
            if min_version is not None and latest.version <= min_version:
                return None
            return latest

    def rate_policy(self, service_url: str, version: int, rating: int, submitter: str) -> None:
        """One rating per (submitter, url, version); resubmitting replaces it."""
        if not 1 <= rating <= 5:
            raise ValueError("rating must be between 1 and 5")
        if not submitter:
            raise ValueError("submitter must not be empty")
        with self._lock:
            state = self._urls.get(service_url)
            published = None
            if state is not None:
                for entry in state.published:
                    if entry.version == version:
                        published = entry
                        break
            if state is None or published is None:
                raise NotFoundError(f"no published policy {service_url!r} version {version}")
            state.ratings[(version, submitter)] = rating
            relevant = [
                value for (v, _), value in state.ratings.items() if v == version
            ]
            index = state.published.index(published)
            state.published[index] = replace(
                published, rating_sum=sum(relevant), rating_count=len(relevant)
            )
