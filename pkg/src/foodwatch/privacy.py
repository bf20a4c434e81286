"""Anonymization, contribution capping, and noisy count release.

User ids are replaced by a keyed pseudorandom function before anything else
touches the data, links are capped to one per (user, restaurant) so each
released count has L1 sensitivity 1, and counts leave the pipeline only with
Laplace noise added and small cells suppressed. Noise draws are keyed by
(seed, restaurant_id) with a counter-based construction, so parallel release
produces exactly the serial output.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

from .errors import DataError
from .locmodel import ExposureLink, RestaurantAggregate, wilson_lower_bound
from .logdata import Dataset, QueryEvent, VisitEvent
from .seeding import make_rng


@dataclass(frozen=True)
class PrivacyPolicy:
    epsilon: float = 1.0  # budget per released count
    suppress_below: int = 30
    hash_key: int = 0  # 128-bit secret; zero is rejected by anonymize_ids
    sensitivity: float = 1.0  # fixed by contribution capping

    def __post_init__(self) -> None:
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.suppress_below < 0:
            raise ValueError("suppress_below must be >= 0")


@dataclass(frozen=True)
class ReleasedAggregate:
    restaurant_id: str
    suppressed: bool
    noised_visitors: float | None
    noised_affected: float | None
    released_proportion: float | None

    @property
    def visitors(self) -> float:
        if self.suppressed:
            raise DataError("suppressed aggregate exposes no counts")
        return self.noised_visitors

    @property
    def signal(self) -> float:
        """Wilson lower bound recomputed from the released counts."""
        if self.suppressed:
            raise DataError("suppressed aggregate exposes no counts")
        trials = max(self.noised_visitors, 1.0)
        successes = min(max(self.noised_affected, 0.0), trials)
        return wilson_lower_bound(successes, trials)


def pseudonymize(hash_key: int, user_id: str) -> str:
    """Keyed 128-bit pseudonym, hex encoded; consistent within a key."""
    if hash_key == 0:
        raise ValueError("hash_key must be non-zero")
    key_bytes = (hash_key & (2**128 - 1)).to_bytes(16, "big")
    return hashlib.blake2b(
        user_id.encode("utf-8"), key=key_bytes, digest_size=16
    ).hexdigest()


def anonymize_ids(dataset: Dataset, hash_key: int) -> Dataset:
    """Replace raw user ids with keyed pseudonyms across all streams.

    The same raw id maps to the same pseudonym in the query and visit
    streams, so downstream joins are unaffected.
    """
    if hash_key == 0:
        raise ValueError("hash_key must be non-zero")
    cache: dict[str, str] = {}

    def pseudo(user_id: str) -> str:
        if user_id not in cache:
            cache[user_id] = pseudonymize(hash_key, user_id)
        return cache[user_id]

    queries = tuple(
        QueryEvent(user_id=pseudo(q.user_id), ts=q.ts, text=q.text, results=q.results)
        for q in dataset.queries
    )
    visits = tuple(
        VisitEvent(
            user_id=pseudo(v.user_id),
            restaurant_id=v.restaurant_id,
            entry_ts=v.entry_ts,
            exit_ts=v.exit_ts,
        )
        for v in dataset.visits
    )
    return replace(dataset, queries=queries, visits=visits)


def cap_contributions(links: Sequence[ExposureLink]) -> tuple[ExposureLink, ...]:
    """At most one link per (user, restaurant), keeping the earliest visit.

    Idempotent; guarantees any single user moves any released count by at
    most one.
    """
    kept: dict[tuple[str, str], ExposureLink] = {}
    for link in links:
        key = (link.user_id, link.restaurant_id)
        prev = kept.get(key)
        if prev is None or link.visit_exit_ts < prev.visit_exit_ts:
            kept[key] = link
    return tuple(kept.values())


def release(
    aggregates: Mapping[str, RestaurantAggregate],
    policy: PrivacyPolicy,
    rng_seed: int,
) -> dict[str, ReleasedAggregate]:
    """Laplace-noised counts per restaurant, with small-count suppression.

    Each count gets an independent Laplace(sensitivity/epsilon) draw. Noised
    counts stay real-valued so the released proportion is unbiased; the
    proportion is clamped to [0, 1].
    """
    scale = policy.sensitivity / policy.epsilon
    released: dict[str, ReleasedAggregate] = {}
    for rid in sorted(aggregates):
        agg = aggregates[rid]
        rng = make_rng(rng_seed, "release", rid)
        noised_visitors = agg.visitors + rng.laplace(0.0, scale)
        noised_affected = agg.affected + rng.laplace(0.0, scale)
        if noised_visitors < policy.suppress_below:
            released[rid] = ReleasedAggregate(
                restaurant_id=rid,
                suppressed=True,
                noised_visitors=None,
                noised_affected=None,
                released_proportion=None,
            )
        else:
            proportion = min(max(noised_affected / max(noised_visitors, 1.0), 0.0), 1.0)
            released[rid] = ReleasedAggregate(
                restaurant_id=rid,
                suppressed=False,
                noised_visitors=noised_visitors,
                noised_affected=noised_affected,
                released_proportion=proportion,
            )
    return released
