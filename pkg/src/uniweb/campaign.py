"""Batch campaign runner: queries every eligible URL for one wave.

Queries run concurrently up to the policy's parallelism, globally paced by
the rate limit. Per-URL failures are retried with exponential backoff and
recorded as flagged zero records when retries run out; a permanent source
failure aborts the campaign with the completed records attached so a rerun
can resume.
"""

from __future__ import annotations

import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping

from .errors import CampaignAbortedError, SourcePermanentError, SourceUnavailableError, ValidationError
from .measurement import (
    FLAG_UNAVAILABLE,
    MeasurementSource,
    ReplayStore,
    Snapshot,
    SnapshotRecord,
    Wave,
)
from .registry import Registry


@dataclass(frozen=True)
class CampaignPolicy:
    parallelism: int = 4
    rate_limit: float | None = None  # queries per second, None = unthrottled
    retries: int = 3
    backoff_base: float = 0.5  # seconds, doubled per attempt


class RateLimiter:
    """Global pacing: at most rate_limit query slots per second."""

    def __init__(self, rate_limit: float | None):
        self._interval = 1.0 / rate_limit if rate_limit else 0.0
        self._lock = threading.Lock()
        self._next_slot = 0.0

    def acquire(self) -> None:
        if not self._interval:
            return
        with self._lock:
            now = time.monotonic()
            slot = max(now, self._next_slot)
            self._next_slot = slot + self._interval
        delay = slot - now
        if delay > 0:
            time.sleep(delay)


def eligible_urls(registry: Registry, wave: Wave) -> list[str]:
    """Admitted unit URLs of units already measurable, plus general URLs."""
    urls = list(registry.general_url_owner())
    for unit in registry.units.values():
        if unit.excluded or unit.first_wave > wave.index:
            continue
        urls.extend(u.normalized for u in unit.urls)
    return sorted(urls)


def run_campaign(
    registry: Registry,
    source: MeasurementSource,
    wave: Wave,
    policy: CampaignPolicy = CampaignPolicy(),
    resume: Mapping[str, SnapshotRecord] | None = None,
) -> Snapshot:
    """Measure every eligible URL once and assemble the wave's snapshot."""
    urls = eligible_urls(registry, wave)
    records: dict[str, SnapshotRecord] = dict(resume) if resume else {}
    pending = [u for u in urls if u not in records]
    limiter = RateLimiter(policy.rate_limit)
    parallelism = 1 if source.single_query else max(1, policy.parallelism)
    abort = threading.Event()
    abort_reason: list[str] = []
    lock = threading.Lock()

    def query(url: str) -> None:
        if abort.is_set():
            return
        attempt = 0
        while True:
            limiter.acquire()
            if abort.is_set():
                return
            try:
                size, size_flags = source.page_count(url, wave)
                vis, vis_flags = source.visibility(url, wave)
                label = source.identity
                if isinstance(source, ReplayStore):
                    label = source.source_label(url, wave)
                record = SnapshotRecord(
                    page_count=size,
                    visibility=vis,
                    source=label,
                    flags=tuple(dict.fromkeys(size_flags + vis_flags)),
                )
                break
            except SourcePermanentError as exc:
                abort.set()
                with lock:
                    abort_reason.append(str(exc))
                return
            except SourceUnavailableError as exc:
                attempt += 1
                if attempt >= policy.retries:
                    record = SnapshotRecord(
                        0, 0, source=source.identity, flags=(FLAG_UNAVAILABLE,)
                    )
                    break
                time.sleep(policy.backoff_base * (2 ** (attempt - 1)))
        with lock:
            records[url] = record

    if parallelism == 1:
        for url in pending:
            query(url)
            if abort.is_set():
                break
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            list(pool.map(query, pending))

    if abort.is_set():
        raise CampaignAbortedError(
            f"source '{source.identity}' permanently unavailable during wave "
            f"'{wave.label}': {abort_reason[0] if abort_reason else 'unknown'}",
            completed=dict(records),
        )
    return Snapshot(wave=wave, records=records, registry_hash=registry.version_hash)


def run_waves(
    registry: Registry,
    source: MeasurementSource,
    waves: list[Wave],
    policy: CampaignPolicy = CampaignPolicy(),
) -> list[Snapshot]:
    if [w.index for w in waves] != sorted(w.index for w in waves):
        raise ValidationError("waves must be ordered by index")
    return [run_campaign(registry, source, wave, policy) for wave in waves]
