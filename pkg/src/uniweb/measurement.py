"""Measurement waves, snapshots, snapshot files and measurement sources.

A source answers two questions about a URL: how many pages a search index
holds under its scope (page count) and how many external pages link into
that scope (visibility, self-scope links excluded). The live 2010-era
search API is long gone; sources here replay stored snapshots or serve
synthetic systems, behind one contract.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Protocol, runtime_checkable

from .errors import SchemaError, SourceUnavailableError, ValidationError

PAGE_COUNT = "page_count"
VISIBILITY = "visibility"

FLAG_MISSING = "missing"
FLAG_UNAVAILABLE = "unavailable"

# Policy for URLs a replay source has never seen.
MISSING_ERROR = "error"
MISSING_ZERO_WITH_FLAG = "zero_with_flag"

SNAPSHOT_CSV_COLUMNS = ("wave_label", "url", "page_count", "visibility", "source", "flags")

_WAVE_LABEL_RE = re.compile(r"^(\d{4})-(\d{2})$")


@dataclass(frozen=True, order=True)
class Wave:
    """One dated measurement campaign, e.g. index 1, label '2010-03'."""

    index: int
    label: str

    def __post_init__(self):
        if self.index < 1:
            raise ValidationError(f"wave index must be >= 1, got {self.index}")
        if not _WAVE_LABEL_RE.match(self.label):
            raise ValidationError(f"wave label must look like YYYY-MM, got '{self.label}'")

    def month_number(self) -> int:
        year, month = self.label.split("-")
        return int(year) * 12 + int(month)


def make_waves(labels: Iterable[str]) -> list[Wave]:
    """Build a strictly increasing wave sequence from date labels."""
    waves = [Wave(index=i, label=label) for i, label in enumerate(labels, start=1)]
    for prev, cur in zip(waves, waves[1:]):
        if cur.month_number() <= prev.month_number():
            raise ValidationError(
                f"wave labels must strictly increase in time: '{prev.label}' "
                f"then '{cur.label}'"
            )
    return waves


def months_between(first: Wave, last: Wave) -> int:
    return last.month_number() - first.month_number()


@dataclass(frozen=True)
class SnapshotRecord:
    page_count: int
    visibility: int
    source: str = ""
    flags: tuple[str, ...] = ()
    queried_at: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.page_count < 0 or self.visibility < 0:
            raise ValidationError("snapshot counts must be non-negative")


@dataclass
class Snapshot:
    wave: Wave
    records: dict[str, SnapshotRecord]
    registry_hash: str = ""

    def totals(self) -> tuple[int, int]:
        size = sum(r.page_count for r in self.records.values())
        vis = sum(r.visibility for r in self.records.values())
        return size, vis


@runtime_checkable
class MeasurementSource(Protocol):
    """Contract every measurement backend satisfies.

    Implementations must be deterministic for a fixed state: repeated
    identical queries return identical counts. `single_query` sources are
    never queried concurrently by the campaign runner.
    """

    identity: str
    capabilities: frozenset[str]
    single_query: bool

    def page_count(self, url: str, wave: Wave) -> tuple[int, tuple[str, ...]]: ...

    def visibility(self, url: str, wave: Wave) -> tuple[int, tuple[str, ...]]: ...


def query_page_count(source: MeasurementSource, url: str, wave: Wave) -> int:
    """Pages indexed under the URL's exact scope for one wave."""
    if PAGE_COUNT not in source.capabilities:
        raise SourceUnavailableError(f"source '{source.identity}' cannot measure page counts")
    count, _ = source.page_count(url, wave)
    return count


def query_visibility(source: MeasurementSource, url: str, wave: Wave) -> int:
    """External inlinks to the URL's scope (self-scope links excluded)."""
    if VISIBILITY not in source.capabilities:
        raise SourceUnavailableError(f"source '{source.identity}' cannot measure visibility")
    count, _ = source.visibility(url, wave)
    return count


class ReplayStore:
    """Snapshots loaded from disk, served back as a measurement source."""

    def __init__(
        self,
        snapshots: Iterable[Snapshot],
        missing_policy: str = MISSING_ZERO_WITH_FLAG,
        identity: str = "replay",
    ):
        self.identity = identity
        self.capabilities = frozenset((PAGE_COUNT, VISIBILITY))
        self.single_query = False
        self.missing_policy = missing_policy
        self._by_label: dict[str, Snapshot] = {}
        for snap in snapshots:
            if snap.wave.label in self._by_label:
                raise ValidationError(f"duplicate replay snapshot for wave '{snap.wave.label}'")
            self._by_label[snap.wave.label] = snap

    @classmethod
    def from_dir(cls, directory: str | Path, **kwargs) -> "ReplayStore":
        directory = Path(directory)
        snaps = [
            load_snapshot(p)
            for p in sorted(directory.iterdir())
            if p.suffix.lower() in (".csv", ".json") and p.name != "manifest.json"
        ]
        return cls(snaps, **kwargs)

    def wave_labels(self) -> list[str]:
        return sorted(self._by_label)

    def record_for(self, url: str, wave: Wave) -> SnapshotRecord:
        snap = self._by_label.get(wave.label)
        if snap is None:
            raise SourceUnavailableError(
                f"replay store '{self.identity}' has no snapshot for wave '{wave.label}'"
            )
        record = snap.records.get(url)
        if record is None:
            if self.missing_policy == MISSING_ERROR:
                raise SourceUnavailableError(
                    f"replay store '{self.identity}' has no record for '{url}' "
                    f"in wave '{wave.label}'"
                )
            return SnapshotRecord(0, 0, source=self.identity, flags=(FLAG_MISSING,))
        return record

    def page_count(self, url: str, wave: Wave) -> tuple[int, tuple[str, ...]]:
        rec = self.record_for(url, wave)
        return rec.page_count, rec.flags

    def visibility(self, url: str, wave: Wave) -> tuple[int, tuple[str, ...]]:
        rec = self.record_for(url, wave)
        return rec.visibility, rec.flags

    def source_label(self, url: str, wave: Wave) -> str:
        rec = self.record_for(url, wave)
        return rec.source or self.identity


def save_snapshot(snapshot: Snapshot, path: str | Path, header_comment: str | None = None) -> None:
    """Write a snapshot in the documented CSV or JSON layout (by extension)."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        doc = {
            "wave": {"index": snapshot.wave.index, "label": snapshot.wave.label},
            "registry_hash": snapshot.registry_hash,
            "records": [
                {
                    "url": url,
                    "page_count": rec.page_count,
                    "visibility": rec.visibility,
                    "source": rec.source,
                    "flags": list(rec.flags),
                    "queried_at": rec.queried_at,
                }
                for url, rec in sorted(snapshot.records.items())
            ],
        }
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return
    with path.open("w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(SNAPSHOT_CSV_COLUMNS)
        for url, rec in sorted(snapshot.records.items()):
            writer.writerow(
                [
                    snapshot.wave.label,
                    url,
                    rec.page_count,
                    rec.visibility,
                    rec.source,
                    "|".join(rec.flags),
                ]
            )


def load_snapshot(path: str | Path, wave_index: int | None = None) -> Snapshot:
    """Load a snapshot file; the wave index defaults to the stored one or 1."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        doc = json.loads(path.read_text(encoding="utf-8"))
        wave = Wave(index=doc["wave"]["index"], label=doc["wave"]["label"])
        records = {
            r["url"]: SnapshotRecord(
                page_count=int(r["page_count"]),
                visibility=int(r["visibility"]),
                source=r.get("source", ""),
                flags=tuple(r.get("flags", ())),
                queried_at=r.get("queried_at"),
            )
            for r in doc["records"]
        }
        return Snapshot(wave=wave, records=records, registry_hash=doc.get("registry_hash", ""))

    label: str | None = None
    records = {}
    with path.open(newline="", encoding="utf-8") as fh:
        first = fh.readline()
        if not first.startswith("#"):
            fh.seek(0)
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("empty snapshot file", row=1)
        if tuple(h.strip() for h in header) != SNAPSHOT_CSV_COLUMNS:
            raise SchemaError(
                f"bad snapshot header: expected {','.join(SNAPSHOT_CSV_COLUMNS)}", row=1
            )
        for number, values in enumerate(reader, start=2):
            if not values or all(not v.strip() for v in values):
                continue
            if len(values) != len(SNAPSHOT_CSV_COLUMNS):
                raise SchemaError(f"expected {len(SNAPSHOT_CSV_COLUMNS)} fields", row=number)
            row_label, url, size, vis, source, flags = (v.strip() for v in values)
            if label is None:
                label = row_label
            elif row_label != label:
                raise SchemaError(
                    f"mixed wave labels in one snapshot: '{label}' and '{row_label}'",
                    row=number,
                )
            try:
                record = SnapshotRecord(
                    page_count=int(size),
                    visibility=int(vis),
                    source=source,
                    flags=tuple(f for f in flags.split("|") if f),
                )
            except ValueError as exc:
                raise SchemaError(f"bad count: {exc}", row=number) from exc
            if url in records:
                raise SchemaError(f"duplicate URL '{url}' in snapshot", row=number)
            records[url] = record
    if label is None:
        raise SchemaError("snapshot file holds no records")
    return Snapshot(wave=Wave(index=wave_index or 1, label=label), records=records)


def reindex_snapshots(snapshots: Iterable[Snapshot], waves: list[Wave]) -> list[Snapshot]:
    """Align loaded snapshots to a wave sequence (labels must match)."""
    by_label = {w.label: w for w in waves}
    out = []
    for snap in sorted(snapshots, key=lambda s: s.wave.label):
        wave = by_label.get(snap.wave.label)
        if wave is None:
            raise ValidationError(f"snapshot wave '{snap.wave.label}' not in campaign waves")
        out.append(Snapshot(wave=wave, records=snap.records, registry_hash=snap.registry_hash))
    return out


def validate_snapshot_against_registry(snapshot: Snapshot, known_urls: Mapping[str, object]) -> None:
    unknown = sorted(set(snapshot.records) - set(known_urls))
    if unknown:
        raise ValidationError(
            f"snapshot '{snapshot.wave.label}' holds URLs absent from the registry: "
            + ", ".join(unknown[:5])
            + ("..." if len(unknown) > 5 else "")
        )
