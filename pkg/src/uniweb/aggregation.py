"""Aggregation of measurements: general per university (uni_1), per unit
type, and internal per university (uni_2), plus the internal-vs-general
consistency comparison.

General and internal levels normalize against separate universes: general
shares against the sum over all universities' general URLs, unit-derived
shares against the sum over all admitted unit URLs. Indicators on an
aggregate are always computed by summing the member series first and
running the share/mean machinery on the sums — there is no other path.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import ValidationError
from .indicators import (
    METRIC_SIZE,
    METRIC_VISIBILITY,
    METRICS,
    IndicatorRow,
    SeriesTable,
    general_series,
    unit_series,
    build_indicator_table,
)
from .measurement import Snapshot, Wave
from .registry import Registry

SCOPE_UNI_GENERAL = "uni_general"
SCOPE_UNIT_TYPE = "unit_type"
SCOPE_UNI_INTERNAL = "uni_internal"


@dataclass
class AggregateRecord:
    scope_kind: str
    scope_id: str
    waves: list[Wave]
    size_by_wave: list[int]
    visibility_by_wave: list[int]
    indicators: dict[str, IndicatorRow]  # metric -> row computed on the sums

    def accumulated(self, metric: str) -> int:
        series = self.size_by_wave if metric == METRIC_SIZE else self.visibility_by_wave
        return sum(series)


@dataclass
class InternalGeneralComparison:
    university_id: str
    metric: str
    accumulated_ratio: float | None  # 100 * internal / general, None if general 0
    per_wave_ratio: list[float | None]
    consistency_flag: bool  # internal exceeds general (accumulated), or undefined ratio


def _sum_series(
    table: SeriesTable, members_of: dict[str, list[str]]
) -> tuple[dict[str, list[int]], dict[str, list[int]]]:
    n = len(table.waves)
    size = {scope: [0] * n for scope in members_of}
    vis = {scope: [0] * n for scope in members_of}
    for scope, members in members_of.items():
        for entity in members:
            for wi in range(n):
                v = table.size[entity][wi]
                if v is not None:
                    size[scope][wi] += v
                v = table.visibility[entity][wi]
                if v is not None:
                    vis[scope][wi] += v
    return size, vis


def _records_from_sums(
    scope_kind: str,
    waves: list[Wave],
    size: dict[str, list[int]],
    vis: dict[str, list[int]],
    period_months: int,
) -> dict[str, AggregateRecord]:
    summed = SeriesTable(
        waves=waves,
        size={k: list(v) for k, v in size.items()},
        visibility={k: list(v) for k, v in vis.items()},
    )
    table = build_indicator_table(summed, period_months=period_months)
    by_entity: dict[str, dict[str, IndicatorRow]] = {}
    for row in table.rows:
        by_entity.setdefault(row.entity_id, {})[row.metric] = row
    return {
        scope: AggregateRecord(
            scope_kind=scope_kind,
            scope_id=scope,
            waves=waves,
            size_by_wave=size[scope],
            visibility_by_wave=vis[scope],
            indicators=by_entity[scope],
        )
        for scope in sorted(size)
    }


def aggregate_general(
    registry: Registry, snapshots: Sequence[Snapshot], period_months: int = 1
) -> dict[str, AggregateRecord]:
    """uni_1: sum the general URLs (official + alias + alternative)."""
    for uni in registry.universities.values():
        if not uni.general_urls():
            raise ValidationError(f"university '{uni.id}' has no general URLs")
    table = general_series(registry, snapshots)
    owners = registry.general_url_owner()
    members: dict[str, list[str]] = {u: [] for u in registry.universities}
    for url, uni in owners.items():
        members[uni.id].append(url)
    size, vis = _sum_series(table, members)
    return _records_from_sums(SCOPE_UNI_GENERAL, table.waves, size, vis, period_months)


def aggregate_by_type(
    registry: Registry, snapshots: Sequence[Snapshot], period_months: int = 1
) -> dict[str, AggregateRecord]:
    """Type aggregation: sum all unit URLs of each type, across universities."""
    table = unit_series(registry, snapshots)
    unit_by_url = registry.unit_urls()
    members: dict[str, list[str]] = {}
    for url, unit in unit_by_url.items():
        members.setdefault(unit.unit_type.id, []).append(url)
    size, vis = _sum_series(table, members)
    return _records_from_sums(SCOPE_UNIT_TYPE, table.waves, size, vis, period_months)


def aggregate_internal(
    registry: Registry, snapshots: Sequence[Snapshot], period_months: int = 1
) -> dict[str, AggregateRecord]:
    """uni_2: sum each university's unit URLs; unit-less universities stay
    in the output with zero totals."""
    table = unit_series(registry, snapshots)
    unit_by_url = registry.unit_urls()
    members: dict[str, list[str]] = {u: [] for u in registry.universities}
    for url, unit in unit_by_url.items():
        members[unit.university_id].append(url)
    size, vis = _sum_series(table, members)
    return _records_from_sums(SCOPE_UNI_INTERNAL, table.waves, size, vis, period_months)


def internal_vs_general(
    uni_internal: AggregateRecord, uni_general: AggregateRecord
) -> dict[str, InternalGeneralComparison]:
    """Internal coverage of the general level, per metric, with the
    inconsistency flag raised strictly above 100%."""
    if uni_internal.scope_id != uni_general.scope_id:
        raise ValidationError(
            f"comparing different universities: '{uni_internal.scope_id}' "
            f"vs '{uni_general.scope_id}'"
        )
    if [w.label for w in uni_internal.waves] != [w.label for w in uni_general.waves]:
        raise ValidationError("internal and general records cover different waves")
    out: dict[str, InternalGeneralComparison] = {}
    for metric in METRICS:
        internal = (
            uni_internal.size_by_wave
            if metric == METRIC_SIZE
            else uni_internal.visibility_by_wave
        )
        general = (
            uni_general.size_by_wave
            if metric == METRIC_SIZE
            else uni_general.visibility_by_wave
        )
        per_wave: list[float | None] = []
        for i_val, g_val in zip(internal, general):
            per_wave.append(100.0 * i_val / g_val if g_val > 0 else None)
        acc_internal, acc_general = sum(internal), sum(general)
        if acc_general > 0:
            ratio = 100.0 * acc_internal / acc_general
            flag = ratio > 100.0
        else:
            ratio = None
            flag = acc_internal > 0  # undefined ratio with internal presence
        out[metric] = InternalGeneralComparison(
            university_id=uni_internal.scope_id,
            metric=metric,
            accumulated_ratio=ratio,
            per_wave_ratio=per_wave,
            consistency_flag=flag,
        )
    return out


def compare_all(
    internal: dict[str, AggregateRecord], general: dict[str, AggregateRecord]
) -> dict[str, dict[str, InternalGeneralComparison]]:
    missing = set(internal).symmetric_difference(general)
    if missing:
        raise ValidationError(
            "internal/general university sets differ: " + ", ".join(sorted(missing))
        )
    return {uid: internal_vs_general(internal[uid], general[uid]) for uid in sorted(internal)}
