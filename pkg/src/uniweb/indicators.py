"""Per-entity indicator formulas.

For each wave the system total is taken as 100 and every entity receives
its proportional share ("relative representativeness"); the mean of those
shares over the entity's measured waves is the representativeness factor
(R_s for page count, R_v for visibility). WIF is external inlinks per
indexed page, and r(%) is the compound per-period growth rate between the
first and last measured waves. Undefined values (zero denominators) are
returned as None, never as a number.

All operations are pure; rounding to the 2-decimal presentation happens
only at export time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .errors import ConsistencyError, ValidationError
from .measurement import Snapshot, Wave, months_between
from .registry import Registry

METRIC_SIZE = "size"
METRIC_VISIBILITY = "visibility"
METRICS = (METRIC_SIZE, METRIC_VISIBILITY)


@dataclass(frozen=True)
class MonthTotal:
    """System-wide accumulated counts for one wave."""

    wave: Wave
    total_size: int
    total_visibility: int


@dataclass
class IndicatorRow:
    entity_id: str
    metric: str
    monthly_share: list[float | None]
    R: float
    wif_by_wave: list[float | None]
    wif_mean: float | None
    r_percent: float | None
    share_uni: float | None = None
    share_type: float | None = None


@dataclass
class IndicatorTable:
    rows: list[IndicatorRow]
    month_totals: list[MonthTotal]
    degenerate_waves: dict[str, list[str]]  # metric -> wave labels with zero total
    waves: list[Wave]


def monthly_share(
    values: Mapping[str, int], scope_total: int
) -> tuple[dict[str, float], bool]:
    """Percentage of the scope total per entity; the total is taken as 100.

    Returns (shares, degenerate): a zero total makes every share 0 and
    marks the wave degenerate instead of failing.
    """
    actual = sum(values.values())
    if scope_total != actual:
        raise ConsistencyError(
            f"scope total {scope_total} does not match the sum of values {actual}"
        )
    if scope_total < 0:
        raise ConsistencyError("scope total must be non-negative")
    if scope_total == 0:
        return {entity: 0.0 for entity in values}, True
    return {entity: 100.0 * v / scope_total for entity, v in values.items()}, False


def mean_representativeness(shares_by_wave: Sequence[float | None]) -> float:
    """Mean share over measured waves only (None marks an unmeasured wave)."""
    measured = [s for s in shares_by_wave if s is not None]
    if not measured:
        raise ValidationError("entity has no measured waves")
    return sum(measured) / len(measured)


def wif(size: int, visibility: int) -> float | None:
    """Web impact factor: external inlinks per indexed page; None if size=0."""
    if size == 0:
        return None
    return visibility / size


def growth_rate(first: float, last: float, periods: float) -> float | None:
    """Compound per-period growth rate in percent, None when first is 0."""
    if first < 0 or last < 0:
        raise ValidationError("growth_rate inputs must be non-negative")
    if periods < 1:
        raise ValidationError(f"periods must be >= 1, got {periods}")
    if first == 0:
        return None
    if last == 0:
        return -100.0
    return 100.0 * ((last / first) ** (1.0 / periods) - 1.0)


def scoped_share(
    entity_counts: Sequence[int | None], scope_totals: Sequence[int | None]
) -> float | None:
    """Mean per-wave share of the entity within its scope (uni or type).

    Waves where the entity is unmeasured are skipped; a zero scope total in
    a measured wave contributes a 0 share (degenerate-wave policy). Returns
    None when the scope total is zero or absent in every measured wave.
    """
    shares = []
    any_nonzero_scope = False
    for value, total in zip(entity_counts, scope_totals):
        if value is None:
            continue
        if total is None or total == 0:
            shares.append(0.0)
            continue
        any_nonzero_scope = True
        shares.append(100.0 * value / total)
    if not shares or not any_nonzero_scope:
        return None
    return sum(shares) / len(shares)


@dataclass
class SeriesTable:
    """Raw per-entity count series aligned to the wave axis."""

    waves: list[Wave]
    size: dict[str, list[int | None]]
    visibility: dict[str, list[int | None]]

    def totals(self, metric: str) -> list[int]:
        data = self.size if metric == METRIC_SIZE else self.visibility
        out = []
        for wi in range(len(self.waves)):
            out.append(sum(series[wi] or 0 for series in data.values()))
        return out

    def series(self, metric: str) -> dict[str, list[int | None]]:
        return self.size if metric == METRIC_SIZE else self.visibility


def unit_series(registry: Registry, snapshots: Sequence[Snapshot]) -> SeriesTable:
    """Series for every admitted unit URL (the item level of analysis)."""
    waves = [s.wave for s in snapshots]
    unit_by_url = registry.unit_urls()
    size: dict[str, list[int | None]] = {u: [None] * len(waves) for u in unit_by_url}
    visibility = {u: [None] * len(waves) for u in unit_by_url}
    for wi, snap in enumerate(snapshots):
        for url in unit_by_url:
            rec = snap.records.get(url)
            if rec is None:
                continue
            size[url][wi] = rec.page_count
            visibility[url][wi] = rec.visibility
    return SeriesTable(waves=waves, size=size, visibility=visibility)


def general_series(registry: Registry, snapshots: Sequence[Snapshot]) -> SeriesTable:
    """Series for every general (official/alias/alternative) URL."""
    waves = [s.wave for s in snapshots]
    owners = registry.general_url_owner()
    size: dict[str, list[int | None]] = {u: [None] * len(waves) for u in owners}
    visibility = {u: [None] * len(waves) for u in owners}
    for wi, snap in enumerate(snapshots):
        for url in owners:
            rec = snap.records.get(url)
            if rec is None:
                continue
            size[url][wi] = rec.page_count
            visibility[url][wi] = rec.visibility
    return SeriesTable(waves=waves, size=size, visibility=visibility)


def growth_periods(waves: Sequence[Wave], measured: Sequence[bool], period_months: int) -> float | None:
    """Number of compounding periods between first and last measured waves."""
    measured_waves = [w for w, m in zip(waves, measured) if m]
    if len(measured_waves) < 2:
        return None
    months = months_between(measured_waves[0], measured_waves[-1])
    if months <= 0:
        return None
    return months / period_months


def series_growth(
    series: Sequence[int | None], waves: Sequence[Wave], period_months: int
) -> float | None:
    measured = [v is not None for v in series]
    periods = growth_periods(waves, measured, period_months)
    if periods is None:
        return None
    values = [v for v in series if v is not None]
    return growth_rate(values[0], values[-1], periods)


def build_indicator_table(
    table: SeriesTable,
    registry: Registry | None = None,
    period_months: int = 1,
    scope_of: Mapping[str, tuple[str, str]] | None = None,
) -> IndicatorTable:
    """Indicator rows for every entity in a series table.

    scope_of maps entity -> (university scope key, type scope key) when the
    within-university and within-type shares apply (unit-level analysis).
    """
    waves = table.waves
    totals = {m: table.totals(m) for m in METRICS}
    degenerate = {
        m: [w.label for w, t in zip(waves, totals[m]) if t == 0] for m in METRICS
    }
    month_totals = [
        MonthTotal(wave=w, total_size=totals[METRIC_SIZE][i], total_visibility=totals[METRIC_VISIBILITY][i])
        for i, w in enumerate(waves)
    ]

    scope_totals: dict[str, dict[str, list[int]]] = {}
    if scope_of:
        for metric in METRICS:
            data = table.series(metric)
            per_scope: dict[str, list[int]] = {}
            for entity, series in data.items():
                for scope_key in scope_of[entity]:
                    acc = per_scope.setdefault(scope_key, [0] * len(waves))
                    for wi, v in enumerate(series):
                        if v is not None:
                            acc[wi] += v
            scope_totals[metric] = per_scope

    rows: list[IndicatorRow] = []
    for entity in sorted(table.size):
        size_series = table.size[entity]
        vis_series = table.visibility[entity]
        wif_by_wave: list[float | None] = []
        for s, v in zip(size_series, vis_series):
            if s is None or v is None:
                wif_by_wave.append(None)
            else:
                wif_by_wave.append(wif(s, v))
        defined = [w for w in wif_by_wave if w is not None]
        wif_mean = sum(defined) / len(defined) if defined else None

        for metric, series in ((METRIC_SIZE, size_series), (METRIC_VISIBILITY, vis_series)):
            if all(v is None for v in series):
                raise ValidationError(f"entity '{entity}' has no measured waves")
            shares: list[float | None] = []
            for wi, value in enumerate(series):
                if value is None:
                    shares.append(None)
                elif totals[metric][wi] == 0:
                    shares.append(0.0)
                else:
                    shares.append(100.0 * value / totals[metric][wi])
            share_uni = share_type = None
            if scope_of:
                uni_key, type_key = scope_of[entity]
                share_uni = scoped_share(series, scope_totals[metric][uni_key])
                share_type = scoped_share(series, scope_totals[metric][type_key])
            rows.append(
                IndicatorRow(
                    entity_id=entity,
                    metric=metric,
                    monthly_share=shares,
                    R=mean_representativeness(shares),
                    wif_by_wave=wif_by_wave,
                    wif_mean=wif_mean,
                    r_percent=series_growth(series, waves, period_months),
                    share_uni=share_uni,
                    share_type=share_type,
                )
            )
    return IndicatorTable(
        rows=rows, month_totals=month_totals, degenerate_waves=degenerate, waves=list(waves)
    )
