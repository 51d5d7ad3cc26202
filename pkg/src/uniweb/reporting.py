"""Report bundle: every table the pipeline emits, plus the run manifest.

All arithmetic stays in double precision; numbers are rounded only here,
at export: shares/ratios/WIF/growth get 2 decimals, correlations 3, PCA
loadings and scores 6. Undefined values export as empty cells. Every CSV
starts with a `# manifest: <hash>` comment line so outputs are traceable;
golden comparisons strip that line.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .aggregation import (
    SCOPE_UNI_GENERAL,
    SCOPE_UNI_INTERNAL,
    SCOPE_UNIT_TYPE,
    AggregateRecord,
    InternalGeneralComparison,
    aggregate_by_type,
    aggregate_general,
    aggregate_internal,
    compare_all,
)
from .analysis import (
    DEFAULT_TOP_THRESHOLDS,
    PcaResult,
    Ranking,
    TopNDistribution,
    detect_temporal_anomalies,
    mean_rank_shift,
    pca_two_vars,
    rank_entities,
    spearman_rho,
    topn_distribution,
    wif_anomaly_screen,
)
from .errors import ValidationError
from .indicators import (
    METRIC_SIZE,
    METRIC_VISIBILITY,
    METRICS,
    IndicatorTable,
    build_indicator_table,
    unit_series,
)
from .measurement import Snapshot, validate_snapshot_against_registry
from .registry import Registry

SCOPE_ORDER = (SCOPE_UNI_GENERAL, SCOPE_UNIT_TYPE, SCOPE_UNI_INTERNAL)


@dataclass(frozen=True)
class ReportOptions:
    top_thresholds: tuple[int, ...] = DEFAULT_TOP_THRESHOLDS
    exclude: tuple[str, ...] = ()
    pca_standardize: bool = True
    period_months: int = 1
    anomaly_k: float = 5.0
    anomaly_floor: float = 10.0
    wif_threshold: float = 100.0

    def echo(self) -> dict:
        return {
            "top_thresholds": list(self.top_thresholds),
            "exclude": list(self.exclude),
            "pca_mode": "correlation" if self.pca_standardize else "covariance",
            "period_months": self.period_months,
            "anomaly_k": self.anomaly_k,
            "anomaly_floor": self.anomaly_floor,
            "wif_threshold": self.wif_threshold,
        }


@dataclass
class SpearmanRow:
    level: str
    scope: str
    var_x: str
    var_y: str
    n: int
    rho: float | None


@dataclass
class AnomalyRow:
    kind: str
    level: str
    entity: str
    metric: str
    wave: str
    value: float
    threshold: str


@dataclass
class ReportBundle:
    registry: Registry
    snapshots: list[Snapshot]
    options: ReportOptions
    unit_table: IndicatorTable
    aggregates: dict[str, dict[str, AggregateRecord]]  # scope_kind -> id -> record
    comparisons: dict[str, dict[str, InternalGeneralComparison]]
    rankings: dict[str, Ranking]
    topn: dict[str, TopNDistribution]
    rank_shift: dict[str, float]
    spearman: list[SpearmanRow]
    pca: dict[str, tuple[list[str], PcaResult]]
    anomalies: list[AnomalyRow]
    wave_labels: list[str]


def _r_values(records: Mapping[str, AggregateRecord], metric: str) -> dict[str, float]:
    return {rid: rec.indicators[metric].R for rid, rec in records.items()}


def build_report(
    registry: Registry, snapshots: Sequence[Snapshot], options: ReportOptions = ReportOptions()
) -> ReportBundle:
    """Compute the full analysis stack over validated snapshots."""
    snapshots = sorted(snapshots, key=lambda s: s.wave.index)
    known = dict(registry.unit_urls())
    known.update(registry.general_url_owner())
    for snap in snapshots:
        if snap.registry_hash and snap.registry_hash != registry.version_hash:
            raise ValidationError(
                f"snapshot '{snap.wave.label}' was measured against registry "
                f"{snap.registry_hash[:12]}, not {registry.version_hash[:12]}"
            )
        validate_snapshot_against_registry(snap, known)

    unit_by_url = registry.unit_urls()
    scope_of = {
        url: (f"uni:{unit.university_id}", f"type:{unit.unit_type.id}")
        for url, unit in unit_by_url.items()
    }
    series = unit_series(registry, snapshots)
    unit_table = build_indicator_table(
        series, registry, period_months=options.period_months, scope_of=scope_of
    )

    aggregates = {
        SCOPE_UNI_GENERAL: aggregate_general(registry, snapshots, options.period_months),
        SCOPE_UNIT_TYPE: aggregate_by_type(registry, snapshots, options.period_months),
        SCOPE_UNI_INTERNAL: aggregate_internal(registry, snapshots, options.period_months),
    }
    comparisons = compare_all(aggregates[SCOPE_UNI_INTERNAL], aggregates[SCOPE_UNI_GENERAL])

    unit_rs = {
        row.entity_id: row.R for row in unit_table.rows if row.metric == METRIC_SIZE
    }
    unit_rv = {
        row.entity_id: row.R for row in unit_table.rows if row.metric == METRIC_VISIBILITY
    }
    rankings = {
        "units_size": rank_entities(unit_rs, key="R_s"),
        "units_visibility": rank_entities(unit_rv, key="R_v"),
    }
    for kind, label in (
        (SCOPE_UNI_GENERAL, "universities_general"),
        (SCOPE_UNI_INTERNAL, "universities_internal"),
    ):
        for metric, suffix in ((METRIC_SIZE, "size"), (METRIC_VISIBILITY, "visibility")):
            rankings[f"{label}_{suffix}"] = rank_entities(
                _r_values(aggregates[kind], metric), key=f"R_{suffix[0]}"
            )

    group_by_type = {url: unit.unit_type.id for url, unit in unit_by_url.items()}
    group_by_uni = {url: unit.university_id for url, unit in unit_by_url.items()}
    topn = {}
    for metric, suffix in ((METRIC_SIZE, "size"), (METRIC_VISIBILITY, "visibility")):
        topn[f"by_type_{suffix}"] = topn_distribution(
            rankings[f"units_{suffix}"], group_by_type, thresholds=options.top_thresholds
        )
        topn[f"by_university_{suffix}"] = topn_distribution(
            rankings[f"units_{suffix}"], group_by_uni, thresholds=options.top_thresholds
        )

    rank_shift = {
        "size": mean_rank_shift(
            rankings["universities_general_size"], rankings["universities_internal_size"]
        ),
        "visibility": mean_rank_shift(
            rankings["universities_general_visibility"],
            rankings["universities_internal_visibility"],
        ),
    }

    spearman = _spearman_rows(unit_rs, unit_rv, rankings, aggregates, options, unit_by_url)

    pca: dict[str, tuple[list[str], PcaResult]] = {}
    for kind, label in ((SCOPE_UNIT_TYPE, "types"), (SCOPE_UNI_INTERNAL, "universities_internal")):
        records = aggregates[kind]
        ids = sorted(records)
        points = [
            (records[i].indicators[METRIC_SIZE].R, records[i].indicators[METRIC_VISIBILITY].R)
            for i in ids
        ]
        pca[label] = (ids, pca_two_vars(points, standardize=options.pca_standardize))

    anomalies = _anomaly_rows(series, unit_table, options)

    return ReportBundle(
        registry=registry,
        snapshots=list(snapshots),
        options=options,
        unit_table=unit_table,
        aggregates=aggregates,
        comparisons=comparisons,
        rankings=rankings,
        topn=topn,
        rank_shift=rank_shift,
        spearman=spearman,
        pca=pca,
        anomalies=anomalies,
        wave_labels=[s.wave.label for s in snapshots],
    )


def _resolve_exclusions(
    exclude: tuple[str, ...], unit_by_url
) -> set[str]:
    """--exclude accepts unit ids or normalized URLs."""
    by_unit: dict[str, list[str]] = {}
    for url, unit in unit_by_url.items():
        by_unit.setdefault(unit.id, []).append(url)
    out: set[str] = set()
    for entity in exclude:
        if entity in by_unit:
            out.update(by_unit[entity])
        elif entity in unit_by_url:
            out.add(entity)
        else:
            raise ValidationError(f"--exclude entity '{entity}' is not a unit id or unit URL")
    return out


def _spearman_rows(
    unit_rs: dict[str, float],
    unit_rv: dict[str, float],
    rankings: dict[str, Ranking],
    aggregates: dict[str, dict[str, AggregateRecord]],
    options: ReportOptions,
    unit_by_url,
) -> list[SpearmanRow]:
    rows: list[SpearmanRow] = []

    def add(level: str, scope: str, var_x: str, var_y: str, x: dict, y: dict) -> None:
        rows.append(
            SpearmanRow(
                level=level,
                scope=scope,
                var_x=var_x,
                var_y=var_y,
                n=len(x),
                rho=spearman_rho(x, y) if len(x) >= 3 else None,
            )
        )

    add("unit", "all", "R_s", "R_v", unit_rs, unit_rv)

    top_k = max(options.top_thresholds) if options.top_thresholds else len(unit_rs)
    top_entities = {
        e.entity_id for e in rankings["units_size"].entries if e.position <= top_k
    }
    top_rs = {e: unit_rs[e] for e in top_entities}
    top_rv = {e: unit_rv[e] for e in top_entities}
    add("unit", f"top_{top_k}", "R_s", "R_v", top_rs, top_rv)

    if options.exclude:
        excluded = _resolve_exclusions(options.exclude, unit_by_url)
        tag = "_".join(sorted(options.exclude))
        keep_all = {e: v for e, v in unit_rs.items() if e not in excluded}
        add(
            "unit",
            f"all_excluding_{tag}",
            "R_s",
            "R_v",
            keep_all,
            {e: unit_rv[e] for e in keep_all},
        )
        keep_top = {e: v for e, v in top_rs.items() if e not in excluded}
        add(
            "unit",
            f"top_{top_k}_excluding_{tag}",
            "R_s",
            "R_v",
            keep_top,
            {e: top_rv[e] for e in keep_top},
        )

    add(
        "type",
        "all",
        "R_s",
        "R_v",
        _r_values(aggregates[SCOPE_UNIT_TYPE], METRIC_SIZE),
        _r_values(aggregates[SCOPE_UNIT_TYPE], METRIC_VISIBILITY),
    )
    add(
        "university_internal",
        "all",
        "R_s",
        "R_v",
        _r_values(aggregates[SCOPE_UNI_INTERNAL], METRIC_SIZE),
        _r_values(aggregates[SCOPE_UNI_INTERNAL], METRIC_VISIBILITY),
    )
    add(
        "university_general",
        "all",
        "R_s",
        "R_v",
        _r_values(aggregates[SCOPE_UNI_GENERAL], METRIC_SIZE),
        _r_values(aggregates[SCOPE_UNI_GENERAL], METRIC_VISIBILITY),
    )
    add(
        "university_cross",
        "size",
        "R_s_general",
        "R_s_internal",
        _r_values(aggregates[SCOPE_UNI_GENERAL], METRIC_SIZE),
        _r_values(aggregates[SCOPE_UNI_INTERNAL], METRIC_SIZE),
    )
    add(
        "university_cross",
        "visibility",
        "R_v_general",
        "R_v_internal",
        _r_values(aggregates[SCOPE_UNI_GENERAL], METRIC_VISIBILITY),
        _r_values(aggregates[SCOPE_UNI_INTERNAL], METRIC_VISIBILITY),
    )
    return rows


def _anomaly_rows(series, unit_table: IndicatorTable, options: ReportOptions) -> list[AnomalyRow]:
    rows: list[AnomalyRow] = []
    labels = [w.label for w in series.waves]
    for metric in METRICS:
        data = series.series(metric)
        for entity in sorted(data):
            flagged = detect_temporal_anomalies(
                data[entity], k=options.anomaly_k, floor=options.anomaly_floor
            )
            for wi in flagged:
                rows.append(
                    AnomalyRow(
                        kind="temporal",
                        level="unit",
                        entity=entity,
                        metric=metric,
                        wave=labels[wi],
                        value=float(data[entity][wi]),
                        threshold=f"k={options.anomaly_k:g}",
                    )
                )
    wif_means = {
        row.entity_id: row.wif_mean
        for row in unit_table.rows
        if row.metric == METRIC_SIZE
    }
    for entity, value in wif_anomaly_screen(wif_means, options.wif_threshold):
        rows.append(
            AnomalyRow(
                kind="wif_screen",
                level="unit",
                entity=entity,
                metric="wif",
                wave="",
                value=value,
                threshold=f">{options.wif_threshold:g}",
            )
        )
    for metric, labels_degenerate in unit_table.degenerate_waves.items():
        for label in labels_degenerate:
            rows.append(
                AnomalyRow(
                    kind="degenerate_wave",
                    level="unit_universe",
                    entity="",
                    metric=metric,
                    wave=label,
                    value=0.0,
                    threshold="",
                )
            )
    rows.sort(key=lambda r: (r.kind, r.level, r.entity, r.metric, r.wave))
    return rows


# -- formatting and file output ----------------------------------------------


def fmt(value: float | None, decimals: int = 2) -> str:
    if value is None:
        return ""
    return f"{value:.{decimals}f}"


def manifest_hash(registry: Registry, source: str, wave_labels: Sequence[str], config: dict) -> str:
    doc = {
        "registry_hash": registry.version_hash,
        "source": source,
        "waves": list(wave_labels),
        "config": config,
    }
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode("utf-8")).hexdigest()


class BundleWriter:
    """Writes the report CSVs with the manifest comment line."""

    def __init__(self, outdir: str | Path, mhash: str):
        self.outdir = Path(outdir)
        self.outdir.mkdir(parents=True, exist_ok=True)
        self.mhash = mhash
        self.written: dict[str, str] = {}

    def write_csv(self, name: str, header: Sequence[str], rows: Sequence[Sequence]) -> None:
        path = self.outdir / name
        with path.open("w", newline="", encoding="utf-8") as fh:
            fh.write(f"# manifest: {self.mhash}\n")
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
        self.written[name] = hashlib.sha256(path.read_bytes()).hexdigest()

    def write_manifest(self, registry: Registry, source: str, waves: Sequence[str], config: dict) -> None:
        doc = {
            "manifest_hash": self.mhash,
            "registry_hash": registry.version_hash,
            "source": source,
            "waves": list(waves),
            "config": config,
            "outputs": dict(sorted(self.written.items())),
        }
        path = self.outdir / "manifest.json"
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_report(
    bundle: ReportBundle, outdir: str | Path, source: str = "snapshots"
) -> Path:
    """Emit the full CSV bundle plus manifest.json; returns the out dir."""
    labels = bundle.wave_labels
    mhash = manifest_hash(bundle.registry, source, labels, bundle.options.echo())
    w = BundleWriter(outdir, mhash)

    header = (
        ["entity_id", "metric"]
        + [f"share_{l}" for l in labels]
        + ["R"]
        + [f"wif_{l}" for l in labels]
        + ["r_percent", "share_uni", "share_type"]
    )
    rows = []
    for row in sorted(bundle.unit_table.rows, key=lambda r: (r.entity_id, r.metric)):
        rows.append(
            [row.entity_id, row.metric]
            + [fmt(s) for s in row.monthly_share]
            + [fmt(row.R)]
            + [fmt(v) for v in row.wif_by_wave]
            + [fmt(row.r_percent), fmt(row.share_uni), fmt(row.share_type)]
        )
    w.write_csv("indicators_units.csv", header, rows)

    header = (
        ["scope_kind", "scope_id"]
        + [f"size_{l}" for l in labels]
        + [f"visibility_{l}" for l in labels]
        + ["R_s", "R_v"]
        + [f"wif_{l}" for l in labels]
        + ["r_size", "r_visibility", "ratio_size", "ratio_visibility", "flags"]
    )
    rows = []
    for kind in SCOPE_ORDER:
        for scope_id in sorted(bundle.aggregates[kind]):
            rec = bundle.aggregates[kind][scope_id]
            size_row = rec.indicators[METRIC_SIZE]
            vis_row = rec.indicators[METRIC_VISIBILITY]
            ratio_size = ratio_vis = None
            flags: list[str] = []
            if kind == SCOPE_UNI_INTERNAL:
                comp = bundle.comparisons[scope_id]
                ratio_size = comp[METRIC_SIZE].accumulated_ratio
                ratio_vis = comp[METRIC_VISIBILITY].accumulated_ratio
                for metric in METRICS:
                    c = comp[metric]
                    if c.consistency_flag:
                        if c.accumulated_ratio is None:
                            flags.append(f"undefined_ratio_{metric}")
                        else:
                            flags.append(f"internal_exceeds_general_{metric}")
            rows.append(
                [kind, scope_id]
                + [str(v) for v in rec.size_by_wave]
                + [str(v) for v in rec.visibility_by_wave]
                + [fmt(size_row.R), fmt(vis_row.R)]
                + [fmt(v) for v in size_row.wif_by_wave]
                + [
                    fmt(size_row.r_percent),
                    fmt(vis_row.r_percent),
                    fmt(ratio_size),
                    fmt(ratio_vis),
                    "|".join(flags),
                ]
            )
    w.write_csv("aggregates.csv", header, rows)

    for name, ranking in sorted(bundle.rankings.items()):
        w.write_csv(
            f"ranking_{name}.csv",
            ["position", "entity", "value"],
            [[e.position, e.entity_id, fmt(e.value)] for e in ranking.entries],
        )

    for name, dist in sorted(bundle.topn.items()):
        header = ["group", "items"]
        for t in dist.thresholds:
            header += [f"top_{t}_count", f"top_{t}_pct"]
        rows = []
        for group in sorted(dist.counts):
            row = [group, str(dist.group_items[group])]
            for t in dist.thresholds:
                row += [str(dist.counts[group][t]), fmt(dist.percentages[group][t])]
            rows.append(row)
        w.write_csv(f"topn_{name}.csv", header, rows)

    w.write_csv(
        "rankshift.csv",
        ["comparison", "metric", "n", "mean_shift"],
        [
            ["general_vs_internal", metric, len(bundle.aggregates[SCOPE_UNI_GENERAL]), fmt(shift)]
            for metric, shift in sorted(bundle.rank_shift.items())
        ],
    )

    w.write_csv(
        "spearman.csv",
        ["level", "scope", "var_x", "var_y", "n", "rho"],
        [
            [r.level, r.scope, r.var_x, r.var_y, str(r.n), fmt(r.rho, 3)]
            for r in bundle.spearman
        ],
    )

    for label, (ids, result) in sorted(bundle.pca.items()):
        w.write_csv(
            f"pca_{label}_loadings.csv",
            ["component", "loading_size", "loading_visibility", "explained_pct"],
            [
                [
                    f"pc{i + 1}",
                    fmt(result.loadings[i][0], 6),
                    fmt(result.loadings[i][1], 6),
                    fmt(result.explained_variance[i]),
                ]
                for i in range(2)
            ],
        )
        w.write_csv(
            f"pca_{label}_scores.csv",
            ["entity", "pc1", "pc2"],
            [
                [entity, fmt(result.scores[i][0], 6), fmt(result.scores[i][1], 6)]
                for i, entity in enumerate(ids)
            ],
        )

    w.write_csv(
        "anomalies.csv",
        ["kind", "level", "entity", "metric", "wave", "value", "threshold"],
        [
            [a.kind, a.level, a.entity, a.metric, a.wave, fmt(a.value), a.threshold]
            for a in bundle.anomalies
        ],
    )

    w.write_manifest(bundle.registry, source, labels, bundle.options.echo())
    return w.outdir
