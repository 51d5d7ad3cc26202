"""uniweb: multi-level webometric indicator engine for university systems."""

from .aggregation import (
    AggregateRecord,
    aggregate_by_type,
    aggregate_general,
    aggregate_internal,
    internal_vs_general,
)
from .analysis import (
    PcaResult,
    Ranking,
    detect_temporal_anomalies,
    mean_rank_shift,
    pca_two_vars,
    rank_entities,
    spearman_rho,
    topn_distribution,
)
from .campaign import CampaignPolicy, run_campaign
from .indicators import (
    IndicatorRow,
    build_indicator_table,
    growth_rate,
    mean_representativeness,
    monthly_share,
    scoped_share,
    wif,
)
from .measurement import (
    ReplayStore,
    Snapshot,
    SnapshotRecord,
    Wave,
    load_snapshot,
    make_waves,
    save_snapshot,
)
from .registry import Registry, apply_admission_rules, classify_url, load_registry
from .reporting import ReportOptions, build_report, write_report
from .synthetic import SyntheticConfig, SyntheticGenerator, generate_synthetic_system
from .urls import WebUrl, parse_and_normalize_url

__version__ = "0.1.0"
