"""Command-line surface: ingest, run, report, synth.

Exit codes: 0 success, 1 validation/schema error, 2 source failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .campaign import CampaignPolicy, run_campaign
from .errors import CampaignAbortedError, SchemaError, UniwebError, ValidationError
from .measurement import (
    ReplayStore,
    Snapshot,
    SnapshotRecord,
    load_snapshot,
    make_waves,
    reindex_snapshots,
    save_snapshot,
)
from .registry import Registry, load_registry, save_registry_csv
from .reporting import ReportOptions, build_report, manifest_hash, write_report
from .synthetic import SyntheticConfig, SyntheticGenerator

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_SOURCE = 2


def _parse_waves(text: str) -> list:
    return make_waves([label.strip() for label in text.split(",") if label.strip()])


def _resolve_source(spec: str, registry: Registry):
    """'replay:<path>' or 'synthetic:<config.json>' -> (source, label, waves)."""
    if spec.startswith("replay:"):
        path = Path(spec.split(":", 1)[1])
        if path.is_dir():
            store = ReplayStore.from_dir(path)
        else:
            store = ReplayStore([load_snapshot(path)])
        return store, spec, store.wave_labels()
    if spec.startswith("synthetic:"):
        config = SyntheticConfig.from_file(spec.split(":", 1)[1]).with_env_seed()
        system = SyntheticGenerator(config).build()
        if system.registry.version_hash != registry.version_hash:
            # Replaying synthetic measurements onto an externally loaded
            # registry: URLs must line up, which build_report verifies later.
            pass
        store = ReplayStore(system.snapshots, identity=f"synthetic:{config.seed}")
        return store, f"synthetic:seed={config.seed}", list(config.waves)
    raise ValidationError(
        f"--source must be 'replay:<path>' or 'synthetic:<config.json>', got '{spec}'"
    )


def cmd_ingest(args: argparse.Namespace) -> int:
    registry = load_registry(args.registry, format=args.format)
    counts = registry.counts()
    print(
        f"{counts['universities']} universities, {counts['units']} units, "
        f"{counts['urls_admitted']} URLs admitted, {counts['urls_rejected']} rejected"
    )
    if counts["universities"] == 0:
        print("warning: registry is empty", file=sys.stderr)
    if args.out:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        path = outdir / "admission_report.csv"
        with path.open("w", newline="", encoding="utf-8") as fh:
            fh.write("url,admitted,rule\n")
            for decision in registry.admission_log:
                fh.write(f"{decision.url},{str(decision.admitted).lower()},{decision.rule}\n")
        print(f"admission report: {path}")
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    registry = load_registry(args.registry, format=args.format)
    source, source_label, available = _resolve_source(args.source, registry)
    labels = (
        [l.strip() for l in args.waves.split(",") if l.strip()] if args.waves else available
    )
    waves = make_waves(labels)
    policy = CampaignPolicy(
        parallelism=args.parallelism, rate_limit=args.rate_limit, retries=args.retries
    )
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    mhash = manifest_hash(
        registry,
        source_label,
        labels,
        {"parallelism": policy.parallelism, "rate_limit": policy.rate_limit, "retries": policy.retries},
    )
    outputs = {}
    for wave in waves:
        checkpoint = outdir / f"checkpoint_{wave.label}.json"
        resume = None
        if checkpoint.exists():
            doc = json.loads(checkpoint.read_text(encoding="utf-8"))
            resume = {
                url: SnapshotRecord(
                    page_count=rec["page_count"],
                    visibility=rec["visibility"],
                    source=rec.get("source", ""),
                    flags=tuple(rec.get("flags", ())),
                )
                for url, rec in doc["records"].items()
            }
            print(f"resuming wave {wave.label} from {checkpoint} ({len(resume)} records)")
        try:
            snapshot = run_campaign(registry, source, wave, policy, resume=resume)
        except CampaignAbortedError as exc:
            doc = {
                "wave": wave.label,
                "records": {
                    url: {
                        "page_count": rec.page_count,
                        "visibility": rec.visibility,
                        "source": rec.source,
                        "flags": list(rec.flags),
                    }
                    for url, rec in sorted(exc.completed.items())
                },
            }
            checkpoint.write_text(json.dumps(doc, indent=2, sort_keys=True), encoding="utf-8")
            print(f"error: {exc}", file=sys.stderr)
            print(f"checkpoint written: {checkpoint}", file=sys.stderr)
            return EXIT_SOURCE
        if checkpoint.exists():
            checkpoint.unlink()
        name = f"snapshot_{wave.label}.csv"
        save_snapshot(snapshot, outdir / name, header_comment=f"manifest: {mhash}")
        outputs[name] = None
        print(f"wave {wave.label}: {len(snapshot.records)} records -> {outdir / name}")
    _write_run_manifest(outdir, registry, source_label, labels, policy, mhash)
    return EXIT_OK


def _write_run_manifest(outdir: Path, registry, source_label, labels, policy, mhash) -> None:
    import hashlib

    outputs = {
        p.name: hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(outdir.glob("snapshot_*.csv"))
    }
    doc = {
        "manifest_hash": mhash,
        "registry_hash": registry.version_hash,
        "source": source_label,
        "waves": list(labels),
        "config": {
            "parallelism": policy.parallelism,
            "rate_limit": policy.rate_limit,
            "retries": policy.retries,
        },
        "outputs": outputs,
    }
    (outdir / "manifest.json").write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def cmd_synth(args: argparse.Namespace) -> int:
    config = SyntheticConfig.from_file(args.config).with_env_seed()
    system = SyntheticGenerator(config).build()
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    save_registry_csv(system.registry, outdir / "registry.csv")
    mhash = manifest_hash(
        system.registry, f"synthetic:seed={config.seed}", list(config.waves), json.loads(config.to_json())
    )
    for snapshot in system.snapshots:
        save_snapshot(
            snapshot,
            outdir / f"snapshot_{snapshot.wave.label}.csv",
            header_comment=f"manifest: {mhash}",
        )
    (outdir / "synth_config.json").write_text(config.to_json() + "\n", encoding="utf-8")
    counts = system.registry.counts()
    print(
        f"synthetic system: {counts['universities']} universities, "
        f"{counts['units']} units, {len(system.snapshots)} waves -> {outdir}"
    )
    return EXIT_OK


def _load_snapshots(paths: list[str]) -> list[Snapshot]:
    files: list[Path] = []
    for p in paths:
        path = Path(p)
        if path.is_dir():
            files.extend(
                sorted(
                    q
                    for q in path.iterdir()
                    if q.suffix.lower() in (".csv", ".json") and q.name != "manifest.json"
                    and not q.name.startswith("checkpoint_")
                    and not q.name.startswith("registry")
                    and not q.name.startswith("synth_config")
                )
            )
        else:
            files.append(path)
    snapshots = [load_snapshot(f) for f in files]
    labels = sorted({s.wave.label for s in snapshots})
    waves = make_waves(labels)
    return reindex_snapshots(snapshots, waves)


def cmd_report(args: argparse.Namespace) -> int:
    registry = load_registry(args.registry, format=args.format)
    snapshots = _load_snapshots(args.snapshots)
    if not snapshots:
        raise ValidationError("no snapshot files found")
    thresholds = (
        tuple(int(t) for t in args.top_n.split(",")) if args.top_n else None
    )
    options = ReportOptions(
        top_thresholds=thresholds or ReportOptions().top_thresholds,
        exclude=tuple(args.exclude or ()),
        pca_standardize=args.pca_mode != "covariance",
        period_months=args.period_months,
        anomaly_k=args.anomaly_k,
        wif_threshold=args.wif_threshold,
    )
    bundle = build_report(registry, snapshots, options)
    outdir = write_report(bundle, args.out, source=",".join(args.snapshots))
    print(f"report bundle written to {outdir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uniweb",
        description="Multi-level webometric indicator engine for university web systems",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a registry file and report admissions")
    p.add_argument("--registry", required=True)
    p.add_argument("--format", choices=("csv", "json"), default=None)
    p.add_argument("--out", default=None, help="directory for admission_report.csv")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("run", help="run a measurement campaign, one snapshot per wave")
    p.add_argument("--registry", required=True)
    p.add_argument("--format", choices=("csv", "json"), default=None)
    p.add_argument("--source", required=True, help="replay:<path> | synthetic:<config.json>")
    p.add_argument("--waves", default=None, help="comma-separated wave labels (YYYY-MM)")
    p.add_argument("--rate-limit", type=float, default=None, help="queries per second")
    p.add_argument("--parallelism", type=int, default=4)
    p.add_argument("--retries", type=int, default=3)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("synth", help="generate a synthetic system (registry + snapshots)")
    p.add_argument("--config", required=True, help="SyntheticConfig JSON file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="compute indicators, aggregations and analyses")
    p.add_argument("--registry", required=True)
    p.add_argument("--format", choices=("csv", "json"), default=None)
    p.add_argument("--snapshots", nargs="+", required=True, help="snapshot files or directories")
    p.add_argument("--top-n", default=None, help="comma-separated top-N thresholds")
    p.add_argument("--exclude", action="append", default=None, help="unit id or URL to exclude from correlations")
    p.add_argument("--pca-mode", choices=("correlation", "covariance"), default="correlation")
    p.add_argument("--period-months", type=int, default=1)
    p.add_argument("--anomaly-k", type=float, default=5.0)
    p.add_argument("--wif-threshold", type=float, default=100.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SchemaError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except CampaignAbortedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOURCE
    except UniwebError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOURCE


if __name__ == "__main__":
    raise SystemExit(main())
