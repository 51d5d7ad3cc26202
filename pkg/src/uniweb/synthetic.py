"""Deterministic synthetic university systems for desk-scale experiments.

Generation is a pure function of the config (seed included). Unit sizes
follow a lognormal law; a configurable fraction of units stays at zero in
every wave, mirroring the real-world pattern where only a small share of
units shows any indexed presence. Visibility is coupled to size through a
correlation knob, and inbound links split into internal and external pages
so the external-only definition of visibility stays checkable.

Random draws happen in one fixed order (documented in _draws) so a test
can re-run the arithmetic outside the engine and compare values.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import urls as U
from .errors import ValidationError
from .measurement import Snapshot, SnapshotRecord, Wave, make_waves
from .registry import AdmissionDecision, Registry, RULE_UNIVERSITY_URL, RULE_VALID, University, Unit
from .taxonomy import DEFAULT_TAXONOMY

SEED_ENV_VAR = "UNIWEB_SEED"

DEFAULT_WAVES = ("2010-03", "2010-06", "2010-09", "2010-12")


@dataclass(frozen=True)
class LogNormalParams:
    log_location: float
    log_scale: float


@dataclass(frozen=True)
class Anomaly:
    unit: str
    wave: str
    multiplier: float
    metric: str = "both"  # size | visibility | both


@dataclass(frozen=True)
class SyntheticConfig:
    seed: int = 2010
    n_universities: int = 5
    units_per_type: int = 2
    size_distribution: LogNormalParams = LogNormalParams(6.0, 2.0)
    visibility_distribution: LogNormalParams = LogNormalParams(3.0, 1.5)
    zero_fraction: float = 0.5
    monthly_growth: float = 0.02
    visibility_coupling: float = 0.6
    subdirectory_fraction: float = 0.19
    subdirectory_link_loss: float = 0.5
    internal_link_fraction: float = 0.3
    wave_jitter: float = 0.05
    internal_share_size: float = 0.51
    internal_share_visibility: float = 0.22
    general_base: LogNormalParams = LogNormalParams(7.0, 1.0)
    archives_start_wave: int = 2
    waves: tuple[str, ...] = DEFAULT_WAVES
    anomalies: tuple[Anomaly, ...] = ()

    def validate(self) -> None:
        if self.n_universities < 1 or self.units_per_type < 1:
            raise ValidationError("synthetic config needs >= 1 university and >= 1 unit per type")
        if not 0.0 <= self.zero_fraction <= 1.0:
            raise ValidationError("zero_fraction must lie in [0, 1]")
        if not -1.0 <= self.visibility_coupling <= 1.0:
            raise ValidationError("visibility_coupling must lie in [-1, 1]")
        if not self.waves:
            raise ValidationError("at least one wave required")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SyntheticConfig":
        doc = json.loads(text)
        for key in ("size_distribution", "visibility_distribution", "general_base"):
            if key in doc:
                doc[key] = LogNormalParams(**doc[key])
        if "anomalies" in doc:
            doc["anomalies"] = tuple(Anomaly(**a) for a in doc["anomalies"])
        if "waves" in doc:
            doc["waves"] = tuple(doc["waves"])
        return cls(**doc)

    @classmethod
    def from_file(cls, path: str | Path) -> "SyntheticConfig":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))

    def with_env_seed(self) -> "SyntheticConfig":
        """Apply the UNIWEB_SEED environment override, if set."""
        raw = os.environ.get(SEED_ENV_VAR)
        if raw is None:
            return self
        try:
            seed = int(raw)
        except ValueError:
            raise ValidationError(f"{SEED_ENV_VAR} must be an integer, got '{raw}'") from None
        return replace(self, seed=seed)


@dataclass
class LinkSplit:
    """Inbound linking pages for one unit URL in one wave."""

    internal_pages: int
    external_pages: int


@dataclass
class SyntheticSystem:
    config: SyntheticConfig
    registry: Registry
    snapshots: list[Snapshot]
    link_ledger: dict[tuple[str, str], LinkSplit] = field(default_factory=dict)


class SyntheticGenerator:
    """Builds registry + snapshots from a config; see module docstring."""

    def __init__(self, config: SyntheticConfig, taxonomy=None):
        config.validate()
        self.config = config
        self.taxonomy = taxonomy or DEFAULT_TAXONOMY
        self.type_codes = list(self.taxonomy)

    # -- deterministic layout ------------------------------------------------

    def university_ids(self) -> list[str]:
        return [f"su{i + 1:03d}" for i in range(self.config.n_universities)]

    def university_host(self, uni_index: int) -> str:
        return f"su{uni_index + 1:03d}.es"

    def unit_layout(self) -> list[tuple[str, str, str, str]]:
        """(unit_id, university_id, type_code, url_stub) in draw order."""
        rows = []
        for ui in range(self.config.n_universities):
            uni_id = f"su{ui + 1:03d}"
            for code in self.type_codes:
                for k in range(self.config.units_per_type):
                    unit_id = f"{uni_id}-{code}-{k + 1:02d}"
                    stub = f"{code.replace('_', '-')}{k + 1}"
                    rows.append((unit_id, uni_id, code, stub))
        return rows

    def _draws(self, n_units: int, n_waves: int) -> dict[str, np.ndarray]:
        """All randomness, in this exact order."""
        rng = np.random.default_rng(self.config.seed)
        return {
            "size_z": rng.standard_normal(n_units),
            "vis_z": rng.standard_normal(n_units),
            "zero_u": rng.random(n_units),
            "subdir_u": rng.random(n_units),
            "size_jitter": rng.standard_normal((n_waves, n_units)),
            "vis_jitter": rng.standard_normal((n_waves, n_units)),
            "general_z": rng.standard_normal(self.config.n_universities),
        }

    # -- generation ----------------------------------------------------------

    def build(self) -> SyntheticSystem:
        cfg = self.config
        layout = self.unit_layout()
        n_units = len(layout)
        waves = make_waves(cfg.waves)
        n_waves = len(waves)
        months = np.array([w.month_number() - waves[0].month_number() for w in waves])
        growth = (1.0 + cfg.monthly_growth) ** months

        d = self._draws(n_units, n_waves)
        size_base = np.exp(cfg.size_distribution.log_location + cfg.size_distribution.log_scale * d["size_z"])
        coupling = cfg.visibility_coupling
        vis_mix = coupling * d["size_z"] + math.sqrt(1.0 - coupling**2) * d["vis_z"]
        vis_base = np.exp(
            cfg.visibility_distribution.log_location + cfg.visibility_distribution.log_scale * vis_mix
        )
        zero_mask = d["zero_u"] < cfg.zero_fraction
        subdir_mask = d["subdir_u"] < cfg.subdirectory_fraction
        link_loss = np.where(subdir_mask, cfg.subdirectory_link_loss, 1.0)

        size = size_base[None, :] * growth[:, None] * np.exp(cfg.wave_jitter * d["size_jitter"])
        links = (
            vis_base[None, :]
            * growth[:, None]
            * np.exp(cfg.wave_jitter * d["vis_jitter"])
            * link_loss[None, :]
        )
        size = np.rint(size).astype(np.int64)
        external = np.rint(links * (1.0 - cfg.internal_link_fraction)).astype(np.int64)
        internal = np.rint(links * cfg.internal_link_fraction).astype(np.int64)
        size[:, zero_mask] = 0
        external[:, zero_mask] = 0
        internal[:, zero_mask] = 0

        unit_index = {unit_id: i for i, (unit_id, _, _, _) in enumerate(layout)}
        wave_index = {w.label: wi for wi, w in enumerate(waves)}
        for anomaly in cfg.anomalies:
            if anomaly.unit not in unit_index:
                raise ValidationError(f"anomaly references unknown unit '{anomaly.unit}'")
            if anomaly.wave not in wave_index:
                raise ValidationError(f"anomaly references unknown wave '{anomaly.wave}'")
            i, wi = unit_index[anomaly.unit], wave_index[anomaly.wave]
            if anomaly.metric in ("size", "both"):
                size[wi, i] = int(round(size[wi, i] * anomaly.multiplier))
            if anomaly.metric in ("visibility", "both"):
                external[wi, i] = int(round(external[wi, i] * anomaly.multiplier))

        registry = self._build_registry(layout, subdir_mask)
        unit_urls = {unit_id: registry.units[unit_id].urls[0].normalized for unit_id, *_ in layout}

        # General counts per university: units' sum scaled up to the general
        # level, or a standalone base for universities whose units are empty.
        uni_ids = self.university_ids()
        uni_pos = {u: j for j, u in enumerate(uni_ids)}
        general_floor = np.exp(
            cfg.general_base.log_location + cfg.general_base.log_scale * d["general_z"]
        )

        snapshots: list[Snapshot] = []
        ledger: dict[tuple[str, str], LinkSplit] = {}
        source_label = f"synthetic:{cfg.seed}"
        for wi, wave in enumerate(waves):
            records: dict[str, SnapshotRecord] = {}
            unit_sum_size = np.zeros(len(uni_ids), dtype=np.int64)
            unit_sum_vis = np.zeros(len(uni_ids), dtype=np.int64)
            for i, (unit_id, uni_id, code, _) in enumerate(layout):
                unit = registry.units[unit_id]
                if unit.first_wave > wave.index:
                    continue
                url = unit_urls[unit_id]
                records[url] = SnapshotRecord(
                    page_count=int(size[wi, i]),
                    visibility=int(external[wi, i]),
                    source=source_label,
                )
                ledger[(url, wave.label)] = LinkSplit(int(internal[wi, i]), int(external[wi, i]))
                unit_sum_size[uni_pos[uni_id]] += int(size[wi, i])
                unit_sum_vis[uni_pos[uni_id]] += int(external[wi, i])
            for j, uni_id in enumerate(uni_ids):
                host = self.university_host(j)
                if unit_sum_size[j] > 0:
                    gen_size = int(round(unit_sum_size[j] / cfg.internal_share_size))
                else:
                    gen_size = int(round(general_floor[j] * growth[wi]))
                if unit_sum_vis[j] > 0:
                    gen_vis = int(round(unit_sum_vis[j] / cfg.internal_share_visibility))
                else:
                    gen_vis = int(round(general_floor[j] * growth[wi] * 0.25))
                records[f"http://{host}"] = SnapshotRecord(
                    page_count=gen_size, visibility=gen_vis, source=source_label
                )
            snapshots.append(
                Snapshot(wave=wave, records=records, registry_hash=registry.version_hash)
            )
        return SyntheticSystem(
            config=cfg, registry=registry, snapshots=snapshots, link_ledger=ledger
        )

    def _build_registry(self, layout, subdir_mask) -> Registry:
        cfg = self.config
        universities: dict[str, University] = {}
        units: dict[str, Unit] = {}
        log: list[AdmissionDecision] = []
        for j, uni_id in enumerate(self.university_ids()):
            host = self.university_host(j)
            url = U.parse_and_normalize_url(f"http://{host}")
            universities[uni_id] = University(
                id=uni_id, name=f"Synthetic University {j + 1}", official_urls=[url]
            )
            log.append(AdmissionDecision(url.normalized, True, RULE_UNIVERSITY_URL))
        for i, (unit_id, uni_id, code, stub) in enumerate(layout):
            host = self.university_host(int(uni_id[2:]) - 1)
            if subdir_mask[i]:
                raw = f"http://{host}/{stub}"
            else:
                raw = f"http://{stub}.{host}"
            url = U.parse_and_normalize_url(raw)
            first_wave = 1
            if code == "archive" and cfg.archives_start_wave > 1:
                first_wave = min(cfg.archives_start_wave, len(cfg.waves))
            units[unit_id] = Unit(
                id=unit_id,
                name=unit_id,
                university_id=uni_id,
                unit_type=self.taxonomy[code],
                urls=[url],
                first_wave=first_wave,
            )
            log.append(AdmissionDecision(url.normalized, True, RULE_VALID))
        version = hashlib.sha256(("synthetic\n" + cfg.to_json()).encode("utf-8")).hexdigest()
        return Registry(
            universities=universities, units=units, admission_log=log, version_hash=version
        )


def generate_synthetic_system(config: SyntheticConfig) -> tuple[Registry, list[Snapshot]]:
    """Registry plus one snapshot per configured wave (pure in config)."""
    system = SyntheticGenerator(config).build()
    return system.registry, system.snapshots
