"""University-system data model, URL admission rules and registry ingestion.

A registry file holds one row per URL. University-level rows (role
official/alias/alternative) define the universities and their domains;
unit rows carry the unit taxonomy and go through the admission rules:

  * dynamic, external or single-page URLs are rejected;
  * a valid URL redirecting to a non-valid one is admitted alone;
  * a valid URL redirecting to another valid one admits both;
  * broken-but-syntactically-valid URLs are admitted.

The loaded Registry is immutable in spirit: nothing mutates it after
load_registry returns, so concurrent reads are safe.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from . import urls as U
from .errors import SchemaError, UrlParseError, ValidationError
from .taxonomy import DEFAULT_TAXONOMY, Activity, Nature, UnitType

ROLE_OFFICIAL = "official"
ROLE_ALIAS = "alias"
ROLE_ALTERNATIVE = "alternative"
ROLE_UNIT = "unit"
UNIVERSITY_ROLES = (ROLE_OFFICIAL, ROLE_ALIAS, ROLE_ALTERNATIVE)

CSV_COLUMNS = (
    "university_id",
    "unit_id",
    "unit_type",
    "activity",
    "nature",
    "url",
    "url_role",
    "redirect_target",
    "status",
)
# Optional trailing columns accepted on top of the documented nine.
CSV_OPTIONAL_COLUMNS = ("first_wave", "name", "ownership")

# Admission rule labels recorded in the log.
RULE_VALID = "valid"
RULE_BROKEN_BUT_VALID = "broken_but_valid"
RULE_REDIRECT_BOTH_VALID = "redirect_valid_to_valid"
RULE_REDIRECT_TARGET_INVALID = "redirect_valid_to_invalid"
RULE_REJECT_DYNAMIC = "reject_dynamic"
RULE_REJECT_EXTERNAL = "reject_external"
RULE_REJECT_APEX = "reject_apex_not_unit"
RULE_REJECT_SINGLE_PAGE = "reject_single_page"
RULE_UNIVERSITY_URL = "university_url"


@dataclass(frozen=True)
class AdmissionDecision:
    url: str
    admitted: bool
    rule: str
    redirect_decision: "AdmissionDecision | None" = None


@dataclass
class University:
    id: str
    name: str
    ownership: str = "public"
    official_urls: list[U.WebUrl] = field(default_factory=list)
    alias_urls: list[U.WebUrl] = field(default_factory=list)
    alternative_urls: list[U.WebUrl] = field(default_factory=list)

    def general_urls(self) -> list[U.WebUrl]:
        return self.official_urls + self.alias_urls + self.alternative_urls

    def domains(self) -> set[str]:
        return {u.host for u in self.general_urls()}


@dataclass
class Unit:
    id: str
    name: str
    university_id: str
    unit_type: UnitType
    urls: list[U.WebUrl] = field(default_factory=list)
    first_wave: int = 1
    excluded: bool = False


@dataclass
class Registry:
    universities: dict[str, University]
    units: dict[str, Unit]
    admission_log: list[AdmissionDecision]
    version_hash: str = ""
    version_date: str | None = None

    def unit_urls(self) -> dict[str, Unit]:
        """Admitted unit URL -> owning unit, over non-excluded units."""
        out: dict[str, Unit] = {}
        for unit in self.units.values():
            if unit.excluded:
                continue
            for url in unit.urls:
                out[url.normalized] = unit
        return out

    def general_url_owner(self) -> dict[str, University]:
        out: dict[str, University] = {}
        for uni in self.universities.values():
            for url in uni.general_urls():
                out[url.normalized] = uni
        return out

    def counts(self) -> dict[str, int]:
        admitted_urls = {d.url for d in self.admission_log if d.admitted}
        rejected_urls = {d.url for d in self.admission_log if not d.admitted} - admitted_urls
        admitted, rejected = len(admitted_urls), len(rejected_urls)
        return {
            "universities": len(self.universities),
            "units": len(self.units),
            "urls_admitted": admitted,
            "urls_rejected": rejected,
        }


def classify_url(url: U.WebUrl, university: University) -> str:
    """Syntax class of a URL relative to one university's domains."""
    return U.classify_against_domains(url, university.domains())


def apply_admission_rules(
    url_a: U.WebUrl,
    redirect_info: U.WebUrl | None = None,
    university: University | None = None,
    config: U.UrlConfig = U.DEFAULT_URL_CONFIG,
) -> AdmissionDecision:
    """Decide admission of a unit URL, honoring its redirect target.

    When a university is given, URLs outside its domains (external) or equal
    to a bare domain (apex) are rejected: admitted unit URLs must be a
    subdomain or subdirectory of the owning university.
    """

    def rejection_rule(url: U.WebUrl) -> str | None:
        if url.dynamic:
            return RULE_REJECT_DYNAMIC
        if U.is_single_page(url, config):
            return RULE_REJECT_SINGLE_PAGE
        if university is not None:
            cls = classify_url(url, university)
            if cls == U.EXTERNAL:
                return RULE_REJECT_EXTERNAL
            if cls == U.APEX:
                return RULE_REJECT_APEX
        return None

    reject = rejection_rule(url_a)
    if reject is not None:
        return AdmissionDecision(url_a.normalized, False, reject)

    if redirect_info is not None:
        target_reject = rejection_rule(redirect_info)
        if target_reject is None:
            target = AdmissionDecision(redirect_info.normalized, True, RULE_REDIRECT_BOTH_VALID)
            return AdmissionDecision(url_a.normalized, True, RULE_REDIRECT_BOTH_VALID, target)
        target = AdmissionDecision(redirect_info.normalized, False, target_reject)
        return AdmissionDecision(url_a.normalized, True, RULE_REDIRECT_TARGET_INVALID, target)

    if url_a.status == U.STATUS_BROKEN:
        return AdmissionDecision(url_a.normalized, True, RULE_BROKEN_BUT_VALID)
    return AdmissionDecision(url_a.normalized, True, RULE_VALID)


@dataclass
class _RawRow:
    number: int
    university_id: str
    unit_id: str
    unit_type: str
    activity: str
    nature: str
    url: str
    url_role: str
    redirect_target: str
    status: str
    first_wave: str = ""
    name: str = ""
    ownership: str = ""


def _rows_from_csv(path: Path) -> list[_RawRow]:
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            return []
        header = [h.strip() for h in header]
        if tuple(header[: len(CSV_COLUMNS)]) != CSV_COLUMNS:
            raise SchemaError(
                f"bad registry header: expected {','.join(CSV_COLUMNS)}, got {','.join(header)}",
                row=1,
            )
        extras = header[len(CSV_COLUMNS) :]
        for col in extras:
            if col not in CSV_OPTIONAL_COLUMNS:
                raise SchemaError(f"unknown registry column '{col}'", row=1, field=col)
        rows = []
        for number, values in enumerate(reader, start=2):
            if not values or all(not v.strip() for v in values):
                continue
            if len(values) != len(header):
                raise SchemaError(
                    f"expected {len(header)} fields, got {len(values)}", row=number
                )
            data = dict(zip(header, (v.strip() for v in values)))
            rows.append(
                _RawRow(
                    number=number,
                    university_id=data["university_id"],
                    unit_id=data["unit_id"],
                    unit_type=data["unit_type"],
                    activity=data["activity"],
                    nature=data["nature"],
                    url=data["url"],
                    url_role=data["url_role"],
                    redirect_target=data["redirect_target"],
                    status=data["status"],
                    first_wave=data.get("first_wave", ""),
                    name=data.get("name", ""),
                    ownership=data.get("ownership", ""),
                )
            )
        return rows


def _rows_from_json(path: Path) -> tuple[list[_RawRow], str | None]:
    doc = json.loads(path.read_text(encoding="utf-8"))
    if doc == {} or doc is None:
        return [], None
    rows: list[_RawRow] = []
    number = 0
    for uni in doc.get("universities", []):
        for role in UNIVERSITY_ROLES:
            for url in uni.get(f"{role}_urls", []):
                number += 1
                rows.append(
                    _RawRow(
                        number=number,
                        university_id=uni["id"],
                        unit_id="",
                        unit_type="",
                        activity="",
                        nature="",
                        url=url,
                        url_role=role,
                        redirect_target="",
                        status=U.STATUS_LIVE,
                        name=uni.get("name", ""),
                        ownership=uni.get("ownership", ""),
                    )
                )
    for unit in doc.get("units", []):
        for entry in unit.get("urls", []):
            number += 1
            if isinstance(entry, str):
                entry = {"url": entry}
            rows.append(
                _RawRow(
                    number=number,
                    university_id=unit["university_id"],
                    unit_id=unit["id"],
                    unit_type=unit["unit_type"],
                    activity=unit.get("activity", ""),
                    nature=unit.get("nature", ""),
                    url=entry["url"],
                    url_role=ROLE_UNIT,
                    redirect_target=entry.get("redirect_target", "") or "",
                    status=entry.get("status", U.STATUS_LIVE),
                    first_wave=str(unit.get("first_wave", "")),
                    name=unit.get("name", ""),
                )
            )
    return rows, doc.get("version")


def load_registry(
    path: str | Path,
    format: str | None = None,
    taxonomy: dict[str, UnitType] | None = None,
    config: U.UrlConfig = U.DEFAULT_URL_CONFIG,
) -> Registry:
    """Load, normalize and validate a registry file (CSV or JSON)."""
    path = Path(path)
    taxonomy = taxonomy or DEFAULT_TAXONOMY
    fmt = format or ("json" if path.suffix.lower() == ".json" else "csv")
    version_date = None
    if fmt == "json":
        rows, version_date = _rows_from_json(path)
    elif fmt == "csv":
        rows = _rows_from_csv(path)
    else:
        raise SchemaError(f"unknown registry format '{fmt}'")

    universities: dict[str, University] = {}
    units: dict[str, Unit] = {}
    log: list[AdmissionDecision] = []
    unit_rows: list[tuple[_RawRow, U.WebUrl]] = []

    def parse(row: _RawRow, text: str, field_name: str) -> U.WebUrl:
        try:
            return parse_url_row(text, row.status, row.redirect_target, config)
        except UrlParseError as exc:
            raise SchemaError(str(exc), row=row.number, field=field_name) from exc

    # First pass: university rows establish the domain sets.
    for row in rows:
        if row.url_role not in UNIVERSITY_ROLES:
            continue
        if not row.university_id:
            raise SchemaError("missing university_id", row=row.number, field="university_id")
        url = parse(row, row.url, "url")
        uni = universities.get(row.university_id)
        if uni is None:
            uni = University(id=row.university_id, name=row.name or row.university_id)
            universities[row.university_id] = uni
        if row.name:
            uni.name = row.name
        if row.ownership:
            if row.ownership not in ("public", "private"):
                raise SchemaError(
                    f"bad ownership '{row.ownership}'", row=row.number, field="ownership"
                )
            uni.ownership = row.ownership
        {
            ROLE_OFFICIAL: uni.official_urls,
            ROLE_ALIAS: uni.alias_urls,
            ROLE_ALTERNATIVE: uni.alternative_urls,
        }[row.url_role].append(url)
        log.append(AdmissionDecision(url.normalized, True, RULE_UNIVERSITY_URL))

    for uni in universities.values():
        _validate_university(uni)

    # Second pass: unit rows go through the admission rules.
    for row in rows:
        if row.url_role == ROLE_UNIT:
            unit_rows.append((row, parse(row, row.url, "url")))
        elif row.url_role not in UNIVERSITY_ROLES:
            raise SchemaError(f"bad url_role '{row.url_role}'", row=row.number, field="url_role")

    url_owner: dict[str, str] = {}  # normalized url -> unit id, for duplicate checks
    for row, url in unit_rows:
        uni = universities.get(row.university_id)
        if uni is None:
            raise ValidationError(
                f"unit '{row.unit_id}' references unknown university "
                f"'{row.university_id}' (row {row.number})"
            )
        unit = units.get(row.unit_id)
        if unit is None:
            if row.unit_type not in taxonomy:
                raise SchemaError(
                    f"unknown unit_type '{row.unit_type}'", row=row.number, field="unit_type"
                )
            unit_type = taxonomy[row.unit_type]
            if row.activity and row.activity != unit_type.activity.value:
                raise SchemaError(
                    f"activity '{row.activity}' contradicts taxonomy "
                    f"({unit_type.activity.value})",
                    row=row.number,
                    field="activity",
                )
            if row.nature and row.nature != unit_type.nature.value:
                raise SchemaError(
                    f"nature '{row.nature}' contradicts taxonomy ({unit_type.nature.value})",
                    row=row.number,
                    field="nature",
                )
            first_wave = 1
            if row.first_wave:
                try:
                    first_wave = int(row.first_wave)
                except ValueError:
                    raise SchemaError(
                        f"bad first_wave '{row.first_wave}'", row=row.number, field="first_wave"
                    ) from None
                if first_wave < 1:
                    raise SchemaError("first_wave must be >= 1", row=row.number, field="first_wave")
            unit = Unit(
                id=row.unit_id,
                name=row.name or row.unit_id,
                university_id=row.university_id,
                unit_type=unit_type,
                first_wave=first_wave,
            )
            units[row.unit_id] = unit
        elif unit.university_id != row.university_id:
            raise ValidationError(
                f"unit '{row.unit_id}' listed under two universities: "
                f"'{unit.university_id}' and '{row.university_id}' (row {row.number})"
            )

        redirect = None
        if row.redirect_target:
            try:
                redirect = U.parse_and_normalize_url(row.redirect_target, config)
            except UrlParseError as exc:
                raise SchemaError(str(exc), row=row.number, field="redirect_target") from exc
        decision = apply_admission_rules(url, redirect, uni, config)
        log.append(decision)
        admitted_here = []
        if decision.admitted:
            admitted_here.append(url)
        if decision.redirect_decision is not None:
            target_dec = decision.redirect_decision
            already_known = target_dec.url in url_owner or any(
                target_dec.url == u.normalized for u in unit.urls
            )
            if target_dec.admitted and not already_known:
                admitted_here.append(redirect)
                log.append(target_dec)
            elif not target_dec.admitted:
                log.append(target_dec)
        for admitted_url in admitted_here:
            owner = url_owner.get(admitted_url.normalized)
            if owner is not None and owner != unit.id:
                raise ValidationError(
                    f"URL '{admitted_url.normalized}' admitted for two units: "
                    f"'{owner}' and '{unit.id}'"
                )
            if owner is None:
                url_owner[admitted_url.normalized] = unit.id
                unit.urls.append(admitted_url)

    for unit in units.values():
        if not unit.urls:
            unit.excluded = True

    registry = Registry(
        universities=universities,
        units=units,
        admission_log=log,
        version_hash=hashlib.sha256(path.read_bytes()).hexdigest(),
        version_date=version_date,
    )
    return registry


def parse_url_row(
    text: str, status: str, redirect_target: str, config: U.UrlConfig
) -> U.WebUrl:
    url = U.parse_and_normalize_url(text, config)
    if status and status not in (U.STATUS_LIVE, U.STATUS_BROKEN):
        raise UrlParseError(f"bad status '{status}' for {text!r}")
    if status:
        url = url.with_status(status)
    if redirect_target:
        url = url.with_redirect(redirect_target)
    return url


def _validate_university(uni: University) -> None:
    if not uni.official_urls:
        raise ValidationError(f"university '{uni.id}' has no official URL")
    official_norm = {u.normalized for u in uni.official_urls}
    official_labels = {U.second_level_label(u.host) for u in uni.official_urls}
    for url in uni.alias_urls + uni.alternative_urls:
        if url.normalized in official_norm:
            raise ValidationError(
                f"university '{uni.id}': URL '{url.normalized}' listed as both "
                "official and alias/alternative"
            )
    for url in uni.alias_urls:
        if U.second_level_label(url.host) not in official_labels:
            raise ValidationError(
                f"university '{uni.id}': alias '{url.normalized}' shares no "
                "second-level label with an official URL"
            )
    for url in uni.alternative_urls:
        if U.second_level_label(url.host) in official_labels:
            raise ValidationError(
                f"university '{uni.id}': alternative '{url.normalized}' shares a "
                "second-level label with an official URL (should be an alias)"
            )


def save_registry_csv(registry: Registry, path: str | Path) -> None:
    """Write a registry back out in the documented CSV layout."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS + ("first_wave", "name", "ownership"))
        for uni in sorted(registry.universities.values(), key=lambda u: u.id):
            for role, urls in (
                (ROLE_OFFICIAL, uni.official_urls),
                (ROLE_ALIAS, uni.alias_urls),
                (ROLE_ALTERNATIVE, uni.alternative_urls),
            ):
                for url in urls:
                    writer.writerow(
                        [uni.id, "", "", "", "", url.normalized, role, "", url.status,
                         "", uni.name, uni.ownership]
                    )
        for unit in sorted(registry.units.values(), key=lambda u: u.id):
            for url in unit.urls:
                writer.writerow(
                    [
                        unit.university_id,
                        unit.id,
                        unit.unit_type.id,
                        unit.unit_type.activity.value,
                        unit.unit_type.nature.value,
                        url.normalized,
                        ROLE_UNIT,
                        url.redirect_target or "",
                        url.status,
                        str(unit.first_wave),
                        unit.name,
                        "",
                    ]
                )
