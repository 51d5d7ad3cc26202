"""Unit-type taxonomy: 23 codes split into 17 institutions and 6 products.

Every code maps to exactly one university activity. The default table is
the one the bundled fixtures use; callers may load their own as long as it
keeps the 17/6 partition.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import ValidationError


class Activity(str, Enum):
    TEACHING = "teaching"
    RESEARCH = "research"
    TRANSFER = "transfer"
    SERVICES = "services"
    ADMINISTRATION = "administration"


class Nature(str, Enum):
    INSTITUTION = "institution"
    PRODUCT = "product"


@dataclass(frozen=True)
class UnitType:
    id: str
    nature: Nature
    activity: Activity


_DEFAULT_TABLE: tuple[tuple[str, Nature, Activity], ...] = (
    # institutions (17)
    ("faculty", Nature.INSTITUTION, Activity.TEACHING),
    ("school", Nature.INSTITUTION, Activity.TEACHING),
    ("department", Nature.INSTITUTION, Activity.TEACHING),
    ("doctoral_school", Nature.INSTITUTION, Activity.TEACHING),
    ("business_school", Nature.INSTITUTION, Activity.TEACHING),
    ("lifelong_learning_center", Nature.INSTITUTION, Activity.TEACHING),
    ("research_group", Nature.INSTITUTION, Activity.RESEARCH),
    ("research_institute", Nature.INSTITUTION, Activity.RESEARCH),
    ("research_center", Nature.INSTITUTION, Activity.RESEARCH),
    ("otri", Nature.INSTITUTION, Activity.TRANSFER),
    ("foundation", Nature.INSTITUTION, Activity.TRANSFER),
    ("science_park", Nature.INSTITUTION, Activity.TRANSFER),
    ("library", Nature.INSTITUTION, Activity.SERVICES),
    ("archive", Nature.INSTITUTION, Activity.SERVICES),
    ("documentation_center", Nature.INSTITUTION, Activity.SERVICES),
    ("museum", Nature.INSTITUTION, Activity.SERVICES),
    ("rectorate", Nature.INSTITUTION, Activity.ADMINISTRATION),
    # products (6)
    ("repository", Nature.PRODUCT, Activity.RESEARCH),
    ("catalog", Nature.PRODUCT, Activity.SERVICES),
    ("digital_collection", Nature.PRODUCT, Activity.SERVICES),
    ("blog_platform", Nature.PRODUCT, Activity.SERVICES),
    ("video_platform", Nature.PRODUCT, Activity.SERVICES),
    ("virtual_campus", Nature.PRODUCT, Activity.TEACHING),
)

EXPECTED_CODES = 23
EXPECTED_INSTITUTIONS = 17
EXPECTED_PRODUCTS = 6


def load_taxonomy(
    table: tuple[tuple[str, Nature, Activity], ...] | None = None,
) -> dict[str, UnitType]:
    """Build and validate the unit-type table (default: the built-in 23)."""
    rows = table if table is not None else _DEFAULT_TABLE
    types: dict[str, UnitType] = {}
    for code, nature, activity in rows:
        if code in types:
            raise ValidationError(f"duplicate unit-type code: {code}")
        types[code] = UnitType(id=code, nature=Nature(nature), activity=Activity(activity))
    institutions = sum(1 for t in types.values() if t.nature is Nature.INSTITUTION)
    products = len(types) - institutions
    if len(types) != EXPECTED_CODES or institutions != EXPECTED_INSTITUTIONS or products != EXPECTED_PRODUCTS:
        raise ValidationError(
            f"taxonomy must hold {EXPECTED_CODES} codes "
            f"({EXPECTED_INSTITUTIONS} institution / {EXPECTED_PRODUCTS} product), "
            f"got {len(types)} ({institutions}/{products})"
        )
    return types


DEFAULT_TAXONOMY = load_taxonomy()
