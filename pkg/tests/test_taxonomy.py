import pytest

from uniweb.errors import ValidationError
from uniweb.taxonomy import Activity, DEFAULT_TAXONOMY, Nature, load_taxonomy


def test_default_taxonomy_partition():
    types = load_taxonomy()
    assert len(types) == 23
    institutions = [t for t in types.values() if t.nature is Nature.INSTITUTION]
    products = [t for t in types.values() if t.nature is Nature.PRODUCT]
    assert len(institutions) == 17
    assert len(products) == 6


def test_every_code_maps_to_one_activity():
    for code, unit_type in DEFAULT_TAXONOMY.items():
        assert unit_type.id == code
        assert isinstance(unit_type.activity, Activity)


def test_all_activities_covered():
    assert {t.activity for t in DEFAULT_TAXONOMY.values()} == set(Activity)


def test_bad_partition_rejected():
    table = tuple(
        (code, t.nature, t.activity) for code, t in list(DEFAULT_TAXONOMY.items())[:22]
    )
    with pytest.raises(ValidationError, match="23 codes"):
        load_taxonomy(table)


def test_duplicate_code_rejected():
    table = tuple((code, t.nature, t.activity) for code, t in DEFAULT_TAXONOMY.items())
    table = table + (("faculty", Nature.INSTITUTION, Activity.TEACHING),)
    with pytest.raises(ValidationError, match="duplicate"):
        load_taxonomy(table)
