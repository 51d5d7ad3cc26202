from pathlib import Path

import pytest

from uniweb.measurement import load_snapshot, make_waves, reindex_snapshots
from uniweb.registry import load_registry

FIXTURES = Path(__file__).parent / "fixtures"
MINI = FIXTURES / "mini"
GOLDEN = Path(__file__).parent / "golden"

WAVE_LABELS = ["2010-03", "2010-06", "2010-09", "2010-12"]


@pytest.fixture(scope="session")
def mini_registry():
    return load_registry(MINI / "registry.csv")


@pytest.fixture(scope="session")
def mini_snapshots():
    waves = make_waves(WAVE_LABELS)
    snaps = [
        load_snapshot(MINI / "snapshots" / f"snapshot_{label}.csv")
        for label in WAVE_LABELS
    ]
    return reindex_snapshots(snaps, waves)
