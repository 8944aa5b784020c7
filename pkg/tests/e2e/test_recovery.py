"""Recovery of the planted structure on the full-size synthetic city, over many seeds.

These runs take tens of minutes; select them with ``pytest -m slow``.
"""

import numpy as np
import pytest

from src.config.pipeline import load_config
from src.pipeline.runner import run_pipeline

pytestmark = pytest.mark.slow

SEEDS = range(20)


@pytest.fixture(scope="module")
def reports(tmp_path_factory):
    """The default configuration run once per seed on its synthetic city."""
    out = {}
    for seed in SEEDS:
        cfg = load_config(overrides={"seed": seed}, synthetic=True)
        out[seed] = run_pipeline(
            cfg, tmp_path_factory.mktemp(f"seed{seed}") / "out", synthetic=True, workers=4
        )
    return out


class TestFullSizeRecovery:
    """Slow tests for recovery of the six day types, the summer tiers and the shocks."""

    def test_six_day_types(self, reports):
        """The elbow picks six clusters in at least 8 of 10 cities, each matching the day types."""
        picked = [s for s in SEEDS[:10] if reports[s].elbow.k == 6]
        assert len(picked) >= 8, {s: reports[s].elbow.k for s in SEEDS[:10]}
        for s in picked:
            assert reports[s].recovery.day_cluster_ari >= 0.9, s

    def test_summer_tiers(self, reports):
        """The summer weekday cluster splits into its three tiers in at least 8 of 10 cities."""
        chosen = {}
        for s in SEEDS[:10]:
            recovery = reports[s].recovery
            assert recovery.subgroup_cluster is not None
            cluster = next(c for c in reports[s].clusters if c.label == recovery.subgroup_cluster)
            chosen[s] = (cluster.K, recovery.subgroup_ari)
        three = [s for s, (K, _) in chosen.items() if K == 3]
        assert len(three) >= 8, chosen
        for s in three:
            assert chosen[s][1] >= 0.9, chosen

    def test_planted_shocks_flagged(self, reports):
        """Shocked days are trimmed with a false-alarm rate of at most 5% over 20 cities."""
        recoveries = [reports[s].recovery for s in SEEDS]
        planted = sum(r.planted_outliers for r in recoveries)
        recovered = sum(r.outliers_recovered for r in recoveries)
        assert planted == 2 * len(recoveries)
        assert recovered / planted >= 0.9
        assert np.mean([r.false_positive_rate for r in recoveries]) <= 0.05
