"""E2E tests of the hogfda command line on a reduced synthetic city.

The city is small (26x26 grid, 24 quarters, 120 days) so that each full run
takes seconds.
"""

import json
from pathlib import Path

import pytest
import yaml

from src.main import main

STAGED_COMMANDS = [
    "features",
    "cluster-days",
    "ddp",
    "outliers",
    "smooth",
    "fda-cluster",
    "fboxplot",
]

PIPELINE_ARTIFACTS = [
    "features.csv",
    "day_clusters.json",
    "ddp.csv",
    "outliers.json",
    "smoothed.csv",
    "fda_clusters.json",
    "fboxplot.json",
    "calendar.csv",
    "ground_truth.json",
    "report.json",
    "manifest.json",
    "timings.json",
]


def write_config(path: Path, data: dict) -> Path:
    path.write_text(yaml.safe_dump(data))
    return path


@pytest.fixture(scope="module")
def config_path(tmp_path_factory, reduced_config_doc) -> Path:
    return write_config(tmp_path_factory.mktemp("cfg") / "reduced.yaml", reduced_config_doc())


@pytest.fixture(scope="module")
def pipeline_run(config_path, tmp_path_factory) -> Path:
    """One synthetic pipeline run shared by the artifact tests."""
    out = tmp_path_factory.mktemp("pipeline") / "out"
    code = main(["pipeline", "--synthetic", "--config", str(config_path), "--out", str(out), "--quiet"])
    assert code == 0
    return out


class TestPipelineCommand:
    """E2E tests for `hogfda pipeline`."""

    def test_writes_every_artifact(self, pipeline_run):
        """A successful run leaves every artifact and at least one plot file."""
        for name in PIPELINE_ARTIFACTS:
            assert (pipeline_run / name).is_file(), name
        assert list((pipeline_run / "plots").glob("cluster*_sub*.csv"))

    def test_manifest_lists_checksummed_artifacts(self, pipeline_run):
        """The manifest covers the results but not the timings."""
        manifest = json.loads((pipeline_run / "manifest.json").read_text())
        paths = [entry["path"] for entry in manifest["files"]]
        assert "report.json" in paths
        assert "timings.json" not in paths
        assert paths == sorted(paths)

    def test_report_accounts_for_every_day(self, pipeline_run):
        """Every read day is dropped, kept or flagged exactly once."""
        report = json.loads((pipeline_run / "report.json").read_text())
        seen = list(report["ingest"]["dropped_day_ids"])
        for cluster in report["clusters"]:
            seen += cluster["kept_day_ids"] + cluster["outlier_day_ids"]
        assert sorted(seen) == sorted(set(seen))
        assert len(seen) == report["ingest"]["days_read"] == 120
        assert report["elbow"]["k"] == len(report["clusters"])
        assert report["recovery"] is not None
        assert report["bic_convention"].startswith("larger is better")

    def test_timings_name_the_stages(self, pipeline_run):
        """timings.json has one entry per stage run."""
        timings = json.loads((pipeline_run / "timings.json").read_text())
        assert {"simulate", "missing", "features", "cluster-days", "fboxplot", "emit"} <= set(timings)
        assert all(v >= 0 for v in timings.values())

    def test_worker_count_does_not_change_results(self, config_path, pipeline_run, tmp_path, capsys):
        """Three workers give byte-identical results to one."""
        args = ["pipeline", "--synthetic", "--config", str(config_path), "--quiet"]
        assert main([*args, "--out", str(tmp_path / "w1"), "--workers", "1"]) == 0
        assert main([*args, "--out", str(tmp_path / "w3"), "--workers", "3"]) == 0
        for name in ["report.json", "manifest.json", "fda_clusters.json"]:
            assert (tmp_path / "w1" / name).read_bytes() == (tmp_path / "w3" / name).read_bytes()
        assert (tmp_path / "w1" / "report.json").read_bytes() == (
            pipeline_run / "report.json"
        ).read_bytes()
        assert "k=" in capsys.readouterr().out

    def test_forced_k(self, config_path, tmp_path):
        """--k skips the elbow and is recorded as forced."""
        out = tmp_path / "forced"
        args = ["pipeline", "--synthetic", "--config", str(config_path), "--out", str(out), "--k", "3"]
        assert main([*args, "--quiet"]) == 0
        clusters = json.loads((out / "day_clusters.json").read_text())
        assert clusters["k"] == 3
        assert clusters["forced"] is True
        assert len(clusters["ratio_curve"]) == 1


class TestFailures:
    """E2E tests for exit codes."""

    def test_missing_input_file(self, tmp_path, capsys):
        """A missing input is a data error and nothing is written."""
        out = tmp_path / "out"
        code = main(["pipeline", "--input", str(tmp_path / "absent.csv"), "--out", str(out), "--quiet"])
        assert code == 3
        assert not out.exists()
        assert "error:" in capsys.readouterr().err

    def test_invalid_config_names_the_key(self, tmp_path, capsys, reduced_config_doc):
        """An even basis size exits 2 and names fda.n_basis."""
        data = reduced_config_doc()
        data["fda"]["n_basis"] = 8
        path = write_config(tmp_path / "bad.yaml", data)
        code = main(["pipeline", "--synthetic", "--config", str(path), "--out", str(tmp_path / "o")])
        assert code == 2
        assert "fda.n_basis" in capsys.readouterr().err
        assert not (tmp_path / "o").exists()

    def test_negative_seed(self, tmp_path):
        """Overrides are validated like the document."""
        code = main(["simulate", "--seed", "-1", "--out", str(tmp_path / "o"), "--quiet"])
        assert code == 2

    def test_stage_without_its_inputs(self, tmp_path, capsys):
        """A stage run on an empty directory reports the missing artifact."""
        code = main(["features", "--out", str(tmp_path), "--quiet"])
        assert code == 3
        assert "days.csv" in capsys.readouterr().err


class TestStagedCommands:
    """E2E tests chaining the per-stage commands."""

    def test_stages_reproduce_the_pipeline(self, config_path, pipeline_run, tmp_path):
        """simulate, ingest and each stage in turn give the pipeline's results."""
        out = tmp_path / "staged"
        common = ["--config", str(config_path), "--out", str(out), "--quiet"]
        assert main(["simulate", *common]) == 0
        assert (out / "synthetic.csv").is_file()
        assert main(["ingest", "--input", str(out / "synthetic.csv"), *common]) == 0
        ingest = json.loads((out / "ingest_report.json").read_text())
        assert ingest["days_read"] == 120
        for command in STAGED_COMMANDS:
            assert main([command, *common]) == 0, command

        for name in ["day_clusters.json", "outliers.json", "fda_clusters.json", "fboxplot.json"]:
            assert (out / name).read_bytes() == (pipeline_run / name).read_bytes(), name
        assert (out / "calendar.csv").is_file()
        manifest = json.loads((out / "manifest.json").read_text())
        assert {"synthetic.csv", "days.csv", "fboxplot.json"} <= {e["path"] for e in manifest["files"]}
