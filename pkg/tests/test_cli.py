import hashlib
import json
from pathlib import Path

import pytest

from buslinesim.cli import main


def _run(*argv):
    return main(list(argv))


def _digest_tree(root: Path) -> dict[str, str]:
    return {
        str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """One small synth -> ingest -> fit run shared by the CLI tests."""
    root = tmp_path_factory.mktemp("pipeline")
    synth_dir = root / "synth"
    assert _run("synth", "--days", "2", "--seed", "11", "--out", str(synth_dir)) == 0
    totallog = root / "work" / "totallog.jsonl"
    assert (
        _run(
            "ingest",
            "--events", str(synth_dir / "events.csv"),
            "--passengers", str(synth_dir / "passengers.csv"),
            "--network", str(synth_dir / "network.json"),
            "--out", str(totallog),
        )
        == 0
    )
    models = root / "work" / "models.json"
    assert (
        _run(
            "fit",
            "--totallog", str(totallog),
            "--network", str(synth_dir / "network.json"),
            "--out", str(models),
        )
        == 0
    )
    return root, synth_dir, totallog, models


def test_missing_subcommand_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


def test_missing_required_flag_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["ingest", "--events", "x.csv"])
    assert exc.value.code == 2


def test_nonexistent_input_is_validation_error(tmp_path, capsys):
    code = _run(
        "ingest",
        "--events", str(tmp_path / "missing.csv"),
        "--passengers", str(tmp_path / "missing2.csv"),
        "--network", str(tmp_path / "net.json"),
        "--out", str(tmp_path / "out.jsonl"),
    )
    assert code == 3
    assert "validation" in capsys.readouterr().err


def test_invalid_scenario_is_validation_error(pipeline, tmp_path, capsys):
    _root, _synth_dir, _totallog, models = pipeline
    scenario = tmp_path / "scenario.json"
    scenario.write_text(json.dumps({"global_grwoth": 1.1}), encoding="utf-8")
    code = _run(
        "simulate",
        "--models", str(models),
        "--scenario", str(scenario),
        "--runs", "1",
        "--out", str(tmp_path / "sim"),
    )
    assert code == 3


def test_synth_outputs_and_manifest(pipeline):
    _root, synth_dir, _totallog, _models = pipeline
    for name in (
        "network.json",
        "truth.json",
        "events.csv",
        "passengers.csv",
        "expected_total_log.jsonl",
        "expected_rejections.json",
        "manifest.json",
    ):
        assert (synth_dir / name).exists()
    manifest = json.loads((synth_dir / "manifest.json").read_text())
    assert manifest["command"] == "synth"
    assert manifest["master_seed"] == 11
    assert manifest["tool"] == "buslinesim"


def test_ingest_manifest_records_input_digests(pipeline):
    _root, synth_dir, totallog, _models = pipeline
    manifest = json.loads((totallog.with_name("totallog.manifest.json")).read_text())
    events_digest = hashlib.sha256((synth_dir / "events.csv").read_bytes()).hexdigest()
    assert manifest["inputs"]["events"]["sha256"] == events_digest
    assert (totallog.with_name("totallog.rejections.json")).exists()


def test_simulate_and_compare_outputs(pipeline, tmp_path):
    root, synth_dir, totallog, models = pipeline
    sim = tmp_path / "sim"
    assert _run("simulate", "--models", str(models), "--runs", "3", "--seed", "5", "--out", str(sim)) == 0
    summary = json.loads((sim / "summary.json").read_text())
    assert summary["runs"] == 3
    assert summary["audit"]["violations"] == 0
    assert (sim / "per_stop_punctuality_s.csv").exists()
    assert (sim / "per_trip_occupancy_pax.csv").exists()
    manifest = json.loads((sim / "manifest.json").read_text())
    assert manifest["replications"] == 3

    cmp_dir = tmp_path / "cmp"
    assert (
        _run(
            "compare",
            "--model", str(sim / "summary.json"),
            "--reference", str(totallog),
            "--network", str(synth_dir / "network.json"),
            "--out", str(cmp_dir),
        )
        == 0
    )
    comparison = json.loads((cmp_dir / "comparison.json").read_text())
    rows = comparison["per_stop"]["A"]["travel_time_s"]["rows"]
    assert rows
    for cell in rows.values():
        assert cell["abs_diff"] >= 0.0
        assert cell["abs_diff"] == pytest.approx(abs(cell["model"] - cell["reference"]))
    # Smoke contract: every |diff| column finite.
    for axis in comparison.values():
        for direction in axis.values():
            for table in direction.values():
                assert table["mae"] == table["mae"]  # not NaN


def test_subcommands_rerun_byte_identical(pipeline, tmp_path):
    """Identical flags produce byte-identical outputs, manifests included."""
    _root, synth_dir, totallog, models = pipeline

    out = tmp_path / "synth2"
    assert _run("synth", "--days", "2", "--seed", "11", "--out", str(out)) == 0
    first = _digest_tree(out)
    assert _run("synth", "--days", "2", "--seed", "11", "--out", str(out)) == 0
    assert _digest_tree(out) == first
    assert first == _digest_tree(synth_dir)

    sim = tmp_path / "sim_det"
    assert _run("simulate", "--models", str(models), "--runs", "2", "--seed", "9", "--out", str(sim)) == 0
    first = _digest_tree(sim)
    assert _run("simulate", "--models", str(models), "--runs", "2", "--seed", "9", "--out", str(sim)) == 0
    assert _digest_tree(sim) == first


def test_charts_emitted_when_requested(pipeline, tmp_path):
    _root, synth_dir, totallog, models = pipeline
    sim = tmp_path / "sim"
    assert _run("simulate", "--models", str(models), "--runs", "2", "--seed", "5", "--out", str(sim)) == 0
    cmp_dir = tmp_path / "cmp_charts"
    assert (
        _run(
            "compare",
            "--model", str(sim / "summary.json"),
            "--reference", str(totallog),
            "--network", str(synth_dir / "network.json"),
            "--charts",
            "--out", str(cmp_dir),
        )
        == 0
    )
    charts = list((cmp_dir / "charts").glob("*.svg"))
    assert charts
    names = {c.name for c in charts}
    assert "punctuality_s_A_per_trip.svg" in names
