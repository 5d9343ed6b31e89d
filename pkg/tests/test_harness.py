import json
import os

import numpy as np
import pytest

from gazepriv.harness import cli
from gazepriv.harness.config import (ConfigError, PipelineConfig, available_presets, build_config,
                                     load_preset)
from gazepriv.harness.ingest import ParseError, SchemaError, ingest, manifest, parse_name, read_recording
from gazepriv.harness.pipeline import recording_seed, run_pipeline, variant_slug
from gazepriv.harness.report import (ReportRow, UtilityCell, describe, emit_report, latency_columns,
                                     load_report, render_text, sort_rows)
from gazepriv.signal import Recording
from gazepriv.synthetic import on_target_recording, subject_corpus, write_recording_csv


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    for r in subject_corpus(3, duration_s=6.0, seed=5):
        write_recording_csv(r, root / f"{r.key}.csv")
    return root


# -- config ---------------------------------------------------------------

def test_presets_cover_every_table_variant():
    names = available_presets()
    for n in ["baseline", "median3", "downsample_50", "lwma_200", "targeted_laplace",
              "fir_25_49", "kalman", "gaussian_2", "table1"]:
        assert n in names
    assert len(load_preset("table1")["privatizers"]) == 19


def test_stochastic_preset_needs_seed():
    with pytest.raises(ConfigError):
        build_config("gaussian_1")
    assert build_config("gaussian_1", rng_seed=3).rng_seed == 3


def test_config_rejects_bad_input(tmp_path):
    with pytest.raises(ConfigError):
        build_config(privatizers=[{"op": "lwma", "window": 0}])
    with pytest.raises(ConfigError):
        build_config(privatizers=[{"op": "nope"}])
    with pytest.raises(ConfigError):
        build_config(colour="red")
    with pytest.raises(ConfigError):
        build_config(classifiers=[{"name": "ivt"}])
    p = tmp_path / "c.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        build_config(config_path=str(p))


def test_config_merge_order(tmp_path, monkeypatch):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"privatizer": {"op": "median3"}, "workers": 3}))
    monkeypatch.setenv("GAZEPRIV_DATA", "/some/where")
    cfg = build_config("kalman", str(p), workers=2)
    assert cfg.privatizers == [{"op": "median3"}]  # the file overrides the preset
    assert cfg.workers == 2 and cfg.dataset_path == "/some/where"


# -- ingest ---------------------------------------------------------------

def test_ingest_two_rows_and_nan(tmp_path):
    p = tmp_path / "S1_1_RAN.csv"
    p.write_text("t_ms,x_dva,y_dva\n0,1.0,2.0\n1,NaN,nan\n")
    r = read_recording(p, parse_name(p))
    assert len(r) == 2 and r.valid.tolist() == [True, False]
    assert (r.subject_id, r.session_id, r.task_tag) == ("1", "1", "RAN")
    assert r.fs == 1000.0


def test_ingest_missing_header(tmp_path):
    p = tmp_path / "S1_1_RAN.csv"
    p.write_text("0,1.0,2.0\n")
    with pytest.raises(SchemaError):
        read_recording(p)


def test_ingest_reports_line_and_column(tmp_path):
    p = tmp_path / "S1_1_RAN.csv"
    p.write_text("t_ms,x_dva,y_dva\n0,1,2\n1,abc,2\n")
    with pytest.raises(ParseError) as e:
        read_recording(p)
    assert e.value.line == 3 and e.value.column == "x_dva"


def test_ingest_targets_and_roundtrip(tmp_path):
    rec = on_target_recording(5, dwell_ms=150.0)
    write_recording_csv(rec, tmp_path / "S1_1_RAN.csv")
    back = read_recording(tmp_path / "S1_1_RAN.csv")
    assert back.targets == rec.targets
    np.testing.assert_array_equal(back.x, rec.x)


def test_manifest_and_errors(dataset, tmp_path):
    assert len(manifest(dataset)) == 6
    (tmp_path / "S9_1_RAN.csv").write_text("bad header\n")
    (tmp_path / "notes.csv").write_text("ignored\n")
    recs, errors = ingest(tmp_path)
    assert recs == [] and len(errors) == 1


# -- report ---------------------------------------------------------------

def test_describe_and_latency_columns():
    assert describe({"op": "downsample", "factor": 11}) == ("Temporal Sampling (Hz)", "90")
    assert latency_columns({"op": "lwma", "window": 100}) == (99, 66, "66")
    assert latency_columns({"op": "kalman"})[:2] == (0, 0)


def _row(approach, variant, ir=None):
    return ReportRow(approach, variant, ir, {"idt": UtilityCell(0.1, 0.5, 100.0, 3)}, 0, 0)


def test_rows_sorted_by_table_order_then_variant():
    rows = [_row("Kalman Filter", "-"), _row("Smoothing (window)", "200"),
            _row("Smoothing (window)", "50"), _row("Baseline", "Raw data")]
    out = [(r.approach, r.variant) for r in sort_rows(rows)]
    assert out == [("Baseline", "Raw data"), ("Smoothing (window)", "50"),
                   ("Smoothing (window)", "200"), ("Kalman Filter", "-")]


def test_emit_report_one_row(tmp_path):
    emit_report([_row("Baseline", "Raw data", 50.0)], tmp_path, ["idt"])
    lines = (tmp_path / "report.txt").read_text().splitlines()
    assert lines[0].split()[:2] == ["Approach", "Variant"]
    assert len([l for l in lines[2:] if l.strip()]) == 1
    csv_lines = (tmp_path / "report.csv").read_text().splitlines()
    assert csv_lines[0].startswith("Approach,Variant,Rank-1 IR (%),IDT U50|E50")
    rows, classifiers, _ = load_report(tmp_path / "report.json")
    assert rows[0].rank1_ir_pct == 50.0 and classifiers == ["idt"]


def test_blank_ir_renders_empty():
    text = render_text([_row("Baseline", "Raw data", None)], ["idt"])
    assert "Raw data" in text and "None" not in text


# -- pipeline -------------------------------------------------------------

def test_recording_seed_depends_on_identity_only():
    a = Recording.from_arrays(np.zeros(3), np.zeros(3), 1000.0, subject_id="1", session_id="1")
    b = Recording.from_arrays(np.ones(3), np.ones(3), 1000.0, subject_id="1", session_id="1")
    c = Recording.from_arrays(np.zeros(3), np.zeros(3), 1000.0, subject_id="2", session_id="1")
    assert recording_seed(7, a).entropy == recording_seed(7, b).entropy
    assert recording_seed(7, a).generate_state(2).tolist() != recording_seed(7, c).generate_state(2).tolist()
    assert recording_seed(None, a) is None


def test_identity_pipeline_on_target_data(tmp_path):
    recs = [on_target_recording(100, 150.0, seed=s, subject_id=str(s)) for s in (1, 2)]
    cfg = build_config(output_dir=str(tmp_path), run_privacy=False,
                       classifiers=[{"name": "idt"}])
    row = run_pipeline(cfg, recordings=recs).rows[0]
    assert row.utility["idt"].SR_pct == 100.0
    assert row.utility["idt"].U50_E50 <= 1e-9
    summary = json.loads((tmp_path / "variants" / "identity" / "summary_idt.json").read_text())
    assert set(summary["per_user_E50"]) == {"1", "2"}


def test_pipeline_counts_and_artifacts(dataset, tmp_path):
    cfg = build_config(dataset_path=str(dataset), output_dir=str(tmp_path), rng_seed=1,
                       privatizers=[{"op": "identity"}, {"op": "fir", "fc_hz": 25.0, "taps": 49},
                                    {"op": "downsample", "factor": 20}])
    res = run_pipeline(cfg)
    assert res.processed + res.skipped == res.ingested == 18
    rows = {r.approach: r for r in res.rows}
    assert rows["Baseline"].rank1_ir_pct is not None
    assert rows["Temporal Sampling (Hz)"].rank1_ir_pct is None
    assert "RateMismatch" in rows["Temporal Sampling (Hz)"].rank1_note
    fir_dir = tmp_path / "variants" / variant_slug({"op": "fir", "fc_hz": 25.0, "taps": 49})
    assert (fir_dir / "fir_coefficients.csv").exists()
    assert (fir_dir / "privacy" / "embeddings.json").exists()
    assert len(list((fir_dir / "outcomes" / "idt").glob("*.csv"))) == 6


def test_unknown_embedder_gives_blank_ir_with_reason(dataset, tmp_path):
    cfg = build_config(dataset_path=str(dataset), output_dir=str(tmp_path), run_utility=False,
                       embedder={"name": "ekyt"})
    row = run_pipeline(cfg).rows[0]
    assert row.rank1_ir_pct is None and "embedder unavailable" in row.rank1_note


def test_failing_recording_is_skipped_not_fatal(tmp_path):
    good = on_target_recording(10, seed=1, subject_id="1")
    bad = Recording.from_arrays(np.full(100, np.nan), np.full(100, np.nan), 1000.0, subject_id="2")
    cfg = build_config(output_dir=str(tmp_path), run_privacy=False)
    res = run_pipeline(cfg, recordings=[good, bad])
    assert res.processed == 1 and res.skipped == 1
    assert "AllSamplesMissing" in res.skipped_keys[0]


# -- CLI ------------------------------------------------------------------

def test_cli_exit_codes(dataset, tmp_path, capsys):
    assert cli.main(["ingest-check", "--data", str(dataset)]) == 0
    assert "6 ok, 0 failed" in capsys.readouterr().out
    assert cli.main(["run", "--preset", "gaussian_1", "--data", str(dataset)]) == 1
    assert cli.main(["run", "--preset", "no_such_preset", "--data", str(dataset)]) == 1
    assert cli.main(["run", "--data", str(tmp_path / "missing"), "--output", str(tmp_path)]) == 2
    empty = tmp_path / "empty"
    empty.mkdir()
    assert cli.main(["ingest-check", "--data", str(empty)]) == 2


def test_cli_subcommands(dataset, tmp_path, capsys):
    out = tmp_path / "o"
    base = ["--data", str(dataset), "--output", str(out), "--preset", "median3"]
    assert cli.main(["privatize"] + base) == 0
    assert len(list((out / "variants" / "median3" / "privatized").glob("*.csv"))) == 6
    assert cli.main(["classify"] + base) == 0
    assert (out / "variants" / "median3" / "labels" / "ikf" / "S1_1_RAN.csv").exists()
    assert cli.main(["simulate"] + base) == 0
    assert cli.main(["privacy"] + base) == 0
    assert cli.main(["report", str(out), "--format", "csv"]) == 0
    assert capsys.readouterr().out.splitlines()[-1].startswith("Median Filter,3-sample")
    assert cli.main(["presets"]) == 0


def test_cli_env_var_supplies_dataset(dataset, tmp_path, monkeypatch):
    monkeypatch.setenv("GAZEPRIV_DATA", str(dataset))
    assert cli.main(["simulate", "--preset", "baseline", "--output", str(tmp_path)]) == 0
