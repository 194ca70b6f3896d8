import json
import subprocess
import sys

import numpy as np
import pytest
import yaml

from snaprg.cli import EXIT_COMPUTE, EXIT_CONFIG, EXIT_INPUT, EXIT_OK, main
from snaprg.dataset import read_dataset, write_dataset
from snaprg.pipeline import manifest_checksums
from snaprg.tables import read_degrees, read_tsv


def small_config(tmp_path, **over):
    doc = {
        "lattice": {"dimension": 2, "lengths": [16, 16]},
        "sampler": {"T_over_Tc": 1.0, "n_snapshots": 1500, "n_therm": 100, "seed": 3},
        "rg": {"n_steps": 2},
        "analysis": {"max_d": 4},
        "io": {"output_dir": str(tmp_path / "run")},
    }
    for k, v in over.items():
        doc.setdefault(k, {}).update(v)
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump(doc))
    return path


@pytest.fixture(scope="module")
def pipeline_run(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("pipe")
    cfg = small_config(tmp)
    assert main(["pipeline", "--config", str(cfg)]) == EXIT_OK
    return tmp, cfg


def test_pipeline_outputs(pipeline_run):
    tmp, _ = pipeline_run
    run = tmp / "run"
    manifest = json.loads((run / "manifest.json").read_text())
    expected = {"sample", "rg_step1", "rg_step2", "wfn_step0", "wfn_step1", "wfn_step2",
                "analyze"}
    assert set(manifest["stages"]) == expected
    for name in manifest_checksums(manifest):
        assert (run / name).exists()
    cols, rows, comments = read_tsv(run / "degrees_step1.tsv")
    assert cols == ["node", "degree", "r1", "multiplicity"]
    assert any(c.startswith("R = ") for c in comments)
    cols, rows, _ = read_tsv(run / "correlation_step2.tsv")
    assert cols[:3] == ["d", "d_original", "C"]
    assert float(rows[1][1]) == pytest.approx(2.0)
    assert read_dataset(run / "snapshots_step2.snaprg").n_bits == 64


def test_pipeline_deterministic_and_resumable(pipeline_run, tmp_path, caplog):
    tmp, cfg = pipeline_run
    first = manifest_checksums(json.loads((tmp / "run" / "manifest.json").read_text()))
    assert main(["pipeline", "--config", str(cfg), "--output-dir", str(tmp_path / "b")]) == 0
    second = manifest_checksums(json.loads((tmp_path / "b" / "manifest.json").read_text()))
    assert first == second
    caplog.set_level("INFO", logger="snaprg")
    assert main(["pipeline", "--config", str(cfg), "--resume"]) == 0
    assert sum("up to date" in r.message for r in caplog.records) == 7


def test_resume_reruns_damaged_stage(pipeline_run, caplog):
    tmp, cfg = pipeline_run
    deg = tmp / "run" / "degrees_step2.tsv"
    original = deg.read_bytes()
    deg.write_text("tampered\n")
    caplog.set_level("INFO", logger="snaprg")
    assert main(["pipeline", "--config", str(cfg), "--resume"]) == 0
    ran = [r.message for r in caplog.records if "running" in r.message]
    # the rebuilt table is byte-identical, so analysis stays current
    assert ran == ["stage wfn_step2: running"]
    assert deg.read_bytes() == original


def test_stepwise_commands(pipeline_run, tmp_path, capsys):
    tmp, cfg = pipeline_run
    snap = tmp_path / "s.snaprg"
    assert main(["sample", "--config", str(cfg), "-o", str(snap)]) == 0
    assert "config" in read_dataset(snap).metadata
    assert np.array_equal(read_dataset(snap).words,
                          read_dataset(tmp / "run" / "snapshots_step0.snaprg").words)
    assert main(["rg", str(snap), "--n-steps", "2", "-o", str(tmp_path / "flow")]) == 0
    step2 = tmp_path / "flow_step2.snaprg"
    assert np.array_equal(read_dataset(step2).words,
                          read_dataset(tmp / "run" / "snapshots_step2.snaprg").words)
    out = tmp_path / "deg.tsv"
    assert main(["wfn", str(step2), "-o", str(out)]) == 0
    assert np.array_equal(read_degrees(out), read_degrees(tmp / "run" / "degrees_step2.tsv"))
    summary = json.loads(out.with_suffix(".json").read_text())
    assert summary["edge_rule"] == "D < R"
    assert main(["analyze", "--degrees", str(out), "--correlation", str(step2),
                 "-o", str(tmp_path / "an"), "--max-d", "4"]) == 0
    for name in ("histogram_deg.tsv", "fits.tsv", "ks_matrix.tsv", "correlation_flow_step2.tsv"):
        assert (tmp_path / "an" / name).exists()


def test_ingest_command(tmp_path):
    txt = tmp_path / "q.txt"
    rows = np.random.default_rng(0).integers(0, 2, size=(5, 16))
    txt.write_text("\n".join(" ".join(map(str, r)) for r in rows))
    out = tmp_path / "q.snaprg"
    assert main(["ingest", str(txt), "-o", str(out), "--dimension", "2", "--lengths", "4",
                 "4", "--mapping", "01", "--tag", "tfim"]) == 0
    ds = read_dataset(out)
    assert np.array_equal(ds.bits(), rows)
    assert ds.metadata["source_tag"] == "tfim"


def test_exit_codes(tmp_path, capsys):
    bad_cfg = small_config(tmp_path, sampler={"mix": 3})
    assert main(["pipeline", "--config", str(bad_cfg)]) == EXIT_CONFIG
    assert "sampler.mix" in capsys.readouterr().err
    assert main(["pipeline", "--config", str(tmp_path / "missing.yaml")]) == EXIT_CONFIG
    assert "no such file" in capsys.readouterr().err
    junk = tmp_path / "junk.snaprg"
    junk.write_bytes(b"NOTADATASET")
    assert main(["wfn", str(junk), "-o", str(tmp_path / "x.tsv")]) == EXIT_INPUT
    err = capsys.readouterr().err
    assert err.startswith("snaprg: error [input]:") and "magic" in err
    assert main(["rg", str(tmp_path / "nope.snaprg"), "--n-steps", "1",
                 "-o", str(tmp_path / "p")]) == EXIT_INPUT
    txt = tmp_path / "short.txt"
    txt.write_text("1 0 1\n")
    assert main(["ingest", str(txt), "-o", str(tmp_path / "i.snaprg"), "--dimension", "2",
                 "--lengths", "4", "4", "--mapping", "01"]) == EXIT_INPUT


def test_compute_failure_names_stage(tmp_path, lat4, capsys):
    from snaprg.dataset import SnapshotDataset
    one = tmp_path / "one.snaprg"
    write_dataset(SnapshotDataset.from_spins(lat4, np.ones((3, 16))), one)
    assert main(["wfn", str(one), "-o", str(tmp_path / "d.tsv")]) == EXIT_COMPUTE
    assert "[wfn]" in capsys.readouterr().err


def test_rg_capacity_is_config_error(tmp_path, lat4):
    from snaprg.dataset import SnapshotDataset
    f = tmp_path / "a.snaprg"
    write_dataset(SnapshotDataset.from_spins(lat4, np.ones((1, 16))), f)
    assert main(["rg", str(f), "--n-steps", "9", "-o", str(tmp_path / "p")]) == EXIT_CONFIG


def test_console_script(tmp_path):
    res = subprocess.run([sys.executable, "-m", "snaprg.cli", "analyze", "-o",
                          str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == EXIT_CONFIG
    assert "nothing to analyze" in res.stderr
