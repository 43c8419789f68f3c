import hashlib
import json

import pandas as pd
import pytest

from twisted_noon.cli import build_parser, load_run_config, main


def _digest(directory, names):
    h = hashlib.sha256()
    for name in names:
        h.update((directory / name).read_bytes())
    return h.hexdigest()


SCAN_FILES = ["config.json", "dataset.csv", "dataset.json", "fit.json", "fringe.csv"]


def test_scan_writes_outputs(tmp_path):
    out = tmp_path / "scan"
    argv = ["scan", "--ell", "1", "--n-photons", "1", "--out", str(out), "-q"]
    assert main(argv) == 0
    for name in SCAN_FILES:
        assert (out / name).exists()
    fit = json.loads((out / "fit.json").read_text())
    assert fit["visibility"] >= 0.999
    config = json.loads((out / "config.json").read_text())
    assert config["command"] == "scan"
    assert config["params"]["n_photons"] == 1
    assert len(config["params"]["angles_deg"]) == 40


def test_same_seed_same_digest(tmp_path):
    args = ["scan", "--ell", "2", "--seed", "42", "-q"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    other = ["scan", "--ell", "2", "--seed", "43", "-q"]
    assert main(other + ["--out", str(tmp_path / "c")]) == 0
    first = _digest(tmp_path / "a", SCAN_FILES)
    assert first == _digest(tmp_path / "b", SCAN_FILES)
    assert first != _digest(tmp_path / "c", SCAN_FILES)


def test_rerun_from_config(tmp_path):
    argv = ["scan", "--ell", "3", "--repetitions", "10", "-q"]
    assert main(argv + ["--out", str(tmp_path / "a")]) == 0
    config = tmp_path / "a" / "config.json"
    rerun = ["scan", "--config", str(config), "--out", str(tmp_path / "b"), "-q"]
    assert main(rerun) == 0
    assert _digest(tmp_path / "a", SCAN_FILES) == _digest(tmp_path / "b", SCAN_FILES)


def test_override_ell_rederives_grid(tmp_path):
    assert main(["scan", "--ell", "1", "--out", str(tmp_path / "a"), "-q"]) == 0
    args = build_parser().parse_args(
        ["scan", "--config", str(tmp_path / "a" / "config.json"), "--ell", "10"]
    )
    run = load_run_config(args)
    assert run.params.ell == 10
    assert run.params.angles_deg is None
    assert run.params.integration_time_s is None


def test_zero_ell_rejected(tmp_path):
    assert main(["scan", "--ell", "0", "--out", str(tmp_path), "-q"]) == 2
    assert not (tmp_path / "dataset.csv").exists()


def test_bad_config_file(tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"command": "scan", "params": {"elll": 2}}))
    argv = ["scan", "--config", str(config), "--out", str(tmp_path / "out"), "-q"]
    assert main(argv) == 2


def test_witness(tmp_path):
    assert main(["witness", "--out", str(tmp_path), "-q"]) == 0
    result = json.loads((tmp_path / "witness.json").read_text())
    assert result["w"] == pytest.approx(3.0)
    assert len(pd.read_csv(tmp_path / "witness.csv")) == 3


def test_witness_product_default(tmp_path):
    argv = ["witness", "--preparation", "product", "--out", str(tmp_path), "-q"]
    assert main(argv) == 0
    result = json.loads((tmp_path / "witness.json").read_text())
    assert result["w"] <= 1.0 + 1e-12


def test_holo(tmp_path):
    argv = ["holo", "--ell", "2", "--mode", "M1", "--out", str(tmp_path), "-q"]
    assert main(argv) == 0
    assert (tmp_path / "hologram_l2_M1.pgm").read_bytes().startswith(b"P5")
    overlaps = pd.read_csv(tmp_path / "mub_overlap.csv")
    assert overlaps["deviation"].max() < 1e-3


def test_holo_resolution_rejected(tmp_path):
    argv = ["holo", "--ell", "151", "--grid-px", "1024", "--out", str(tmp_path)]
    assert main(argv + ["-q"]) == 2


def test_holo_resolution_boundary(tmp_path):
    assert main(["holo", "--ell", "150", "--out", str(tmp_path), "-q"]) == 0
    assert (tmp_path / "hologram_l150_M1.pgm").exists()
    assert main(["holo", "--ell", "151", "--out", str(tmp_path / "b"), "-q"]) == 2


def test_hom(tmp_path):
    assert main(["hom", "--out", str(tmp_path), "-q"]) == 0
    dip = json.loads((tmp_path / "dip_fit.json").read_text())
    assert dip["visibility"] >= 0.99
    normalized = pd.read_csv(tmp_path / "hom_normalized.csv")
    assert normalized["normalized"].iloc[0] == pytest.approx(1.0, abs=0.05)


def test_fisher(tmp_path):
    argv = ["fisher", "--ell", "1", "--loss", "measured", "--out", str(tmp_path), "-q"]
    assert main(argv) == 0
    crb = json.loads((tmp_path / "crb.json").read_text())
    assert crb["eta"] == pytest.approx(0.0201**2 * 0.74 * 0.75)
    curve = pd.read_csv(tmp_path / "fisher_curve.csv")
    assert len(curve) == 721
    measured = pd.read_csv(tmp_path / "measured.csv")
    assert measured.loc[measured["usable"], "crb_ratio"].notna().all()


@pytest.mark.slow
def test_sensitivity(tmp_path):
    argv = ["sensitivity", "--ells", "1,10", "--workers", "2", "--out", str(tmp_path)]
    assert main(argv + ["-q"]) == 0
    table = pd.read_csv(tmp_path / "sensitivity.csv")
    assert len(table) == 4 * 4
    assert (tmp_path / "theory.csv").exists()
    scaling = json.loads((tmp_path / "scaling.json").read_text())
    assert set(scaling["ratios"]) == {"1", "10"}


@pytest.mark.slow
def test_noon_verify(tmp_path):
    assert main(["noon-verify", "--out", str(tmp_path), "-q"]) == 0
    rows = pd.read_csv(tmp_path / "identities.csv")
    assert rows["passed"].all()
