import os
import json
import math
import pandas as pd
import pytest

from run import EXIT_CONFIG, EXIT_OK, EXIT_STAGE, main
from spectral.constants import INCONCLUSIVE


def write_config(tmp_path, **sections):
    raw = {
        "spiral": {"family": "pure", "a0": 1.0, "params": {}},
        "geometry": {"horizon": 1e4},
        "bound": {"sigmas": [1.5]},
        "outputs": {"directory": str(tmp_path / "out")},
    }
    raw.update(sections)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(raw))
    return str(path)


def run(stage, config_fname, **flags):
    arguments = {"out": None, "sigmas": None, "family": None, "seed": None, "threads": None}
    arguments.update(flags)
    return main(stage=stage, config_fname=config_fname, **arguments)


def test_geometry_stage(tmp_path):
    config = write_config(tmp_path)
    assert run("geometry", config) == EXIT_OK
    path = tmp_path / "out" / "geometry.csv"
    table = pd.read_csv(path)
    assert list(table.columns) == ["theta", "s", "gamma", "dgamma", "ddgamma", "d", "w_eff", "config_hash"]
    assert table["config_hash"].nunique() == 1
    assert (table["d"] * table["gamma"] <= 0.9 + 1e-9).all()
    assert (tmp_path / "out" / "logs" / "geometry.log").exists()

    first = path.read_bytes()
    assert run("geometry", config) == EXIT_OK
    assert path.read_bytes() == first


def test_outputs_are_byte_identical_across_runs(tmp_path):
    config = write_config(tmp_path)
    out = tmp_path / "out"
    assert run("certify", config) == EXIT_OK
    first = {name: (out / name).read_bytes() for name in ("certificate.json", "config.json", "diagnostics.csv")}
    assert run("certify", config) == EXIT_OK
    for name, content in first.items():
        assert (out / name).read_bytes() == content


def test_family_flag_switches_the_family(tmp_path):
    config = write_config(
        tmp_path,
        spiral={"family": "bump", "a0": 1.0, "params": {"amplitude": 0.5, "theta1": 30.0, "theta2": 36.0}},
    )
    assert run("geometry", config, family="pure") == EXIT_OK
    with open(tmp_path / "out" / "config.json", "r", encoding="utf-8") as f:
        written = json.load(f)
    assert written["spiral"]["family"] == "pure"
    assert written["spiral"]["params"] == {}
    assert run("geometry", write_config(tmp_path), family="bump") == EXIT_OK
    with open(tmp_path / "out" / "config.json", "r", encoding="utf-8") as f:
        assert json.load(f)["spiral"]["params"] == {"amplitude": 0.5, "theta1": 30.0, "theta2": 30.0 + 2 * math.pi}


def test_unknown_family_flag_is_a_config_error(tmp_path):
    assert run("geometry", write_config(tmp_path), family="hyperbolic") == EXIT_CONFIG


def test_formats_select_the_written_files(tmp_path):
    config = write_config(tmp_path, outputs={"directory": str(tmp_path / "out"), "formats": ["json"]})
    assert run("bounds", config) == EXIT_OK
    written = set(os.listdir(tmp_path / "out"))
    assert {"bounds.json", "config.json"} <= written
    assert not any(name.endswith(".csv") for name in written)

    config = write_config(tmp_path, outputs={"directory": str(tmp_path / "csv"), "formats": ["csv"]})
    assert run("bounds", config) == EXIT_OK
    written = set(os.listdir(tmp_path / "csv"))
    assert "bounds.csv" in written
    assert "bounds.json" not in written


def test_malformed_config_exits_with_config_error(tmp_path):
    config = write_config(tmp_path, geometry={"horizon": 1e4, "resolution": 3})
    assert run("geometry", config) == EXIT_CONFIG
    missing = str(tmp_path / "nope.json")
    assert run("geometry", missing) == EXIT_CONFIG


def test_stage_errors_exit_with_stage_error(tmp_path):
    config = write_config(tmp_path, geometry={"horizon": 10.0})
    assert run("geometry", config) == EXIT_STAGE


def test_bounds_stage(tmp_path):
    config = write_config(tmp_path)
    out = tmp_path / "sigma"
    assert run("bounds", config, out=str(out), sigmas=[1.0, 2.0]) == EXIT_OK
    table = pd.read_csv(out / "bounds.csv")
    assert list(table["sigma"]) == [1.0, 2.0]
    assert list(table["variant"]) == ["low_sigma", "main"]
    assert (table["total"] > 0).all()
    assert (table["transverse_total"] <= table["total"]).all()
    with open(out / "bounds.json", "r", encoding="utf-8") as f:
        report = json.load(f)
    assert len(report["rows"]) == 2
    assert report["config_hash"] == table["config_hash"].iloc[0]


def test_certify_stage(tmp_path):
    config = write_config(tmp_path)
    assert run("certify", config) == EXIT_OK
    with open(tmp_path / "out" / "certificate.json", "r", encoding="utf-8") as f:
        report = json.load(f)
    assert report["certificate"]["verdict"] == INCONCLUSIVE
    assert report["tail_integrability"][0]["finite"]
    assert (tmp_path / "out" / "diagnostics.csv").exists()


@pytest.mark.slow
def test_verify_bump(tmp_path):
    config = write_config(
        tmp_path,
        spiral={
            "family": "bump",
            "a0": 1.0,
            "params": {"amplitude": 1.0, "theta1": 4 * math.pi, "theta2": 6 * math.pi},
        },
        bound={"sigmas": [1.5, 2.0]},
        oracle={"h": 0.125, "coils": 5, "dump": True},
    )
    assert run("verify", config) == EXIT_OK
    out = tmp_path / "out"
    with open(out / "verify.json", "r", encoding="utf-8") as f:
        report = json.load(f)
    assert report["all_hold"]
    assert [row["sigma"] for row in report["rows"]] == [1.5, 2.0]
    assert all(row["moment"] <= row["bound_total"] for row in report["rows"])
    eigenvalues = pd.read_csv(out / "eigenvalues.csv")
    assert eigenvalues["eigenvalue"].iloc[-1] >= report["threshold"]
    assert (out / "integrand.csv").exists()
    assert (out / "eigenvectors.bin").exists()
    assert (out / "mask.json").exists()


@pytest.mark.slow
def test_verify_pure(tmp_path):
    config = write_config(tmp_path, oracle={"h": 0.125, "coils": 5})
    assert run("verify", config) == EXIT_OK
    with open(tmp_path / "out" / "verify.json", "r", encoding="utf-8") as f:
        report = json.load(f)
    assert report["all_hold"]
    # no eigenvalue of the truncated pure spiral falls below the threshold
    assert all(value >= report["threshold"] for value in report["eigenvalues"])
    for row in report["rows"]:
        assert row["moment"] == 0.0
        assert 0.0 <= row["bound_total"]
    assert report["max_absolute_residual"] <= 1e-8


@pytest.mark.slow
@pytest.mark.fine
def test_verify_bump_fine_grid(tmp_path):
    config = os.path.join(os.path.dirname(__file__), os.pardir, "configs", "bump_fine.json")
    assert run("verify", config, out=str(tmp_path / "fine")) == EXIT_OK
    with open(tmp_path / "fine" / "verify.json", "r", encoding="utf-8") as f:
        report = json.load(f)
    assert report["h"] == 1 / 32
    assert report["all_hold"]
    assert all(row["moment"] <= row["bound_total"] for row in report["rows"])
