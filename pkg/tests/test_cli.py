import json

import pytest

from trionsim import cli


def _run(args, capsys=None):
    code = cli.main(args)
    err = capsys.readouterr().err if capsys else ""
    return code, err


def _manifest(out):
    return json.loads((out / "manifest.json").read_text())


def test_ideal_statevector(tmp_path):
    assert cli.main(["ideal", "--gates", "ghz4", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "statevector.json").read_text())
    assert doc["overlap_with_closed_form"] == pytest.approx(1.0)
    assert doc["labels"][-1] == "spin"


def test_gate_yaml(tmp_path):
    path = tmp_path / "g.yaml"
    path.write_text("gates:\n  - {kind: Ry, angle_pi: 0.5}\n  - {kind: Es}\n")
    assert cli.main(["ideal", "--gates", str(path), "--out", str(tmp_path / "o")]) == 0
    m = _manifest(tmp_path / "o")
    assert m["inputs"][0]["path"] == str(path)


def test_simulate_writes_state_and_report(tmp_path):
    assert cli.main(["simulate", "--program", "rlc1", "--samples", "2", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert 0 < rep["fidelity"]["value"] <= 1
    assert set(rep["readout"]) == {"R", "L"}
    m = _manifest(tmp_path)
    assert set(m["artifacts"]) == {"state.json", "report.json"}
    assert m["samples"] == {"overhauser": 2}


def test_outputs_are_byte_identical_and_replayable(tmp_path):
    args = ["fidelity-table", "--preset", "ghz4", "--samples", "2", "--seed", "4"]
    assert cli.main(args + ["--out", str(tmp_path / "a")]) == 0
    assert cli.main(args + ["--out", str(tmp_path / "b")]) == 0
    a, b = _manifest(tmp_path / "a"), _manifest(tmp_path / "b")
    assert a["artifacts"] == b["artifacts"]
    assert (tmp_path / "a" / "fidelity_table.csv").read_bytes() == \
        (tmp_path / "b" / "fidelity_table.csv").read_bytes()
    (tmp_path / "a" / "fidelity_table.csv").unlink()
    assert cli.main(["replay", str(tmp_path / "a" / "manifest.json")]) == 0
    assert _manifest(tmp_path / "a")["artifacts"] == a["artifacts"]


def test_output_directory_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
    assert cli.main(["visibility-scan", "--params", "ideal", "--points", "2", "--samples", "1"]) == 0
    rows = (tmp_path / "env" / "visibility.csv").read_text().splitlines()
    assert rows[0] == "phi2_pi,V"
    assert [round(float(r.split(",")[1])) for r in rows[1:]] == [-1, 1]


def test_sz_trace_and_power_scan(tmp_path):
    out = str(tmp_path)
    assert cli.main(["sz-trace", "--delays", "100:300:100", "--samples", "2", "--out", out]) == 0
    assert len((tmp_path / "sz_trace.csv").read_text().splitlines()) == 4
    assert cli.main(["sz-trace", "--osrp-scan", "0:1:0.5", "--samples", "2", "--out", out]) == 0
    assert len((tmp_path / "sz_osrp.csv").read_text().splitlines()) == 4


def test_tomo_roundtrip_from_counts(tmp_path):
    out = tmp_path / "t"
    assert cli.main(["tomo-roundtrip", "--shots", "0", "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["trace_distance"] < 1e-8
    out2 = tmp_path / "u"
    assert cli.main(["tomo-roundtrip", "--counts", str(out / "counts.csv"), "--out", str(out2)]) == 0
    assert (out2 / "reconstructed.json").read_text() == (out / "reconstructed.json").read_text()


def test_scaling_outputs(tmp_path):
    assert cli.main(["scaling", "--max-photons", "4", "--samples", "2", "--out", str(tmp_path)]) == 0
    fits = json.loads((tmp_path / "scaling_fit.json").read_text())
    assert set(fits) == {"ghz", "lc", "caterpillar10"}


def test_fit_from_config(tmp_path):
    import yaml

    from trionsim import fit
    from trionsim.trion import TrionParams

    tg = fit.synthetic_targets(TrionParams.fitted(), ("rlc2",), n_samples=2, seed=0)
    cfg = fit.FitConfig(tg, {"g_e": (0.5, 0.7)}, n_samples=2, seed=0, restarts=1, subsets="none")
    path = tmp_path / "fit.yaml"
    path.write_text(yaml.safe_dump(cfg.to_doc()))
    assert cli.main(["fit", "--config", str(path), "--out", str(tmp_path / "o")]) == 0
    res = json.loads((tmp_path / "o" / "fit_result.json").read_text())
    assert res["best"]["g_e"] == pytest.approx(0.6, abs=0.01)


@pytest.mark.parametrize("args", [
    ["bogus"],
    ["simulate", "--program", "missing.yaml"],
    ["visibility-scan", "--points", "0"],
    ["sz-trace", "--delays", "1:2"],
    ["fidelity-table", "--preset", "nope"],
    ["simulate", "--params", "nope.yaml"],
])
def test_validation_errors_exit_2_with_json(args, capsys, tmp_path):
    code, err = _run(args + ["--out", str(tmp_path)] if args[0] != "bogus" else args, capsys)
    assert code == cli.EXIT_VALIDATION
    assert json.loads(err)["error"] == "validation"


def test_numerical_failure_exits_3(capsys, tmp_path):
    code, err = _run(["simulate", "--time", "0", "--program", "lc4", "--samples", "1",
                      "--out", str(tmp_path)], capsys)
    assert code == cli.EXIT_NUMERICAL
    assert json.loads(err)["error"] == "numerical"
