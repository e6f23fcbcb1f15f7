import json

import numpy as np
import pytest

from gratingsweep.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, main, read_csv, write_csv
from gratingsweep.config import RunConfig, Scatterer


def small_config(tmp_path, **output):
    cfg = RunConfig()
    cfg.geometry.scatterers = [Scatterer(2.0, 0.0, 0.75, 16), Scatterer(2.0, 4.0, 0.75, 16)]
    cfg.band.omega_min, cfg.band.omega_max = 1.2, 1.9
    cfg.reference.panels = 3
    cfg.reference.points_per_panel = 3
    cfg.output.grid_points = 25
    for k, v in output.items():
        setattr(cfg.output, k, v)
    p = tmp_path / "run.json"
    p.write_text(cfg.to_json())
    return p


def without_timing(path):
    d = json.loads(path.read_text())
    d.pop("timing", None)
    return d


def test_csv_reparses_exactly(tmp_path, rng):
    w = np.sort(rng.uniform(0, 2, 40))
    T, R = rng.uniform(size=40), rng.uniform(size=40) * 1e-7
    write_csv(tmp_path / "x.csv", w, T, R, np.arange(40), np.zeros(40, int))
    back = read_csv(tmp_path / "x.csv")
    assert list(back) == ["omega", "T", "R", "subband_index", "is_center"]
    assert np.all(np.abs(back["T"] - T) <= 1e-12 * np.abs(T))
    assert np.all(np.abs(back["R"] - R) <= 1e-12 * np.abs(R))
    assert np.array_equal(back["omega"], w)


def test_missing_config_is_config_error(tmp_path):
    assert main(["solve", "--config", str(tmp_path / "none.json"), "--omega", "1"]) == EXIT_CONFIG


def test_bad_config_is_config_error(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"geometry": {"theta_degrees": 120}}')
    assert main(["sweep", "--config", str(p)]) == EXIT_CONFIG


def test_solve_needs_omega(tmp_path):
    assert main(["solve", "--config", str(small_config(tmp_path))]) == EXIT_CONFIG


def test_numerical_failure_reports_json(tmp_path):
    # a solve exactly on the Rayleigh anomaly pi/2 is refused
    out = tmp_path / "err.json"
    code = main(["solve", "--config", str(small_config(tmp_path)), "--omega", repr(np.pi / 2),
                 "--out-json", str(out)])
    assert code == EXIT_NUMERIC
    assert set(json.loads(out.read_text())) == {"error", "message", "command"}


def test_solve_empty_scatterer_list(tmp_path, capsys):
    p = tmp_path / "empty.json"
    p.write_text(RunConfig().to_json())
    out = tmp_path / "solve.json"
    assert main(["solve", "--config", str(p), "--omega", "0.9", "--order", "4", "--out-json", str(out)]) == EXIT_OK
    d = json.loads(out.read_text())
    assert d["T"][0] == pytest.approx(1.0) and d["R"][0] == pytest.approx(0.0)
    assert d["e"] == [0.0] * 5


def test_solve_order_zero(tmp_path, capsys):
    assert main(["solve", "--config", str(small_config(tmp_path)), "--omega", "0.95"]) == EXIT_OK
    text = capsys.readouterr().out
    assert "T = " in text and "R = " in text


def test_sweep_outputs_and_determinism(tmp_path):
    cfgp = small_config(tmp_path)
    paths = []
    for k in range(2):
        c, j = tmp_path / f"s{k}.csv", tmp_path / f"s{k}.json"
        assert main(["sweep", "--config", str(cfgp), "--out-csv", str(c), "--out-json", str(j)]) == EXIT_OK
        paths.append((c, j))
    (c0, j0), (c1, j1) = paths
    assert c0.read_bytes() == c1.read_bytes()
    assert without_timing(j0) == without_timing(j1)
    d = json.loads(j0.read_text())
    for key in ("partition", "models", "J", "warnings", "solve_count", "timing"):
        assert key in d
    rows = read_csv(c0)
    assert rows["is_center"].sum() == d["solve_count"]
    assert rows["omega"].size == 25 + d["solve_count"]
    assert np.all(np.diff(rows["omega"]) >= 0)


def test_sweep_grid_zero_writes_json_only(tmp_path):
    cfgp = small_config(tmp_path, grid_points=0)
    c, j = tmp_path / "s.csv", tmp_path / "s.json"
    assert main(["sweep", "--config", str(cfgp), "--out-csv", str(c), "--out-json", str(j)]) == EXIT_OK
    assert j.exists() and not c.exists()


def test_reference_schema_matches_sweep(tmp_path):
    cfgp = small_config(tmp_path)
    assert main(["reference", "--config", str(cfgp), "--out-csv", str(tmp_path / "r.csv"),
                 "--out-json", str(tmp_path / "r.json")]) == EXIT_OK
    assert main(["sweep", "--config", str(cfgp), "--out-csv", str(tmp_path / "s.csv")]) == EXIT_OK
    ref, sw = read_csv(tmp_path / "r.csv"), read_csv(tmp_path / "s.csv")
    assert list(ref) == list(sw)
    assert ref["omega"].size == 9
    assert json.loads((tmp_path / "r.json").read_text())["solve_count"] == 9


def test_average_agrees_with_sweep(tmp_path):
    cfgp = small_config(tmp_path)
    main(["average", "--config", str(cfgp), "--out-json", str(tmp_path / "a.json")])
    main(["sweep", "--config", str(cfgp), "--out-json", str(tmp_path / "s.json")])
    a, s = (json.loads((tmp_path / n).read_text()) for n in ("a.json", "s.json"))
    assert a["J"] == s["J"]
    assert a["command"] == "average"


def test_greens_case_three(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text(RunConfig().to_json())
    out = tmp_path / "g.json"
    assert main(["greens", "--config", str(p), "--case", "3", "--out-json", str(out)]) == EXIT_OK
    d = json.loads(out.read_text())
    assert d["gp1"][0][0] == pytest.approx(4.58950048195501219e-3, rel=1e-12)
    assert d["gp2"][0][0] == pytest.approx(-0.10148304460596892, rel=1e-12)
    assert "Case 3: G_p2^(i)" in capsys.readouterr().out


def test_greens_custom_needs_omega(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(RunConfig().to_json())
    assert main(["greens", "--config", str(p)]) == EXIT_CONFIG
    assert main(["greens", "--config", str(p), "--omega", "1.1", "--order", "2"]) == EXIT_OK
