import csv
import json
import math

import numpy as np
import pytest

from structpop import __version__
from structpop.cli import EXIT_ADVISORY, EXIT_ERROR, EXIT_NOT_FOUND, EXIT_OK, WORKERS_ENV, main


def _config(tmp_path, name="cfg.json", **cfg):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


@pytest.fixture
def sinko_cfg(tmp_path):
    return _config(tmp_path, family="canonical-sinko", a=1 / math.log(2), b=1, c=1)


@pytest.fixture
def pbe_cfg(tmp_path):
    return _config(tmp_path, family="canonical-pbe", a=1, b=0.5, c=1)


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _manifest(out):
    return json.loads((out / "manifest.json").read_text())


class TestSteady:
    def test_sinko(self, sinko_cfg, tmp_path):
        out = tmp_path / "o"
        assert main(["steady", sinko_cfg, "--out", str(out)]) == EXIT_OK
        rows = _rows(out / "steady_state.csv")
        assert len(rows) == 100
        x = np.array([float(r["x"]) for r in rows])
        u = np.array([float(r["u"]) for r in rows])
        assert x[-1] == pytest.approx(1.0)
        assert np.abs(u - 1 / (x + 1) ** 2).max() < 0.05
        rep = json.loads((out / "stability.json").read_text())
        assert rep["classification"] == "Stable"
        man = _manifest(out)
        assert man["exit_code"] == 0
        assert man["version"] == __version__
        assert "sup_error_vs_exact" in man["results"]
        assert (out / "steady_state.png").stat().st_size > 0

    def test_pbe(self, pbe_cfg, tmp_path):
        out = tmp_path / "o"
        assert main(["steady", pbe_cfg, "--out", str(out), "--no-plot", "--n", "50"]) == EXIT_OK
        assert json.loads((out / "stability.json").read_text())["classification"] == "Stable"
        assert len(_rows(out / "steady_state.csv")) == 50
        assert not list(out.glob("*.png"))

    def test_not_found(self, tmp_path, capsys):
        cfg = _config(tmp_path, family="canonical-sinko", a=0.1, b=1, c=1)
        out = tmp_path / "o"
        assert main(["steady", cfg, "--out", str(out), "--no-plot"]) == EXIT_NOT_FOUND
        assert "renewal" in capsys.readouterr().err
        assert _manifest(out)["exit_code"] == EXIT_NOT_FOUND
        assert not (out / "steady_state.csv").exists()

    def test_config_error_names_field(self, tmp_path, capsys):
        cfg = _config(tmp_path, family="canonical-pbe", a=1, b="half", c=1)
        assert main(["steady", cfg, "--out", str(tmp_path / "o")]) == EXIT_ERROR
        assert "b" in capsys.readouterr().err.split("config error:")[1].split()[0]
        assert not (tmp_path / "o").exists()

    def test_invalid_json(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text("{nope")
        assert main(["steady", str(path)]) == EXIT_ERROR
        assert "config error" in capsys.readouterr().err

    def test_missing_config(self, tmp_path):
        assert main(["steady", str(tmp_path / "absent.json")]) == EXIT_ERROR

    def test_bad_flag_value(self, sinko_cfg):
        with pytest.raises(SystemExit) as info:
            main(["steady", sinko_cfg, "--n", "many"])
        assert info.value.code == EXIT_ERROR

    def test_nonpositive_n(self, sinko_cfg, tmp_path):
        assert main(["steady", sinko_cfg, "--n", "0", "--out", str(tmp_path / "o")]) == EXIT_ERROR


class TestSweep:
    def test_rows_and_reproducible(self, sinko_cfg, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["sweep", sinko_cfg, "--out", str(a), "--steps", "0.2", "--n", "20"]) == EXIT_OK
        assert main(["sweep", sinko_cfg, "--out", str(b), "--steps", "0.2", "--n", "20", "--no-plot"]) == EXIT_OK
        rows = _rows(a / "sweep.csv")
        assert len(rows) == 216
        assert (a / "sweep.csv").read_bytes() == (b / "sweep.csv").read_bytes()
        assert (a / "regions.png").exists() and not (b / "regions.png").exists()
        assert json.loads((a / "sweep_spec.json").read_text())["points"] == 216

    def test_config_ranges(self, tmp_path):
        cfg = _config(tmp_path, family="canonical-pbe", a=1, b=1, c=1, sweep={"a": [0, 2, 1], "b": [1, 1, 1], "c": [1, 1, 1]})
        out = tmp_path / "o"
        assert main(["sweep", cfg, "--out", str(out), "--n", "20", "--no-plot"]) == EXIT_OK
        assert [float(r["a"]) for r in _rows(out / "sweep.csv")] == [0.0, 1.0, 2.0]

    def test_bad_range(self, tmp_path, capsys):
        cfg = _config(tmp_path, family="canonical-pbe", a=1, b=1, c=1, sweep={"a": [0, 2]})
        assert main(["sweep", cfg, "--out", str(tmp_path / "o")]) == EXIT_ERROR
        assert "sweep.a" in capsys.readouterr().err

    def test_table_family_rejected(self, tmp_path):
        cfg = _config(tmp_path, family="table", model="sinko", tables={})
        assert main(["sweep", cfg, "--out", str(tmp_path / "o")]) == EXIT_ERROR

    def test_workers_env(self, tmp_path, monkeypatch):
        cfg = _config(tmp_path, family="canonical-pbe", a=1, b=1, c=1, sweep={"a": [0, 3, 1], "b": [1, 1, 1], "c": [1, 1, 1]})
        monkeypatch.setenv(WORKERS_ENV, "2")
        out = tmp_path / "o"
        assert main(["sweep", cfg, "--out", str(out), "--n", "10", "--no-plot"]) == EXIT_OK
        assert _manifest(out)["results"]["workers"] == 2
        out2 = tmp_path / "o2"
        assert main(["sweep", cfg, "--out", str(out2), "--n", "10", "--no-plot", "--workers", "1"]) == EXIT_OK
        assert _manifest(out2)["results"]["workers"] == 1
        monkeypatch.setenv(WORKERS_ENV, "lots")
        assert main(["sweep", cfg, "--out", str(tmp_path / "o3"), "--no-plot"]) == EXIT_ERROR

    def test_timing_column(self, tmp_path):
        cfg = _config(tmp_path, family="canonical-pbe", a=1, b=1, c=1, sweep={"a": [1, 2, 1], "b": [1, 1, 1], "c": [1, 1, 1]})
        out = tmp_path / "o"
        assert main(["sweep", cfg, "--out", str(out), "--n", "10", "--no-plot", "--timing", "--scale-dx"]) == EXIT_OK
        rows = _rows(out / "sweep.csv")
        assert all(float(r["wall_ms"]) >= 0 for r in rows)
        assert all(r["rightmost_re_dx"] for r in rows if r["status"] != "NotFound")


class TestSimulate:
    def test_steady_ic_stays(self, pbe_cfg, tmp_path):
        out = tmp_path / "o"
        assert main(["simulate", pbe_cfg, "--out", str(out), "--n", "40", "--ic", "steady", "--t-end", "5"]) == EXIT_OK
        traj = _rows(out / "trajectory.csv")
        m0 = np.array([float(r["m0"]) for r in traj])
        assert np.abs(m0 - m0[0]).max() <= 1e-4 * m0[0]
        snaps = _rows(out / "snapshots.csv")
        assert {float(r["t"]) for r in snaps} == {0.0, 5.0}
        assert len(snaps) == 80
        assert (out / "moments.png").exists()

    def test_zero_horizon(self, pbe_cfg, tmp_path):
        out = tmp_path / "o"
        assert main(["simulate", pbe_cfg, "--out", str(out), "--n", "20", "--t-end", "0", "--no-plot"]) == EXIT_OK
        assert len(_rows(out / "trajectory.csv")) == 1

    def test_file_ic_and_snapshots(self, pbe_cfg, tmp_path):
        ic = tmp_path / "ic.csv"
        ic.write_text("x,u\n" + "".join(f"{(i + 1) / 20},{1.0}\n" for i in range(20)))
        out = tmp_path / "o"
        args = ["simulate", pbe_cfg, "--out", str(out), "--n", "20", "--t-end", "1", "--no-plot"]
        assert main(args + ["--ic", f"file:{ic}", "--snapshots", "0.5,1"]) == EXIT_OK
        assert {float(r["t"]) for r in _rows(out / "snapshots.csv")} == {0.5, 1.0}
        assert str(ic) in _manifest(out)["inputs"]

    def test_ic_size_mismatch(self, pbe_cfg, tmp_path):
        ic = tmp_path / "ic.csv"
        ic.write_text("x,u\n0.5,1\n1,1\n")
        assert main(["simulate", pbe_cfg, "--out", str(tmp_path / "o"), "--n", "20", "--ic", f"file:{ic}"]) == EXIT_ERROR

    def test_snapshot_outside_horizon(self, pbe_cfg, tmp_path):
        args = ["simulate", pbe_cfg, "--out", str(tmp_path / "o"), "--n", "10", "--t-end", "1", "--snapshots", "2"]
        assert main(args) == EXIT_ERROR

    def test_blowup_is_advisory(self, tmp_path, capsys):
        # pure growth with a large renewal rate explodes exponentially
        cfg = _config(tmp_path, family="canonical-sinko", a=1e3, b=1, c=0)
        args = ["simulate", cfg, "--out", str(tmp_path / "o"), "--n", "20", "--t-end", "100", "--no-plot"]
        assert main(args) == EXIT_ADVISORY
        assert "--implicit" in capsys.readouterr().err


class TestConvergence:
    def test_sinko_slope(self, sinko_cfg, tmp_path):
        out = tmp_path / "o"
        assert main(["convergence", sinko_cfg, "--out", str(out), "--n-list", "25,50,100"]) == EXIT_OK
        rows = _rows(out / "convergence.csv")
        assert [int(r["n"]) for r in rows] == [25, 50, 100]
        fit = json.loads((out / "convergence.json").read_text())
        assert fit["slope"] == pytest.approx(-1.0, abs=0.25)
        assert (out / "convergence.png").exists()

    def test_pbe_moments(self, pbe_cfg, tmp_path):
        out = tmp_path / "o"
        assert main(["convergence", pbe_cfg, "--out", str(out), "--n-list", "10,20,40", "--no-plot"]) == EXIT_OK
        rows = _rows(out / "convergence.csv")
        assert list(rows[0]) == ["n", "m0", "m1", "d_m0", "d_m1"]
        d = [abs(float(r["d_m1"])) for r in rows[:-1]]
        assert d[1] < d[0]

    def test_too_few(self, sinko_cfg, tmp_path):
        assert main(["convergence", sinko_cfg, "--out", str(tmp_path / "o"), "--n-list", "10"]) == EXIT_ERROR


class TestSpectrum:
    def test_scaled(self, pbe_cfg, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["spectrum", pbe_cfg, "--out", str(a), "--n-list", "5,10", "--no-plot"]) == EXIT_OK
        assert main(["spectrum", pbe_cfg, "--out", str(b), "--n-list", "5,10", "--scale-dx"]) == EXIT_OK
        ra, rb = _rows(a / "rightmost.csv"), _rows(b / "rightmost.csv")
        for x, y in zip(ra, rb):
            assert float(x["rightmost_re"]) < 0
            assert float(y["rightmost_re"]) == pytest.approx(float(x["rightmost_re"]) / int(x["n"]))
        eig = _rows(a / "eigenvalues.csv")
        assert len(eig) == 15
        assert {r["scaled"] for r in _rows(b / "eigenvalues.csv")} == {"1"}
        assert (b / "eigenvalues.png").exists() and (b / "rightmost.png").exists()


def test_one_manifest_per_directory(pbe_cfg, tmp_path):
    out = tmp_path / "o"
    assert main(["steady", pbe_cfg, "--out", str(out), "--n", "10", "--no-plot"]) == EXIT_OK
    first = _manifest(out)
    assert main(["spectrum", pbe_cfg, "--out", str(out), "--n-list", "5", "--no-plot"]) == EXIT_OK
    assert len(list(out.glob("manifest*.json"))) == 1
    second = _manifest(out)
    assert first["command"] == "steady" and second["command"] == "spectrum"
    assert "rightmost.csv" in second["outputs"]


def test_version(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert __version__ in capsys.readouterr().out
