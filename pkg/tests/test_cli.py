import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from robmon.cli import ConfigError, main, parse_grid, pool_seed_from
from robmon.datasets import geyser_minority_mask, load_geyser


def _read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


class TestGrid:
    def test_descending_inclusive(self):
        assert parse_grid("0.5:0.05:0.1") == [0.5, 0.45, 0.4, 0.35, 0.3, 0.25, 0.2, 0.15, 0.1]

    def test_ascending(self):
        assert parse_grid("0.05:0.05:0.2") == [0.05, 0.1, 0.15, 0.2]

    def test_sign_of_step_ignored(self):
        assert parse_grid("0.5:-0.01:0.48") == parse_grid("0.5:0.01:0.48") == [0.5, 0.49, 0.48]

    def test_end_not_on_grid(self):
        assert parse_grid("0:0.3:1") == [0.0, 0.3, 0.6, 0.9]

    def test_single_point(self):
        assert parse_grid("0.2:0.1:0.2") == [0.2]

    @pytest.mark.parametrize("text", ["0.5:0.1", "a:0.1:0.2", "0:0:1", "0:nan:1"])
    def test_invalid(self, text):
        with pytest.raises(ConfigError):
            parse_grid(text)


class TestFit:
    def test_custom_geyser(self, tmp_path, capsys):
        out = tmp_path / "fit.json"
        rc = main(["fit", "--data", "geyser", "--estimator", "s", "--rho", "custom", "--a", "0.2", "--seed", "1", "--output", str(out)])
        assert rc == 0
        obj = json.loads(out.read_text())
        mask = geyser_minority_mask(load_geyser())
        assert np.all(np.array(obj["weights"])[mask] == 0)
        assert obj["method"] == "S" and obj["seed"] == 1 and obj["pool_seed"] == pool_seed_from(1)
        assert obj["schema_version"] == 1
        assert len(obj["scatter"]) == 4 and len(obj["distances"]) == 272
        line = capsys.readouterr().out.strip()
        assert line.startswith("S: log_det=") and "converged=True" in line

    def test_mcd_raw_weights(self, tmp_path):
        out = tmp_path / "fit.json"
        assert main(["fit", "--data", "geyser", "--estimator", "mcd", "--bdp", "0.5", "--output", str(out)]) == 0
        obj = json.loads(out.read_text())
        assert sum(obj["raw_weights"]) == obj["h"] == 138

    def test_csv_format(self, tmp_path):
        out = tmp_path / "fit.csv"
        assert main(["fit", "--estimator", "mcd", "--format", "csv", "--output", str(out)]) == 0
        header, rows = _read_csv(out)
        assert header == ["obs_index", "distance", "weight"] and len(rows) == 272

    def test_mm(self, tmp_path):
        out = tmp_path / "mm.json"
        args = ["fit", "--variant", "azzalini_bowman", "--estimator", "mm", "--bdp", "0.5", "--mm-bdp", "0.45", "--output", str(out)]
        assert main(args) == 0
        obj = json.loads(out.read_text())
        mask = geyser_minority_mask(load_geyser("azzalini_bowman"))
        assert obj["method"] == "MM" and np.mean(np.array(obj["weights"])[mask]) < 0.05

    def test_deterministic_starts(self, tmp_path):
        out = tmp_path / "f.json"
        assert main(["fit", "--starts", "deterministic", "--output", str(out)]) == 0
        assert json.loads(out.read_text())["pool_seed"] is None

    def test_stdout_artifact(self, capsys):
        assert main(["fit", "--estimator", "mcd", "--n-starts", "50"]) == 0
        captured = capsys.readouterr()
        assert json.loads(captured.out)["method"] == "MCD"
        assert captured.err.startswith("MCD:")

    def test_missing_file(self, tmp_path, capsys):
        path = tmp_path / "nowhere" / "data.csv"
        assert main(["fit", "--data", str(path)]) == 1
        assert str(path) in capsys.readouterr().err

    def test_bad_csv(self, tmp_path, capsys):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n3,oops\n4,5\n")
        assert main(["fit", "--data", str(path)]) == 1
        err = capsys.readouterr().err
        assert str(path) in err and "row 3" in err

    @pytest.mark.parametrize(
        "extra",
        [
            ["--rho", "bisquare", "--a", "0.2"],
            ["--estimator", "s", "--h", "150"],
            ["--estimator", "mcd", "--h", "150", "--bdp", "0.5"],
            ["--estimator", "mm", "--rho", "custom"],
            ["--rho", "custom", "--bdp", "0.5"],
            ["--mm-bdp", "0.4"],
            ["--no-reweight"],
            ["--bdp", "0.7"],
            ["--estimator", "mcd", "--h", "10"],
            ["--bogus"],
            ["--estimator", "lts"],
        ],
    )
    def test_config_errors(self, extra, capsys):
        assert main(["fit", "--n-starts", "20", *extra]) == 1
        assert capsys.readouterr().err.startswith("error:")

    def test_estimation_failure(self, tmp_path, capsys):
        # collinear data: every elemental subset is singular
        path = tmp_path / "line.csv"
        x = np.arange(20.0)
        path.write_text("a,b\n" + "".join(f"{v},{2 * v}\n" for v in x))
        assert main(["fit", "--data", str(path), "--n-starts", "20"]) == 2
        assert "estimation failed" in capsys.readouterr().err

    def test_help(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["fit", "--help"])
        assert exc.value.code == 0
        text = capsys.readouterr().out
        for flag in ("--data", "--estimator", "--rho", "--bdp", "--a", "--h", "--seed", "--starts", "--output", "--format"):
            assert flag in text


class TestMonitor:
    def test_mcd_grid(self, tmp_path):
        out = tmp_path / "trace.csv"
        args = ["monitor", "--data", "geyser", "--estimator", "mcd", "--grid", "0.5:0.05:0.1", "--seed", "1", "--output", str(out)]
        assert main(args) == 0
        header, rows = _read_csv(out)
        assert header == ["grid_value", "obs_index", "distance"]
        assert len({r[0] for r in rows}) == 9 and len(rows) == 9 * 272
        summary = json.loads((tmp_path / "trace.json").read_text())
        assert summary["schema_version"] == 1 and summary["pool_seed"] == pool_seed_from(1)
        assert len(summary["grid"]) == 9

    def test_synthetic_bisquare_transition(self, tmp_path, capsys):
        data = tmp_path / "two.csv"
        assert main(["simulate", "two-cluster", "--separation", "0.845", "--seed", "1", "--output", str(data)]) == 0
        out = tmp_path / "t.csv"
        args = ["monitor", "--data", str(data), "--columns", "x1,x2", "--estimator", "s", "--rho", "bisquare", "--grid", "0.5:0.01:0.45", "--output", str(out)]
        assert main(args) == 0
        summary = json.loads((tmp_path / "t.json").read_text())
        assert summary["transition_grid_values"] == [0.5, 0.49]
        assert "between 0.5 and 0.49" in capsys.readouterr().out

    def test_custom_sweep(self, tmp_path):
        out = tmp_path / "t.csv"
        assert main(["monitor", "--rho", "custom", "--grid", "0.2:0.4:1.0", "--n-starts", "100", "--output", str(out)]) == 0
        assert json.loads((tmp_path / "t.json").read_text())["rho_family"] == "custom"

    def test_explicit_summary_path(self, tmp_path):
        out, summ = tmp_path / "t.csv", tmp_path / "other.json"
        args = ["monitor", "--estimator", "mcd", "--grid", "0.5:0.1:0.4", "--n-starts", "50", "--output", str(out), "--summary", str(summ)]
        assert main(args) == 0
        assert summ.exists() and not (tmp_path / "t.json").exists()

    def test_grid_required(self, capsys):
        assert main(["monitor"]) == 1

    def test_mm_needs_bisquare(self):
        assert main(["monitor", "--estimator", "mm", "--rho", "custom", "--grid", "0.5:0.1:0.3"]) == 1

    def test_all_points_fail(self, tmp_path):
        path = tmp_path / "tied.csv"
        path.write_text("a,b\n" + "0,0\n" * 30 + "".join(f"{i},{i * i % 7}\n" for i in range(1, 21)))
        out = tmp_path / "t.csv"
        assert main(["monitor", "--data", str(path), "--estimator", "mcd", "--grid", "0.45:0.05:0.4", "--output", str(out)]) == 2


class TestOtherCommands:
    def test_weights(self, tmp_path):
        out = tmp_path / "w.csv"
        assert main(["weights", "--bisquare-bdp", "0.5,0.25", "--custom-a", "0.2", "--output", str(out)]) == 0
        header, rows = _read_csv(out)
        assert header == ["obs_index", "mcd_distance", "mcd_weight", "bisquare_bdp0.5", "bisquare_bdp0.25", "custom_a0.2"]
        assert len(rows) == 272

    def test_weights_bad_list(self):
        assert main(["weights", "--custom-a", "0.2,x"]) == 1

    def test_ellipse_identity(self, tmp_path):
        fit = tmp_path / "id.json"
        fit.write_text(json.dumps({"location": [0, 0], "scatter": [1, 0, 0, 1]}))
        out = tmp_path / "e.csv"
        level = repr(1 - math.exp(-0.5))
        assert main(["ellipse", "--fit", str(fit), "--level", level, "--n-points", "36", "--output", str(out)]) == 0
        header, rows = _read_csv(out)
        assert header == ["point_index", "x", "y"]
        pts = np.array([[float(r[1]), float(r[2])] for r in rows])
        assert len(pts) == 36 and np.allclose(np.hypot(*pts.T), 1.0, atol=1e-12)

    def test_ellipse_from_fit_json(self, tmp_path):
        fit = tmp_path / "f.json"
        assert main(["fit", "--rho", "custom", "--a", "0.2", "--output", str(fit)]) == 0
        out = tmp_path / "e.csv"
        assert main(["ellipse", "--fit", str(fit), "--output", str(out)]) == 0
        assert len(_read_csv(out)[1]) == 200

    def test_ellipse_computes_fit(self, tmp_path):
        out = tmp_path / "e.csv"
        assert main(["ellipse", "--estimator", "mcd", "--n-points", "10", "--output", str(out)]) == 0

    def test_ellipse_bad_inputs(self, tmp_path):
        assert main(["ellipse", "--fit", str(tmp_path / "absent.json")]) == 1
        bad = tmp_path / "bad.json"
        bad.write_text("{}")
        assert main(["ellipse", "--fit", str(bad)]) == 1
        three = tmp_path / "three.json"
        three.write_text(json.dumps({"location": [0, 0, 0], "scatter": np.eye(3).ravel().tolist()}))
        assert main(["ellipse", "--fit", str(three)]) == 1

    def test_pca_on_skewed(self, tmp_path):
        data = tmp_path / "sk.csv"
        assert main(["simulate", "skewed", "--n", "400", "--p", "3", "--output", str(data)]) == 0
        out = tmp_path / "pca.csv"
        assert main(["pca", "--data", str(data), "--k", "2", "--output", str(out)]) == 0
        summary = json.loads((tmp_path / "pca.json").read_text())
        r = summary["explained_variance_ratio"]
        assert len(r) == 2 and r[0] >= r[1]
        header, rows = _read_csv(out)
        assert header == ["obs_index", "pc1", "pc2"] and len(rows) == 400

    def test_pca_k_too_large(self):
        assert main(["pca", "--k", "3"]) == 1

    def test_simulate_two_cluster(self, tmp_path):
        out = tmp_path / "s.csv"
        assert main(["simulate", "two-cluster", "--epsilon", "0.35", "--n", "200", "--seed", "7", "--output", str(out)]) == 0
        header, rows = _read_csv(out)
        assert header == ["x1", "x2", "minority"]
        assert len(rows) == 200 and sum(int(r[2]) for r in rows) == 70

    def test_simulate_errors(self):
        assert main(["simulate", "two-cluster", "--epsilon", "0.6"]) == 1
        assert main(["simulate", "skewed", "--p", "2", "--direction", "1,0,0"]) == 1
        assert main(["simulate", "gaussian"]) == 1


def test_module_entry_point(tmp_path):
    out = tmp_path / "s.csv"
    res = subprocess.run(
        [sys.executable, "-m", "robmon", "simulate", "two-cluster", "--n", "50", "--output", str(out)],
        capture_output=True,
        text=True,
    )
    assert res.returncode == 0, res.stderr
    assert out.read_text().count("\n") == 51
