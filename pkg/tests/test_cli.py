import json

import numpy as np
import pytest

from mhsic import harness
from mhsic.cli import main, parse_config, read_variables


def write(path, header, rows):
    path.write_text(",".join(header) + "\n" + "\n".join(",".join(map(str, r)) for r in rows) + "\n")
    return str(path)


@pytest.fixture
def noise_csv(tmp_path):
    rng = np.random.default_rng(0)
    return write(tmp_path / "noise.csv", ["x", "y"], rng.normal(size=(200, 2)).tolist())


def test_test_command_human(noise_csv, capsys):
    assert main(["test", noise_csv]) == 0
    out = capsys.readouterr().out
    assert "statistic" in out and "threshold" in out and "decision" in out and "runtime" in out


def test_test_command_json(noise_csv, capsys):
    assert main(["test", noise_csv, "--json", "--seed", "3"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["decision"] in ("reject", "fail_to_reject")
    assert payload["method"] == "mhsic" and payload["seed"] == 3


def test_duplicated_column_rejects(tmp_path, capsys):
    x = np.random.default_rng(1).normal(size=150)
    path = write(tmp_path / "dup.csv", ["x", "y"], np.column_stack([x, x]).tolist())
    assert main(["test", path, "--json"]) == 0
    assert json.loads(capsys.readouterr().out)["decision"] == "reject"


@pytest.mark.parametrize("method", ["mdhsic", "naive-mdhsic", "hsic-perm", "dhsic-perm"])
def test_every_method_runs(noise_csv, method, capsys):
    assert main(["test", noise_csv, "--method", method, "--B", "20", "--json"]) == 0
    assert json.loads(capsys.readouterr().out)["method"] == method


def test_kernel_flags(noise_csv, capsys):
    assert main(["test", noise_csv, "--kernel", "laplace", "--bandwidth", "0.7", "--json"]) == 0
    assert json.loads(capsys.readouterr().out)["bandwidths"] == [0.7, 0.7]


def test_mdhsic_too_few_rows(tmp_path, capsys):
    path = write(tmp_path / "five.csv", ["a", "b"], [[i, i * i % 3] for i in range(5)])
    assert main(["test", path, "--method", "mdhsic"]) == 2
    assert "n >= 6" in capsys.readouterr().err


def test_mdhsic_full_median_is_usage_error(noise_csv):
    assert main(["test", noise_csv, "--method", "mdhsic", "--bandwidth", "median-full"]) == 2


def test_degenerate_data_exit_code(tmp_path):
    path = write(tmp_path / "const.csv", ["x", "y"], [[i, 1.0] for i in range(30)])
    assert main(["test", path]) == 3


@pytest.mark.parametrize(
    "content",
    ["", "x,y\n", "x,y\n1,2\n3,oops\n", "x,y\n1,2\n3\n", "x,y\n1,nan\n2,3\n"],
)
def test_bad_files(tmp_path, content):
    path = tmp_path / "bad.csv"
    path.write_text(content)
    assert main(["test", str(path)]) == 2


def test_missing_file_and_bad_flags(tmp_path, noise_csv):
    assert main(["test", str(tmp_path / "missing.csv")]) == 2
    assert main(["test", noise_csv, "--bandwidth", "wide"]) == 2
    assert main(["test", noise_csv, "--method", "bogus"]) == 2
    assert main([]) == 2


def test_env_seed(noise_csv, capsys, monkeypatch):
    monkeypatch.setenv("MHSIC_SEED", "11")
    main(["test", noise_csv, "--json"])
    assert json.loads(capsys.readouterr().out)["seed"] == 11
    monkeypatch.setenv("MHSIC_SEED", "eleven")
    assert main(["test", noise_csv]) == 2


def test_one_file_per_variable(tmp_path):
    rng = np.random.default_rng(2)
    a = write(tmp_path / "a.csv", ["a1", "a2"], rng.normal(size=(10, 2)).tolist())
    b = write(tmp_path / "b.csv", ["b"], rng.normal(size=(10, 1)).tolist())
    xs = read_variables([a, b])
    assert [x.shape for x in xs] == [(10, 2), (10, 1)]
    c = write(tmp_path / "c.csv", ["c"], rng.normal(size=(9, 1)).tolist())
    assert main(["test", a, c]) == 2


class TestGenerate:
    def test_mixture_shape(self, tmp_path):
        out = tmp_path / "m.csv"
        assert main(["generate", "--dgp", "mixture", "--n", "100", "--d-ambient", "3", "--a", "0", "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "v1_1,v1_2,v1_3,v2_1,v2_2,v2_3"
        assert len(lines) == 101
        assert [x.shape for x in read_variables([str(out)])] == [(100, 3), (100, 3)]

    def test_byte_identical(self, tmp_path):
        args = ["generate", "--n", "30", "--seed", "4", "--a", "0.5", "--out"]
        main(args + [str(tmp_path / "1.csv")])
        main(args + [str(tmp_path / "2.csv")])
        assert (tmp_path / "1.csv").read_bytes() == (tmp_path / "2.csv").read_bytes()

    def test_round_trip_is_exact(self, tmp_path):
        from mhsic.dgp import LinearGaussianDgpConfig, generate

        out = tmp_path / "lg.csv"
        main(["generate", "--dgp", "linear-gaussian", "--d", "4", "--p", "5", "--n", "50", "--seed", "2", "--out", str(out)])
        header = out.read_text().splitlines()[0].split(",")
        assert len(header) == 20 and {h.split("_")[0] for h in header} == {"v1", "v2", "v3", "v4"}
        back = read_variables([str(out)])
        for u, v in zip(back, generate(LinearGaussianDgpConfig(d=4, p=5, n=50, seed=2))):
            assert np.array_equal(u, v)

    def test_invalid(self, tmp_path):
        assert main(["generate", "--dgp", "linear-gaussian", "--d", "1", "--out", str(tmp_path / "x.csv")]) == 2
        assert main(["generate", "--out", str(tmp_path / "no" / "dir.csv")]) == 2


class TestSweep:
    def test_config_parsing(self):
        cfg = parse_config("# demo\nmethod=mhsic\nmethod = naive-mdhsic\nn=50\nn=100,200\na=0\nM=5\nalpha=0.1\n")
        assert cfg.methods == ["mhsic", "naive-mdhsic"]
        assert cfg.n == [50, 100, 200] and cfg.a == [0.0] and cfg.M == 5 and cfg.alpha == 0.1

    def test_config_errors(self, tmp_path):
        for text in ("n=5\n", "method=mhsic\nbogus=1\n", "method=mhsic\nn=five\n", "method=mhsic\njunk\n"):
            path = tmp_path / "c.txt"
            path.write_text(text)
            assert main(["sweep", str(path), "--out", str(tmp_path / "o.csv")]) == 2
        assert main(["sweep", "--out", str(tmp_path / "o.csv")]) == 2

    def test_sweep_writes_report(self, tmp_path):
        path = tmp_path / "c.txt"
        path.write_text("method=mhsic\nn=40\na=0\na=1\nM=4\n")
        out = tmp_path / "o.csv"
        assert main(["--threads", "2", "sweep", str(path), "--out", str(out), "--quiet"]) == 0
        cells = harness.read_csv(out)
        assert [c.a for c in cells] == [0.0, 1.0]
        assert out.with_suffix(".meta").exists()

    def test_fig2_preset_covers_grid(self):
        from mhsic.cli import PRESETS

        cells = harness.GridConfig(**PRESETS["fig2-desk"]).cells()
        assert {c.d for c in cells} == {2, 3, 5}
        assert {c.n for c in cells} == {100, 500, 2000}
        assert sorted({c.a for c in cells}) == [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]

    def test_preset_runs(self, tmp_path):
        out = tmp_path / "t.csv"
        assert main(["sweep", "--preset", "table1-desk", "--M", "1", "--out", str(out), "--quiet"]) == 0
        assert len(harness.read_csv(out)) == 6


def test_bench_and_normality_commands(capsys):
    assert main(["bench", "--n", "40", "80", "--repeats", "1", "--B", "5"]) == 0
    assert "speed-up" in capsys.readouterr().out
    assert main(["normality", "--n", "40", "--M", "10"]) == 0
    assert "KS=" in capsys.readouterr().out


def test_module_entry_point():
    import subprocess
    import sys

    proc = subprocess.run([sys.executable, "-m", "mhsic", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "generate" in proc.stdout
