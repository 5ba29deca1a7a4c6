import subprocess
import sys

import pytest

from pinnedgl.cli import main

FAST = {
    "cell": ["cell", "--chi", "0.25", "--n", "16"],
    "scalar": ["scalar", "--eps", "0.2", "--delta", "0.05", "--lx", "0.4"],
    "tile": ["tile", "--eps", "0.1", "--delta", "0.01", "--reps", "3", "--n", "34"],
    "magnetic": ["magnetic", "--eps", "0.2", "--n", "33", "--degree", "1", "--max-sweeps", "3"],
    "limits": ["limits", "--eps", "0.001", "--n-max", "2", "--n", "24"],
    "ac": ["ac", "--eps", "0.1", "--n", "40"],
}


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize("name", sorted(FAST))
def test_subcommands(name, capsys):
    code, out, err = run(FAST[name], capsys)
    assert code == 0, err
    header = out.splitlines()[0].split(",")
    assert header[-1] == "status"
    assert len(out.splitlines()) >= 2


def test_out_dir(tmp_path, capsys):
    code, _, _ = run(["--out", str(tmp_path), *FAST["cell"]], capsys)
    assert code == 0
    assert list(tmp_path.glob("*.csv"))


def test_underresolved_scalar(capsys):
    argv = ["scalar", "--eps", "0.2", "--delta", "0.01", "--lx", "0.2", "--n-per-unit", "100"]
    code, _, err = run(argv, capsys)
    assert code == 1 and "pinnedgl: error:" in err
    code, out, _ = run(["--allow-underresolved", *argv], capsys)
    assert code == 0 and out.splitlines()[1].endswith("underresolved")


def test_sweep_and_fit(tmp_path, capsys):
    cfg = tmp_path / "s.toml"
    cfg.write_text(
        'experiment = "symmetric_rates"\n'
        "eps = [0.05]\n"
        'pinning.kind = "checkerboard2x2"\n'
        "pinning.values = [0.5, 1.5]\n"
        "pinning.symmetric = true\n"
        'pinning.delta_rule = ["eps^2", "eps^2/2", "eps^2/4"]\n'
    )
    code, out, err = run(["--out", str(tmp_path), "sweep", str(cfg)], capsys)
    assert code == 0
    assert out.startswith("eps,delta") and "slope=" in err
    code, out, _ = run(["fit", str(tmp_path / "symmetric_rates.csv"), "delta", "sup_error"], capsys)
    assert code == 0
    header, values = out.splitlines()
    assert header == "slope,intercept,r2,n_points"
    slope = float(values.split(",")[0])
    assert slope == pytest.approx(2.0, abs=0.3)


def test_sweep_with_failures(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text(
        'experiment = "scalar_rates"\n'
        "eps = [0.2]\n"
        'pinning.kind = "checkerboard2x2"\n'
        "pinning.values = [-0.5, 1.5]\n"
        'pinning.delta_rule = ["eps/2", "eps/4"]\n'
        "domain.lx = 0.4\n"
    )
    code, _, _ = run(["--out", str(tmp_path / "o"), "sweep", str(cfg)], capsys)
    assert code == 2
    assert "failed" in (tmp_path / "o" / "scalar_rates.csv").read_text()


@pytest.mark.parametrize(
    "argv",
    [
        ["fit", "/nonexistent/file.csv", "x", "y"],
        ["bogus"],
        ["sweep", "/nonexistent/config.toml"],
        ["ac", "--eps", "0.1", "--beta", "2.0", "--n", "16"],
        [],
    ],
)
def test_hard_errors(argv, capsys):
    code, _, err = run(argv, capsys)
    assert code == 1
    assert "pinnedgl: error:" in err


def test_module_entry_point():
    r = subprocess.run(
        [sys.executable, "-m", "pinnedgl", *FAST["cell"]], capture_output=True, text=True, timeout=300
    )
    assert r.returncode == 0, r.stderr
    assert r.stdout.startswith("eps,delta,chi")
