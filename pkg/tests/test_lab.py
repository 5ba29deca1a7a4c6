import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pinnedgl.lab import (
    COLUMNS,
    config_from_dict,
    fit_rate,
    load_config,
    parse_delta_rule,
    read_csv,
    run_sweep,
    write_csv,
)

SYMMETRIC = {
    "experiment": "symmetric_rates",
    "eps": [0.05],
    "pinning": {
        "kind": "checkerboard2x2",
        "values": [0.5, 1.5],
        "symmetric": True,
        "delta_rule": ["eps^2", "eps^2/2", "eps^2/4"],
    },
}


def scalar_cfg(values=(0.5, 1.5), kind="checkerboard2x2", **extra):
    d = {
        "experiment": "scalar_rates",
        "eps": [0.2],
        "pinning": {"kind": kind, "values": list(values), "delta_rule": ["eps/2", "eps/4", "eps/8"]},
        "domain": {"lx": 0.4},
    }
    d.update(extra)
    return d


class TestFitRate:
    def test_exact_power_law(self):
        f = fit_rate([(1, 1), (2, 4), (4, 16)])
        assert f.slope == pytest.approx(2.0)
        assert f.r2 == 1.0 and f.n_points == 3

    def test_constant(self):
        f = fit_rate([(1, 3.0), (2, 3.0), (4, 3.0)])
        assert f.slope == pytest.approx(0.0, abs=1e-12)
        assert 0 <= f.r2 <= 1

    def test_noisy_quarter_power(self, rng):
        x = np.geomspace(1, 10, 12)
        y = x**0.25 * (1 + 0.01 * rng.standard_normal(x.size))
        assert 0.2 <= fit_rate(zip(x, y)).slope <= 0.3

    @given(st.floats(-3, 3), st.floats(0.1, 10))
    def test_recovers_slope(self, q, c):
        x = np.array([1.0, 2.0, 5.0, 11.0])
        f = fit_rate(zip(x, c * x**q))
        assert f.slope == pytest.approx(q, abs=1e-9)
        assert f.intercept == pytest.approx(math.log(c), abs=1e-9)

    def test_errors(self):
        with pytest.raises(ValueError):
            fit_rate([(1, 1), (2, 2)])
        with pytest.raises(ValueError):
            fit_rate([(1, 1), (2, 0), (3, 3)])
        with pytest.raises(ValueError):
            fit_rate([(-1, 1), (2, 2), (3, 3)])


class TestDeltaRule:
    @pytest.mark.parametrize(
        "text,value,q",
        [
            ("eps^2/4", 0.0025, 2),
            ("eps·eps", 0.01, 2),
            ("0.5*eps^(3/2)", 0.5 * 0.1**1.5, 1.5),
            ("(eps+eps)/2", 0.1, 1),
            ("−eps + 2*eps", 0.1, 1),
        ],
    )
    def test_grammar(self, text, value, q):
        r = parse_delta_rule(text)
        assert r(0.1) == pytest.approx(value)
        assert r.exponent == pytest.approx(q)

    @pytest.mark.parametrize("text", ["eps^", "exp(eps)", "x*2", "eps % 2", "'a'"])
    def test_rejected(self, text):
        with pytest.raises(ValueError):
            parse_delta_rule(text)

    def test_weak_exponent_warns(self):
        with pytest.warns(UserWarning):
            cfg = config_from_dict({"experiment": "scalar_rates", "eps": [0.1], "pinning": {"delta_rule": "eps^0.5"}})
        assert cfg.warnings


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            config_from_dict({"experiment": "nope", "eps": [0.1], "pinning": {"delta_rule": "eps^2"}})
        with pytest.raises(ValueError):
            config_from_dict({"experiment": "scalar_rates", "eps": [], "pinning": {"delta_rule": "eps^2"}})
        with pytest.raises(ValueError):
            config_from_dict({"experiment": "scalar_rates", "eps": [0.1]})
        with pytest.raises(ValueError):
            config_from_dict({"experiment": "scalar_rates", "eps": [0.1], "seeds": [], "pinning": {"delta": 0.01}})
        with pytest.raises(ValueError, match="unknown config keys"):
            config_from_dict({"experiment": "limits_table", "eps": [0.1], "colour": "red"})

    def test_fixed_delta_is_constant_rule(self):
        with pytest.warns(UserWarning, match="exponent 0"):
            cfg = config_from_dict({"experiment": "scalar_rates", "eps": [0.1, 0.2], "pinning": {"delta": 0.01}})
        assert [r(e) for r in cfg.delta_rules for e in cfg.eps] == [0.01, 0.01]

    def test_load_toml(self, tmp_path):
        p = tmp_path / "c.toml"
        p.write_text(
            'experiment = "symmetric_rates"\n'
            "eps = [0.05]\n"
            "seeds = 3\n"
            'pinning.kind = "checkerboard2x2"\n'
            "pinning.values = [0.5, 1.5]\n"
            'pinning.delta_rule = ["eps^2", "eps^2/2"]\n'
            "resolution.nodes_per_delta = 34\n"
        )
        cfg = load_config(p)
        assert cfg.experiment == "symmetric_rates" and cfg.seeds == [3]
        assert [r.text for r in cfg.delta_rules] == ["eps^2", "eps^2/2"]
        assert cfg.resolution == {"nodes_per_delta": 34}


class TestCsv:
    def test_roundtrip(self, tmp_path):
        rows = [{"a": 0.1, "b": True, "status": "ok"}, {"a": 1e-300, "b": False, "status": "failed: x"}]
        path = tmp_path / "t.csv"
        text = write_csv(rows, ("a", "b", "status"), path)
        back = read_csv(path)
        assert float(back[1]["a"]) == 1e-300 and back[0]["b"] == "1"
        assert text.splitlines()[0] == "a,b,status"


@pytest.fixture(scope="module")
def symmetric_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("sym")
    return run_sweep(config_from_dict(SYMMETRIC), out=out), out


class TestRunSweep:
    def test_symmetric_slope(self, symmetric_run):
        res, _ = symmetric_run
        f = res.fit("sup_error~delta@eps=0.05")
        assert f.status == "ok"
        assert f.fit.slope == pytest.approx(2.0, abs=0.3)
        errs = [r["sup_error"] for r in res.rows]
        assert all(b < a for a, b in zip(errs, errs[1:]))

    def test_outputs(self, symmetric_run):
        res, out = symmetric_run
        assert res.csv_path.exists()
        header = res.csv_path.read_text().splitlines()[0].split(",")
        assert tuple(header) == COLUMNS["symmetric_rates"] + ("status",)
        assert (out / "symmetric_rates_summary.txt").read_text().startswith("experiment symmetric_rates")
        dats = list(out.glob("*.dat"))
        assert dats and all(len(p.read_text().split()) == 6 for p in dats)

    def test_deterministic(self, tmp_path):
        cfg = scalar_cfg(kind="random_checkerboard", seeds=[1, 2])
        a = run_sweep(config_from_dict(cfg), out=tmp_path / "a")
        b = run_sweep(config_from_dict(cfg), out=tmp_path / "b", workers=2)
        assert a.csv_path.read_bytes() == b.csv_path.read_bytes()
        keys = [(r["eps"], r["delta"], r["seed"]) for r in a.rows]
        assert keys == sorted(keys, key=lambda k: (k[0], -k[1], k[2]))

    def test_degenerate_constant(self):
        res = run_sweep(config_from_dict(scalar_cfg(values=[1.0], kind="constant")))
        assert all(r["sup_error"] == 0 for r in res.rows)
        assert res.fit("sup_error~delta@eps=0.2").status == "degenerate"

    def test_failure_isolation(self):
        cfg = config_from_dict(scalar_cfg(values=[-0.5, 1.5]))
        res = run_sweep(cfg)
        assert res.failures == len(res.rows) == 3
        assert all(r["status"].startswith("failed: ValueError") for r in res.rows)

    def test_underresolved(self):
        d = scalar_cfg(resolution={"n_per_unit": 100})
        res = run_sweep(config_from_dict(d))
        assert [r["status"] for r in res.rows] == ["ok", "skipped: underresolved", "skipped: underresolved"]
        flagged = run_sweep(config_from_dict(d), allow_underresolved=True)
        assert [r["status"] for r in flagged.rows] == ["ok", "underresolved", "underresolved"]
        assert flagged.fit("sup_error~delta@eps=0.2").status == "insufficient"

    def test_limits_table(self):
        cfg = config_from_dict({"experiment": "limits_table", "eps": [1e-3], "params": {"n": 24, "n_max": 2}})
        res = run_sweep(cfg)
        assert [r["n"] for r in res.rows] == [1, 2]
        assert res.rows[0]["H_n_root"] < res.rows[1]["H_n_root"]

    def test_allen_cahn(self):
        cfg = config_from_dict({"experiment": "allen_cahn", "eps": [0.05], "resolution": {"n_per_unit": 100}})
        (row,) = run_sweep(cfg).rows
        assert row["status"] == "ok"
        assert row["interface_length"] == pytest.approx(1.0, rel=0.05)
