import csv
import json

import pytest

from bernstein_lab import cli
from bernstein_lab.cache import ENV_VAR
from bernstein_lab.errors import ConfigInvalid, TailNotConverged

EXP_CURVE = {"coords": [{"kind": "exp_polynomial", "params": {"terms": [{"p": [1], "q": 1}]}}], "label": "exp"}
FH_CURVE = {"coords": [{"kind": "theorem_1_11", "params": {"h": {"kind": "power", "params": {"alpha": 1.5}}}}],
            "label": "fh"}


def rows(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("#")
    return list(csv.DictReader(lines[1:]))


def test_seed_parsing():
    assert cli.DEFAULT_SEED == int("B3R57E1N", 36) & (2 ** 64 - 1)
    assert cli.parse_seed(None) == cli.DEFAULT_SEED
    assert cli.parse_seed(42) == 42
    assert cli.parse_seed("0xff") == 255
    assert cli.parse_seed(2 ** 70 + 5) == 5
    with pytest.raises(ConfigInvalid):
        cli.parse_seed(-1)


def test_schema_errors_carry_pointer():
    with pytest.raises(ConfigInvalid) as exc:
        cli.validate_config({"experiment": "quotient", "curve": EXP_CURVE, "k_range": [1, "x"]})
    assert exc.value.pointer == "/k_range/1"
    with pytest.raises(ConfigInvalid) as exc:
        cli.validate_config({"experiment": "quotient", "curve": EXP_CURVE, "k_range": [4, 2]})
    assert exc.value.pointer == "/k_range"
    with pytest.raises(ConfigInvalid) as exc:
        cli.validate_config({"experiment": "quotient", "curve": EXP_CURVE, "k_range": [1, 2], "bogus": 1})
    with pytest.raises(ConfigInvalid):
        cli.validate_config({"experiment": "quotient", "curve": EXP_CURVE})


def test_quotient_run_and_reproducibility(tmp_path):
    cfg = {"experiment": "quotient", "curve": EXP_CURVE, "k_range": [2, 6], "r_values": [1.0],
           "out_dir": str(tmp_path / "a")}
    assert cli.run_config(cfg) == 0
    out = rows(tmp_path / "a" / "report.csv")
    assert list(out[0]) == list(cli.CSV_COLUMNS)
    assert len(out) == 5
    vals = [float(r["value"]) for r in out]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    cli.run_config(dict(cfg, out_dir=str(tmp_path / "b"), jobs=2))
    body = lambda p: [l for l in p.read_text().splitlines() if not l.startswith("#")]
    assert body(tmp_path / "a" / "report.csv") == body(tmp_path / "b" / "report.csv")
    doc = json.loads((tmp_path / "a" / "report.json").read_text())
    assert len(doc["rows"]) == 5 and doc["seed"] == cli.DEFAULT_SEED


def test_random_search_seeded(tmp_path):
    base = {"experiment": "quotient", "curve": EXP_CURVE, "k_range": [2, 3], "methods": ["random_search"],
            "random_draws": 3}
    cli.run_config(dict(base, out_dir=str(tmp_path / "a"), seed=5))
    cli.run_config(dict(base, out_dir=str(tmp_path / "b"), seed=5))
    cli.run_config(dict(base, out_dir=str(tmp_path / "c"), seed=6))
    a, b, c = (rows(tmp_path / x / "report.csv") for x in "abc")
    assert a == b and a != c


def test_failed_cell_is_isolated(tmp_path):
    cfg = {"experiment": "zeros", "curve": {"coords": [{"kind": "polynomial", "params": {"coeffs": [0, 1]}}]},
           "k_range": [1, 2], "out_dir": str(tmp_path)}
    assert cli.run_config(cfg) == 0
    out = rows(tmp_path / "report.csv")
    assert len(out) == 2 and all(r["status"].startswith("failed:") for r in out)
    assert (tmp_path / "zeros.csv").exists()


def test_exponent_fit_row(tmp_path):
    cfg = {"experiment": "exponent", "curve": EXP_CURVE, "k_range": [2, 6], "theory": {"class": "exp_curve",
           "param": 1}, "out_dir": str(tmp_path)}
    cli.run_config(cfg)
    fit = [r for r in rows(tmp_path / "report.csv") if r["k"] == "fit"]
    assert len(fit) == 1 and fit[0]["aux2"] == "5"
    assert fit[0]["status"] in ("consistent", "below_lower_bound", "above_upper")


def test_profile_uses_cache_and_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv(ENV_VAR, str(tmp_path / "envcache"))
    cfg = {"experiment": "profile", "curve": FH_CURVE, "t_grid": [2, 3, 4, 5, 6, 7, 8, 9, 10],
           "cache_dir": str(tmp_path / "ignored"), "out_dir": str(tmp_path / "p1")}
    cli.run_config(cfg)
    assert list((tmp_path / "envcache").glob("*.gp")) and not (tmp_path / "ignored").exists()
    cli.run_config(dict(cfg, out_dir=str(tmp_path / "p2")))
    doc = json.loads((tmp_path / "p2" / "report.json").read_text())
    assert doc["rows"][0]["record"]["cache_hit"] is True
    out = rows(tmp_path / "p2" / "report.csv")
    assert float(out[0]["aux2"]) == pytest.approx(0.0, abs=0.05)  # order zero
    assert all(float(r["aux1"]) <= float(r["value"]) for r in out)  # nu <= phi


def test_failed_profile_not_cached(tmp_path, monkeypatch):
    def broken(*args, **kwargs):
        raise TailNotConverged("simulated failure midway through the grid")

    monkeypatch.setattr(cli, "growth_profile", broken)
    cfg = {"experiment": "profile", "curve": FH_CURVE, "t_grid": [1, 2, 3], "cache_dir": str(tmp_path / "c"),
           "out_dir": str(tmp_path / "o"), "jobs": 1}
    cli.run_config(cfg)
    assert rows(tmp_path / "o" / "report.csv")[0]["status"] == "failed:TailNotConverged"
    assert not list((tmp_path / "c").glob("*.gp"))


def test_main_cli_flags(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"curve": EXP_CURVE, "k_range": [1, 8]}))
    status = cli.main(["kernel", "--config", str(cfg_path), "--out", str(tmp_path / "o"), "--kmax", "2",
                       "--seed", "17"])
    assert status == 0
    out = rows(tmp_path / "o" / "report.csv")
    assert [r["k"] for r in out] == ["1", "2"]
    assert [r["aux1"] for r in out] == ["2", "5"]
    assert cli.main(["quotient", "--config", str(cfg_path), "--precision", "10", "--out", str(tmp_path)]) == 2
    assert "invalid config at /precision_bits" in capsys.readouterr().err


def test_verify_subset(tmp_path):
    status = cli.run_config({"experiment": "verify", "criteria": [9], "out_dir": str(tmp_path)})
    out = rows(tmp_path / "report.csv")
    assert out[0]["k"] == "9"
    assert status == (0 if out[0]["status"] == "pass" else 1)


def test_verify_skips_high_precision_criterion(tmp_path):
    status = cli.run_config({"experiment": "verify", "criteria": [2], "precision_bits": 512,
                             "out_dir": str(tmp_path)})
    assert status == 0
    assert rows(tmp_path / "report.csv")[0]["status"] == "skipped"
