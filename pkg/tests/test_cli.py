import csv
import json
from pathlib import Path

import numpy as np
import pytest

from waveop_lab.cli import T_WINDOW_TEXT, ConfigError, RunConfig, load_config, main
from waveop_lab.experiments import KEYS

GOLDEN = Path(__file__).parent / "golden"


def write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg), encoding="utf-8")
    return str(path)


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def test_t_weight_outside_window(tmp_path, capsys):
    rc = main(["smatrix", "--config", write(tmp_path, {"t_weight": 1.0}), "--out", str(tmp_path / "o")])
    assert rc == 2
    err = capsys.readouterr().err
    assert "t_weight" in err and T_WINDOW_TEXT in err and T_WINDOW_TEXT == "t ∈ (5/2, σ−5/2)"


@pytest.mark.parametrize("cfg,field", [
    ({"energy": {"n": "many"}}, "energy.n"),
    ({"potential": {"kind": "square_well", "depth": 4, "radius": 1}}, "potential.radius"),
    ({"bogus": 1}, "bogus"),
    ({"experiments": ["fly"]}, "experiments"),
    ({"momenta": {"k_min": 2.0, "k_max": 1.0}}, "momenta"),
])
def test_invalid_config_names_the_field(tmp_path, capsys, cfg, field):
    assert main(["levinson", "--config", write(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 2
    assert field in capsys.readouterr().err


def test_unreadable_config(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(bad)
    assert main(["levinson", "--config", str(bad)]) == 2


def test_slow_decay_warns():
    cfg = RunConfig.from_dict({"potential": {"kind": "exponential", "depth": 1.0, "param": 1.0,
                                             "sigma_decay": 6.0}})
    with pytest.warns(UserWarning, match="sigma > 7"):
        cfg.validate()


def test_threads_flag_validated(tmp_path):
    assert main(["levinson", "--config", write(tmp_path, {}), "--threads", "0"]) == 2


@pytest.fixture(scope="module")
def free_run(tmp_path_factory):
    d = tmp_path_factory.mktemp("free")
    cfg = {"potential": {"kind": "zero"}, "ell_max": 2, "time_dependent_centres": [6.0]}
    (d / "cfg.json").write_text(json.dumps(cfg), encoding="utf-8")
    rc = main(["verify-all", "--config", str(d / "cfg.json"), "--out", str(d / "out")])
    return rc, json.loads((d / "out" / "summary.json").read_text(encoding="utf-8")), d / "out"


def test_summary_has_one_key_per_criterion(free_run):
    _, summary, _ = free_run
    assert set(summary) == {"config", "criteria", "failures"}
    assert sorted(summary["criteria"]) == sorted(KEYS.values())
    for entry in summary["criteria"].values():
        assert set(entry) == {"passed", "value", "threshold", "details"}


def test_free_potential_verify_all_passes(free_run):
    rc, summary, _ = free_run
    assert summary["failures"] == [] and rc == 0


def test_free_potential_tables(free_run):
    _, _, out = free_run
    header, rows = read_csv(out / "s_matrix.csv")
    assert header == ["ell", "lambda", "re_s", "im_s", "abs_s_minus_1", "delta"]
    assert all(float(r[2]) == 1.0 and float(r[3]) == 0.0 for r in rows)
    lev = json.loads((out / "levinson.json").read_text(encoding="utf-8"))
    assert all(v["bound_count"] == 0 and v["defect"] == 0 for v in lev.values())


def run_default(out):
    out.parent.mkdir(parents=True, exist_ok=True)
    cfg = out.parent / "default.json"
    cfg.write_text("{}", encoding="utf-8")
    for verb in ("phase-shifts", "smatrix", "remainder", "levinson"):
        assert main([verb, "--config", str(cfg), "--out", str(out)]) in (0, 3)


@pytest.fixture(scope="module")
def default_runs(tmp_path_factory):
    a = tmp_path_factory.mktemp("a") / "out"
    b = tmp_path_factory.mktemp("b") / "out"
    run_default(a)
    run_default(b)
    return a, b


def test_outputs_are_byte_identical(default_runs):
    a, b = default_runs
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes(), n


@pytest.mark.parametrize("name", ["phase_shifts.csv", "s_matrix.csv", "remainder_svals.csv"])
def test_square_well_tables_match_golden(default_runs, name):
    header, rows = read_csv(default_runs[0] / name)
    gheader, grows = read_csv(GOLDEN / name)
    assert header == gheader and len(rows) == len(grows)
    num = [i for i, h in enumerate(header) if h not in ("domain",)]
    got = np.array([[float(r[i]) for i in num] for r in rows])
    ref = np.array([[float(r[i]) for i in num] for r in grows])
    np.testing.assert_allclose(got, ref, rtol=1e-9, atol=1e-12)


def test_square_well_levinson_matches_golden(default_runs):
    got = json.loads((default_runs[0] / "levinson.json").read_text(encoding="utf-8"))
    ref = json.loads((GOLDEN / "levinson.json").read_text(encoding="utf-8"))
    assert got.keys() == ref.keys()
    for k in ref:
        assert got[k]["bound_count"] == ref[k]["bound_count"]
        assert got[k]["flag"] == ref[k]["flag"]
        assert got[k]["defect"] == pytest.approx(ref[k]["defect"], abs=1e-9)


def test_csv_full_precision(default_runs):
    _, rows = read_csv(default_runs[0] / "s_matrix.csv")
    # 17 significant digits survive a float round trip exactly
    for r in rows[:50]:
        assert repr(float(r[2])) == repr(float(format(float(r[2]), ".17g")))
        assert len(r[2].lstrip("-").replace(".", "").replace("e", "").lstrip("0")) >= 1
