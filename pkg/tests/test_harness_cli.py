import csv
import io
import json

import numpy as np
import pytest

from condhaar import cli, harness
from condhaar.harness import (REGISTRY, ExperimentReport, InvalidParamsError, Statistic,
                              UnknownExperimentError, execute, reports_from_json,
                              reports_to_json, run_experiment)


def test_statistic_ops():
    assert Statistic("a", 1.0, threshold=2.0).passed
    assert not Statistic("a", 3.0, threshold=2.0).passed
    assert Statistic("p", 0.5, threshold=0.01, op=">=").passed
    assert not Statistic("p", float("nan"), threshold=0.01, op=">=").passed
    assert Statistic("x", float("nan"), op="info").passed


def test_report_pass_and_round_trip():
    stats = [Statistic("a", 0.1, 0.01, 1.0), Statistic("b", 2.0, op="info")]
    rep = ExperimentReport("demo", {"n": 3, "deltas": ["(1+1j)"]}, stats, 7, 12)
    assert rep.pass_
    back = reports_from_json(reports_to_json([rep]))[0]
    assert back == rep
    d = rep.to_dict()
    assert d["schema"] == 1 and d["pass"] is True
    assert set(d) == {"schema", "experiment_id", "params", "statistics", "pass", "seed",
                      "runtime_ms"}
    assert not ExperimentReport("demo", {"error": "x"}, stats, 7).pass_
    assert not ExperimentReport("demo", {}, [Statistic("a", 2.0, threshold=1.0)], 7).pass_
    d["pass"] = False
    with pytest.raises(ValueError):
        ExperimentReport.from_dict(d)


def test_run_experiment_errors():
    with pytest.raises(UnknownExperimentError):
        run_experiment("unknown")
    with pytest.raises(InvalidParamsError):
        run_experiment("thm2_3_identity", {"bogus": 1})
    with pytest.raises(InvalidParamsError):
        run_experiment("thm2_3_identity", {"n": "two"})
    with pytest.raises(InvalidParamsError):
        run_experiment("thm2_3_identity", {"n": 2.5})


def test_thm2_3_example():
    rep = run_experiment("thm2_3_identity", {"n": 6}, seed=7)
    assert rep.pass_ and rep.params == {"n": 6, "count": 1000}
    assert all(s.value <= 1e-9 for s in rep.statistics)


def test_cor4_1_example():
    rep = run_experiment("cor4_1_ks", {"n": 8, "p": 1}, seed=7)
    assert rep.pass_
    assert rep.params["p"] == [1]
    assert all(s.value > 0.01 for s in rep.statistics if s.name.endswith(".p"))


def test_list_params_accept_strings():
    rep = run_experiment("general_slip", {"deltas": "1,0.5", "n": 4, "count": 2000}, seed=1)
    assert rep.params["deltas"] == ["(1+0j)", "(0.5+0j)"]


def test_library_errors_become_failed_reports():
    def boom(ctx):
        from condhaar.errors import DomainError
        raise DomainError("bad input")
    rep = execute("boom", boom, {}, seed=1)
    assert not rep.pass_ and "DomainError" in rep.params["error"]


def test_draw_is_thread_independent():
    fn = lambda g, m: g.standard_normal(m)
    a = harness.Context("x", 3, threads=1).draw("t", fn, 1000, chunk=64)
    b = harness.Context("x", 3, threads=4).draw("t", fn, 1000, chunk=64)
    c = harness.Context("x", 4, threads=1).draw("t", fn, 1000, chunk=64)
    assert np.array_equal(a, b) and not np.array_equal(a, c)
    pair = harness.Context("x", 3, threads=3).draw("t", lambda g, m: (g.random(m), np.ones(m)),
                                                   130, chunk=64)
    assert pair[0].shape == (130,) and pair[1].shape == (130,)


def test_scale_floors_counts():
    rep = run_experiment("cor5_2_density_unitary_p1", seed=1, scale=1e-6)
    assert rep.params["count"] == REGISTRY["cor5_2_density_unitary_p1"].min_count


def _run(capsys, argv):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_cli_list(capsys):
    code, out, _ = _run(capsys, ["list"])
    assert code == 0
    lines = out.splitlines()
    assert len(lines) == len(REGISTRY)
    assert lines[1].split()[0] == "thm2_3_identity" and "Thm 2.3" in lines[1]
    code, out, _ = _run(capsys, ["list", "--format", "json"])
    items = json.loads(out)
    assert {i["experiment_id"] for i in items} == set(REGISTRY)
    assert all(i["anchor"] for i in items)


def test_cli_verify_single(capsys, tmp_path):
    path = tmp_path / "r.json"
    code, _, err = _run(capsys, ["verify", "--id", "thm2_3_identity", "--n", "6",
                                 "--out", str(path)])
    assert code == 0 and "1/1" in err
    data = json.loads(path.read_text())
    assert isinstance(data, list) and data[0]["experiment_id"] == "thm2_3_identity"
    code, out, _ = _run(capsys, ["verify", "--id", "thm2_3_identity", "--n", "3",
                                 "--format", "csv"])
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0][:3] == ["experiment_id", "statistic", "value"] and len(rows) == 3


def test_cli_usage_errors(capsys):
    assert _run(capsys, ["verify", "--id", "unknown"])[0] == 2
    assert _run(capsys, ["verify", "--id", "thm2_3_identity", "--beta", "2"])[0] == 2
    assert _run(capsys, ["sample", "--group", "unitary"])[0] == 2
    assert _run(capsys, ["density", "--group", "orthogonal-conditional"])[0] == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["verify"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["sample", "--group", "nope", "--n", "3"])
    assert exc.value.code == 2


def test_cli_failed_verification_exit_code(capsys, monkeypatch):
    def fails(ctx):
        ctx.add("always", 1.0, 0.0)
    monkeypatch.setitem(REGISTRY, "always_fails",
                        harness.Experiment("always_fails", "none", fails, {}))
    code, _, err = _run(capsys, ["verify", "--id", "always_fails"])
    assert code == 1 and "FAILED always_fails" in err


def test_cli_sample_csv(capsys):
    code, out, _ = _run(capsys, ["sample", "--group", "unitary-conditional", "--n", "8",
                                 "--p", "2", "--count", "1000", "--format", "csv"])
    rows = list(csv.reader(io.StringIO(out)))
    assert code == 0 and rows[0] == ["re_z", "im_z"] and len(rows) == 1001
    again = _run(capsys, ["sample", "--group", "unitary-conditional", "--n", "8", "--p", "2",
                          "--count", "1000", "--format", "csv"])[1]
    assert again == out


@pytest.mark.parametrize("group,cols", [("unitary", ["re_z", "im_z"]),
                                        ("orthogonal-conditional", ["re_z", "im_z"]),
                                        ("so", ["z_plus", "z_minus"]),
                                        ("usp", ["z_plus", "z_minus"]),
                                        ("jacobi", ["det_plus", "det_minus"])])
def test_cli_sample_json(capsys, group, cols):
    code, out, _ = _run(capsys, ["sample", "--group", group, "--n", "3", "--count", "20"])
    data = json.loads(out)
    assert code == 0 and data["schema"] == 1 and data["columns"] == cols
    assert np.asarray(data["rows"]).shape == (20, 2)
    assert np.all(np.isfinite(data["rows"]))


def test_cli_density_so(capsys):
    code, out, _ = _run(capsys, ["density", "--group", "so", "--p", "1", "--count", "1000000"])
    rep = json.loads(out)[0]
    slope = next(s for s in rep["statistics"] if s["name"] == "slope")
    assert code == 0 and rep["experiment_id"] == "density_so"
    assert slope["value"] == pytest.approx(1.5, abs=0.15)
