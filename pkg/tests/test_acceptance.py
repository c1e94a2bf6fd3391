"""Acceptance criteria 1-11, each printed as one PASS/FAIL line.

Criteria 1-10 read the reports of a single ``verify --all --seed 7`` run
(see ``conftest.py``); 8 re-runs the density experiments with timing on and
11 re-runs the whole suite with three worker threads.
"""
import numpy as np

from condhaar import cli
from condhaar.harness import run_experiment

from conftest import SEED


def _failures(reps):
    out = []
    for r in reps:
        if "error" in r.params:
            out.append(f"{r.experiment_id}: {r.params['error']}")
        out += [f"{r.experiment_id}.{s.name}={s.value:.4g} (need {s.op} {s.threshold:.4g})"
                for s in r.statistics if not s.passed]
    return out


def _check(record, number, title, reps, extra=""):
    bad = _failures(reps)
    detail = "; ".join(bad) if bad else extra
    record(number, title, not bad, detail)
    assert not bad, detail


def _stat(rep, name):
    return next(s for s in rep.statistics if s.name == name)


def test_criterion_01_reflection_identity(reports, record):
    rep = reports["thm2_3_identity"]
    assert rep.params["n"] == 10 and rep.params["count"] == 1000
    worst = max(s.value for s in rep.statistics)
    _check(record, 1, "det(Id - r1..rn) = prod(1 - r_kk), n <= 10", [rep],
           f"max |dev|/n = {worst:.2e}")


def test_criterion_02_unitarity_conditioning(reports, record):
    rep = reports["unitarity_conditioning"]
    assert rep.params["count"] == 1000
    _check(record, 2, "unitarity and eigenvalue-1 multiplicity >= p", [rep])


def test_criterion_03_haar_moments(reports, record):
    rep = reports["eq1_1_haar_moments"]
    assert rep.params["count"] == 100000 and rep.params["n_closed_max"] == 6
    _check(record, 3, "Haar moments against quadrature and n + 1", [rep])


def test_criterion_04_conditioning_chain(reports, record):
    ids = ["lemma3_1_conditioning", "lemma3_3_slipping", "eq3_2_iterated_slip", "general_slip"]
    reps = [reports[i] for i in ids]
    budget = sum(_stat(r, "false_failure_budget").value for r in reps)
    gates = sum(1 for r in reps for s in r.statistics if s.name.endswith(".p"))
    _check(record, 4, "rotation/slip KS suites", reps,
           f"{gates} KS gates, false-failure budget {budget:.2f}")


def test_criterion_05_route_equivalence(reports, record):
    rep = reports["cor4_1_ks"]
    assert rep.params["n"] == 8 and rep.params["p"] == [1, 2] and rep.params["count"] == 10000
    _check(record, 5, "matrix vs product route for Z^(p), exact second moment", [rep])


def test_criterion_06_n1_law(reports, record):
    rep = reports["eq4_2_n1_law"]
    assert rep.params["count"] == 100000
    _check(record, 6, "4 B_{a+1,b+1} against 2(1 - alpha_0)", [rep])


def test_criterion_07_group_moments(reports, record):
    rep = reports["cor4_3_moments"]
    assert rep.params["n"] == 4 and rep.params["count"] == 100000
    _check(record, 7, "SO/USp derivative moments", [rep])


def test_criterion_08_density_exponents(reports, record):
    ids = ["cor5_2_density_unitary_p1", "cor5_2_density_unitary_p2", "eq5_1_density_so",
           "cor5_1_density_usp"]
    reps = [run_experiment(i, seed=SEED, timing=True) for i in ids]
    for r in reps:
        assert r.params["count"] == 1_000_000
        # same statistics as the untimed suite run
        assert r.statistics == reports[r.experiment_id].statistics
    total = sum(r.runtime_ms for r in reps) / 1000
    slopes = ", ".join(f"{_stat(r, 'slope').value:.3f}" for r in reps)
    bad = _failures(reps)
    if total > 300:
        bad.append(f"runtime {total:.0f} s > 300 s")
    record(8, "density exponents 2, 4, 3/2, 5/2", not bad,
           "; ".join(bad) if bad else f"slopes {slopes}; {total:.1f} s")
    assert not bad


def test_criterion_09_clts(reports, record):
    ids = ["thm5_3_clt_jacobi", "cor5_4_clt_so", "cor5_4_clt_usp", "cor5_5_clt_unitary"]
    reps = [reports[i] for i in ids]
    for r in reps:
        assert r.params["n"] == 10000 and r.params["count"] == 20000
    _check(record, 9, "CLT property gates at n = 1e4", reps)


def test_criterion_10_appendix(reports, record):
    ids = ["thm_a1_identity", "lemma_a2_transform", "lemma_a3_transform", "lemma_a4_transform",
           "tilted_routes_ks"]
    rep = reports["thm_a1_identity"]
    assert rep.params["lam"] == 3.0 and rep.params["count"] == 10000
    _check(record, 10, "appendix transforms and tilted identity", [reports[i] for i in ids])


def test_criterion_11_determinism(suite_run, tmp_path, record):
    path = tmp_path / "threads3.json"
    cli.main(["verify", "--all", "--seed", str(SEED), "--threads", "3", "--out", str(path)])
    ref = suite_run[1]
    other = path.read_bytes()
    same = other == ref
    detail = f"{len(ref)} bytes identical" if same else "reports differ"
    if not same:
        a, b = np.frombuffer(ref, np.uint8), np.frombuffer(other, np.uint8)
        m = min(len(a), len(b))
        first = int(np.argmax(a[:m] != b[:m])) if np.any(a[:m] != b[:m]) else m
        detail += f" from byte {first}"
    record(11, "verify --all byte-identical for --threads 1 and 3", same, detail)
    assert same
