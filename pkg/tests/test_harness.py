import csv
import json
import math

import numpy as np
import pytest

from varharm import harness as hs
from varharm.errors import DomainError
from varharm.grid import Grid, GridFunction, write_csv
from varharm.lebesgue import ExponentFunction


def test_config_defaults_and_validation():
    cfg = hs.ExperimentConfig("ineqmax")
    assert (cfg.n, cfg.N, cfg.L, cfg.seed, cfg.cases) == (1, 512, 8.0, 42, 50)
    assert hs.ExperimentConfig("lemma1-quasinorm").N == 1024
    with pytest.raises(DomainError):
        hs.ExperimentConfig("no-such-check")
    with pytest.raises(DomainError):
        hs.ExperimentConfig.from_dict({"target": "ineqmax", "bogus": 1})
    with pytest.raises(DomainError):
        hs.ExperimentConfig("ineqmax", tol=0.0)


def test_operator_alpha_wins(tmp_path):
    path = tmp_path / "cfg.json"
    op = {"alpha": 0.25, "matrices": [[1.0], [-1.0]], "exponents": [0.3, 0.45]}
    path.write_text(json.dumps({"target": "lemma14-weaktype", "operator": op, "N": 256}))
    cfg = hs.ExperimentConfig.from_json(str(path))
    assert cfg.alpha == 0.25
    assert hs.operator_for(cfg).exponents == (0.3, 0.45)


def test_registry_lists_every_target():
    expected = {
        "lemma1-quasinorm", "ineqmax", "lemma4-dilation", "lemma12-rh", "lemma13-vector", "lemma14-weaktype",
        "lemma15a", "lemma15b", "prop16", "prop18-pointwise", "cond3-moments", "prop20", "theorem21",
        "theorem24", "remark22-exponents",
    }
    assert set(hs.REGISTRY) == expected
    assert all(c.description for c in hs.REGISTRY.values())


def test_ineqmax_run_writes_outputs(tmp_path):
    out = tmp_path / "r.json"
    cfg = hs.ExperimentConfig("ineqmax", cases=10, out=str(out), csv_dir=str(tmp_path / "csv"))
    rep = hs.run(cfg)
    assert rep.verdict == "pass" and rep.exit_code == 0
    assert sum(c["lower_violations"] + c["upper_violations"] for c in rep.cases) == 0
    data = json.loads(out.read_text())
    assert data["header"] == hs.HEADER_NOTE
    assert set(data["constants"]["max_M_over_Mc"]) == {"N", "2N", "rel_change"}
    with open(tmp_path / "csv" / "ineqmax.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 20 and all("budget" in r for r in rows)


def test_reports_are_deterministic():
    a = hs.run(hs.ExperimentConfig("lemma12-rh", N=256))
    b = hs.run(hs.ExperimentConfig("lemma12-rh", N=256))
    assert a.cases == b.cases and a.constants == b.constants


def _fake(monkeypatch, name, measurements):
    calls = iter(measurements)
    monkeypatch.setitem(hs.REGISTRY, name, hs.Check(name, "test stub", lambda cfg, grid: next(calls), {}))


@pytest.mark.parametrize(
    "coarse, fine, verdict",
    [
        (hs.Measurement([], {"C": 1.0}), hs.Measurement([], {"C": 1.1}), "pass"),
        (hs.Measurement([], {"C": 1.0}), hs.Measurement([], {"C": 2.0}), "fail"),
        (hs.Measurement([], {"C": 1.0}, violations=1), hs.Measurement([], {"C": 1.0}), "fail"),
        (hs.Measurement([], {"C": 1.0}, budget_dominated=1), hs.Measurement([], {"C": 1.0}), "inconclusive"),
        (hs.Measurement([], {"C": math.inf}), hs.Measurement([], {"C": math.inf}), "fail"),
    ],
)
def test_verdict_rules(monkeypatch, coarse, fine, verdict):
    _fake(monkeypatch, "stub", [coarse, fine])
    rep = hs.run(hs.ExperimentConfig("stub"))
    assert rep.verdict == verdict
    assert rep.exit_code == hs.VERDICT_CODES[verdict]


def test_fit_tail_recovers_power_law():
    g = Grid(1, 8.0, 1024)
    integrand = np.abs(g.axis) ** -3.0
    tail, e = hs.fit_tail(integrand, g)
    assert e == pytest.approx(3.0, rel=1e-9)
    assert tail == pytest.approx(2 * 8.0**-2 / 2, rel=1e-9)
    assert hs.fit_tail(np.abs(g.axis) ** -0.5, g)[0] == math.inf


def test_symmetry_check_and_uniformity():
    g = Grid(1, 4.0, 256)
    spec = hs.pt.OperatorSpec.reflection_pair(1, 0.5)
    sym = ExponentFunction(GridFunction(g, 2 + np.exp(-g.axis**2)))
    skew = ExponentFunction(GridFunction(g, 2 + np.exp(-((g.axis - 1) ** 2))))
    assert hs.check_symmetry(sym, spec) == 0.0
    assert hs.check_symmetry(skew, spec) > 0.1
    u = hs.uniformity([0.5, 1, 2, 4], [1.0, 1.1, 0.9, 1.0])
    assert hs.uniform_verdict(u)
    assert not hs.uniform_verdict(hs.uniformity([0.5, 1, 2, 4], [1, 2, 4, 8]))


def test_theorem_checks_refuse_asymmetric_exponents(tmp_path):
    g = Grid(1, 32.0, 4096)
    path = tmp_path / "p.csv"
    write_csv(GridFunction(g, 1.3 + 0.2 * np.exp(-((g.axis - 1) ** 2))), path)
    with pytest.raises(DomainError):
        hs.run(hs.ExperimentConfig("theorem21", exponent=str(path)))


def test_theorem_checks_need_enough_atoms():
    with pytest.raises(DomainError):
        hs.run(hs.ExperimentConfig("theorem21", atoms=10))
    with pytest.raises(DomainError):
        hs.run(hs.ExperimentConfig("theorem24", radii_log2=(-1, 1)))


def test_moment_check_passes():
    rep = hs.run(hs.ExperimentConfig("cond3-moments"))
    assert rep.verdict == "pass"
    assert all(abs(c["moment"]) <= c["budget"] for c in rep.cases)


def test_lemma15b_needs_alpha_zero():
    with pytest.raises(DomainError):
        hs.run(hs.ExperimentConfig("lemma15b", alpha=0.5))


@pytest.mark.parametrize("target", ["lemma1-quasinorm", "lemma4-dilation", "lemma13-vector", "lemma14-weaktype",
                                    "lemma15a", "lemma15b", "prop16", "prop18-pointwise", "prop20",
                                    "remark22-exponents"])
def test_desk_scale_checks_pass(target):
    kw = {"cases": 40} if target == "lemma1-quasinorm" else {}
    rep = hs.run(hs.ExperimentConfig(target, **kw))
    assert rep.verdict == "pass", rep.notes


def test_planar_variant_runs():
    rep = hs.run(hs.ExperimentConfig("ineqmax", n=2, N=32, L=4.0, cases=5))
    assert rep.verdict == "pass"


def test_uniform_bound_for_constant_exponent():
    # single atoms have unit atomic norm, so the operator norm ratio must not trend with the radius
    rep = hs.run(hs.ExperimentConfig("theorem21", exponent="const:1.2", cases=0))
    ratios = np.array([c["ratio"] for c in rep.cases if c["resolution"] == "N"])
    radii = np.array([c["r"] for c in rep.cases if c["resolution"] == "N"])
    slope = np.polyfit(np.log(radii), np.log(ratios), 1)[0]
    assert -0.1 <= slope <= 0.1
    assert rep.verdict == "pass"
