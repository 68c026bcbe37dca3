"""Acceptance gate: one test per criterion, each printing a pass/fail line."""

import math
import time

import numpy as np
import pytest

from conftest import report_criterion
from rpesim import cli
from rpesim.driver import RunConfig, Simulation, run
from rpesim.grid import GridSpec, PotentialSpec
from rpesim.verification import (
    C0_SQ_MIN,
    default_run_config,
    verify_cost_model,
    verify_energy_correctness,
    verify_gap_and_successive_overlap,
    verify_good_outcome_probability,
    verify_suzuki,
    verify_near_eigenvector,
    verify_overlap_improvement,
)

pytestmark = pytest.mark.acceptance

QUAD8 = PotentialSpec("separable-quadratic", {"coef": 8.0})


def test_criterion_01_energy_correctness():
    start = time.perf_counter()
    rep = verify_energy_correctness(runs=200, seed=0)
    elapsed = time.perf_counter() - start
    rate = rep.extra["good_rate"]
    ok = rep.failure_count == 0 and rate >= 0.70 and elapsed <= 60
    report_criterion(1, ok, f"violations={rep.failure_count} good_rate={rate:.3f} (>=0.70) time={elapsed:.1f}s")
    assert rep.failure_count == 0
    assert rate >= 0.70
    assert elapsed <= 60


def test_criterion_02_relative_error_chain():
    cfg = RunConfig(pot=QUAD8, grid=GridSpec(1, 15), repetitions=5, seed=0, account_costs=False)
    rep = run(cfg)
    h = cfg.grid.h
    ok = rep.rel_error <= h
    report_criterion(2, ok, f"|1 - E_hat/E0_ref| = {rep.rel_error:.4g} (<= h = {h})")
    assert rep.rel_error <= h


def test_criterion_03_eigenvector_improvement():
    start = time.perf_counter()
    rep = verify_overlap_improvement(trials=200, seed=0)
    elapsed = time.perf_counter() - start
    c0 = [f["inputs"]["c0_sq"] for f in rep.failures]
    ok = rep.trials >= 200 and rep.failure_count == 0 and elapsed <= 120
    report_criterion(3, ok, f"qualifying={rep.trials} violations={rep.failure_count} time={elapsed:.1f}s")
    assert rep.trials >= 200
    assert rep.failure_count == 0, c0
    assert elapsed <= 120
    assert C0_SQ_MIN == pytest.approx(math.pi**2 / 16)


def test_criterion_04_near_eigenvector_stability():
    rep = verify_near_eigenvector(trials=40, seed=0)
    lo, hi = rep.extra["eps_H_min"], rep.extra["eps_H_max"]
    in_range = 1e-4 <= lo and hi <= 1e-2
    ok = in_range and rep.failure_count == 0 and rep.trials > 0
    report_criterion(4, ok, f"checks={rep.trials} violations={rep.failure_count} eps_H in [{lo:.2e}, {hi:.2e}]")
    assert in_range
    assert rep.trials > 0
    assert rep.failure_count == 0


def test_criterion_05_good_outcome_probability():
    rep = verify_good_outcome_probability(trials=10_000, seed=0, b=8, t0=3, c0_sq=0.85)
    x = rep.extra
    report_criterion(5, rep.passed, f"frequency={x['frequency']:.4f} bound={x['bound']:.4f} sigma={x['sigma']:.4f}")
    assert x["samples"] == 10_000
    assert rep.passed


def test_criterion_06_suzuki_order_and_budget():
    rep = verify_suzuki()
    slopes = rep.extra["slopes"]
    report_criterion(6, rep.passed, f"slopes k=1 {slopes['1']:.3f}, k=2 {slopes['2']:.3f}; budget violations={rep.failure_count}")
    assert abs(slopes["1"] - 2.0) <= 0.3
    assert abs(slopes["2"] - 4.0) <= 0.6
    assert rep.failure_count == 0


def test_criterion_07_gap_and_overlap():
    rep = verify_gap_and_successive_overlap()
    checks = {f["inputs"]["check"] for f in rep.failures}
    report_criterion(7, rep.passed, f"checks={rep.trials} violations={rep.failure_count} min_margin={rep.statistics['min_margin']:.3g}")
    assert rep.trials > 0
    assert rep.failure_count == 0, checks


def test_criterion_08_cost_envelope():
    rep = verify_cost_model(ks=(1, 2), hs=(1 / 8, 1 / 16), d=1, C=2.0)
    growth = rep.extra["growth"]
    report_criterion(8, rep.passed, f"stage checks={rep.trials} violations={rep.failure_count} growth={growth}")
    for k in (1, 2):
        assert abs(growth[f"k={k}"] / 2 ** (3 + 1 / (2 * k)) - 1) <= 0.10
    assert rep.failure_count == 0


def test_criterion_09_state_prep():
    delta = 0.05
    cfg = RunConfig(pot=QUAD8, grid=GridSpec(1, 7), mode="state-prep", delta=delta, account_costs=False)
    sim = Simulation(cfg)
    runs = [sim.run_once(np.random.default_rng(seed), index=seed) for seed in range(100)]
    done = [r for r in runs if r.error is None]
    good = sum(r.final_overlap >= 1 - 5 * delta for r in done)
    frac = good / len(done) if done else 0.0
    ok = bool(done) and frac >= 0.90
    report_criterion(9, ok, f"completed={len(done)}/100 overlap>=1-5delta on {frac:.2%} (>=90%)")
    assert done
    assert frac >= 0.90


def test_criterion_10_determinism(tmp_path):
    configs = cli.shipped_configs()
    assert configs
    mismatched = []
    for path in configs:
        outs = []
        for rep in ("a", "b"):
            out = tmp_path / path.stem / rep
            assert cli.main(["run", str(path), "--output-dir", str(out)]) == 0
            outs.append((out / "report.json").read_bytes())
        if outs[0] != outs[1]:
            mismatched.append(path.name)
    ok = not mismatched
    report_criterion(10, ok, f"configs={len(configs)} mismatched={mismatched}")
    assert not mismatched
