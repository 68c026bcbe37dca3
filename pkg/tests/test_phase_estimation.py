import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_state
from rpesim.phase_estimation import (
    PEConfig,
    PhaseEstimationError,
    TrotterUnitaries,
    alpha,
    alpha_sq,
    assert_phase_separation,
    brute_force_circuit,
    exact_distribution,
    good_set,
    good_set_probability,
    in_good_set,
    outcome_probability,
    phase_distance,
    phases,
    post_measurement_state,
    run_phase_estimation,
    sample_exact,
    sample_kernel,
    sample_outcome,
    wrap,
)
from rpesim.spectral import eigendecompose
from rpesim.suzuki import SplitOperator, plan_stage

ALPHA_SQ_Q3 = 0.410533474517002818  # mpmath, m=2, phi=0.3125


def direct_alpha(m, phi, q):
    M = 2**q
    k = np.arange(M)
    return np.exp(2j * np.pi * k * (phi - m / M)).sum() / M


def test_alpha_example():
    assert alpha_sq(2, 0.3125, 3) == pytest.approx(ALPHA_SQ_Q3, abs=1e-15)
    assert abs(alpha(2, 0.3125, 3)) ** 2 == pytest.approx(ALPHA_SQ_Q3, abs=1e-15)


@settings(max_examples=50, deadline=None)
@given(phi=st.floats(0, 1, exclude_max=True), q=st.integers(1, 9), m=st.integers(0, 511))
def test_alpha_matches_direct_sum(phi, q, m):
    m = m % 2**q
    assert alpha(m, phi, q) == pytest.approx(direct_alpha(m, phi, q), abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(phi=st.floats(0, 1, exclude_max=True), q=st.integers(1, 14))
def test_alpha_normalized(phi, q):
    assert alpha_sq(np.arange(2**q), phi, q).sum() == pytest.approx(1.0, abs=1e-12)


def test_alpha_exact_grid_point():
    assert alpha(3, 3 / 8, 3) == 1.0
    assert alpha_sq(np.arange(8), 3 / 8, 3) == pytest.approx([0, 0, 0, 1, 0, 0, 0, 0], abs=1e-25)


def test_wrap_and_distance():
    assert wrap(0.75) == pytest.approx(-0.25)
    assert wrap(0.5) == pytest.approx(-0.5)
    assert phase_distance(0.95, 0.05) == pytest.approx(0.1)


def test_good_set_example():
    cfg = PEConfig(b=3, t0=0, R=1.0)
    assert good_set(cfg, 0.25).tolist() == [1, 2, 3]
    assert in_good_set(cfg, 0.25, 3) and not in_good_set(cfg, 0.25, 4)


def test_good_set_wraps():
    cfg = PEConfig(b=3, t0=1, R=1.0)
    # M2 = 16, centre 0.16, radius 2: 15 is at distance 1.16, 14 at 2.16
    g = good_set(cfg, 0.01)
    assert g.tolist() == [0, 1, 2, 15]
    assert not in_good_set(cfg, 0.01, 14)
    assert all(in_good_set(cfg, 0.01, int(m)) for m in g)


def test_pe_config_validation():
    with pytest.raises(ValueError):
        PEConfig(b=0, t0=1, R=1.0)
    with pytest.raises(ValueError):
        PEConfig(b=3, t0=1, R=1.0, backend="qpu")
    cfg = PEConfig(b=3, t0=2, R=10.0)
    assert cfg.q == 5 and cfg.M2 == 32
    assert cfg.energy(8) == pytest.approx(2 * math.pi * 10 * 0.25)


def test_phases_range(spec7):
    with pytest.raises(PhaseEstimationError):
        phases(spec7, 1.0)
    assert np.all(phases(spec7, 192.0) < 1)


def test_phase_separation_guard(spec7):
    phi = phases(spec7, 192.0)
    assert_phase_separation(phi, 10)
    with pytest.raises(PhaseEstimationError, match="separation"):
        assert_phase_separation(phi, 2)


def test_exact_distribution_eigenstate_and_sum(spec7, rng):
    cfg = PEConfig(b=6, t0=2, R=192.0)
    p = exact_distribution(cfg, spec7, spec7.ground_state)
    phi0 = phases(spec7, cfg.R)[0]
    assert np.allclose(p, alpha_sq(np.arange(cfg.M2), phi0, cfg.q))
    psi = random_state(rng, 7)
    p = exact_distribution(cfg, spec7, psi)
    assert p.sum() == pytest.approx(1.0, abs=1e-12)
    assert outcome_probability(cfg, spec7, psi, 5) == pytest.approx(p[5])
    g = good_set(cfg, phi0)
    assert good_set_probability(cfg, spec7, psi) == pytest.approx(p[g].sum())
    with pytest.raises(PhaseEstimationError):
        exact_distribution(PEConfig(b=14, t0=2, R=192.0), spec7, psi)


def test_sample_outcome_regression():
    # u = 0.63696... under seed 0, so floor(4u) = 2
    assert sample_outcome(np.full(4, 0.25), 0) == 2
    assert [sample_outcome(np.full(4, 0.25), s) for s in range(6)] == [2, 2, 1, 0, 3, 3]
    with pytest.raises(ValueError):
        sample_outcome(np.array([0.5, 0.4]), 0)


def test_sample_kernel_matches_distribution():
    q, phi = 5, 0.1234
    rng = np.random.default_rng(7)
    draws = np.array([sample_kernel(phi, q, rng, window=3) for _ in range(20000)])
    freq = np.bincount(draws, minlength=32) / len(draws)
    p = alpha_sq(np.arange(32), phi, q)
    # total variation within sampling noise; the small window exercises the tail path
    assert 0.5 * np.abs(freq - p).sum() < 0.03


def test_sample_exact_deterministic(spec7, rng):
    cfg = PEConfig(b=12, t0=3, R=192.0)
    psi = random_state(rng, 7)
    a = [sample_exact(cfg, spec7, psi, s) for s in range(10)]
    b = [sample_exact(cfg, spec7, psi, s) for s in range(10)]
    assert a == b


def test_post_state_of_eigenstate_is_unchanged(spec7):
    cfg = PEConfig(b=8, t0=2, R=192.0)
    out = post_measurement_state(cfg, spec7, spec7.ground_state, 3)
    assert out.c0_prime == pytest.approx(1.0, abs=1e-12)
    assert np.linalg.norm(out.post_state) == pytest.approx(1.0)


def test_trotter_exact_powers_match_exact_backend(ham7, spec7, rng):
    cfg = PEConfig(b=5, t0=2, R=192.0, backend="trotter")
    split = SplitOperator(ham7, spec7)
    exact = TrotterUnitaries.exact(cfg.q, split, cfg.R)
    psi = random_state(rng, 7)
    dist = exact.distribution(cfg, psi)
    assert np.allclose(dist, exact_distribution(cfg, spec7, psi), atol=1e-12)
    for m in (0, 3, 77):
        assert np.allclose(exact.post_vector(cfg, psi, m), post_vector_exact(cfg, spec7, psi, m), atol=1e-12)


def post_vector_exact(cfg, spec, psi, m):
    from rpesim.phase_estimation import exact_post_vector

    return exact_post_vector(cfg, spec, psi, m)


def test_brute_force_circuit_matches_kernel(ham7, spec7, rng):
    cfg = PEConfig(b=3, t0=1, R=192.0)
    split = SplitOperator(ham7, spec7)
    us = TrotterUnitaries.exact(cfg.q, split, cfg.R)._dense
    psi = random_state(rng, 7)
    state = brute_force_circuit(us, psi)
    for m in range(cfg.M2):
        assert np.allclose(state[m], post_vector_exact(cfg, spec7, psi, m), atol=1e-12)


def test_trotter_amplitudes_match_post_vectors(ham7, spec7, rng):
    cfg = PEConfig(b=4, t0=2, R=192.0, backend="trotter")
    split = SplitOperator(ham7, spec7)
    plans = plan_stage(1, ham7, [1e-3 / 2**j for j in range(cfg.q)], cfg.R, split=split)
    trot = TrotterUnitaries(plans, split)
    psi = random_state(rng, 7)
    amps = trot.amplitudes(cfg, psi)
    for m in (0, 5, 63):
        assert np.allclose(amps[m], trot.post_vector(cfg, psi, m), atol=1e-12)
    assert trot.distribution(cfg, psi).sum() == pytest.approx(1.0, abs=1e-12)
    assert trot.eps_H == pytest.approx(sum(trot.errors))
    # the circuit with Trotter unitaries agrees with the factorized product
    state = brute_force_circuit([trot._dense[j] for j in range(cfg.q)], psi)
    assert np.allclose(state, amps, atol=1e-12)


def test_run_phase_estimation_backends(ham7, spec7, rng):
    psi = random_state(rng, 7)
    out = run_phase_estimation(PEConfig(b=8, t0=2, R=192.0), spec7, psi, 5)
    assert 0 <= out.m < 1024 and out.probability > 0
    with pytest.raises(ValueError):
        run_phase_estimation(PEConfig(b=8, t0=2, R=192.0, backend="trotter"), spec7, psi, 5)
    cfg = PEConfig(b=6, t0=2, R=192.0, backend="trotter")
    split = SplitOperator(ham7, spec7)
    trot = TrotterUnitaries(plan_stage(1, ham7, [1e-3] * cfg.q, cfg.R, split=split), split)
    out = run_phase_estimation(cfg, spec7, psi, 5, trotter=trot)
    assert out.diagnostics["sampled_from"] == "trotter"
    assert out.diagnostics["eps_H"] == trot.eps_H
