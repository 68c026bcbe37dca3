import math
import warnings

import numpy as np
import pytest
import scipy.linalg

from rpesim.grid import (
    GridError,
    GridSpec,
    PotentialError,
    PotentialSpec,
    assemble_hamiltonian,
    check_potential,
    kinetic_eigenvalues,
    laplacian_spectrum_1d,
    potential_bounds,
    quadratic_with_bound,
    sine_ground_state,
    sine_transform,
)

# dense eigensolves of tridiag(-1, 2, -1) / (2 h^2), computed independently
LAMBDA1_N3 = 4.68629150101524
LAMBDA_N7 = (4.871709919277652, 18.745166004060955)
LAMBDA0_D2_N3 = 9.372583002030478


def test_grid_spec_basic():
    g = GridSpec(2, 7)
    assert g.h_exact * (g.n + 1) == 1
    assert g.dim == 49
    assert g.shape == (7, 7)
    assert GridSpec.from_h(1, 1 / 16).n == 15


@pytest.mark.parametrize("d, n", [(0, 3), (1, 0), (1.5, 3)])
def test_grid_spec_rejects_bad_sizes(d, n):
    with pytest.raises(GridError):
        GridSpec(d, n)


def test_grid_spec_dim_cap():
    with pytest.raises(GridError, match="exceeds the cap"):
        GridSpec(3, 31)
    assert GridSpec(3, 31, dim_cap=40_000).dim == 29791


def test_points_row_major():
    g = GridSpec(2, 3)
    pts = g.points()
    assert pts[1].tolist() == pytest.approx([0.25, 0.5])
    assert pts[3].tolist() == pytest.approx([0.5, 0.25])


def test_laplacian_spectrum_examples():
    lam, z = laplacian_spectrum_1d(GridSpec(1, 3))
    assert lam[0] == pytest.approx(LAMBDA1_N3, abs=1e-12)
    assert lam[0] == pytest.approx(8 * (2 - math.sqrt(2)), abs=1e-12)
    expected = math.sqrt(0.5) * np.sin(np.array([1, 2, 3]) * math.pi / 4)
    assert np.allclose(z[:, 0], expected)
    assert np.linalg.norm(z[:, 0]) == pytest.approx(1.0, abs=1e-14)
    lam7, _ = laplacian_spectrum_1d(GridSpec(1, 7))
    assert lam7[:2] == pytest.approx(LAMBDA_N7, abs=1e-10)


@pytest.mark.parametrize("n", [1, 2, 5, 8, 15])
def test_laplacian_spectrum_matches_dense(n):
    g = GridSpec(1, n)
    lam, z = laplacian_spectrum_1d(g)
    t = (2 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)) / (2 * g.h**2)
    assert np.allclose(lam, scipy.linalg.eigvalsh(t), atol=1e-10)
    assert np.allclose(t @ z, z * lam, atol=1e-10)
    assert np.allclose(z.T @ z, np.eye(n), atol=1e-12)


def test_kronecker_sum_spectrum_exhaustive():
    for d, n in [(1, 16), (2, 7), (2, 16), (3, 5)]:
        g = GridSpec(d, n)
        ham = assemble_hamiltonian(g, PotentialSpec("zero"), 1.0)
        dense = np.sort(scipy.linalg.eigvalsh(ham.dense()))
        assert np.allclose(np.sort(kinetic_eigenvalues(g)), dense, atol=1e-10)


def test_zero_potential_equals_laplacian():
    g = GridSpec(2, 3)
    for s in (0.0, 0.4, 1.0):
        ham = assemble_hamiltonian(g, PotentialSpec("zero"), s)
        assert scipy.linalg.eigvalsh(ham.dense())[0] == pytest.approx(LAMBDA0_D2_N3, abs=1e-10)


def test_quadratic_grid_values(quad_pot):
    g = GridSpec(1, 7)
    ham = assemble_hamiltonian(g, quad_pot, 1.0)
    i = np.arange(1, 8)
    assert np.allclose(ham.v_diag, 8 * (i / 8 - 0.5) ** 2)
    assert ham.C == pytest.approx(ham.v_diag.max())


def test_potential_bounds():
    assert potential_bounds(PotentialSpec("zero"), GridSpec(2, 5)) == (0.0, 0.0)
    g = GridSpec(1, 15)
    C, Cp = potential_bounds(PotentialSpec("separable-quadratic", {"coef": 8.0}), g)
    assert C == pytest.approx(1.53125, abs=1e-14)
    # end-point forward difference (1.53125 - 1.125) / (1/16)
    assert Cp == pytest.approx(6.5, abs=1e-12)
    with pytest.raises(PotentialError):
        potential_bounds(PotentialSpec("tabulated", values=(1.0, -0.5, 1.0)), GridSpec(1, 3))


def test_quadratic_with_bound_hits_C():
    for d, n in [(1, 7), (2, 7)]:
        g = GridSpec(d, n)
        for kind in ("separable-quadratic", "radial-quadratic"):
            C, _ = potential_bounds(quadratic_with_bound(g, 2.0, kind), g)
            assert C == pytest.approx(2.0)


def test_negative_and_nonconvex_potentials():
    g = GridSpec(1, 3)
    with pytest.raises(PotentialError):
        assemble_hamiltonian(g, PotentialSpec("tabulated", values=(1.0, -0.1, 1.0)), 1.0)
    with pytest.raises(PotentialError):
        PotentialSpec("separable-quadratic", {"coef": -1.0}).evaluate(g)
    with pytest.warns(UserWarning, match="not midpoint-convex"):
        check_potential(PotentialSpec("tabulated", values=(0.0, 1.0, 0.0)), g)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        check_potential(PotentialSpec("tabulated", values=(1.0, 0.0, 1.0)), g)


def test_unknown_kind_and_params():
    with pytest.raises(PotentialError):
        PotentialSpec("cubic")
    with pytest.raises(PotentialError):
        PotentialSpec("zero", {"width": 1.0})


def test_tabulated_csv_roundtrip(tmp_path):
    path = tmp_path / "v.csv"
    path.write_text("0.5\n0.25\n\n0.5\n")
    pot = PotentialSpec.from_csv(path)
    assert pot.values == (0.5, 0.25, 0.5)
    assert np.allclose(pot.evaluate(GridSpec(1, 3)), [0.5, 0.25, 0.5])
    with pytest.raises(PotentialError):
        pot.evaluate(GridSpec(1, 4))
    bad = tmp_path / "bad.csv"
    bad.write_text("1.0\nabc\n")
    with pytest.raises(PotentialError, match="bad.csv:2"):
        PotentialSpec.from_csv(bad)


def test_stage_fraction_range(quad_pot):
    with pytest.raises(ValueError):
        assemble_hamiltonian(GridSpec(1, 3), quad_pot, 1.5)


def test_sine_ground_state():
    g1 = GridSpec(1, 3)
    assert np.linalg.norm(sine_ground_state(g1)) == pytest.approx(1.0)
    g2 = GridSpec(2, 3)
    u = sine_ground_state(g2)
    assert u[0].real == pytest.approx((math.sqrt(0.5) * math.sin(math.pi / 4)) ** 2)
    assert u[0].real == pytest.approx(0.25)
    for g in (GridSpec(1, 15), GridSpec(2, 7)):
        ham = assemble_hamiltonian(g, PotentialSpec("zero"), 0.0)
        w, v = scipy.linalg.eigh(ham.dense())
        assert abs(np.vdot(v[:, 0], sine_ground_state(g))) ** 2 == pytest.approx(1.0, abs=1e-12)


def test_sine_transform_is_involution(rng):
    g = GridSpec(2, 5)
    x = rng.standard_normal(g.dim) + 1j * rng.standard_normal(g.dim)
    assert np.allclose(sine_transform(sine_transform(x, g), g), x, atol=1e-13)


def test_matvec_matches_dense_and_is_symmetric(rng, quad_pot):
    g = GridSpec(2, 6)
    ham = assemble_hamiltonian(g, quad_pot, 0.7)
    dense = ham.dense()
    assert np.allclose(dense, dense.T)
    for _ in range(100):
        x, y = rng.standard_normal((2, g.dim))
        assert np.vdot(x, ham.matvec(y)) == pytest.approx(np.vdot(ham.matvec(x), y), abs=1e-10 * np.abs(dense).max())
    x = rng.standard_normal(g.dim)
    assert np.allclose(ham.matvec(x), dense @ x)


def test_norm_bound_and_positivity(quad_pot):
    for d, n in [(1, 15), (2, 15), (3, 7)]:
        g = GridSpec(d, n)
        ham = assemble_hamiltonian(g, quad_pot, 1.0)
        w = scipy.linalg.eigvalsh(ham.dense())
        assert w[-1] <= ham.norm_bound()
        assert ham.norm_bound() < 3 * d / g.h**2
        assert w[0] >= d * 2 / g.h**2 * math.sin(math.pi * g.h / 2) ** 2 - 1e-10
