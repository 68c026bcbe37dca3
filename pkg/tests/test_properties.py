import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rpesim.grid import GridSpec, PotentialSpec, assemble_hamiltonian
from rpesim.spectral import eigendecompose
from rpesim.suzuki import SplitOperator, SuzukiPlan


def test_exact_evolution_telescopes(ham7, rng):
    split = SplitOperator(ham7)
    for t1, t2 in rng.uniform(-0.05, 0.05, size=(20, 2)):
        lhs = split.exact_power(t1) @ split.exact_power(t2)
        assert np.allclose(lhs, split.exact_power(t1 + t2), atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(K=st.integers(1, 4), j=st.integers(0, 3))
def test_plan_inverse_is_adjoint(K, j):
    ham = assemble_hamiltonian(GridSpec(1, 7), PotentialSpec("separable-quadratic", {"coef": 8.0}), 0.25)
    split = SplitOperator(ham)
    p = SuzukiPlan(k=1, j=j, s=0.25, R=192.0, eps_target=1.0, K=K)
    x = np.ones(7, complex) / math.sqrt(7)
    y = split.apply(p, split.apply(p, x), adjoint=True)
    assert np.allclose(y, x, atol=1e-12)


@pytest.mark.parametrize(
    "pot",
    [PotentialSpec("zero"), PotentialSpec("separable-quadratic", {"coef": 8.0})],
    ids=["zero", "quadratic"],
)
def test_discretization_error_is_second_order(pot):
    # reference: a much finer grid; error / h^2 stays bounded and the observed order is 2
    ref = eigendecompose(assemble_hamiltonian(GridSpec(1, 511, dim_cap=512), pot, 1.0)).ground_energy
    errors, hs = [], []
    for n in (7, 15, 31):
        g = GridSpec(1, n)
        errors.append(abs(ref - eigendecompose(assemble_hamiltonian(g, pot, 1.0)).ground_energy))
        hs.append(g.h)
    ratios = [e / h**2 for e, h in zip(errors, hs)]
    assert max(ratios) <= 2 * min(ratios)
    for e_coarse, e_fine in zip(errors, errors[1:]):
        assert math.log2(e_coarse / e_fine) == pytest.approx(2.0, abs=0.2)


def test_zero_potential_discretization_closed_form():
    for n in (7, 15, 31):
        h = 1 / (n + 1)
        lam = eigendecompose(assemble_hamiltonian(GridSpec(1, n), PotentialSpec("zero"), 1.0)).ground_energy
        assert lam == pytest.approx(2 / h**2 * math.sin(math.pi * h / 2) ** 2, abs=1e-10)
        # series: pi^2/2 - pi^4 h^2 / 24 + O(h^4)
        assert (math.pi**2 / 2 - lam) / h**2 == pytest.approx(math.pi**4 / 24, rel=0.02)


@settings(max_examples=15, deadline=None)
@given(s=st.floats(0, 1), coef=st.floats(0, 16))
def test_trotter_converges_to_exact(s, coef):
    ham = assemble_hamiltonian(GridSpec(1, 7), PotentialSpec("separable-quadratic", {"coef": coef}), s)
    split = SplitOperator(ham)
    e1 = split.error(SuzukiPlan(k=1, j=2, s=s, R=192.0, eps_target=1.0, K=2))
    e2 = split.error(SuzukiPlan(k=1, j=2, s=s, R=192.0, eps_target=1.0, K=4))
    assert e2 <= e1 + 1e-14
