"""Suzuki product formulas for ``W^(2^j) = exp(-i M 2^j / R)``.

The Hamiltonian is split into the kinetic part ``-1/2 Laplacian_h`` (applied
exactly in the sine eigenbasis) and the diagonal potential ``s V_h``.
Coefficients in a plan are absolute times: a step ``("kinetic", tau)`` is the
factor ``exp(-i tau (-1/2 Laplacian_h))`` and ``("potential", tau)`` is
``exp(-i tau s V_h)``. Kinetic and potential coefficients each sum to
``2^j / R``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .grid import GridSpec, HamiltonianTerms, kinetic_eigenvalues, laplacian_spectrum_1d, sine_transform
from .spectral import Spectrum, eigendecompose

KINETIC = "kinetic"
POTENTIAL = "potential"

DEFAULT_MAX_EXPONENTIALS = 10**6
EXACT_NORM_MAX_DIM = 512
POWER_ITERATION_TOL = 1e-10


class PlanError(RuntimeError):
    pass


def suzuki_p(k: int) -> float:
    """Fractal coefficient ``p_k = 1 / (4 - 4^(1/(2k-1)))``."""
    return 1.0 / (4.0 - 4.0 ** (1.0 / (2 * k - 1)))


def _merge(steps):
    merged: list[list] = []
    for which, coef in steps:
        if merged and merged[-1][0] == which:
            merged[-1][1] += coef
        else:
            merged.append([which, coef])
    return tuple((w, c) for w, c in merged)


@lru_cache(maxsize=None)
def suzuki_coefficients(k: int) -> tuple[tuple[str, float], ...]:
    """Merged step pattern of ``S_2k`` over one interval of unit length."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if k == 1:
        return ((KINETIC, 0.5), (POTENTIAL, 1.0), (KINETIC, 0.5))
    inner = suzuki_coefficients(k - 1)
    p = suzuki_p(k)
    outer = [(w, c * p) for w, c in inner]
    middle = [(w, c * (1.0 - 4.0 * p)) for w, c in inner]
    return _merge(outer + outer + middle + outer + outer)


def base_count(k: int) -> int:
    return len(suzuki_coefficients(k))


@dataclass(frozen=True)
class SuzukiPlan:
    """``K`` repetitions of the order-(2k+1) pattern over total time ``2^j/R``."""

    k: int
    j: int
    s: float
    R: float
    eps_target: float
    K: int
    error: float | None = None

    @property
    def dt_total(self) -> float:
        return 2.0**self.j / self.R

    @property
    def pattern(self) -> tuple[tuple[str, float], ...]:
        return suzuki_coefficients(self.k)

    @property
    def N(self) -> int:
        if self.K == 0:
            return 0
        return self.K * (len(self.pattern) - 1) + 1

    @property
    def steps(self) -> list[tuple[str, float]]:
        if self.K == 0:
            return []
        dt = self.dt_total / self.K
        base = [(w, c * dt) for w, c in self.pattern]
        out = list(base)
        for _ in range(self.K - 1):
            out[-1] = (out[-1][0], out[-1][1] + base[0][1])
            out.extend(base[1:])
        return out

    def counts(self) -> tuple[int, int]:
        """Numbers of (kinetic, potential) exponentials."""
        if self.K == 0:
            return 0, 0
        per = sum(1 for w, _ in self.pattern if w == POTENTIAL)
        potential = self.K * per
        return self.N - potential, potential

    def to_dict(self, max_steps: int = 100_000) -> dict:
        out = {
            "k": self.k,
            "j": self.j,
            "s": self.s,
            "R": self.R,
            "eps_target": self.eps_target,
            "K": self.K,
            "N": self.N,
            "measured_error": self.error,
            "base_coefficients": [[w, c] for w, c in self.pattern],
        }
        if self.N <= max_steps:
            out["steps"] = [[w, c] for w, c in self.steps]
        else:
            out["steps_truncated"] = True
        return out


class SplitOperator:
    """Dense and matrix-free realizations of plan exponentials for one Hamiltonian."""

    def __init__(self, ham: HamiltonianTerms, spectrum: Spectrum | None = None):
        self.ham = ham
        self.grid: GridSpec = ham.grid
        self.kinetic = kinetic_eigenvalues(ham.grid) * (ham.kinetic_scale / 0.5)
        self.potential = ham.potential
        self._spectrum = spectrum
        self._basis = None

    @property
    def spectrum(self) -> Spectrum:
        if self._spectrum is None:
            self._spectrum = eigendecompose(self.ham)
        return self._spectrum

    @property
    def basis(self) -> np.ndarray:
        if self._basis is None:
            _, z = laplacian_spectrum_1d(self.grid)
            full = np.ones((1, 1))
            for _ in range(self.grid.d):
                full = np.kron(full, z)
            self._basis = full
        return self._basis

    def exact_power(self, t: float) -> np.ndarray:
        """``exp(-i M t)`` from the eigendecomposition."""
        spec = self.spectrum
        q = spec.eigenvectors
        return (q * np.exp(-1j * spec.eigenvalues * t)) @ q.conj().T

    def kinetic_dense(self, tau: float) -> np.ndarray:
        z = self.basis
        return (z * np.exp(-1j * tau * self.kinetic)) @ z.T

    def base_step(self, k: int, dt: float) -> np.ndarray:
        out = np.eye(self.grid.dim, dtype=complex)
        for which, c in suzuki_coefficients(k):
            if which == KINETIC:
                out = self.kinetic_dense(c * dt) @ out
            else:
                out = np.exp(-1j * c * dt * self.potential)[:, None] * out
        return out

    def realize(self, plan: SuzukiPlan) -> np.ndarray:
        """Dense unitary of the plan, by repeated squaring of the base step."""
        if plan.K == 0:
            return np.eye(self.grid.dim, dtype=complex)
        return np.linalg.matrix_power(self.base_step(plan.k, plan.dt_total / plan.K), plan.K)

    def apply_exponential(self, which: str, tau: float, state: np.ndarray) -> np.ndarray:
        if which == KINETIC:
            coeffs = sine_transform(state, self.grid)
            return sine_transform(np.exp(-1j * tau * self.kinetic) * coeffs, self.grid)
        return np.exp(-1j * tau * self.potential) * state

    def apply(self, plan: SuzukiPlan, state: np.ndarray, adjoint: bool = False) -> np.ndarray:
        out = np.asarray(state, dtype=complex).ravel()
        if out.shape[0] != self.grid.dim:
            raise ValueError(f"state has length {out.shape[0]}, grid dimension is {self.grid.dim}")
        steps = plan.steps
        if adjoint:
            for which, tau in steps:
                out = self.apply_exponential(which, -tau, out)
        else:
            for which, tau in reversed(steps):
                out = self.apply_exponential(which, tau, out)
        return out

    def error(self, plan: SuzukiPlan) -> float:
        t = plan.dt_total
        if self.grid.dim <= EXACT_NORM_MAX_DIM:
            diff = self.exact_power(t) - self.realize(plan)
            return float(np.linalg.norm(diff, 2))
        return self._power_iteration_error(plan, t)

    def _power_iteration_error(self, plan: SuzukiPlan, t: float, max_iter: int = 500) -> float:
        spec = self.spectrum
        q = spec.eigenvectors

        def diff(x, adjoint=False):
            sign = 1.0 if adjoint else -1.0
            exact = q @ (np.exp(1j * sign * spec.eigenvalues * t) * (q.conj().T @ x))
            return exact - self.apply(plan, x, adjoint=adjoint)

        rng = np.random.default_rng(0)
        v = rng.standard_normal(self.grid.dim) + 1j * rng.standard_normal(self.grid.dim)
        v /= np.linalg.norm(v)
        sigma2 = 0.0
        for _ in range(max_iter):
            w = diff(diff(v), adjoint=True)
            sigma2 = float(np.vdot(v, w).real)
            norm_w = np.linalg.norm(w)
            if norm_w == 0.0:
                return 0.0
            residual = np.linalg.norm(w - sigma2 * v)
            v = w / norm_w
            if residual <= POWER_ITERATION_TOL * max(sigma2, 1e-300):
                break
        return math.sqrt(max(sigma2, 0.0))


def apply_plan(plan: SuzukiPlan, ham: HamiltonianTerms, state: np.ndarray, adjoint: bool = False) -> np.ndarray:
    norm = np.linalg.norm(state)
    if abs(norm - 1.0) > 1e-8:
        raise ValueError(f"state must be unit norm, got {norm:.12g}")
    return SplitOperator(ham).apply(plan, state, adjoint=adjoint)


def measured_error(plan: SuzukiPlan, ham: HamiltonianTerms, spectrum: Spectrum | None = None) -> float:
    """Spectral norm ``||W^(2^j) - U~_(2^j)||``."""
    return SplitOperator(ham, spectrum).error(plan)


def plan(
    k: int,
    j: int,
    ham: HamiltonianTerms,
    eps_target: float,
    R: float,
    split: SplitOperator | None = None,
    max_exponentials: int = DEFAULT_MAX_EXPONENTIALS,
) -> SuzukiPlan:
    """Smallest subdivision count ``K`` whose measured error meets ``eps_target``.

    ``K`` is doubled until the target is met and then bisected between the
    last failing and first passing value. When the potential term vanishes the
    split is exact and ``K = 1``.
    """
    split = split or SplitOperator(ham)
    if not np.any(ham.potential):
        p = SuzukiPlan(k=k, j=j, s=ham.s, R=R, eps_target=eps_target, K=1)
        return SuzukiPlan(k=k, j=j, s=ham.s, R=R, eps_target=eps_target, K=1, error=split.error(p))
    if not eps_target > 0:
        raise ValueError("eps_target must be positive when the potential term is nonzero")

    def attempt(K):
        p = SuzukiPlan(k=k, j=j, s=ham.s, R=R, eps_target=eps_target, K=K)
        if p.N > max_exponentials:
            raise PlanError(
                f"target unreachable at desk scale: k={k}, j={j}, eps={eps_target:.3g} needs more than "
                f"{max_exponentials} exponentials"
            )
        err = split.error(p)
        return SuzukiPlan(k=k, j=j, s=ham.s, R=R, eps_target=eps_target, K=K, error=err)

    lo, best = 0, attempt(1)
    while best.error > eps_target:
        lo = best.K
        best = attempt(2 * best.K)
    hi = best.K
    while hi - lo > 1:
        mid = (lo + hi) // 2
        trial = attempt(mid)
        if trial.error <= eps_target:
            hi, best = mid, trial
        else:
            lo = mid
    return best


def plan_stage(
    k: int,
    ham: HamiltonianTerms,
    eps_schedule,
    R: float,
    split: SplitOperator | None = None,
    max_exponentials: int = DEFAULT_MAX_EXPONENTIALS,
) -> list[SuzukiPlan]:
    """One plan per power ``j`` with ``eps_schedule[j]`` as its target."""
    split = split or SplitOperator(ham)
    return [plan(k, j, ham, eps, R, split=split, max_exponentials=max_exponentials) for j, eps in enumerate(eps_schedule)]


def exponential_count_bound(
    k: int,
    j: int,
    s: float,
    d: int,
    C: float,
    h: float,
    eps_S: float,
    R: float | None = None,
    kinetic_norm: float = 1.0,
) -> int:
    """Worst-case exponential count for simulating ``W^(2^j)`` to error ``eps_S``.

    ``kinetic_norm`` stands in for the normalized kinetic norm (bounded by 1)
    and the potential norm is ``s C / R``. The result is never below one base
    interval's worth of exponentials.
    """
    if R is None:
        R = 3.0 * d / h**2
    pot_norm = s * C / R
    value = (
        2.0 * 5.0 * 5.0 ** (k - 1) * kinetic_norm * 2.0**j
        * (8.0 * math.e * 2.0**j * pot_norm / eps_S) ** (1.0 / (2 * k))
        * (8.0 * math.e / 3.0) * (5.0 / 3.0) ** (k - 1)
    )
    return max(math.ceil(value), base_count(k))


def c_of_k(k: int) -> float:
    """Constant of the closed-form exponential count, with the (24 pi) factor."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return (
        80.0 * math.e / 3.0
        * (25.0 / 3.0) ** (k - 1)
        * (8.0 * math.e / 3.0) ** (1.0 / (2 * k))
        * (24.0 * math.pi) ** (1.0 + 1.0 / (2 * k))
    )
