"""Phase estimation on ``W = exp(-i M / R)`` with a ``q = b + t0`` qubit top register.

The controlled powers act with ``U = W^dagger = exp(+i M / R)``, so an
eigenvector with eigenvalue ``lambda`` carries the phase
``phi = lambda / (2 pi R)`` and outcome ``m`` estimates ``phi`` as ``m / 2^q``.
For a bottom-register input ``psi = sum_j c_j u_j`` the unnormalized
post-measurement state for outcome ``m`` is

    (1/M2) sum_k exp(-2 pi i k m / M2) U^k psi = sum_j c_j alpha(m, phi_j) u_j,

and in factorized form ``(1/M2) prod_j (I + exp(-2 pi i m 2^j / M2) U_(2^j)) psi``
with the ``j = 0`` factor applied first. The Trotter backend replaces each
``U_(2^j)`` by the adjoint of a Suzuki plan for ``W^(2^j)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .spectral import Spectrum
from .suzuki import EXACT_NORM_MAX_DIM, SplitOperator, SuzukiPlan

BACKENDS = ("exact-phase", "trotter")
FULL_DISTRIBUTION_CAP = 2**14
TROTTER_FULL_CAP = 2**10
SAMPLER_WINDOW = 4096


class PhaseEstimationError(RuntimeError):
    pass


@dataclass(frozen=True)
class PEConfig:
    b: int
    t0: int
    R: float
    backend: str = "exact-phase"
    full_cap: int = FULL_DISTRIBUTION_CAP

    def __post_init__(self):
        if self.b < 1 or self.t0 < 0:
            raise ValueError(f"need b >= 1 and t0 >= 0, got b={self.b}, t0={self.t0}")
        if self.R <= 0:
            raise ValueError("R must be positive")
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}; expected one of {BACKENDS}")

    @property
    def q(self) -> int:
        return self.b + self.t0

    @property
    def M2(self) -> int:
        return 2**self.q

    def energy(self, m: int) -> float:
        return 2.0 * math.pi * self.R * m / self.M2


def wrap(x):
    """Reduce to the interval [-1/2, 1/2)."""
    return (np.asarray(x, dtype=float) + 0.5) % 1.0 - 0.5


def phase_distance(a, b):
    """Distance between phases on the unit circle."""
    return np.abs(wrap(np.asarray(a) - np.asarray(b)))


def phases(spec: Spectrum, R: float) -> np.ndarray:
    phi = spec.eigenvalues / (2.0 * math.pi * R)
    if np.any(phi < 0) or np.any(phi >= 1):
        raise PhaseEstimationError("eigenphases fall outside [0, 1); R is too small for this spectrum")
    return phi


def _offset(m, phi, q: int):
    """Wrapped ``M (phi - m/M)`` in ``[-M/2, M/2)``, computed without rounding.

    ``phi * M`` is an exact scaling and subtracting integers or multiples of
    ``M`` from it is exact, so the large kernel numerator can be reduced to
    ``fmod(y, 2)`` before the sine is taken.
    """
    M = 2**q
    y = np.asarray(phi, dtype=float) * M - np.asarray(m, dtype=float)
    return y - np.floor(y / M + 0.5) * M


def _ratio(y, q: int):
    """``sin(pi y) / (M sin(pi y / M))`` for wrapped offsets ``y``."""
    M = 2**q
    # offsets far below one grid spacing are flushed so denormals cannot divide by zero
    y = np.where(np.abs(y) < 1e-100, 0.0, y)
    r = y / M
    near = np.abs(y) < 1.0
    # np.sinc(x) = sin(pi x) / (pi x) is exact at 0 and smooth nearby
    small = np.sinc(y) / np.sinc(r)
    sin_r = np.where(near, 1.0, np.sin(np.pi * r))
    large = np.sin(np.pi * np.fmod(y, 2.0)) / (M * sin_r)
    return np.where(near, small, large)


def alpha(m, phi, q: int):
    """Kernel ``(1/M) sum_{k<M} exp(2 pi i k (phi - m/M))`` with ``M = 2^q``.

    Broadcasts over ``m`` and ``phi``. Uses the closed form
    ``exp(i pi (M-1) r) sin(pi M r) / (M sin(pi r))``, equal to 1 at ``r = 0``.
    """
    y = _offset(m, phi, q)
    r = y / 2**q
    # (M - 1) r = y - r; reduce y mod 2 for the same reason as the numerator
    return np.exp(1j * np.pi * (np.fmod(y, 2.0) - r)) * _ratio(y, q)


def alpha_sq(m, phi, q: int):
    """``|alpha(m, phi)|^2 = sin^2(pi M r) / (M^2 sin^2(pi r))``."""
    return _ratio(_offset(m, phi, q), q) ** 2


def good_set(cfg: PEConfig, phi0: float) -> np.ndarray:
    """Outcomes within wraparound distance ``2^-b`` of ``phi0``, ascending."""
    M2 = cfg.M2
    radius = 2**cfg.t0
    center = phi0 * M2
    start = math.floor(center) - radius - 1
    cand = np.arange(start, start + 2 * radius + 4)
    # distance measured in units of the outcome grid spacing
    dist = np.abs(wrap((center - cand) / M2)) * M2
    keep = cand[dist <= radius * (1 + 1e-12)] % M2
    return np.unique(keep)


def in_good_set(cfg: PEConfig, phi0: float, m: int) -> bool:
    return bool(phase_distance(phi0, m / cfg.M2) * cfg.M2 <= 2**cfg.t0 * (1 + 1e-12))


def phase_separation(phi: np.ndarray, b: int) -> float:
    """Smallest ``|phi_j - phi_0|`` over ``j >= 1`` in units of ``2^-b``."""
    if len(phi) < 2:
        return math.inf
    return float(phase_distance(phi[1:], phi[0]).min() * 2**b)


def assert_phase_separation(phi: np.ndarray, b: int, factor: float = 5.0) -> None:
    sep = phase_separation(phi, b)
    if not sep > factor:
        raise PhaseEstimationError(f"phase separation {sep:.4g} * 2^-b does not exceed {factor} * 2^-b")


def _check_unit(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).ravel()
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > 1e-8:
        raise ValueError(f"input state must be unit norm, got {norm:.12g}")
    return psi


def exact_distribution(cfg: PEConfig, spec: Spectrum, psi_in: np.ndarray) -> np.ndarray:
    """Full outcome distribution ``p(m) = sum_j |c_j|^2 |alpha(m, phi_j)|^2``."""
    if cfg.M2 > cfg.full_cap:
        raise PhaseEstimationError(f"M2 = {cfg.M2} exceeds the full-distribution cap {cfg.full_cap}")
    weights = np.abs(spec.coefficients(_check_unit(psi_in))) ** 2
    phi = phases(spec, cfg.R)
    m = np.arange(cfg.M2)
    p = np.zeros(cfg.M2)
    for w, ph in zip(weights, phi):
        if w > 0:
            p += w * alpha_sq(m, ph, cfg.q)
    return p


def outcome_probability(cfg: PEConfig, spec: Spectrum, psi_in: np.ndarray, m) -> np.ndarray:
    weights = np.abs(spec.coefficients(_check_unit(psi_in))) ** 2
    phi = phases(spec, cfg.R)
    return alpha_sq(np.asarray(m)[..., None], phi, cfg.q) @ weights


def good_set_probability(cfg: PEConfig, spec: Spectrum, psi_in: np.ndarray) -> float:
    phi0 = phases(spec, cfg.R)[0]
    return float(outcome_probability(cfg, spec, psi_in, good_set(cfg, phi0)).sum())


def distribution_rows(cfg: PEConfig, spec: Spectrum, psi_in: np.ndarray, window: int = 512):
    """Rows ``(m, probability, in_good_set)`` of the exact outcome distribution.

    The full range is used when ``M2`` is within the full-distribution cap;
    otherwise only outcomes within ``window`` of ``M2 phi0`` are listed.
    """
    phi0 = phases(spec, cfg.R)[0]
    if cfg.M2 <= cfg.full_cap:
        ms = np.arange(cfg.M2)
        p = exact_distribution(cfg, spec, psi_in)
    else:
        center = int(round(phi0 * cfg.M2))
        ms = np.arange(center - window, center + window + 1) % cfg.M2
        p = outcome_probability(cfg, spec, psi_in, ms)
    good = set(good_set(cfg, phi0).tolist())
    return ["m", "probability", "in_good_set"], [(int(m), float(pm), int(m) in good) for m, pm in zip(ms, p)]


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_outcome(distribution: np.ndarray, rng_seed) -> int:
    """Inverse-CDF draw from a full distribution."""
    p = np.asarray(distribution, dtype=float)
    total = p.sum()
    if abs(total - 1.0) > 1e-8:
        raise ValueError(f"distribution sums to {total:.12g}, not 1")
    cdf = np.cumsum(p)
    u = _rng(rng_seed).random() * cdf[-1]
    return int(min(np.searchsorted(cdf, u, side="right"), len(p) - 1))


def sample_kernel(phi: float, q: int, rng: np.random.Generator, window: int = SAMPLER_WINDOW) -> int:
    """Exact draw of ``m`` with probability ``|alpha(m, phi)|^2``.

    Inverse CDF over a window around ``2^q phi``; a draw landing in the tail
    mass falls back to the full array, so the sampler stays exact.
    """
    M = 2**q
    u = rng.random()
    if 2 * window + 1 < M:
        center = int(round(phi * M))
        ms = np.arange(center - window, center + window + 1)
        p = alpha_sq(ms, phi, q)
        cdf = np.cumsum(p)
        if u < cdf[-1]:
            idx = int(min(np.searchsorted(cdf, u, side="right"), len(ms) - 1))
            return int(ms[idx] % M)
        # tail draw: rescale u onto the mass outside the window
        full = alpha_sq(np.arange(M), phi, q)
        full[ms % M] = 0.0
        tail = np.cumsum(full)
        v = (u - cdf[-1]) / max(1.0 - cdf[-1], 1e-300) * tail[-1]
        return int(min(np.searchsorted(tail, v, side="right"), M - 1))
    p = alpha_sq(np.arange(M), phi, q)
    cdf = np.cumsum(p)
    return int(min(np.searchsorted(cdf, u * cdf[-1], side="right"), M - 1))


def sample_exact(cfg: PEConfig, spec: Spectrum, psi_in: np.ndarray, rng_seed) -> int:
    """Draw from the exact-phase distribution as a mixture over eigenvectors."""
    rng = _rng(rng_seed)
    weights = np.abs(spec.coefficients(_check_unit(psi_in))) ** 2
    weights = weights / weights.sum()
    j = int(min(np.searchsorted(np.cumsum(weights), rng.random(), side="right"), len(weights) - 1))
    return sample_kernel(phases(spec, cfg.R)[j], cfg.q, rng)


@dataclass(frozen=True, eq=False)
class PEOutcome:
    m: int
    probability: float
    post_state: np.ndarray
    in_good_set: bool
    phi_estimate: float
    energy_estimate: float
    c0_prime: float
    diagnostics: dict = field(default_factory=dict)


def _outcome(cfg: PEConfig, spec: Spectrum, m: int, vec: np.ndarray, diagnostics=None) -> PEOutcome:
    prob = float(np.vdot(vec, vec).real)
    if prob <= 0.0:
        raise PhaseEstimationError(f"outcome m={m} has probability zero")
    post = vec / math.sqrt(prob)
    phi0 = phases(spec, cfg.R)[0]
    return PEOutcome(
        m=int(m),
        probability=prob,
        post_state=post,
        in_good_set=in_good_set(cfg, phi0, m),
        phi_estimate=m / cfg.M2,
        energy_estimate=cfg.energy(m),
        c0_prime=float(min(1.0, abs(np.vdot(spec.ground_state, post)))),
        diagnostics=diagnostics or {},
    )


def exact_post_vector(cfg: PEConfig, spec: Spectrum, psi_in: np.ndarray, m: int) -> np.ndarray:
    """Unnormalized ``sum_j c_j alpha(m, phi_j) u_j``."""
    c = spec.coefficients(_check_unit(psi_in))
    amps = c * alpha(m, phases(spec, cfg.R), cfg.q)
    return spec.eigenvectors @ amps


def post_measurement_state(cfg: PEConfig, spec: Spectrum, psi_in: np.ndarray, m: int, trotter=None) -> PEOutcome:
    """Bottom-register state after observing ``m``.

    With ``trotter`` (a :class:`TrotterUnitaries`) the factorized Trotter
    product is used; otherwise the exact eigenphase expansion.
    """
    if trotter is None:
        vec = exact_post_vector(cfg, spec, psi_in, m)
    else:
        vec = trotter.post_vector(cfg, psi_in, m)
    return _outcome(cfg, spec, m, vec)


class TrotterUnitaries:
    """Approximate controlled powers ``U~_(2^j)``, one Suzuki plan per ``j``.

    ``apply(j, x)`` applies the adjoint of the plan for ``W^(2^j)``, the
    approximation of ``U^(2^j) = W^(-2^j)``. Small grids use dense realized
    matrices; larger ones apply the exponentials one by one.
    """

    def __init__(self, plans: list[SuzukiPlan], split: SplitOperator, dense: bool | None = None):
        self.plans = list(plans)
        self.split = split
        if dense is None:
            dense = split.grid.dim <= EXACT_NORM_MAX_DIM
        self._dense = [split.realize(p).conj().T for p in self.plans] if dense else None

    @classmethod
    def exact(cls, q: int, split: SplitOperator, R: float) -> "TrotterUnitaries":
        """Exact powers, for comparisons and circuit checks."""
        obj = cls.__new__(cls)
        obj.plans = []
        obj.split = split
        obj._dense = [split.exact_power(-(2.0**j) / R) for j in range(q)]
        return obj

    @property
    def q(self) -> int:
        return len(self._dense) if self._dense is not None else len(self.plans)

    @property
    def errors(self) -> list[float]:
        return [p.error for p in self.plans]

    @property
    def eps_H(self) -> float:
        return float(sum(self.errors))

    def apply(self, j: int, x: np.ndarray) -> np.ndarray:
        if self._dense is not None:
            return self._dense[j] @ x
        if x.ndim == 1:
            return self.split.apply(self.plans[j], x, adjoint=True)
        return np.stack([self.split.apply(self.plans[j], col, adjoint=True) for col in x.T], axis=1)

    def post_vector(self, cfg: PEConfig, psi_in: np.ndarray, m: int) -> np.ndarray:
        """``(1/M2) prod_{j=q-1..0} (I + exp(-2 pi i m 2^j / M2) U~_(2^j)) psi``."""
        if self.q != cfg.q:
            raise ValueError(f"have {self.q} controlled powers, register needs {cfg.q}")
        v = _check_unit(psi_in)
        for j in range(cfg.q):
            phase = np.exp(-2j * np.pi * ((m * 2**j) % cfg.M2) / cfg.M2)
            v = 0.5 * (v + phase * self.apply(j, v))
        return v

    def outcome_probability(self, cfg: PEConfig, psi_in: np.ndarray, m: int) -> float:
        v = self.post_vector(cfg, psi_in, m)
        return float(np.vdot(v, v).real)

    def amplitudes(self, cfg: PEConfig, psi_in: np.ndarray) -> np.ndarray:
        """All unnormalized post vectors, shape ``(M2, dim)``, for ``M2 <= 2^10``."""
        if cfg.M2 > TROTTER_FULL_CAP:
            raise PhaseEstimationError(f"full Trotter sweep limited to M2 <= {TROTTER_FULL_CAP}")
        psi = _check_unit(psi_in)
        arr = np.zeros((cfg.M2, psi.size), dtype=complex)
        arr[0] = psi
        for j in range(cfg.q):
            # arr[k + 2^j] = U~_(2^j) arr[k] for k < 2^j
            block = arr[: 2**j]
            arr[2**j : 2 ** (j + 1)] = self.apply(j, block.T).T
        return np.fft.fft(arr, axis=0) / cfg.M2

    def distribution(self, cfg: PEConfig, psi_in: np.ndarray) -> np.ndarray:
        amps = self.amplitudes(cfg, psi_in)
        return np.sum(np.abs(amps) ** 2, axis=1)


def trotter_outcome_probability(cfg: PEConfig, trotter: TrotterUnitaries, psi_in: np.ndarray, m: int) -> float:
    return trotter.outcome_probability(cfg, psi_in, m)


def trotter_good_set_probability(cfg: PEConfig, trotter: TrotterUnitaries, spec: Spectrum, psi_in: np.ndarray) -> float:
    phi0 = phases(spec, cfg.R)[0]
    return float(sum(trotter.outcome_probability(cfg, psi_in, int(m)) for m in good_set(cfg, phi0)))


def run_phase_estimation(
    cfg: PEConfig,
    spec: Spectrum,
    psi_in: np.ndarray,
    rng_seed,
    trotter: TrotterUnitaries | None = None,
) -> PEOutcome:
    """Sample one outcome and return the conditioned bottom-register state.

    Exact backend: mixture sampling from the eigenphase distribution. Trotter
    backend: the full Trotter distribution is sampled when ``M2 <= 2^10``;
    above that the outcome is drawn from the exact distribution and the
    post-measurement state is taken from the Trotter product.
    """
    rng = _rng(rng_seed)
    if cfg.backend == "exact-phase" or trotter is None:
        if cfg.backend == "trotter":
            raise ValueError("trotter backend needs Trotter unitaries")
        m = sample_exact(cfg, spec, psi_in, rng)
        return post_measurement_state(cfg, spec, psi_in, m)
    if cfg.M2 <= TROTTER_FULL_CAP:
        amps = trotter.amplitudes(cfg, psi_in)
        p = np.sum(np.abs(amps) ** 2, axis=1)
        p = p / p.sum()
        m = sample_outcome(p, rng)
        out = _outcome(cfg, spec, m, amps[m], {"sampled_from": "trotter"})
    else:
        m = sample_exact(cfg, spec, psi_in, rng)
        out = _outcome(cfg, spec, m, trotter.post_vector(cfg, psi_in, m), {"sampled_from": "exact-phase"})
    out.diagnostics["eps_H"] = trotter.eps_H
    return out


def brute_force_circuit(unitaries: list[np.ndarray], psi_in: np.ndarray) -> np.ndarray:
    """Gate-level statevector of the phase-estimation circuit before measurement.

    Qubit ``j`` of the top register (bit ``2^j`` of the outcome index) controls
    ``unitaries[j]``; controlled gates run for ``j = 0, 1, ...``; the inverse
    QFT is an explicit ``M x M`` matrix with entries
    ``exp(-2 pi i k l / M) / sqrt(M)``. Returns shape ``(M, dim)``.
    """
    q = len(unitaries)
    M = 2**q
    psi = np.asarray(psi_in, dtype=complex).ravel()
    state = np.zeros((M, psi.size), dtype=complex)
    state[0] = psi
    hadamard = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2.0)
    for j in range(q):
        # bit j lives on axis q-1-j of the row-major (2,)*q layout
        axis = q - 1 - j
        t = np.moveaxis(state.reshape((2,) * q + (psi.size,)), axis, 0)
        t = np.tensordot(hadamard, t, axes=(1, 0))
        state = np.moveaxis(t, 0, axis).reshape(M, psi.size)
    k = np.arange(M)
    for j, u in enumerate(unitaries):
        on = (k >> j) & 1 == 1
        state[on] = state[on] @ u.T
    kl = np.outer(k, k)
    inverse_qft = np.exp(-2j * np.pi * kl / M) / math.sqrt(M)
    return inverse_qft @ state
