"""Dense classical ground truth for the discretized Hamiltonians."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import GridSpec, HamiltonianTerms, PotentialSpec, assemble_hamiltonian

RESIDUAL_TOL = 1e-9
ORTHONORMAL_TOL = 1e-10
NORMALIZATION_TOL = 1e-8
# rounding allowance when an overlap is compared with a bound equal to 1
OVERLAP_TOL = 1e-12


class SpectrumError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Ascending eigenvalues; ``eigenvectors[:, j]`` pairs with ``eigenvalues[j]``."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def ground_energy(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def ground_state(self) -> np.ndarray:
        return self.eigenvectors[:, 0]

    def coefficients(self, state: np.ndarray) -> np.ndarray:
        """Expansion coefficients ``c_j = <u_j|state>``."""
        return self.eigenvectors.conj().T @ state

    def to_csv_rows(self):
        header = ["eigenvalue"] + [f"v{i}" for i in range(self.eigenvectors.shape[0])]
        rows = [[float(lam), *map(float, self.eigenvectors[:, j])] for j, lam in enumerate(self.eigenvalues)]
        return header, rows


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    # first entry that is not numerically zero is made positive
    out = vectors.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        idx = np.flatnonzero(np.abs(col) > 1e-10 * np.abs(col).max())[0]
        if col[idx] < 0:
            out[:, j] = -col
    return out


def eigendecompose_matrix(matrix: np.ndarray) -> Spectrum:
    matrix = np.asarray(matrix)
    if not np.allclose(matrix, matrix.conj().T, atol=1e-12 * max(1.0, np.abs(matrix).max())):
        raise SpectrumError("matrix is not Hermitian")
    try:
        values, vectors = np.linalg.eigh(matrix)
    except np.linalg.LinAlgError as exc:
        cond = np.linalg.cond(matrix)
        raise SpectrumError(f"eigensolver failed to converge (condition number {cond:.3g})") from exc
    if np.isrealobj(matrix):
        vectors = _fix_signs(vectors)
    norm = max(float(np.abs(values).max()), 1.0)
    residual = np.linalg.norm(matrix @ vectors - vectors * values, axis=0).max()
    if residual > RESIDUAL_TOL * norm:
        raise SpectrumError(f"eigenpair residual {residual:.3g} exceeds {RESIDUAL_TOL} * ||M||")
    gram = vectors.conj().T @ vectors
    if np.abs(gram - np.eye(len(values))).max() > ORTHONORMAL_TOL:
        raise SpectrumError("eigenvectors are not orthonormal to 1e-10")
    return Spectrum(eigenvalues=values, eigenvectors=vectors)


def eigendecompose(ham: HamiltonianTerms) -> Spectrum:
    if ham.grid.dim > ham.grid.dim_cap:
        raise SpectrumError(f"dimension {ham.grid.dim} above cap {ham.grid.dim_cap}")
    return eigendecompose_matrix(ham.dense())


def fundamental_gap(spec: Spectrum) -> float:
    if len(spec.eigenvalues) < 2:
        raise ValueError("the gap needs at least two eigenvalues")
    return float(spec.eigenvalues[1] - spec.eigenvalues[0])


def _check_unit(vec: np.ndarray, name: str) -> None:
    norm = np.linalg.norm(vec)
    if abs(norm - 1.0) > NORMALIZATION_TOL:
        raise ValueError(f"{name} is not unit norm (norm {norm:.12g})")


def overlap(a: np.ndarray, b: np.ndarray) -> float:
    """Squared magnitude of the inner product of two unit vectors."""
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    _check_unit(a, "first state")
    _check_unit(b, "second state")
    return float(min(1.0, abs(np.vdot(a, b)) ** 2))


@dataclass(frozen=True)
class OverlapCheck:
    measured: float
    bound: float

    @property
    def passed(self) -> bool:
        return self.measured >= self.bound - OVERLAP_TOL


def successive_overlap_bound(spec_a: Spectrum, spec_b: Spectrum, C: float, d: int, L: int) -> OverlapCheck:
    """Ground-state overlap of adjacent stages against ``1 - (C d / (pi^2 L))^2``."""
    measured = overlap(spec_a.ground_state, spec_b.ground_state)
    bound = 1.0 - (C * d / (math.pi**2 * L)) ** 2
    return OverlapCheck(measured=measured, bound=bound)


@dataclass(frozen=True)
class ReferenceEnergy:
    value: float
    coarse: float
    fine: float
    warning: bool

    def __float__(self) -> float:
        return self.value


def reference_energy(grid: GridSpec, pot: PotentialSpec, dim_cap: int | None = None) -> ReferenceEnergy:
    """Continuum ground energy estimate by Richardson extrapolation.

    Solves on ``n`` and ``2n+1`` points per axis (mesh halved) and combines
    ``(4 fine - coarse) / 3``, which removes the O(h^2) term of the
    second-order stencil. ``warning`` is set when the extrapolated value moves
    more than 5% of the coarse gap away from the fine-grid eigenvalue.
    """
    if not pot.builtin:
        raise ValueError("reference energy needs a potential that can be evaluated on a finer grid")
    cap = dim_cap if dim_cap is not None else max(grid.dim_cap, (2 * grid.n + 1) ** grid.d)
    coarse_grid = GridSpec(grid.d, grid.n, dim_cap=cap)
    fine_grid = GridSpec(grid.d, 2 * grid.n + 1, dim_cap=cap)
    coarse = eigendecompose(assemble_hamiltonian(coarse_grid, pot, 1.0))
    fine = eigendecompose(assemble_hamiltonian(fine_grid, pot, 1.0))
    lam_c, lam_f = coarse.ground_energy, fine.ground_energy
    value = (4.0 * lam_f - lam_c) / 3.0
    gap = fundamental_gap(coarse) if grid.dim > 1 else float("inf")
    warning = abs(value - lam_f) > 0.05 * gap
    # convex V keeps the continuum energy above d pi^2 / 2; allow the O(h^4) remainder
    floor = grid.d * math.pi**2 / 2.0
    if value < floor - abs(lam_f - lam_c) / 3.0:
        warning = True
    return ReferenceEnergy(value=value, coarse=lam_c, fine=lam_f, warning=warning)
