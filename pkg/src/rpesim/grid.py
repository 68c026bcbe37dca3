"""Finite-difference discretization of -1/2 Laplacian + s*V on the unit cube.

Grid points are ``x_i = (i_1 h, ..., i_d h)`` with ``i_k in 1..n`` and
``h = 1/(n+1)``; homogeneous Dirichlet data sits on the boundary. Flattened
vectors use row-major order over axes (axis 1 varies slowest), which is the
order ``numpy.ravel`` produces for an array of shape ``(n,) * d``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
import scipy.fft

DEFAULT_DIM_CAP = 4096

POTENTIAL_KINDS = ("zero", "separable-quadratic", "radial-quadratic", "tabulated")

# Second differences below -CONVEXITY_TOL * scale count as a convexity violation.
CONVEXITY_TOL = 1e-12


class GridError(ValueError):
    pass


class PotentialError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """Regular grid with ``n`` interior points per axis in ``d`` dimensions."""

    d: int
    n: int
    dim_cap: int = DEFAULT_DIM_CAP

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise GridError(f"d must be a positive integer, got {self.d!r}")
        if int(self.n) != self.n or self.n < 1:
            raise GridError(f"n must be a positive integer, got {self.n!r}")
        if self.dim > self.dim_cap:
            raise GridError(
                f"grid dimension n^d = {self.dim} exceeds the cap {self.dim_cap}; "
                "raise dim_cap explicitly for larger experiments"
            )

    @property
    def h_exact(self) -> Fraction:
        return Fraction(1, self.n + 1)

    @property
    def h(self) -> float:
        return 1.0 / (self.n + 1)

    @property
    def dim(self) -> int:
        return self.n**self.d

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    def points(self) -> np.ndarray:
        """Grid coordinates, shape ``(dim, d)``, in the flattened order."""
        axis = np.arange(1, self.n + 1) * self.h
        mesh = np.meshgrid(*([axis] * self.d), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    @classmethod
    def from_h(cls, d: int, h: float, dim_cap: int = DEFAULT_DIM_CAP) -> "GridSpec":
        n = round(1.0 / h) - 1
        if n < 1 or abs((n + 1) * h - 1.0) > 1e-12:
            raise GridError(f"h={h} is not of the form 1/(n+1)")
        return cls(d=d, n=n, dim_cap=dim_cap)


@dataclass(frozen=True)
class PotentialSpec:
    """A nonnegative potential on the unit cube.

    ``params`` for the quadratic families: ``coef`` (scalar, or one value per
    axis for the separable family), ``center`` (scalar or per-axis, default
    0.5) and ``offset`` (default 0). The radial family is
    ``coef * |x - center|^2 + offset``. Tabulated potentials carry their grid
    values in ``values`` (row-major, length n^d).
    """

    kind: str = "zero"
    params: dict = field(default_factory=dict)
    values: tuple | None = None

    def __post_init__(self):
        if self.kind not in POTENTIAL_KINDS:
            raise PotentialError(f"unknown potential kind {self.kind!r}; expected one of {POTENTIAL_KINDS}")
        if self.kind == "tabulated" and self.values is None:
            raise PotentialError("tabulated potential needs grid values")
        known = {"coef", "center", "offset"}
        unknown = set(self.params) - known
        if unknown:
            raise PotentialError(f"unknown potential parameters: {sorted(unknown)}")

    @property
    def builtin(self) -> bool:
        return self.kind != "tabulated"

    def evaluate(self, grid: GridSpec) -> np.ndarray:
        if self.kind == "zero":
            return np.zeros(grid.dim)
        if self.kind == "tabulated":
            v = np.asarray(self.values, dtype=float)
            if v.shape != (grid.dim,):
                raise PotentialError(f"tabulated potential has {v.size} values, grid needs {grid.dim}")
            return v.copy()
        x = grid.points()
        center = _per_axis(self.params.get("center", 0.5), grid.d, "center")
        offset = float(self.params.get("offset", 0.0))
        if self.kind == "separable-quadratic":
            coef = _per_axis(self.params.get("coef", 1.0), grid.d, "coef")
        else:
            coef_value = self.params.get("coef", 1.0)
            if np.ndim(coef_value) != 0:
                raise PotentialError("radial-quadratic takes a scalar coef")
            coef = np.full(grid.d, float(coef_value))
        if np.any(coef < 0):
            raise PotentialError("quadratic coefficients must be nonnegative (convexity)")
        return ((x - center) ** 2 @ coef) + offset

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.params:
            out["params"] = dict(self.params)
        if self.values is not None:
            out["values"] = list(self.values)
        return out

    @classmethod
    def from_csv(cls, path: str | Path) -> "PotentialSpec":
        """Load tabulated values: one decimal number per line, row-major order."""
        values = []
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    values.append(float(line))
                except ValueError:
                    raise PotentialError(f"{path}:{lineno}: not a number: {line!r}") from None
        return cls(kind="tabulated", values=tuple(values))


def _per_axis(value, d: int, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        return np.full(d, arr.item())
    if arr.size != d:
        raise PotentialError(f"{name} has {arr.size} entries, expected 1 or {d}")
    return arr


def quadratic_with_bound(grid: GridSpec, C: float, kind: str = "separable-quadratic") -> PotentialSpec:
    """Centered quadratic whose maximum over the grid equals ``C``.

    The maximum of ``a * sum_k (x_k - 1/2)^2`` on the grid sits at a corner
    point, where each term is ``(1/2 - h)^2``.
    """
    corner = grid.d * (0.5 - grid.h) ** 2
    coef = C / corner if corner > 0 else 0.0
    return PotentialSpec(kind=kind, params={"coef": coef, "center": 0.5})


def _second_differences(v: np.ndarray, grid: GridSpec) -> list[np.ndarray]:
    arr = v.reshape(grid.shape)
    out = []
    for axis in range(grid.d):
        if grid.n < 3:
            continue
        lo = np.take(arr, range(0, grid.n - 2), axis=axis)
        mid = np.take(arr, range(1, grid.n - 1), axis=axis)
        hi = np.take(arr, range(2, grid.n), axis=axis)
        out.append(lo + hi - 2.0 * mid)
    return out


def check_potential(pot: PotentialSpec, grid: GridSpec, v: np.ndarray | None = None) -> np.ndarray:
    """Evaluate ``pot`` on ``grid`` and enforce nonnegativity and convexity.

    Midpoint convexity is checked on every axis-aligned grid triple. A
    violation raises for built-in families and warns for tabulated data.
    """
    if v is None:
        v = pot.evaluate(grid)
    if not np.all(np.isfinite(v)):
        raise PotentialError("potential has non-finite grid values")
    if np.any(v < 0):
        raise PotentialError(f"potential must be nonnegative; min grid value {v.min():.6g}")
    scale = max(1.0, float(np.max(np.abs(v))))
    worst = min((float(dd.min()) for dd in _second_differences(v, grid)), default=0.0)
    if worst < -CONVEXITY_TOL * scale:
        msg = f"potential is not midpoint-convex on the grid (min second difference {worst:.3g})"
        if pot.builtin:
            raise PotentialError(msg)
        warnings.warn(msg, stacklevel=2)
    return v


def potential_bounds(pot: PotentialSpec, grid: GridSpec) -> tuple[float, float]:
    """Return ``(C, C_prime)``: grid maximum and max forward difference / h."""
    v = pot.evaluate(grid)
    if np.any(v < 0):
        raise PotentialError(f"potential must be nonnegative; min grid value {v.min():.6g}")
    C = float(v.max())
    arr = v.reshape(grid.shape)
    C_prime = 0.0
    for axis in range(grid.d):
        if grid.n > 1:
            C_prime = max(C_prime, float(np.abs(np.diff(arr, axis=axis)).max()) / grid.h)
    return C, C_prime


def laplacian_spectrum_1d(grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form eigenpairs of the 1-D stencil for -1/2 d^2/dx^2.

    Returns ``(eigenvalues, vectors)`` with ``vectors[:, k-1]`` the unit sine
    vector ``sqrt(2h) sin(k i pi h)`` and eigenvalue ``2 h^-2 sin^2(k pi h / 2)``,
    ascending in ``k``.
    """
    n, h = grid.n, grid.h
    k = np.arange(1, n + 1)
    eigenvalues = 2.0 / h**2 * np.sin(k * np.pi * h / 2.0) ** 2
    vectors = np.sqrt(2.0 * h) * np.sin(np.outer(k, k) * np.pi * h)
    return eigenvalues, vectors


def kinetic_eigenvalues(grid: GridSpec) -> np.ndarray:
    """Eigenvalues of -1/2 Laplacian_h on the full grid, in DST mode order.

    Entry ``(k_1, ..., k_d)`` (row-major flattened) is the Kronecker-sum value
    ``sum_a lambda_{k_a}``, matching the layout produced by ``scipy.fft.dstn``.
    """
    lam1, _ = laplacian_spectrum_1d(grid)
    total = np.zeros(grid.shape)
    for axis in range(grid.d):
        shape = [1] * grid.d
        shape[axis] = grid.n
        total = total + lam1.reshape(shape)
    return total.ravel()


def sine_transform(state: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Orthonormal d-dimensional DST-I; it is its own inverse."""
    arr = np.asarray(state).reshape(grid.shape)
    return scipy.fft.dstn(arr, type=1, norm="ortho").ravel()


def sine_ground_state(grid: GridSpec) -> np.ndarray:
    _, z = laplacian_spectrum_1d(grid)
    z1 = z[:, 0]
    out = np.ones(1)
    for _ in range(grid.d):
        out = np.kron(out, z1)
    return out.astype(complex)


@dataclass(frozen=True, eq=False)
class HamiltonianTerms:
    """``M = kinetic_scale * (-Laplacian_h) + s * V_h`` on ``grid``."""

    grid: GridSpec
    v_diag: np.ndarray
    s: float
    kinetic_scale: float = 0.5
    C: float = 0.0
    C_prime: float = 0.0

    @property
    def potential(self) -> np.ndarray:
        return self.s * self.v_diag

    def kinetic_matvec(self, x: np.ndarray) -> np.ndarray:
        arr = np.asarray(x).reshape(self.grid.shape)
        out = np.zeros_like(arr)
        for axis in range(self.grid.d):
            out = out + 2.0 * arr
            lo = [slice(None)] * self.grid.d
            hi = [slice(None)] * self.grid.d
            lo[axis] = slice(0, -1)
            hi[axis] = slice(1, None)
            out[tuple(lo)] -= arr[tuple(hi)]
            out[tuple(hi)] -= arr[tuple(lo)]
        return (self.kinetic_scale / self.grid.h**2) * out.ravel()

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.kinetic_matvec(x) + self.potential * np.asarray(x).ravel()

    def kinetic_dense(self) -> np.ndarray:
        n, d = self.grid.n, self.grid.d
        t1 = (2.0 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)) * (self.kinetic_scale / self.grid.h**2)
        total = np.zeros((self.grid.dim, self.grid.dim))
        for axis in range(d):
            term = np.ones((1, 1))
            for a in range(d):
                term = np.kron(term, t1 if a == axis else np.eye(n))
            total += term
        return total

    def dense(self) -> np.ndarray:
        return self.kinetic_dense() + np.diag(self.potential)

    def norm_bound(self) -> float:
        """Upper bound ``2 d h^-2 + C`` on the operator norm (at s <= 1)."""
        return 2.0 * self.grid.d / self.grid.h**2 + self.C


def assemble_hamiltonian(grid: GridSpec, pot: PotentialSpec, s: float) -> HamiltonianTerms:
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"stage fraction s must lie in [0, 1], got {s}")
    v = check_potential(pot, grid)
    C, C_prime = potential_bounds(pot, grid)
    return HamiltonianTerms(grid=grid, v_diag=v, s=float(s), C=C, C_prime=C_prime)

