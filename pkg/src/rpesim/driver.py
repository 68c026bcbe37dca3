"""The L-stage repeated phase estimation algorithm, its parameters and cost model.

Stage ``l`` runs phase estimation on ``W_l = exp(-i M_l / R)`` with
``M_l = -1/2 Laplacian_h + (l/L) V_h``. The bottom register of one stage is
the input of the next; the first stage starts from the sine ground state of
the Laplacian. The energy estimate is read from the last stage's outcome.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import (
    DEFAULT_DIM_CAP,
    GridSpec,
    HamiltonianTerms,
    PotentialSpec,
    assemble_hamiltonian,
    potential_bounds,
    sine_ground_state,
)
from .phase_estimation import PEConfig, PEOutcome, TrotterUnitaries, phases, run_phase_estimation
from .spectral import Spectrum, eigendecompose, reference_energy
from .suzuki import PlanError, SplitOperator, SuzukiPlan, c_of_k, exponential_count_bound, plan_stage

MODES = ("energy", "state-prep")

# slack on ceilings so values like log2(8) = 3.0000000000000004 do not round up
CEIL_TOL = 1e-12

# second-order tail of the success-probability estimate
TAIL_CONSTANT = 5 * math.pi**2 / 2**5 + (1 - math.pi**2 / 16) / 2**5


class ParameterError(ValueError):
    pass


def _ceil(x: float) -> int:
    return math.ceil(x - CEIL_TOL)


def h_for_eps(eps: float, d: int) -> float:
    """Largest power of 1/2 not above ``eps`` that also meets ``h < 2 pi^2 / (5 d^2)``."""
    if not 0 < eps < 1:
        raise ParameterError(f"eps must lie in (0, 1), got {eps}")
    h = 2.0 ** -_ceil(math.log2(1.0 / eps))
    while not h < 2 * math.pi**2 / (5 * d**2):
        h /= 2
    return h


@dataclass(frozen=True)
class Parameters:
    """Register sizes, stage count and per-power error budget of one run."""

    mode: str
    d: int
    h: float
    C: float
    eta: float
    R: float
    b: int
    t0: int
    L: int
    eps_scale: float
    delta: float | None = None

    @property
    def q(self) -> int:
        return self.b + self.t0

    def eps_schedule(self) -> np.ndarray:
        """``eps^S_j = 2^(j-q) * eps_scale`` for ``j = 0..q-1``."""
        return 2.0 ** (np.arange(self.q) - self.q) * self.eps_scale

    def pe_config(self, backend: str) -> PEConfig:
        return PEConfig(b=self.b, t0=self.t0, R=self.R, backend=backend)


def parameters_for(
    d: int,
    h: float,
    C: float,
    eta: float = 0.5,
    mode: str = "energy",
    delta: float | None = None,
    b: int | None = None,
    t0: int | None = None,
    L: int | None = None,
) -> Parameters:
    """Select ``R, b, t0, L`` and the error budget from the problem data.

    Energy mode uses ``L = ceil((Cd)^((2-eta)/(1-eta)))`` and budget
    ``(Cd/L)^2``; state-prep mode uses ``L = ceil(Cd delta^(-1/(2-eta)))`` and
    budget ``delta^(2/(2-eta))``. In both modes
    ``t0 = ceil(log2((L/(Cd))^(2-eta)))``, floored at 2. Explicit ``b``,
    ``t0`` or ``L`` override the formulas.
    """
    if mode not in MODES:
        raise ParameterError(f"unknown mode {mode!r}; expected one of {MODES}")
    if not 0 < eta < 1:
        raise ParameterError(f"eta must lie in (0, 1), got {eta}")
    if not h < 2 * math.pi**2 / (5 * d**2):
        raise ParameterError(f"h = {h} violates h < 2 pi^2 / (5 d^2) = {2 * math.pi**2 / (5 * d**2):.4g}")
    if mode == "state-prep" and (delta is None or not 0 < delta < 1):
        raise ParameterError("state-prep mode needs delta in (0, 1)")
    cd = C * d
    R = 3.0 * d / h**2
    if b is None:
        b = _ceil(math.log2(2.0 * R * math.pi / (d * h)))
    if L is None:
        if cd <= 0:
            raise ParameterError("C d = 0 makes the stage count degenerate; pass an explicit L override")
        if mode == "energy":
            L = max(1, _ceil(cd ** ((2 - eta) / (1 - eta))))
        else:
            L = max(1, _ceil(cd * delta ** (-1.0 / (2 - eta))))
    if L < 1:
        raise ParameterError(f"L must be >= 1, got {L}")
    if t0 is None:
        t0 = 2 if cd <= 0 else max(2, _ceil(math.log2((L / cd) ** (2 - eta))))
    if mode == "energy":
        eps_scale = (cd / L) ** 2
    else:
        eps_scale = delta ** (2.0 / (2 - eta))
    return Parameters(mode=mode, d=d, h=h, C=C, eta=eta, R=R, b=int(b), t0=int(t0), L=int(L), eps_scale=eps_scale, delta=delta)


@dataclass(frozen=True)
class RunConfig:
    pot: PotentialSpec
    grid: GridSpec | None = None
    eps: float | None = None
    d: int | None = None
    eta: float = 0.5
    k: int = 1
    mode: str = "energy"
    delta: float | None = None
    backend: str = "exact-phase"
    seed: int = 0
    overrides: dict = field(default_factory=dict)
    repetitions: int = 1
    dim_cap: int = DEFAULT_DIM_CAP
    account_costs: bool = True

    def __post_init__(self):
        if self.grid is None and (self.eps is None or self.d is None):
            raise ParameterError("give either a grid or both eps and d")
        if self.repetitions < 1:
            raise ParameterError("repetitions must be >= 1")
        if self.k < 1:
            raise ParameterError("k must be >= 1")
        unknown = set(self.overrides) - {"b", "t0", "L"}
        if unknown:
            raise ParameterError(f"unknown overrides: {sorted(unknown)}")

    def resolved_grid(self) -> GridSpec:
        if self.grid is not None:
            return self.grid
        h = h_for_eps(self.eps, self.d)
        return GridSpec(self.d, round(1 / h) - 1, dim_cap=self.dim_cap)


def select_parameters(cfg: RunConfig) -> Parameters:
    grid = cfg.resolved_grid()
    C, _ = potential_bounds(cfg.pot, grid)
    return parameters_for(grid.d, grid.h, C, cfg.eta, cfg.mode, cfg.delta, **cfg.overrides)


@dataclass(frozen=True)
class StageRecord:
    ell: int
    s: float
    m: int
    in_good_set: bool
    probability: float
    energy_estimate: float
    lambda0: float
    overlap_in: float
    overlap_out: float
    eps_H_measured: float | None
    N_ell: int | None


STAGE_COLUMNS = [f.name for f in StageRecord.__dataclass_fields__.values()]


@dataclass(frozen=True)
class SingleRun:
    seed_index: int
    E_hat: float | None
    success: bool
    final_overlap: float | None
    per_stage: list
    error: str | None = None


@dataclass(frozen=True)
class RunReport:
    config: dict
    parameters: Parameters
    E_hat: float | None
    lambda0_oracle: float
    E0_ref: float | None
    E0_ref_warning: bool | None
    rel_error: float | None
    rel_error_discrete: float | None
    per_stage: list
    final_overlap: float | None
    P_total_lower_bound: float | None
    N_total: int | None
    qubits: dict
    success: bool
    completed: bool
    runs: list
    error: str | None = None
    notes: list = field(default_factory=list)

    def stage_rows(self):
        return STAGE_COLUMNS, [[getattr(r, c) for c in STAGE_COLUMNS] for r in self.per_stage]


class Simulation:
    """Per-stage Hamiltonians, spectra and Suzuki plans for one configuration.

    Stage data are cached so repeated runs with different seeds reuse them.
    """

    def __init__(self, cfg: RunConfig, params: Parameters | None = None):
        self.cfg = cfg
        self.grid = cfg.resolved_grid()
        self.params = params or select_parameters(cfg)
        self.pe = self.params.pe_config(cfg.backend)
        self._stages: dict[int, dict] = {}

    def stage(self, ell: int) -> dict:
        if ell not in self._stages:
            s = ell / self.params.L
            ham = assemble_hamiltonian(self.grid, self.cfg.pot, s)
            spec = eigendecompose(ham)
            phases(spec, self.params.R)
            data = {"s": s, "ham": ham, "spectrum": spec, "split": SplitOperator(ham, spec)}
            if self.cfg.backend == "trotter":
                data["plans"] = self.plans(ell, data)
            elif self.cfg.account_costs:
                # cost accounting is a diagnostic for the exact backend
                try:
                    data["plans"] = self.plans(ell, data)
                except PlanError as exc:
                    data["plans"] = None
                    data["plan_error"] = str(exc)
            if self.cfg.backend == "trotter":
                data["trotter"] = TrotterUnitaries(data["plans"], data["split"])
            self._stages[ell] = data
        return self._stages[ell]

    def plans(self, ell: int, data: dict | None = None) -> list[SuzukiPlan]:
        data = data or self.stage(ell)
        if data.get("plans") is not None:
            return data["plans"]
        return plan_stage(self.cfg.k, data["ham"], self.params.eps_schedule(), self.params.R, split=data["split"])

    def run_stage(self, ell: int, psi_in: np.ndarray, rng: np.random.Generator) -> tuple[np.ndarray, PEOutcome, StageRecord]:
        data = self.stage(ell)
        spec: Spectrum = data["spectrum"]
        outcome = run_phase_estimation(self.pe, spec, psi_in, rng, trotter=data.get("trotter"))
        plans = data.get("plans")
        record = StageRecord(
            ell=ell,
            s=data["s"],
            m=outcome.m,
            in_good_set=outcome.in_good_set,
            probability=outcome.probability,
            energy_estimate=outcome.energy_estimate,
            lambda0=spec.ground_energy,
            overlap_in=float(min(1.0, abs(np.vdot(spec.ground_state, psi_in)) ** 2)),
            overlap_out=outcome.c0_prime**2,
            eps_H_measured=float(sum(p.error for p in plans)) if plans is not None else None,
            N_ell=int(sum(p.N for p in plans)) if plans is not None else None,
        )
        return outcome.post_state, outcome, record

    def run_once(self, rng: np.random.Generator, index: int = 0) -> SingleRun:
        psi = sine_ground_state(self.grid)
        records = []
        try:
            for ell in range(1, self.params.L + 1):
                psi, _, rec = self.run_stage(ell, psi, rng)
                records.append(rec)
        except Exception as exc:  # partial report keeps completed stages
            return SingleRun(index, None, False, None, records, error=f"{type(exc).__name__}: {exc}")
        last = records[-1]
        success = abs(last.energy_estimate - last.lambda0) <= self.grid.d * self.grid.h
        return SingleRun(index, last.energy_estimate, success, last.overlap_out, records)


def success_probability_bound(params: Parameters, records: list[StageRecord], backend: str) -> float:
    """Product-form lower bound on all stages landing in the good set."""
    if not records:
        return 0.0
    min_overlap = min(r.overlap_in for r in records)
    eps_H = 0.0
    if backend == "trotter":
        eps_H = max(r.eps_H_measured or 0.0 for r in records)
    base = min_overlap * (1 - 1 / (2 * (2**params.t0 - 1))) - TAIL_CONSTANT / 2**params.t0 - 2 * eps_H
    return max(0.0, base) ** params.L


def run(cfg: RunConfig, simulation: Simulation | None = None) -> RunReport:
    """Run the algorithm ``cfg.repetitions`` times and report the median estimate.

    Repetition ``r`` uses the ``r``-th child of ``SeedSequence(cfg.seed)``.
    The per-stage table is that of the repetition whose estimate is the
    median (lowest index on ties).
    """
    sim = simulation or Simulation(cfg)
    params, grid = sim.params, sim.grid
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.repetitions)
    runs = [sim.run_once(np.random.default_rng(ss), index=i) for i, ss in enumerate(children)]
    final = sim.stage(params.L)["spectrum"]
    lambda0 = final.ground_energy
    E0_ref = warning = None
    if cfg.pot.builtin:
        ref = reference_energy(grid, cfg.pot, dim_cap=max(cfg.dim_cap, (2 * grid.n + 1) ** grid.d))
        E0_ref, warning = ref.value, ref.warning
    qubits = {"top": params.q, "bottom": grid.d * math.ceil(math.log2(grid.n + 1))}
    completed = all(r.error is None for r in runs)
    done = [r for r in runs if r.error is None]
    E_hat = float(np.median([r.E_hat for r in done])) if done else None
    chosen = min(done, key=lambda r: (abs(r.E_hat - E_hat), r.seed_index)) if done else runs[0]
    per_stage = chosen.per_stage
    N_total = None
    if per_stage and all(r.N_ell is not None for r in per_stage):
        N_total = int(sum(r.N_ell for r in per_stage))
    return RunReport(
        config=config_to_dict(cfg),
        parameters=params,
        E_hat=E_hat,
        lambda0_oracle=lambda0,
        E0_ref=E0_ref,
        E0_ref_warning=warning,
        rel_error=abs(1 - E_hat / E0_ref) if E_hat is not None and E0_ref else None,
        rel_error_discrete=abs(1 - E_hat / lambda0) if E_hat is not None else None,
        per_stage=per_stage,
        final_overlap=chosen.final_overlap,
        P_total_lower_bound=success_probability_bound(params, per_stage, cfg.backend) if completed else None,
        N_total=N_total,
        qubits=qubits,
        success=E_hat is not None and abs(E_hat - lambda0) <= grid.d * grid.h,
        completed=completed,
        runs=[{"seed_index": r.seed_index, "E_hat": r.E_hat, "success": r.success,
               "final_overlap": r.final_overlap, "error": r.error} for r in runs],
        error=next((r.error for r in runs if r.error), None),
        notes=[
            f"stage {ell}: cost accounting skipped: {data['plan_error']}"
            for ell, data in sorted(sim._stages.items()) if "plan_error" in data
        ],
    )


def config_to_dict(cfg: RunConfig) -> dict:
    out = {
        "potential": cfg.pot.to_dict(),
        "eta": cfg.eta,
        "k": cfg.k,
        "mode": cfg.mode,
        "backend": cfg.backend,
        "seed": cfg.seed,
        "repetitions": cfg.repetitions,
        "dim_cap": cfg.dim_cap,
        "account_costs": cfg.account_costs,
    }
    if cfg.grid is not None:
        out["grid"] = {"d": cfg.grid.d, "n": cfg.grid.n}
    else:
        out["grid"] = {"d": cfg.d, "eps": cfg.eps}
    if cfg.delta is not None:
        out["delta"] = cfg.delta
    if cfg.overrides:
        out["overrides"] = dict(cfg.overrides)
    return out


def closed_form_bound(params: Parameters, k: int) -> float:
    """Closed-form total exponential count (energy mode uses the realized ``L``)."""
    C, d, eta, h, L = params.C, params.d, params.eta, params.h, params.L
    h_factor = h ** -(3 + 1 / (2 * k))
    if params.mode == "energy":
        c_exp = (2 - eta) / (1 - eta) + (5 - 2 * eta) / (2 * k * (1 - eta))
        d_exp = (2 - eta) / (1 - eta) + 3 / (2 * k * (1 - eta))
        return c_of_k(k) * C**c_exp * d**d_exp * h_factor * L
    # state-prep: the form with L eliminated, which keeps the 2^t0 <= 2/delta factor
    delta = params.delta
    d_exp = -1 - 1 / (2 * k) - 1 / (2 - eta) - 1 / (k * (2 - eta))
    return c_of_k(k) * C ** (1 + 1 / (2 * k)) * d ** (1 - 1 / (2 * k)) * h_factor * delta**d_exp


def stage_bound(params: Parameters, k: int, ell: int) -> int:
    """Per-power bound terms summed over ``j`` for stage ``ell``."""
    s = ell / params.L
    return int(sum(
        exponential_count_bound(k, j, s, params.d, params.C, params.h, eps, params.R)
        for j, eps in enumerate(params.eps_schedule())
    ))


@dataclass(frozen=True)
class CostReport:
    k: int
    parameters: Parameters
    N_total_bound: float
    N_total_bound_terms: int
    N_total_planned: int | None
    query_estimate: int | None
    operation_estimate: float | None
    per_stage: list
    audit_pass: bool
    incidents: list


def cost_report(params: Parameters, k: int, simulation: Simulation | None = None) -> CostReport:
    """Compare planned exponential counts with the analytic bounds.

    Without a simulation only the bounds are reported. Each potential
    exponential costs two queries; each kinetic exponential adds
    ``d log2(1/h)^2`` operations on top of the query count.
    """
    per_stage, incidents = [], []
    planned_total = kinetic_total = potential_total = 0
    for ell in range(1, params.L + 1):
        bound = stage_bound(params, k, ell)
        row = {"ell": ell, "N_bound": bound, "N_planned": None}
        if simulation is not None:
            plans = simulation.plans(ell)
            n_planned = sum(p.N for p in plans)
            kin = sum(p.counts()[0] for p in plans)
            row["N_planned"] = n_planned
            row["eps_H_measured"] = float(sum(p.error for p in plans))
            planned_total += n_planned
            kinetic_total += kin
            potential_total += n_planned - kin
            if n_planned > bound:
                incidents.append({"ell": ell, "N_planned": n_planned, "N_bound": bound})
        per_stage.append(row)
    closed = closed_form_bound(params, k)
    terms = sum(r["N_bound"] for r in per_stage)
    planned = planned_total if simulation is not None else None
    if planned is not None and planned > closed:
        incidents.append({"ell": None, "N_planned": planned, "N_bound": closed})
    queries = 2 * potential_total if simulation is not None else None
    ops = None
    if simulation is not None:
        ops = queries + kinetic_total * params.d * math.log2(1 / params.h) ** 2
    return CostReport(
        k=k,
        parameters=params,
        N_total_bound=closed,
        N_total_bound_terms=terms,
        N_total_planned=planned,
        query_estimate=queries,
        operation_estimate=ops,
        per_stage=per_stage,
        audit_pass=not incidents,
        incidents=incidents,
    )
