"""Adiabatic transport of low-lying eigenstates along a parameter path.

The driver alternates three stages:

1. penalty DMRG for the ``k`` lowest states at the starting parameter,
2. steps ``|n> <- exp(-i A delta) |n>`` with the gauge potential ``A``
   recomputed at every point and the step length set by its norm,
   optionally each followed by a short DMRG refinement,
3. a tightly converged DMRG at the end point.

The gauge potentials do not depend on the states, so the parameter grid and
the operators can be computed once and shared between sectors and modes.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .agp import AgpResult, agp_schedule, build_superoperator, compute_agp
from .models import ModelFamily, SectorSpec, sector_penalized
from .mps import MPS, expect, inner, random_mps, variance
from .oracle import ff_low_energies
from .solvers import ExcitedSetResult, SweepSchedule, dmrg_excited_set
from .tdvp import TdvpOptions, evolve
from .tensor import TruncationPolicy

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "lambda",
    "sector",
    "state_index",
    "energy",
    "variance",
    "max_bond_dim",
    "agp_scaled_norm",
    "agp_residual",
    "delta_used",
    "wall_time_s",
)
MODES = ("agp-only", "agp+dmrg")
BENCHMARK_GRID = (2.0, 1.8, 1.6, 1.4, 1.2, 1.08, 1.02, 1.0)
ORTHOGONALITY_WARN = 1e-4


def initial_schedule() -> SweepSchedule:
    return SweepSchedule(max_sweeps=20, policy=TruncationPolicy(1e-10, 200), rel_energy_tol=1e-5)


def intermediary_schedule() -> SweepSchedule:
    return SweepSchedule(max_sweeps=10, policy=TruncationPolicy(1e-10, 200), rel_energy_tol=1e-6)


def final_schedule() -> SweepSchedule:
    return SweepSchedule(max_sweeps=40, policy=TruncationPolicy(1e-11, 300), rel_energy_tol=1e-11)


@dataclass
class TransportPlan:
    """Everything the transport driver needs.

    ``step_constant=None`` calibrates ``c`` so that the first step equals
    ``delta0``. A non-empty ``grid`` replaces the adaptive steps by explicit
    parameter values (first and last must equal ``lambda_i`` and
    ``lambda_f``). ``final_dmrg=None`` runs the final DMRG only in
    ``agp+dmrg`` mode.
    """

    model: ModelFamily
    sector: SectorSpec = field(default_factory=SectorSpec)
    lambda_i: float = 2.0
    lambda_f: float = 1.0
    k: int = 10
    step_constant: float | None = None
    delta0: float = 0.1
    delta_max: float = 0.1
    delta_min: float = 0.005
    grid: tuple | None = None
    mode: str = "agp+dmrg"
    initial: SweepSchedule = field(default_factory=initial_schedule)
    intermediary: SweepSchedule = field(default_factory=intermediary_schedule)
    final: SweepSchedule = field(default_factory=final_schedule)
    final_dmrg: bool | None = None
    agp_D: int = 40
    agp_cutoff: float = 1e-6
    agp_max_sweeps: int = 30
    tdvp: TdvpOptions = field(default_factory=TdvpOptions)
    init_bond_dim: int = 10
    penalty_weight: float | None = None
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.delta_min <= self.delta_max:
            raise ValueError("need 0 < delta_min <= delta_max")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.sector.parity != "none" and not self.model.conserves_parity:
            raise ValueError("parity sectors need a parity-conserving model")
        if self.grid is not None:
            g = [float(x) for x in self.grid]
            if len(g) < 1 or g[0] != self.lambda_i or g[-1] != self.lambda_f:
                raise ValueError("grid must run from lambda_i to lambda_f")
            steps = np.diff(g)
            if np.any(steps * np.sign(self.lambda_f - self.lambda_i) <= 0):
                raise ValueError("grid must be strictly monotone towards lambda_f")

    @property
    def direction(self) -> float:
        return float(np.sign(self.lambda_f - self.lambda_i))

    @property
    def run_final_dmrg(self) -> bool:
        return self.mode == "agp+dmrg" if self.final_dmrg is None else self.final_dmrg

    @property
    def weight(self) -> float:
        return 4.0 * self.model.L if self.penalty_weight is None else self.penalty_weight


@dataclass
class TransportRecord:
    lambda_: float
    sector: str
    state_index: int
    energy: float
    variance: float
    max_bond_dim: int
    agp_scaled_norm: float
    agp_residual: float
    delta_used: float
    wall_time_s: float
    stage: str = ""
    mode: str = ""
    timings: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)
    discarded: float = 0.0

    def row(self) -> dict:
        d = {c: getattr(self, c) for c in CSV_COLUMNS if c != "lambda"}
        d["lambda"] = self.lambda_
        return {c: d[c] for c in CSV_COLUMNS}


@dataclass
class AgpStep:
    """Gauge potential at ``lam`` and the signed step taken from there."""

    lam: float
    delta: float
    result: AgpResult


def next_step(scaled_norm: float, plan: TransportPlan, lam: float | None = None, c: float | None = None) -> float:
    """Signed step ``clamp(c / scaled_norm, delta_min, delta_max)``.

    With ``lam`` given the step is shortened so it ends exactly at
    ``lambda_f``. ``c`` defaults to the plan's ``step_constant``.
    """
    if scaled_norm < 0:
        raise ValueError("scaled_norm must be nonnegative")
    c = plan.step_constant if c is None else c
    if scaled_norm == 0.0 or c is None:
        size = plan.delta_max
    else:
        size = min(max(c / scaled_norm, plan.delta_min), plan.delta_max)
    if lam is not None:
        size = min(size, abs(plan.lambda_f - lam))
    return plan.direction * size


def step_constant(plan: TransportPlan, scaled_norm_i: float) -> float:
    """``c`` for which the first step equals ``delta0``."""
    if plan.step_constant is not None:
        return plan.step_constant
    return plan.delta0 * scaled_norm_i


def agp_path(plan: TransportPlan, progress=None) -> list[AgpStep]:
    """Parameter grid and gauge potentials from ``lambda_i`` to ``lambda_f``.

    Each gauge potential warm-starts from the previous one. The last entry
    sits at ``lambda_f`` with ``delta = 0``.
    """
    model = plan.model
    sched = agp_schedule(plan.agp_D, cutoff=plan.agp_cutoff, max_sweeps=plan.agp_max_sweeps)
    tol = 1e-12 * max(1.0, abs(plan.lambda_f))
    steps: list[AgpStep] = []
    lam = plan.lambda_i
    guess = None
    c = plan.step_constant
    j = 0
    while True:
        H, dH = model.build(lam)
        res = compute_agp(H, dH, guess=guess, D=plan.agp_D, schedule=sched, superoperator=build_superoperator(H))
        guess = res.agp
        if abs(plan.lambda_f - lam) <= tol:
            steps.append(AgpStep(plan.lambda_f, 0.0, res))
            break
        if plan.grid is not None:
            delta = float(plan.grid[j + 1]) - lam
        else:
            if c is None:
                c = step_constant(plan, res.scaled_norm)
            delta = next_step(res.scaled_norm, plan, lam, c)
        steps.append(AgpStep(lam, delta, res))
        if progress:
            progress(lam, delta, res)
        log.info("agp at %.6g: scaled norm %.4g residual %.2e step %.4g", lam, res.scaled_norm, res.rel_residual, delta)
        j += 1
        lam = float(plan.grid[j]) if plan.grid is not None else lam + delta
        if plan.grid is None and abs(plan.lambda_f - lam) <= tol:
            lam = plan.lambda_f
    return steps


@dataclass
class TransportResult:
    records: list
    path: list
    prefinal_states: list
    prefinal_energies: list
    states: list
    energies: list
    timings: dict
    initial: ExcitedSetResult | None = None
    final: ExcitedSetResult | None = None
    flags: list = field(default_factory=list)

    def at(self, lam: float) -> list:
        return [r for r in self.records if abs(r.lambda_ - lam) < 1e-12]

    @property
    def lambdas(self) -> list:
        return list(dict.fromkeys(r.lambda_ for r in self.records))


def _sorted_by_energy(states, H):
    es = [expect(s, H).real for s in states]
    order = np.argsort(es, kind="stable")
    return [states[i] for i in order], [es[i] for i in order]


def _max_overlaps(states) -> list[float]:
    out = [0.0] * len(states)
    for i in range(len(states)):
        for j in range(i):
            ov = abs(inner(states[i], states[j]))
            out[i], out[j] = max(out[i], ov), max(out[j], ov)
    return out


def _level_spacing(es, n):
    others = [abs(es[n] - e) for m, e in enumerate(es) if m != n]
    return min(others) if others else math.inf


def transport(
    plan: TransportPlan,
    path: list | None = None,
    initial: ExcitedSetResult | None = None,
) -> TransportResult:
    """Carry the ``k`` lowest states of a sector from ``lambda_i`` to ``lambda_f``.

    Args:
        path: precomputed :func:`agp_path` output for the same model and
            parameter range (the gauge potentials do not depend on states).
        initial: precomputed initial DMRG result at ``lambda_i``.

    Returns:
        :class:`TransportResult` with one record per (parameter, state).
        Energies are sorted within each parameter value. At ``lambda_f``
        the records hold the final DMRG output if it ran; the transported
        states before it are kept in ``prefinal_states``.
    """
    t0 = time.perf_counter()
    timings = {"initial_dmrg": 0.0, "agp": 0.0, "tdvp": 0.0, "intermediary_dmrg": 0.0, "final_dmrg": 0.0}
    model, sector, k = plan.model, plan.sector, plan.k
    L = model.L
    label = sector.parity

    def hamiltonians(lam):
        H, dH = model.build(lam)
        return H, dH, sector_penalized(H, sector)

    H, dH, Hp = hamiltonians(plan.lambda_i)
    if initial is None:
        ta = time.perf_counter()
        inits = [random_mps(L, 2, plan.init_bond_dim, seed=(plan.seed, n)) for n in range(k)]
        initial = dmrg_excited_set(Hp, k, inits, plan.initial, plan.weight, seed=plan.seed)
        timings["initial_dmrg"] = time.perf_counter() - ta
    if not all(r.converged for r in initial.results):
        log.warning("initial DMRG did not converge for every state")
    states = list(initial.states)
    if path is None:
        ta = time.perf_counter()
        path = agp_path(plan)
        timings["agp"] = time.perf_counter() - ta
    else:
        timings["agp"] = sum(s.result.wall_time for s in path)

    records: list[TransportRecord] = []
    flags: list = []

    def emit(lam, states, H, step: AgpStep | None, delta, stage, extra_flags=None):
        states, es = _sorted_by_energy(states, H)
        now = time.perf_counter() - t0
        overlaps = _max_overlaps(states)
        for n, s in enumerate(states):
            var = variance(s, H)
            fl = list(extra_flags.get(id(s), [])) if extra_flags else []
            if var < -1e-10:
                fl.append("negative variance")
            if overlaps[n] > ORTHOGONALITY_WARN:
                fl.append(f"overlap {overlaps[n]:.1e} with another state")
                log.warning("state %d at %.6g overlaps another state by %.2e", n, lam, overlaps[n])
            records.append(
                TransportRecord(
                    lambda_=float(lam),
                    sector=label,
                    state_index=n,
                    energy=float(es[n]),
                    variance=float(var),
                    max_bond_dim=s.max_bond_dim,
                    agp_scaled_norm=step.result.scaled_norm if step else float("nan"),
                    agp_residual=step.result.rel_residual if step else float("nan"),
                    delta_used=float(delta),
                    wall_time_s=now,
                    stage=stage,
                    mode=plan.mode,
                    timings=dict(timings),
                    flags=fl,
                    discarded=float(s.discarded),
                )
            )
        return states

    first = path[0] if path else None
    last_stage_records = None
    if len(path) <= 1 or plan.lambda_i == plan.lambda_f:
        states = emit(plan.lambda_i, states, H, first, 0.0, "initial")
        prefinal = list(states)
    else:
        states = emit(plan.lambda_i, states, H, first, 0.0, "initial")
        for j, step in enumerate(path[:-1]):
            # energies predicted to first order along the step
            es_before = [expect(s, H).real for s in states]
            slopes = [expect(s, dH).real for s in states]
            ta = time.perf_counter()
            evolved = []
            for s in states:
                out = evolve(step.result.agp, s, step.delta, plan.tdvp)
                if out.norm_drift > 1e-8:
                    log.info("TDVP norm drift %.2e", out.norm_drift)
                evolved.append(out.psi)
            timings["tdvp"] += time.perf_counter() - ta
            lam = path[j + 1].lam
            H, dH, Hp = hamiltonians(lam)
            jumps = {}
            es_after = [expect(s, H).real for s in evolved]
            for n, s in enumerate(evolved):
                predicted = es_before[n] + slopes[n] * step.delta
                if abs(es_after[n] - predicted) > _level_spacing(es_after, n):
                    jumps[id(s)] = ["possibly escaped the adiabatic branch"]
                    flags.append((lam, n, "possibly escaped the adiabatic branch"))
            states = evolved
            is_last = j == len(path) - 2
            if plan.mode == "agp+dmrg" and not (is_last and plan.run_final_dmrg):
                ta = time.perf_counter()
                ordered, _ = _sorted_by_energy(states, H)
                res = dmrg_excited_set(Hp, k, ordered, plan.intermediary, plan.weight, seed=plan.seed + j + 1)
                states = res.states
                jumps = {}
                timings["intermediary_dmrg"] += time.perf_counter() - ta
            if is_last and plan.run_final_dmrg:
                last_stage_records = (lam, path[j + 1], step.delta, jumps)
                break
            states = emit(lam, states, H, path[j + 1], step.delta, "transport", jumps)
        prefinal = list(states)

    prefinal_states, prefinal_energies = _sorted_by_energy(prefinal, H)
    final = None
    if plan.run_final_dmrg:
        ta = time.perf_counter()
        final = dmrg_excited_set(Hp, k, prefinal_states, plan.final, plan.weight, seed=plan.seed + 10_000)
        timings["final_dmrg"] = time.perf_counter() - ta
        states = final.states
        if last_stage_records is None:
            # zero-length scan: the final DMRG replaces the initial records
            records = [r for r in records if r.lambda_ != plan.lambda_f]
            states = emit(plan.lambda_f, states, H, first, 0.0, "final")
        else:
            lam, step, delta, _ = last_stage_records
            states = emit(lam, states, H, step, delta, "final")
    states, energies = _sorted_by_energy(states, H)
    timings["total"] = time.perf_counter() - t0
    return TransportResult(
        records=records,
        path=path,
        prefinal_states=prefinal_states,
        prefinal_energies=prefinal_energies,
        states=states,
        energies=energies,
        timings=timings,
        initial=initial,
        final=final,
        flags=flags,
    )


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------


def write_records_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(CSV_COLUMNS))
        w.writeheader()
        for r in records:
            w.writerow({k: _fmt(v) for k, v in r.row().items()})


def write_records_jsonl(records, path, extra: dict | None = None) -> None:
    with open(path, "w") as fh:
        for r in records:
            d = asdict(r)
            d["lambda"] = d.pop("lambda_")
            if extra:
                d.update(extra)
            fh.write(json.dumps(d, default=float) + "\n")


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else v


# --------------------------------------------------------------------------
# benchmark
# --------------------------------------------------------------------------


@dataclass
class BenchmarkRow:
    method: str
    L: int
    realization: int
    energies: list
    errors: list
    wall_time_s: float


@dataclass
class BenchmarkTable:
    rows: list
    exact: dict

    def summary(self) -> list[dict]:
        """Mean and sample standard deviation of wall time and per-state errors."""
        out = []
        keys = sorted({(r.method, r.L) for r in self.rows})
        for method, L in keys:
            rows = [r for r in self.rows if r.method == method and r.L == L]
            errs = np.array([r.errors for r in rows])
            times = np.array([r.wall_time_s for r in rows])
            ddof = 1 if len(rows) > 1 else 0
            out.append(
                {
                    "method": method,
                    "L": L,
                    "n": len(rows),
                    "time_mean": float(times.mean()),
                    "time_std": float(times.std(ddof=ddof)),
                    "error_mean": errs.mean(axis=0).tolist(),
                    "error_std": errs.std(axis=0, ddof=ddof).tolist(),
                }
            )
        return out


def benchmark_agp_vs_random(
    model_name: str,
    Ls,
    k: int,
    n_realizations: int,
    sector: str = "even",
    grid=BENCHMARK_GRID,
    initial: SweepSchedule | None = None,
    intermediary: SweepSchedule | None = None,
    final: SweepSchedule | None = None,
    agp_D: int = 40,
    agp_cutoff: float = 1e-6,
    init_bond_dim: int = 10,
    seed: int = 0,
    progress=None,
) -> BenchmarkTable:
    """AGP-initialized versus randomly initialized excited-state DMRG at ``grid[-1]``.

    The AGP pipeline runs DMRG at ``grid[0]``, transports the states through
    ``grid`` with refinement after each step and finishes with the final
    DMRG. The reference runs the final DMRG directly from random states.
    Gauge potentials are computed once per ``L``; their cost is added to
    every AGP realization. Errors are ``|E - E_exact|`` from free fermions.
    """
    if model_name != "TFIM":
        raise ValueError("energy errors need the free-fermion solution (TFIM only)")
    initial = initial or initial_schedule()
    intermediary = intermediary or intermediary_schedule()
    final = final or final_schedule()
    spec = SectorSpec(sector)
    g_f = float(grid[-1])
    rows, exact = [], {}
    for L in Ls:
        model = ModelFamily("TFIM", L)
        ex = ff_low_energies(L, g_f, None if sector == "none" else sector, k)
        exact[L] = ex.tolist()
        plan = TransportPlan(
            model=model,
            sector=spec,
            lambda_i=float(grid[0]),
            lambda_f=g_f,
            k=k,
            grid=tuple(grid),
            mode="agp+dmrg",
            initial=initial,
            intermediary=intermediary,
            final=final,
            agp_D=agp_D,
            agp_cutoff=agp_cutoff,
            init_bond_dim=init_bond_dim,
        )
        ta = time.perf_counter()
        path = agp_path(plan)
        agp_time = time.perf_counter() - ta
        Hf = sector_penalized(model.hamiltonian(g_f), spec)
        for r in range(n_realizations):
            ta = time.perf_counter()
            plan.seed = seed + r
            res = transport(plan, path=path)
            dt = time.perf_counter() - ta + agp_time
            rows.append(BenchmarkRow("agp", L, r, list(res.energies), list(np.abs(np.array(res.energies) - ex)), dt))
            if progress:
                progress(rows[-1])
            ta = time.perf_counter()
            inits = [random_mps(L, 2, init_bond_dim, seed=(seed + r, n, 7)) for n in range(k)]
            ref = dmrg_excited_set(Hf, k, inits, final, plan.weight, seed=seed + r)
            dt = time.perf_counter() - ta
            rows.append(BenchmarkRow("random", L, r, list(ref.energies), list(np.abs(np.array(ref.energies) - ex)), dt))
            if progress:
                progress(rows[-1])
    return BenchmarkTable(rows, exact)


def write_benchmark_csv(table: BenchmarkTable, path) -> None:
    k = len(table.rows[0].errors) if table.rows else 0
    cols = ["method", "L", "realization", "wall_time_s"] + [f"error_{n}" for n in range(k)]
    summ = {(s["method"], s["L"]): s for s in table.summary()}
    cols += ["time_std"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in table.rows:
            s = summ[(r.method, r.L)]
            w.writerow([r.method, r.L, r.realization, repr(r.wall_time_s)] + [repr(float(e)) for e in r.errors] + [repr(s["time_std"])])
        for (method, L), s in summ.items():
            w.writerow([method, L, "mean", repr(s["time_mean"])] + [repr(e) for e in s["error_mean"]] + [repr(s["time_std"])])
            w.writerow([method, L, "std", repr(s["time_std"])] + [repr(e) for e in s["error_std"]] + [repr(s["time_std"])])
