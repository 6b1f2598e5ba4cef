"""Two-site DMRG (ground and penalty-based excited states) and MPS linear solves."""

from __future__ import annotations

import logging
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .environments import OperatorEnv, OverlapEnv
from .mps import (
    MPO,
    MPS,
    add,
    apply_mpo,
    canonicalize,
    compress,
    expect,
    expect2,
    inner,
    normalize,
    random_mps,
    sandwich,
    scale,
)
from .tensor import (
    TruncationPolicy,
    eigsolve_hermitian_smallest,
    iterative_linsolve,
    truncated_svd,
)

log = logging.getLogger(__name__)


@dataclass
class SweepSchedule:
    """Sweep controls shared by :func:`dmrg` and :func:`mps_linsolve`.

    Attributes:
        max_sweeps: maximum number of full (left-right-left) sweeps.
        policy: truncation applied at every two-site split.
        rel_energy_tol: stop when the relative change of the sweep energy
            (or residual, for linear solves) drops below this.
        local_tol: tolerance of the local Krylov solver. For linear solves it
            is also the target global relative residual.
        krylov_dim: Lanczos subspace size for local eigensolves.
        max_restarts: Lanczos restarts per local eigensolve.
        local_maxiter: GMRES iteration cap per local linear solve.
        min_sweeps: sweeps to run before testing convergence.
    """

    max_sweeps: int = 10
    policy: TruncationPolicy = field(default_factory=lambda: TruncationPolicy(1e-10, 200))
    rel_energy_tol: float = 1e-10
    local_tol: float = 1e-12
    krylov_dim: int = 10
    max_restarts: int = 3
    local_maxiter: int = 100
    min_sweeps: int = 1

    def __post_init__(self):
        if self.rel_energy_tol <= 0:
            raise ValueError("rel_energy_tol must be positive")


@dataclass
class PenaltySet:
    """States penalized as ``w * sum_m |m><m|`` during DMRG."""

    states: list
    weight: float

    def __post_init__(self):
        if self.weight <= 0:
            raise ValueError("penalty weight must be positive")
        for i, a in enumerate(self.states):
            for b in self.states[:i]:
                ov = abs(inner(a, b)) / np.sqrt(abs(inner(a, a)) * abs(inner(b, b)))
                if ov > 1e-6:
                    warnings.warn(f"penalty states overlap by {ov:.2e}", stacklevel=2)


@dataclass
class DMRGResult:
    energy: float
    psi: MPS
    sweeps: int
    converged: bool
    energies: list = field(default_factory=list)
    max_discarded: float = 0.0
    wall_time: float = 0.0


@dataclass
class LinsolveResult:
    x: MPS
    rel_residual: float
    sweeps: int
    converged: bool
    residuals: list = field(default_factory=list)
    wall_time: float = 0.0


def _split(theta, policy, move_right: bool):
    chi_l, d1, d2, chi_r = theta.shape
    u, s, vh, disc = truncated_svd(theta.reshape(chi_l * d1, d2 * chi_r), policy)
    if move_right:
        a = u.reshape(chi_l, d1, -1)
        b = (s[:, None] * vh).reshape(-1, d2, chi_r)
    else:
        a = (u * s).reshape(chi_l, d1, -1)
        b = vh.reshape(-1, d2, chi_r)
    return a, b, disc


def _pair(psi, i):
    return np.tensordot(psi.tensors[i], psi.tensors[i + 1], (2, 0))


def _sweep_sites(L):
    return [(i, True) for i in range(L - 1)] + [(i, False) for i in range(L - 2, -1, -1)]


def dmrg(
    H: MPO,
    psi0: MPS,
    schedule: SweepSchedule | None = None,
    penalties: PenaltySet | None = None,
) -> DMRGResult:
    """Two-site DMRG for the lowest eigenstate of ``H + w sum_m |m><m|``.

    Penalty projectors enter through overlap environments; no dense
    projector is formed. Convergence is tested on the relative change of the
    penalized energy between full sweeps.

    Returns:
        :class:`DMRGResult` whose ``energy`` is ``<psi|H|psi>`` of the
        normalized final state (penalty excluded), with the orthogonality
        center of ``psi`` at site 0.
    """
    t0 = time.perf_counter()
    sched = schedule or SweepSchedule()
    L = psi0.L
    if L == 1:
        return _dmrg_single_site(H, psi0, penalties, t0)
    psi = normalize(canonicalize(psi0, 0))
    env = OperatorEnv(H, psi)
    pens = []
    if penalties is not None:
        pens = [(OverlapEnv(normalize(canonicalize(m, 0)), psi), penalties.weight) for m in penalties.states]

    def penalized_energy(p):
        e = expect(p, H).real
        for penv, w in pens:
            e += w * abs(inner(MPS(penv.phi), p)) ** 2
        return e

    e_prev = penalized_energy(psi)
    energies = []
    converged = False
    max_disc = 0.0
    sweep = 0
    for sweep in range(1, sched.max_sweeps + 1):
        energy = e_prev
        for i, move_right in _sweep_sites(L):
            theta = _pair(psi, i)
            vecs = [(penv.vector2(i), w) for penv, w in pens]

            def matvec(x, i=i, vecs=vecs):
                y = env.apply2(i, x)
                for v, w in vecs:
                    y = y + (w * np.vdot(v, x)) * v
                return y

            energy, theta, _ = eigsolve_hermitian_smallest(
                matvec,
                theta,
                krylov_dim=sched.krylov_dim,
                tol=sched.local_tol,
                max_restarts=sched.max_restarts,
            )
            a, b, disc = _split(theta, sched.policy, move_right)
            max_disc = max(max_disc, disc)
            psi.tensors[i], psi.tensors[i + 1] = a, b
            if move_right:
                psi.center = i + 1
                env.update_left(i, a)
                for penv, _ in pens:
                    penv.update_left(i, a)
            else:
                psi.center = i
                env.update_right(i + 1, b)
                for penv, _ in pens:
                    penv.update_right(i + 1, b)
        psi.tensors[0] = psi.tensors[0] / np.linalg.norm(psi.tensors[0])
        energies.append(float(energy))
        log.debug("dmrg sweep %d energy=%.15g maxbond=%d", sweep, energy, psi.max_bond_dim)
        rel = abs(energy - e_prev) / max(abs(energy), 1e-300)
        e_prev = energy
        if sweep >= sched.min_sweeps and rel < sched.rel_energy_tol:
            converged = True
            break
    psi.center = 0
    psi.discarded = max_disc
    e = expect(psi, H).real
    return DMRGResult(e, psi, sweep, converged, energies, max_disc, time.perf_counter() - t0)


def _dmrg_single_site(H, psi0, penalties, t0):
    h = H.tensors[0][0, :, :, 0]
    if penalties is not None:
        for m in penalties.states:
            v = m.tensors[0][0, :, 0]
            v = v / np.linalg.norm(v)
            h = h + penalties.weight * np.outer(v, v.conj())
    evals, evecs = np.linalg.eigh(h)
    psi = MPS([evecs[:, 0].reshape(1, -1, 1)], center=0)
    return DMRGResult(expect(psi, H).real, psi, 1, True, [float(evals[0])], 0.0, time.perf_counter() - t0)


@dataclass
class ExcitedSetResult:
    energies: list
    states: list
    results: list
    max_overlap: float
    reseeded: list


def dmrg_excited_set(
    H: MPO,
    k: int,
    inits: list,
    schedule: SweepSchedule | None = None,
    w: float | None = None,
    seed: int = 0,
    reseed_bond_dim: int = 10,
) -> ExcitedSetResult:
    """Lowest ``k`` eigenstates by sequential penalty DMRG.

    State ``n`` is optimized from ``inits[n]`` with all previously found
    states penalized by ``w`` (default ``4 L``). A state overlapping an
    earlier one by more than 0.5 is reseeded once from a random MPS.
    The output is sorted by energy.
    """
    if k < 1 or len(inits) != k:
        raise ValueError("need k >= 1 and exactly k initial states")
    L = H.L
    w = 4.0 * L if w is None else w
    found: list[MPS] = []
    results = []
    reseeded = []
    for n in range(k):
        pen = PenaltySet(list(found), w) if found else None
        res = dmrg(H, inits[n], schedule, pen)
        if found and max(abs(inner(m, res.psi)) for m in found) > 0.5:
            log.warning("state %d duplicated an earlier state; reseeding", n)
            reseeded.append(n)
            fresh = random_mps(L, H.phys_dims[0], reseed_bond_dim, seed=(seed, n, 1))
            res = dmrg(H, fresh, schedule, pen)
        found.append(res.psi)
        results.append(res)
    order = sorted(range(k), key=lambda j: results[j].energy)
    results = [results[j] for j in order]
    states = [r.psi for r in results]
    max_ov = 0.0
    for i in range(k):
        for j in range(i):
            max_ov = max(max_ov, abs(inner(states[i], states[j])))
    if max_ov > 1e-6:
        log.info("excited set max pairwise overlap %.2e", max_ov)
    return ExcitedSetResult([r.energy for r in results], states, results, max_ov, reseeded)


# --------------------------------------------------------------------------
# linear equations
# --------------------------------------------------------------------------


def residual_norm(A: MPO, x: MPS, b: MPS, bnorm2: float | None = None) -> float:
    """``|A x - b|`` for Hermitian ``A``.

    Uses ``<x|A^2|x> - 2 Re<b|A|x> + <b|b>``; when that is below ``1e-5 |b|``
    (where cancellation limits accuracy) the residual state is formed
    explicitly and its norm taken in canonical form.
    """
    bb = inner(b, b).real if bnorm2 is None else bnorm2
    r2 = expect2(x, A).real - 2.0 * sandwich(b, A, x).real + bb
    if r2 > 1e-10 * bb:
        return float(np.sqrt(r2))
    r = add(apply_mpo(A, x, TruncationPolicy(0.0)), scale(b, -1.0), policy=None)
    r = canonicalize(r, 0)
    return float(np.linalg.norm(r.tensors[0]))


def mps_linsolve(
    A: MPO,
    b: MPS,
    x0: MPS,
    schedule: SweepSchedule | None = None,
    target: float | None = None,
    adaptive_local_tol: bool = True,
) -> LinsolveResult:
    """Solve ``A x = b`` for Hermitian positive-semidefinite ``A`` by two-site sweeps.

    Each local problem is the Galerkin projection of the global system onto
    the two-site space, solved by GMRES warm-started from the current block.
    The global relative residual ``|Ax-b|/|b|`` is evaluated after every
    sweep and the best iterate is returned.

    Args:
        target: global relative residual at which to stop (defaults to the
            schedule's ``local_tol``).
        adaptive_local_tol: loosen the local tolerance to ``1e-2`` times the
            current global residual (never below ``local_tol``), since
            solving local problems far beyond the global error buys nothing.
    """
    t0 = time.perf_counter()
    sched = schedule or SweepSchedule(policy=TruncationPolicy(1e-8, 100), rel_energy_tol=1e-4)
    L = x0.L
    bb = inner(b, b).real
    if bb == 0.0:
        raise ValueError("right-hand side must be nonzero")
    bnorm = np.sqrt(bb)
    x = canonicalize(x0, 0)
    if np.linalg.norm(x.tensors[0]) == 0.0:
        x = scale(canonicalize(b, 0), 1.0)
        x = compress(x, sched.policy)
    if L == 1:
        a = A.tensors[0][0, :, :, 0]
        sol, *_ = np.linalg.lstsq(a, b.tensors[0][0, :, 0], rcond=None)
        xs = MPS([sol.reshape(1, -1, 1)], center=0)
        res = residual_norm(A, xs, b, bb) / bnorm
        return LinsolveResult(xs, res, 1, res <= (sched.local_tol if target is None else target), [res], time.perf_counter() - t0)
    best = (residual_norm(A, x, b, bb) / bnorm, x.copy())
    residuals = [best[0]]
    prev = best[0]
    converged = False
    env = OperatorEnv(A, x)
    benv = OverlapEnv(b, x)
    sweep = 0
    target = sched.local_tol if target is None else target
    for sweep in range(1, sched.max_sweeps + 1):
        local_tol = max(sched.local_tol, 1e-2 * prev) if adaptive_local_tol else sched.local_tol
        for i, move_right in _sweep_sites(L):
            theta = _pair(x, i)
            rhs = benv.vector2(i)
            if np.linalg.norm(rhs) > 0.0:
                theta, _info = iterative_linsolve(
                    lambda v, i=i: env.apply2(i, v),
                    rhs,
                    theta,
                    tol=local_tol,
                    max_iter=sched.local_maxiter,
                )
            a, c, _ = _split(theta, sched.policy, move_right)
            x.tensors[i], x.tensors[i + 1] = a, c
            if move_right:
                x.center = i + 1
                env.update_left(i, a)
                benv.update_left(i, a)
            else:
                x.center = i
                env.update_right(i + 1, c)
                benv.update_right(i + 1, c)
        x.center = 0
        res = residual_norm(A, x, b, bb) / bnorm
        residuals.append(res)
        log.debug("linsolve sweep %d rel_residual=%.3e maxbond=%d", sweep, res, x.max_bond_dim)
        if res < best[0]:
            best = (res, x.copy())
        if res <= target:
            converged = True
            break
        if sweep >= sched.min_sweeps and abs(prev - res) <= sched.rel_energy_tol * max(res, 1e-300):
            converged = True
            break
        prev = res
    return LinsolveResult(best[1], best[0], sweep, converged, residuals, time.perf_counter() - t0)
