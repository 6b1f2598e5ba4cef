"""Adiabatic gauge potential as an MPO, from a variational linear solve.

The gauge potential ``A`` minimizes ``S(X) = |dH + i[X, H]|_F^2``. Setting the
gradient to zero gives

    X H^2 + H^2 X - 2 H X H = i (dH H - H dH),

which, after vectorizing ``X`` into a doubled-space MPS, is a linear system
with a Hermitian positive-semidefinite MPO. It is solved by two-site sweeps,
starting from the best multiple of ``i [H, dH]`` or from a previous solution.
"""

from __future__ import annotations

import logging
import math
import time
import warnings
from dataclasses import dataclass

from .mps import (
    MPO,
    add,
    commutator,
    compress,
    compress_mpo,
    devectorize,
    frobenius_inner,
    frobenius_norm,
    kron_mpo,
    identity_mpo,
    mpo_product,
    scale,
    vectorize,
    zero_mpo,
)
from .solvers import SweepSchedule, mps_linsolve, residual_norm
from .tensor import TruncationPolicy

log = logging.getLogger(__name__)

ASSEMBLY_POLICY = TruncationPolicy(1e-12)
DEFAULT_CUTOFF = 1e-6
ANTIHERMITIAN_WARN = 1e-4


@dataclass
class AgpResult:
    """Gauge potential and its diagnostics.

    ``agp`` is the Hermitized solution. ``rel_residual`` and ``norm`` refer to
    it; ``raw_residual`` and ``raw_norm`` to the linear-solve output before
    Hermitization, whose anti-Hermitian part has relative size
    ``antihermitian``.
    """

    agp: MPO
    rel_residual: float
    norm: float
    scaled_norm: float
    bond_dim: int
    alpha1: float
    raw_residual: float = float("nan")
    raw_norm: float = float("nan")
    antihermitian: float = 0.0
    sweeps: int = 0
    converged: bool = True
    wall_time: float = 0.0


def scaled_norm(agp: MPO, L: int | None = None) -> float:
    """``|A|_F / sqrt(L 2^L)`` (``2^L`` generalizes to the Hilbert-space dimension)."""
    L = agp.L if L is None else L
    dim = math.prod(agp.phys_dims)
    return frobenius_norm(agp) / math.sqrt(L * dim)


def action(X: MPO, H: MPO, dH: MPO) -> float:
    """``S(X) = |dH + i[X, H]|_F^2`` through MPO algebra."""
    G = add(dH, scale(commutator(X, H), 1j), policy=ASSEMBLY_POLICY)
    return frobenius_inner(G, G).real


def commutator_guess(H: MPO, dH: MPO) -> tuple[MPO, float]:
    """Best operator of the form ``i a [H, dH]``.

    With ``B = [H, [H, dH]]`` the action along this line is
    ``|dH + a B|^2``, minimized by ``a = -Re<dH, B> / |B|^2``.
    Returns ``(X0, a)``; commuting ``H`` and ``dH`` give the zero MPO and 0.
    """
    C = commutator(H, dH, ASSEMBLY_POLICY)
    B = commutator(H, C, ASSEMBLY_POLICY)
    bb = frobenius_inner(B, B).real
    scale_ref = frobenius_norm(H) ** 2 * frobenius_norm(dH)
    if bb <= (1e-13 * scale_ref) ** 2 or bb == 0.0:
        return zero_mpo(H.L, H.phys_dims[0]), 0.0
    alpha = -frobenius_inner(dH, B).real / bb
    return scale(C, 1j * alpha), float(alpha)


def build_superoperator(H: MPO, policy: TruncationPolicy = ASSEMBLY_POLICY) -> MPO:
    """Doubled-space MPO acting on ``vec(X)`` as ``vec(X H^2 + H^2 X - 2 H X H)``."""
    H2 = mpo_product(H, H, policy)
    I = identity_mpo(H.L, H.phys_dims[0])
    left = kron_mpo(I, H2)  # H^2 X
    right = kron_mpo(H2.transpose(), I)  # X H^2
    mid = kron_mpo(H.transpose(), H)  # H X H
    out = add(left, right, policy)
    return add(out, scale(mid, -2.0), policy)


def build_rhs(H: MPO, dH: MPO, policy: TruncationPolicy = ASSEMBLY_POLICY):
    """``vec(i (dH H - H dH))``."""
    return vectorize(scale(commutator(dH, H, policy), 1j))


def agp_schedule(
    D: int,
    cutoff: float = DEFAULT_CUTOFF,
    max_sweeps: int = 30,
    rel_tol: float = 1e-3,
    target: float = 1e-9,
) -> SweepSchedule:
    """Sweep controls for the doubled-space solve.

    Stops when the global relative residual falls below ``target`` or changes
    by less than ``rel_tol`` (relative) between sweeps.
    """
    return SweepSchedule(
        max_sweeps=max_sweeps,
        policy=TruncationPolicy(cutoff, D),
        rel_energy_tol=rel_tol,
        local_tol=target,
        local_maxiter=100,
    )


def _hermitize(X: MPO, policy: TruncationPolicy) -> tuple[MPO, float]:
    sym = scale(add(X, X.dagger(), policy=None), 0.5)
    anti = scale(add(X, scale(X.dagger(), -1.0), policy=None), 0.5)
    xn = frobenius_norm(X)
    rel_anti = frobenius_norm(anti) / xn if xn > 0 else 0.0
    return compress_mpo(sym, policy), rel_anti


def compute_agp(
    H: MPO,
    dH: MPO,
    guess: MPO | None = None,
    D: int = 40,
    schedule: SweepSchedule | None = None,
    superoperator: MPO | None = None,
) -> AgpResult:
    """Gauge potential of ``H`` along ``dH`` at maximal bond dimension ``D``.

    Args:
        guess: starting operator; defaults to :func:`commutator_guess`. A
            previously computed gauge potential at a nearby parameter makes a
            good warm start.
        schedule: linear-solve controls; defaults to :func:`agp_schedule`
            with ``D``. Its policy caps the bond dimension.
        superoperator: precomputed :func:`build_superoperator` output.
    """
    t0 = time.perf_counter()
    sched = schedule or agp_schedule(D)
    policy = sched.policy
    X0, alpha1 = commutator_guess(H, dH)
    b = build_rhs(H, dH)
    bb = frobenius_inner(devectorize(b), devectorize(b)).real
    if bb <= 1e-28 * max(frobenius_norm(dH) ** 2, 1e-300):
        Z = zero_mpo(H.L, H.phys_dims[0])
        return AgpResult(Z, 0.0, 0.0, 0.0, 1, alpha1, 0.0, 0.0, 0.0, 0, True, time.perf_counter() - t0)
    A = build_superoperator(H) if superoperator is None else superoperator
    start = X0 if guess is None else guess
    x0 = compress(vectorize(start), policy)
    sol = mps_linsolve(A, b, x0, sched)
    if not sol.converged:
        log.info("AGP linear solve stopped unconverged (residual %.2e)", sol.rel_residual)
    raw = devectorize(sol.x)
    X, rel_anti = _hermitize(raw, policy.replace(cutoff=min(policy.cutoff, 1e-12)))
    if rel_anti > ANTIHERMITIAN_WARN:
        warnings.warn(f"AGP solution has a relative anti-Hermitian part {rel_anti:.2e}", stacklevel=2)
    res = residual_norm(A, vectorize(X), b, bb) / math.sqrt(bb)
    nrm = frobenius_norm(X)
    L = H.L
    return AgpResult(
        agp=X,
        rel_residual=res,
        norm=nrm,
        scaled_norm=nrm / math.sqrt(L * math.prod(H.phys_dims)),
        bond_dim=X.max_bond_dim,
        alpha1=alpha1,
        raw_residual=sol.rel_residual,
        raw_norm=frobenius_norm(raw),
        antihermitian=rel_anti,
        sweeps=sol.sweeps,
        converged=sol.converged,
        wall_time=time.perf_counter() - t0,
    )
