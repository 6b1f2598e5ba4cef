"""Two-site TDVP for ``|psi> <- exp(-i G delta) |psi>`` with an MPO generator ``G``."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .environments import OperatorEnv
from .mps import MPO, MPS, canonicalize, frobenius_norm
from .solvers import _pair, _split
from .tensor import TruncationPolicy, expm_krylov

log = logging.getLogger(__name__)

MAX_ROTATION = 0.5


@dataclass
class TdvpOptions:
    """Controls for :func:`tdvp_step`.

    ``substeps=None`` picks the count from the generator's norm so that each
    substep rotates a typical state by at most ``MAX_ROTATION`` radians.
    """

    substeps: int | None = None
    policy: TruncationPolicy = field(default_factory=lambda: TruncationPolicy(1e-10, 200))
    local_krylov_dim: int = 30
    local_tol: float = 1e-12
    variant: str = "two-site"

    def __post_init__(self):
        if self.substeps is not None and self.substeps < 1:
            raise ValueError("substeps must be >= 1")
        if self.variant != "two-site":
            raise ValueError("only the two-site variant is implemented")


@dataclass
class TdvpResult:
    psi: MPS
    norm_drift: float
    substeps: int
    max_bond_dim: int
    max_discarded: float
    converged: bool


def auto_substeps(G: MPO, delta: float) -> int:
    """Substep count keeping ``|delta| / n * rms_n |G|n>|`` below ``MAX_ROTATION``."""
    dim = math.prod(G.phys_dims)
    rate = frobenius_norm(G) / math.sqrt(dim)
    return max(1, math.ceil(abs(delta) * rate / MAX_ROTATION))


def _half_sweep_right(env, psi, tau, opts, stats):
    L = psi.L
    for i in range(L - 1):
        theta = _pair(psi, i)
        theta, info = expm_krylov(lambda v, i=i: env.apply2(i, v), theta, -1j * tau, opts.local_krylov_dim, opts.local_tol)
        stats["ok"] &= info.converged
        a, c, disc = _split(theta, opts.policy, move_right=True)
        stats["disc"] = max(stats["disc"], disc)
        psi.tensors[i], psi.tensors[i + 1] = a, c
        psi.center = i + 1
        env.update_left(i, a)
        if i < L - 2:
            c, info = expm_krylov(lambda v, i=i: env.apply1(i + 1, v), c, 1j * tau, opts.local_krylov_dim, opts.local_tol)
            stats["ok"] &= info.converged
            psi.tensors[i + 1] = c


def _half_sweep_left(env, psi, tau, opts, stats):
    L = psi.L
    for i in range(L - 2, -1, -1):
        theta = _pair(psi, i)
        theta, info = expm_krylov(lambda v, i=i: env.apply2(i, v), theta, -1j * tau, opts.local_krylov_dim, opts.local_tol)
        stats["ok"] &= info.converged
        a, b, disc = _split(theta, opts.policy, move_right=False)
        stats["disc"] = max(stats["disc"], disc)
        psi.tensors[i], psi.tensors[i + 1] = a, b
        psi.center = i
        env.update_right(i + 1, b)
        if i > 0:
            a, info = expm_krylov(lambda v, i=i: env.apply1(i, v), a, 1j * tau, opts.local_krylov_dim, opts.local_tol)
            stats["ok"] &= info.converged
            psi.tensors[i] = a


def evolve(G: MPO, psi: MPS, delta: float, opts: TdvpOptions | None = None) -> TdvpResult:
    """Second-order two-site TDVP: each substep is a left-to-right and a
    right-to-left half sweep of length ``delta / (2 n)``.

    The state is renormalized at the end; ``norm_drift`` is the deviation of
    the norm from 1 just before that.
    """
    opts = opts or TdvpOptions()
    if psi.L < 2:
        raise ValueError("TDVP needs at least two sites")
    n = opts.substeps or auto_substeps(G, delta)
    out = canonicalize(psi, 0)
    start = np.linalg.norm(out.tensors[0])
    out.tensors[0] = out.tensors[0] / start
    stats = {"ok": True, "disc": 0.0}
    if delta != 0.0:
        env = OperatorEnv(G, out)
        tau = delta / n / 2
        for _ in range(n):
            _half_sweep_right(env, out, tau, opts, stats)
            _half_sweep_left(env, out, tau, opts, stats)
    nrm = float(np.linalg.norm(out.tensors[0]))
    out.tensors[0] = out.tensors[0] / nrm
    out.center = 0
    drift = abs(nrm - 1.0)
    if not stats["ok"]:
        log.warning("TDVP local exponential did not reach tolerance")
    out.discarded = stats["disc"]
    return TdvpResult(out, drift, n, out.max_bond_dim, stats["disc"], stats["ok"])


def tdvp_step(G: MPO, psi: MPS, delta: float, opts: TdvpOptions | None = None) -> MPS:
    """Normalized ``exp(-i G delta) |psi>`` (see :func:`evolve` for diagnostics)."""
    return evolve(G, psi, delta, opts).psi
