"""Dense tensor substrate: labeled contraction, truncated SVD and Krylov solvers.

All scalars are complex128. The Krylov routines operate on plain ndarrays of
any shape (flattened internally) or on :class:`Tensor` objects.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

DTYPE = np.complex128
NULL_SINGULAR = 1e-15

_index_ids = itertools.count()


def reset_index_ids(start: int = 0) -> None:
    """Restart the global index-id counter (for reproducible labels)."""
    global _index_ids
    _index_ids = itertools.count(start)


@dataclass(frozen=True, eq=False)
class Index:
    """A tensor leg. Two legs are the same leg iff their ids match."""

    dim: int
    tag: str = ""
    id: int = field(default_factory=lambda: next(_index_ids))

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"index dimension must be >= 1, got {self.dim}")

    def __eq__(self, other):
        return isinstance(other, Index) and other.id == self.id

    def __hash__(self):
        return hash(self.id)

    def __repr__(self):
        tag = f" {self.tag!r}" if self.tag else ""
        return f"Index(id={self.id}, dim={self.dim}{tag})"


class Tensor:
    """Dense complex array whose axes are labeled by :class:`Index` objects."""

    __slots__ = ("indices", "data")

    def __init__(self, data, indices: Sequence[Index]):
        data = np.asarray(data, dtype=DTYPE)
        indices = tuple(indices)
        if data.shape != tuple(ix.dim for ix in indices):
            raise ValueError(
                f"data shape {data.shape} does not match index dims "
                f"{tuple(ix.dim for ix in indices)}"
            )
        if len(set(indices)) != len(indices):
            raise ValueError("index ids must be unique within a tensor")
        self.data = data
        self.indices = indices

    @property
    def shape(self):
        return self.data.shape

    def axis(self, index: Index) -> int:
        return self.indices.index(index)

    def to_array(self, *order: Index) -> np.ndarray:
        """Return the data with axes permuted into ``order``."""
        if set(order) != set(self.indices) or len(order) != len(self.indices):
            raise ValueError("order must be a permutation of the tensor's indices")
        return self.data.transpose([self.axis(ix) for ix in order])

    def permute(self, *order: Index) -> Tensor:
        return Tensor(self.to_array(*order), order)

    def conj(self) -> Tensor:
        return Tensor(self.data.conj(), self.indices)

    def norm(self) -> float:
        return float(np.linalg.norm(self.data))

    def copy(self) -> Tensor:
        return Tensor(self.data.copy(), self.indices)

    def __mul__(self, c) -> Tensor:
        return Tensor(self.data * c, self.indices)

    __rmul__ = __mul__

    def __add__(self, other: Tensor) -> Tensor:
        return Tensor(self.data + other.to_array(*self.indices), self.indices)

    def __sub__(self, other: Tensor) -> Tensor:
        return Tensor(self.data - other.to_array(*self.indices), self.indices)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, indices={self.indices})"


def contract(a: Tensor, b: Tensor) -> Tensor:
    """Sum over all indices shared by ``a`` and ``b``.

    The result carries the remaining indices of ``a`` followed by those of ``b``.
    """
    shared = [ix for ix in a.indices if ix in b.indices]
    for ix in shared:
        jb = b.indices[b.axis(ix)]
        if jb.dim != ix.dim:
            raise ValueError(f"dimension mismatch on shared index id {ix.id}: {ix.dim} != {jb.dim}")
    ax_a = [a.axis(ix) for ix in shared]
    ax_b = [b.axis(ix) for ix in shared]
    data = np.tensordot(a.data, b.data, (ax_a, ax_b))
    free = [ix for ix in a.indices if ix not in shared] + [ix for ix in b.indices if ix not in shared]
    return Tensor(data, free)


@dataclass(frozen=True)
class TruncationPolicy:
    """SVD truncation rule.

    ``cutoff`` bounds the discarded squared singular-value weight relative to
    the total; ``maxdim`` caps the number of kept values.
    """

    cutoff: float = 0.0
    maxdim: int = 2**62

    def __post_init__(self):
        if not 0.0 <= self.cutoff < 1.0:
            raise ValueError("cutoff must lie in [0, 1)")
        if self.maxdim < 1:
            raise ValueError("maxdim must be >= 1")

    def replace(self, **kw) -> TruncationPolicy:
        return TruncationPolicy(**{"cutoff": self.cutoff, "maxdim": self.maxdim, **kw})


EXACT = TruncationPolicy(0.0)


def _svd(mat: np.ndarray):
    try:
        return scipy.linalg.svd(mat, full_matrices=False, lapack_driver="gesdd", check_finite=False)
    except np.linalg.LinAlgError:
        return scipy.linalg.svd(mat, full_matrices=False, lapack_driver="gesvd", check_finite=False)


def truncation_rank(s: np.ndarray, policy: TruncationPolicy) -> tuple[int, float]:
    """Number of singular values to keep and the discarded relative weight."""
    w = s**2
    total = w.sum()
    n = len(s)
    if total == 0.0:
        return 1, 0.0
    # tail[k] = weight discarded when keeping k values
    tail = np.concatenate([np.cumsum(w[::-1])[::-1], [0.0]]) / total
    keep = n
    if policy.cutoff > 0.0:
        keep = int(np.argmax(tail <= policy.cutoff))
    # numerically null values carry no weight and are always dropped
    nonzero = int(np.count_nonzero(s > NULL_SINGULAR * s[0]))
    keep = max(1, min(keep, policy.maxdim, nonzero))
    return keep, float(tail[keep])


def truncated_svd(mat: np.ndarray, policy: TruncationPolicy = EXACT):
    """SVD of a matrix truncated according to ``policy``.

    Returns:
        ``(U, S, Vh, discarded_weight)``.
    """
    u, s, vh = _svd(mat)
    keep, disc = truncation_rank(s, policy)
    return u[:, :keep], s[:keep], vh[:keep], disc


def svd_truncate(t: Tensor, row_indices, policy: TruncationPolicy = EXACT):
    """Split ``t`` into ``U · diag(S) · V`` across the ``row_indices`` partition.

    Returns:
        ``(U, S, V, discarded_weight)`` where ``U`` carries ``row_indices`` plus
        a new bond index and ``V`` carries the same bond index plus the rest.
    """
    rows = [ix for ix in t.indices if ix in set(row_indices)]
    if len(rows) != len(set(row_indices)):
        raise ValueError("row_indices must be a subset of the tensor's indices")
    cols = [ix for ix in t.indices if ix not in rows]
    if not rows or not cols:
        raise ValueError("row_indices must be a nonempty proper subset")
    mat = t.to_array(*rows, *cols).reshape(math.prod(ix.dim for ix in rows), -1)
    u, s, vh, disc = truncated_svd(mat, policy)
    bond = Index(len(s), tag="svd")
    U = Tensor(u.reshape(*(ix.dim for ix in rows), len(s)), [*rows, bond])
    V = Tensor(vh.reshape(len(s), *(ix.dim for ix in cols)), [bond, *cols])
    return U, s, V, disc


# --------------------------------------------------------------------------
# Krylov solvers
# --------------------------------------------------------------------------


@dataclass
class KrylovInfo:
    residual: float
    converged: bool
    matvecs: int


def _wrap(apply, x0):
    """Adapt ``apply`` and ``x0`` (Tensor or ndarray) to flat-vector form."""
    if isinstance(x0, Tensor):
        idx = x0.indices
        shape = x0.shape

        def f(v):
            # copy: the caller orthogonalizes the result in place
            return np.array(apply(Tensor(v.reshape(shape), idx)).to_array(*idx), dtype=DTYPE).ravel()

        def back(v):
            return Tensor(v.reshape(shape), idx)

        return f, x0.data.ravel().astype(DTYPE), back
    x0 = np.asarray(x0, dtype=DTYPE)
    shape = x0.shape

    def f(v):
        return np.array(apply(v.reshape(shape)), dtype=DTYPE).ravel()

    return f, x0.ravel(), lambda v: v.reshape(shape)


def eigsolve_hermitian_smallest(
    apply: Callable,
    guess,
    krylov_dim: int = 10,
    tol: float = 1e-12,
    max_restarts: int = 4,
):
    """Smallest eigenpair of a Hermitian linear map by restarted Lanczos.

    Uses full reorthogonalization and restarts from the current Ritz vector.

    Args:
        apply: the map, acting on objects shaped like ``guess``.
        guess: nonzero starting vector (ndarray or Tensor).
        krylov_dim: Krylov subspace size per cycle.
        tol: convergence threshold on ``|A v - θ v|`` relative to the largest
            Ritz value magnitude (floored at one).
        max_restarts: number of restarts after the first cycle.

    Returns:
        ``(value, vector, info)`` with ``vector`` normalized and shaped like
        ``guess``.
    """
    f, v, back = _wrap(apply, guess)
    nrm = np.linalg.norm(v)
    if nrm == 0.0:
        raise ValueError("guess must be nonzero")
    v = v / nrm
    n = v.size
    m = max(1, min(krylov_dim, n))
    matvecs = 0
    theta, res = 0.0, np.inf
    for _cycle in range(max_restarts + 1):
        V = np.empty((m + 1, n), dtype=DTYPE)
        V[0] = v
        alpha = np.zeros(m)
        beta = np.zeros(m)
        k_used = m
        for j in range(m):
            w = f(V[j])
            matvecs += 1
            alpha[j] = np.vdot(V[j], w).real
            # two passes of classical Gram-Schmidt
            w -= V[: j + 1].T @ (V[: j + 1].conj() @ w)
            w -= V[: j + 1].T @ (V[: j + 1].conj() @ w)
            beta[j] = np.linalg.norm(w)
            if beta[j] <= 1e-14 * max(1.0, abs(alpha[j])):
                k_used = j + 1
                break
            V[j + 1] = w / beta[j]
        T = np.diag(alpha[:k_used]) + np.diag(beta[: k_used - 1], 1) + np.diag(beta[: k_used - 1], -1)
        evals, evecs = np.linalg.eigh(T)
        theta = float(evals[0])
        y = evecs[:, 0]
        v = y @ V[:k_used]
        v /= np.linalg.norm(v)
        scale = max(1.0, float(np.max(np.abs(evals))))
        res = abs(beta[k_used - 1] * y[-1])
        if k_used < m or k_used == n or res <= tol * scale:
            # breakdown means the Krylov space is invariant and the Ritz pair exact
            return theta, back(v), KrylovInfo(float(res), True, matvecs)
    return theta, back(v), KrylovInfo(float(res), res <= tol * scale, matvecs)


def iterative_linsolve(
    apply: Callable,
    rhs,
    guess=None,
    tol: float = 1e-10,
    max_iter: int = 100,
    restart: int = 30,
):
    """Solve ``apply(x) = rhs`` by restarted GMRES.

    The best iterate (smallest residual) is returned if the tolerance is not
    reached; ``info.converged`` is then False.

    Returns:
        ``(x, info)`` with ``info.residual`` the relative residual
        ``|apply(x) - rhs| / |rhs|``.
    """
    f, b, back = _wrap(apply, rhs)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        raise ValueError("rhs must be nonzero")
    if guess is None:
        x = np.zeros_like(b)
        r = b.copy()
        matvecs = 0
    else:
        x = _wrap(apply, guess)[1].copy()
        r = b - f(x)
        matvecs = 1
    rnorm = np.linalg.norm(r)
    best_x, best_r = x.copy(), rnorm
    n = b.size
    m = max(1, min(restart, n))
    it = 0
    while best_r > tol * bnorm and it < max_iter:
        V = np.empty((m + 1, n), dtype=DTYPE)
        Hs = np.zeros((m + 1, m), dtype=DTYPE)
        beta = rnorm
        V[0] = r / beta
        e1 = np.zeros(m + 1, dtype=DTYPE)
        e1[0] = beta
        k = 0
        y = np.zeros(0, dtype=DTYPE)
        lsq_res = beta
        for j in range(m):
            w = f(V[j])
            matvecs += 1
            it += 1
            h = V[: j + 1].conj() @ w
            w -= V[: j + 1].T @ h
            h2 = V[: j + 1].conj() @ w
            w -= V[: j + 1].T @ h2
            Hs[: j + 1, j] = h + h2
            Hs[j + 1, j] = np.linalg.norm(w)
            k = j + 1
            y, *_ = np.linalg.lstsq(Hs[: k + 1, :k], e1[: k + 1], rcond=None)
            lsq_res = np.linalg.norm(Hs[: k + 1, :k] @ y - e1[: k + 1])
            if Hs[j + 1, j] <= 1e-14 * beta or lsq_res <= tol * bnorm or it >= max_iter:
                break
            V[j + 1] = w / Hs[j + 1, j]
        x = x + y @ V[:k]
        r = b - f(x)
        matvecs += 1
        new_r = np.linalg.norm(r)
        stagnated = new_r >= 0.999 * rnorm
        rnorm = new_r
        if rnorm < best_r:
            best_x, best_r = x.copy(), rnorm
        if stagnated or Hs[k, k - 1] <= 1e-14 * beta:
            break
    rel = float(best_r / bnorm)
    return back(best_x), KrylovInfo(rel, rel <= tol, matvecs)


def expm_krylov(
    apply: Callable,
    v: np.ndarray,
    t: complex,
    krylov_dim: int = 30,
    tol: float = 1e-12,
):
    """``exp(t · A) v`` for Hermitian ``A`` by Lanczos, with time-step splitting.

    Returns:
        ``(w, info)``; ``info.converged`` is False if some sub-interval could
        not meet ``tol`` within ``krylov_dim`` vectors.
    """
    shape = v.shape
    w = np.asarray(v, dtype=DTYPE).ravel().copy()
    f = lambda x: np.array(apply(x.reshape(shape)), dtype=DTYPE).ravel()  # noqa: E731
    n = w.size
    m = max(1, min(krylov_dim, n))
    remaining = 1.0
    frac = 1.0
    matvecs = 0
    ok = True
    worst = 0.0
    while remaining > 1e-15:
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            break
        V = np.empty((m + 1, n), dtype=DTYPE)
        V[0] = w / nrm
        alpha = np.zeros(m)
        beta = np.zeros(m)
        k = m
        for j in range(m):
            u = f(V[j])
            matvecs += 1
            alpha[j] = np.vdot(V[j], u).real
            u -= V[: j + 1].T @ (V[: j + 1].conj() @ u)
            u -= V[: j + 1].T @ (V[: j + 1].conj() @ u)
            beta[j] = np.linalg.norm(u)
            if beta[j] <= 1e-14 * max(1.0, abs(alpha[j])):
                k = j + 1
                break
            V[j + 1] = u / beta[j]
        T = np.diag(alpha[:k]) + np.diag(beta[: k - 1], 1) + np.diag(beta[: k - 1], -1)
        exact = k < m or k == n
        step = min(frac, remaining)
        while True:
            c = scipy.linalg.expm(t * step * T)[:, 0]
            err = 0.0 if exact else abs(beta[k - 1] * c[-1]) * abs(t) * step
            if err <= tol or step <= 1e-6:
                break
            step /= 2
        if err > tol:
            ok = False
        worst = max(worst, err)
        w = nrm * (c @ V[:k])
        remaining -= step
        frac = step
    return w.reshape(shape), KrylovInfo(float(worst), ok, matvecs)
