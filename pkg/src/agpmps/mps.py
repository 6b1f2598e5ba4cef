"""Open-boundary matrix product states and operators.

Layout conventions:

* MPS site tensors are ``(left, phys, right)``.
* MPO site tensors are ``(left, out, in, right)``; ``O|psi>`` sums over ``in``.
* Site 0 is the most significant factor of dense vectors and matrices, so
  ``to_dense`` agrees with ``np.kron(op_0, op_1, ...)``.
* Doubled space: an operator on ``d``-dimensional sites is vectorized site by
  site into a ``d**2``-dimensional leg with index ``out + d * in`` (``out``
  fast). This is column-major stacking, so the superoperator built by
  :func:`kron_mpo` obeys ``kron_mpo(a, b) · vec(X) = vec(b X a^T)``.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .tensor import DTYPE, EXACT, TruncationPolicy, truncated_svd


class MPS:
    """Matrix product state with optional orthogonality-center bookkeeping.

    Attributes:
        tensors: list of ``(left, phys, right)`` arrays.
        center: site holding the non-isometric tensor, or None if unknown.
        discarded: total discarded weight of the operation that produced it.
    """

    def __init__(self, tensors: Sequence[np.ndarray], center: int | None = None, discarded: float = 0.0):
        self.tensors = [np.asarray(t, dtype=DTYPE) for t in tensors]
        if not self.tensors:
            raise ValueError("an MPS needs at least one site")
        for t in self.tensors:
            if t.ndim != 3:
                raise ValueError("MPS tensors must have 3 indices")
        if self.tensors[0].shape[0] != 1 or self.tensors[-1].shape[2] != 1:
            raise ValueError("boundary bonds must have dimension 1")
        for a, b in zip(self.tensors, self.tensors[1:]):
            if a.shape[2] != b.shape[0]:
                raise ValueError("bond dimensions of neighbouring tensors differ")
        self.center = center
        self.discarded = discarded

    @property
    def L(self) -> int:
        return len(self.tensors)

    def __len__(self):
        return len(self.tensors)

    @property
    def phys_dims(self) -> list[int]:
        return [t.shape[1] for t in self.tensors]

    @property
    def bond_dims(self) -> list[int]:
        return [t.shape[2] for t in self.tensors[:-1]]

    @property
    def max_bond_dim(self) -> int:
        return max(self.bond_dims, default=1)

    def copy(self) -> MPS:
        return MPS([t.copy() for t in self.tensors], self.center, self.discarded)

    def to_dense(self) -> np.ndarray:
        v = self.tensors[0][0]
        for t in self.tensors[1:]:
            v = np.tensordot(v, t, (-1, 0))
            v = v.reshape(-1, t.shape[2])
        return v[:, 0]

    @classmethod
    def from_dense(cls, vec: np.ndarray, phys_dims: Sequence[int], policy: TruncationPolicy = EXACT) -> MPS:
        """Exact (or truncated) MPS of a dense vector by successive SVDs."""
        vec = np.asarray(vec, dtype=DTYPE)
        if vec.size != math.prod(phys_dims):
            raise ValueError("vector size does not match physical dims")
        tensors = []
        rest = vec.reshape(1, -1)
        for d in phys_dims[:-1]:
            chi = rest.shape[0]
            u, s, vh, _ = truncated_svd(rest.reshape(chi * d, -1), policy)
            tensors.append(u.reshape(chi, d, len(s)))
            rest = s[:, None] * vh
        tensors.append(rest.reshape(rest.shape[0], phys_dims[-1], 1))
        return cls(tensors, center=len(phys_dims) - 1)

    @classmethod
    def product_state(cls, local_states: Sequence[np.ndarray]) -> MPS:
        return cls([np.asarray(v, dtype=DTYPE).reshape(1, -1, 1) for v in local_states], center=0)

    def __repr__(self):
        return f"MPS(L={self.L}, bonds={self.bond_dims}, center={self.center})"


class MPO:
    """Matrix product operator with ``(left, out, in, right)`` site tensors."""

    def __init__(self, tensors: Sequence[np.ndarray], discarded: float = 0.0):
        self.tensors = [np.asarray(t, dtype=DTYPE) for t in tensors]
        if not self.tensors:
            raise ValueError("an MPO needs at least one site")
        for t in self.tensors:
            if t.ndim != 4:
                raise ValueError("MPO tensors must have 4 indices")
        if self.tensors[0].shape[0] != 1 or self.tensors[-1].shape[3] != 1:
            raise ValueError("boundary bonds must have dimension 1")
        for a, b in zip(self.tensors, self.tensors[1:]):
            if a.shape[3] != b.shape[0]:
                raise ValueError("bond dimensions of neighbouring tensors differ")
        self.discarded = discarded

    @property
    def L(self) -> int:
        return len(self.tensors)

    def __len__(self):
        return len(self.tensors)

    @property
    def phys_dims(self) -> list[int]:
        return [t.shape[1] for t in self.tensors]

    @property
    def bond_dims(self) -> list[int]:
        return [t.shape[3] for t in self.tensors[:-1]]

    @property
    def max_bond_dim(self) -> int:
        return max(self.bond_dims, default=1)

    def copy(self) -> MPO:
        return MPO([t.copy() for t in self.tensors], self.discarded)

    def to_dense(self) -> np.ndarray:
        m = self.tensors[0][0]  # (out, in, right)
        for t in self.tensors[1:]:
            # (O, I, a) x (a, o, i, r) -> (O, o, I, i, r)
            m = np.tensordot(m, t, (-1, 0)).transpose(0, 2, 1, 3, 4)
            m = m.reshape(m.shape[0] * m.shape[1], m.shape[2] * m.shape[3], -1)
        return m[:, :, 0]

    def transpose(self) -> MPO:
        return MPO([t.transpose(0, 2, 1, 3) for t in self.tensors])

    def dagger(self) -> MPO:
        return MPO([t.transpose(0, 2, 1, 3).conj() for t in self.tensors])

    def __repr__(self):
        return f"MPO(L={self.L}, bonds={self.bond_dims})"


# --------------------------------------------------------------------------
# constructors
# --------------------------------------------------------------------------


def identity_mpo(L: int, d: int = 2) -> MPO:
    return MPO([np.eye(d, dtype=DTYPE).reshape(1, d, d, 1) for _ in range(L)])


def product_mpo(ops: Sequence[np.ndarray]) -> MPO:
    """Bond-dimension-1 MPO ``op_0 ⊗ op_1 ⊗ ...``."""
    return MPO([np.asarray(o, dtype=DTYPE).reshape(1, *np.shape(o), 1) for o in ops])


def zero_mpo(L: int, d: int = 2) -> MPO:
    return MPO([np.zeros((1, d, d, 1), dtype=DTYPE) for _ in range(L)])


def mpo_from_dense(mat: np.ndarray, phys_dims: Sequence[int], policy: TruncationPolicy = EXACT) -> MPO:
    """MPO of a dense matrix via the vectorized (doubled-space) SVD chain."""
    mat = np.asarray(mat, dtype=DTYPE)
    L = len(phys_dims)
    t = mat.reshape(*phys_dims, *phys_dims)
    # interleave to (o0, i0, o1, i1, ...) then fuse each (o_k, i_k) as in_k*d + out_k
    t = t.transpose([ax for k in range(L) for ax in (L + k, k)])
    vec = t.reshape(-1)
    return devectorize(MPS.from_dense(vec, [d * d for d in phys_dims], policy))


# --------------------------------------------------------------------------
# canonical forms and compression
# --------------------------------------------------------------------------


def _qr(mat):
    q, r = np.linalg.qr(mat)
    return q, r


def canonicalize(psi: MPS, center: int) -> MPS:
    """Return an equivalent MPS in mixed canonical form about ``center``."""
    L = psi.L
    if not 0 <= center < L:
        raise ValueError(f"center {center} out of range for L={L}")
    ts = [t.copy() for t in psi.tensors]
    start_left, start_right = 0, L - 1
    if psi.center is not None:
        # tensors are already isometric away from the old center
        start_left = min(psi.center, center)
        start_right = max(psi.center, center)
    for i in range(start_left, center):
        chi_l, d, chi_r = ts[i].shape
        q, r = _qr(ts[i].reshape(chi_l * d, chi_r))
        ts[i] = q.reshape(chi_l, d, -1)
        ts[i + 1] = np.tensordot(r, ts[i + 1], (1, 0))
    for i in range(start_right, center, -1):
        chi_l, d, chi_r = ts[i].shape
        q, r = _qr(ts[i].reshape(chi_l, d * chi_r).T)
        ts[i] = q.T.reshape(-1, d, chi_r)
        ts[i - 1] = np.tensordot(ts[i - 1], r.T, (2, 0))
    return MPS(ts, center=center, discarded=psi.discarded)


def norm(psi: MPS) -> float:
    if psi.center is not None:
        return float(np.linalg.norm(psi.tensors[psi.center]))
    return math.sqrt(max(inner(psi, psi).real, 0.0))


def normalize(psi: MPS) -> MPS:
    out = psi.copy() if psi.center is not None else canonicalize(psi, 0)
    c = out.center
    out.tensors[c] = out.tensors[c] / np.linalg.norm(out.tensors[c])
    return out


def compress(psi: MPS, policy: TruncationPolicy, center: int = 0) -> MPS:
    """Truncate all bonds of ``psi`` with SVDs in canonical form.

    The result's ``discarded`` attribute holds the summed relative weights.
    """
    L = psi.L
    ts = canonicalize(psi, L - 1).tensors
    disc = 0.0
    for i in range(L - 1, 0, -1):
        chi_l, d, chi_r = ts[i].shape
        u, s, vh, w = truncated_svd(ts[i].reshape(chi_l, d * chi_r), policy)
        disc += w
        ts[i] = vh.reshape(-1, d, chi_r)
        ts[i - 1] = np.tensordot(ts[i - 1], u * s, (2, 0))
    out = MPS(ts, center=0, discarded=disc)
    return canonicalize(out, center) if center else out


def compress_mpo(op: MPO, policy: TruncationPolicy) -> MPO:
    """Frobenius-optimal truncation of an MPO (compression of its vectorization)."""
    v = compress(vectorize(op), policy)
    out = devectorize(v)
    out.discarded = v.discarded
    # vectorize/devectorize is exact, so the norm carried in site 0 is preserved
    return out


# --------------------------------------------------------------------------
# contractions
# --------------------------------------------------------------------------


def _check_same_shape(a, b):
    if a.L != b.L:
        raise ValueError(f"length mismatch: {a.L} != {b.L}")
    if a.phys_dims != b.phys_dims:
        raise ValueError("physical dimensions differ")


def inner(phi: MPS, psi: MPS) -> complex:
    """``<phi|psi>`` by full contraction."""
    _check_same_shape(phi, psi)
    env = np.ones((1, 1), dtype=DTYPE)
    for a, b in zip(phi.tensors, psi.tensors):
        env = np.tensordot(env, b, (1, 0))  # (a', p, r)
        env = np.tensordot(a.conj(), env, ([0, 1], [0, 1]))  # (r_a, r_b)
    return complex(env[0, 0])


def _check_op(psi: MPS, op: MPO):
    if psi.L != op.L:
        raise ValueError(f"length mismatch: {psi.L} != {op.L}")
    if psi.phys_dims != [t.shape[2] for t in op.tensors]:
        raise ValueError("operator input dims do not match state")


def expect(psi: MPS, op: MPO) -> complex:
    """``<psi|op|psi>`` (no normalization)."""
    return sandwich(psi, op, psi)


def sandwich(bra: MPS, op: MPO, ket: MPS) -> complex:
    """``<bra|op|ket>``."""
    _check_op(ket, op)
    _check_same_shape(bra, ket)
    env = np.ones((1, 1, 1), dtype=DTYPE)
    for a, w, b in zip(bra.tensors, op.tensors, ket.tensors):
        env = left_env_step(env, a, w, b)
    return complex(env[0, 0, 0])


def expect2(psi: MPS, op: MPO, op2: MPO | None = None) -> complex:
    """``<psi|op2^† op|psi>`` with two MPO layers; ``op2`` defaults to ``op``.

    For Hermitian ``op`` this is ``<psi|op^2|psi>`` without forming ``op^2``.
    """
    op2 = op if op2 is None else op2
    _check_op(psi, op)
    _check_op(psi, op2)
    env = np.ones((1, 1, 1, 1), dtype=DTYPE)  # (bra, w2*, w1, ket)
    for a, w2, w1, b in zip(psi.tensors, op2.tensors, op.tensors, psi.tensors):
        env = np.tensordot(env, b, (3, 0))  # (a, v, u, i, r)
        env = np.tensordot(env, w1, ([2, 3], [0, 2]))  # (a, v, r, o, u')
        env = np.tensordot(env, w2.conj(), ([1, 3], [0, 1]))  # (a, r, u', s, v')
        env = np.tensordot(env, a.conj(), ([0, 3], [0, 1]))  # (r, u', v', a')
        env = env.transpose(3, 2, 1, 0)
    return complex(env[0, 0, 0, 0])


def variance(psi: MPS, op: MPO) -> float:
    """``<op^2> - <op>^2`` of a normalized state for Hermitian ``op``."""
    n2 = inner(psi, psi).real
    e = expect(psi, op).real / n2
    e2 = expect2(psi, op).real / n2
    return e2 - e * e


def left_env_step(env, bra, w, ket):
    """Extend a ``(bra, mpo, ket)`` left environment by one site."""
    t = np.tensordot(env, ket, (2, 0))  # (b, w, p, k)
    t = np.tensordot(t, w, ([1, 2], [0, 2]))  # (b, k, o, w')
    t = np.tensordot(t, bra.conj(), ([0, 2], [0, 1]))  # (k, w', b')
    return t.transpose(2, 1, 0)


def right_env_step(env, bra, w, ket):
    """Extend a ``(bra, mpo, ket)`` right environment by one site."""
    t = np.tensordot(ket, env, (2, 2))  # (k, p, b, w)
    t = np.tensordot(t, w, ([1, 3], [2, 3]))  # (k, b, w', o)
    t = np.tensordot(t, bra.conj(), ([1, 3], [2, 1]))  # (k, w', b')
    return t.transpose(2, 1, 0)


def apply_mpo(op: MPO, psi: MPS, policy: TruncationPolicy = EXACT) -> MPS:
    """``op|psi>`` by exact site-wise contraction followed by compression."""
    _check_op(psi, op)
    ts = []
    for w, a in zip(op.tensors, psi.tensors):
        t = np.tensordot(w, a, (2, 1))  # (wl, o, wr, al, ar)
        t = t.transpose(0, 3, 1, 2, 4)
        ts.append(t.reshape(t.shape[0] * t.shape[1], t.shape[2], -1))
    return compress(MPS(ts), policy)


# --------------------------------------------------------------------------
# linear combinations and products
# --------------------------------------------------------------------------


def _direct_sum(ta: list[np.ndarray], tb: list[np.ndarray]) -> list[np.ndarray]:
    L = len(ta)
    if L == 1:
        return [ta[0] + tb[0]]
    out = []
    for i, (a, b) in enumerate(zip(ta, tb)):
        la, ra = a.shape[0], a.shape[-1]
        lb, rb = b.shape[0], b.shape[-1]
        mid = a.shape[1:-1]
        if i == 0:
            t = np.zeros((1, *mid, ra + rb), dtype=DTYPE)
            t[..., :ra] = a
            t[..., ra:] = b
        elif i == L - 1:
            t = np.zeros((la + lb, *mid, 1), dtype=DTYPE)
            t[:la] = a
            t[la:] = b
        else:
            t = np.zeros((la + lb, *mid, ra + rb), dtype=DTYPE)
            t[:la, ..., :ra] = a
            t[la:, ..., ra:] = b
        out.append(t)
    return out


def add(a, b, policy: TruncationPolicy | None = EXACT):
    """``a + b`` for two MPS or two MPO, compressed with ``policy``.

    Pass ``policy=None`` to skip compression and keep the direct-sum bonds.
    """
    _check_same_shape(a, b)
    if type(a) is not type(b):
        raise TypeError("cannot add an MPS and an MPO")
    ts = _direct_sum(a.tensors, b.tensors)
    if isinstance(a, MPS):
        out = MPS(ts)
        return out if policy is None else compress(out, policy)
    out = MPO(ts)
    return out if policy is None else compress_mpo(out, policy)


def scale(a, c: complex):
    """``c · a`` for an MPS or MPO (the factor goes into one site tensor)."""
    out = a.copy()
    site = out.center if isinstance(out, MPS) and out.center is not None else 0
    out.tensors[site] = out.tensors[site] * c
    return out


def sum_all(terms: Sequence, coeffs: Sequence[complex] | None = None, policy: TruncationPolicy = EXACT):
    """Linear combination of several MPS/MPO with one final compression."""
    coeffs = [1.0] * len(terms) if coeffs is None else coeffs
    acc = scale(terms[0], coeffs[0])
    for t, c in zip(terms[1:], coeffs[1:]):
        acc = add(acc, scale(t, c), policy=None)
    if isinstance(acc, MPS):
        return compress(acc, policy)
    return compress_mpo(acc, policy)


def mpo_product(a: MPO, b: MPO, policy: TruncationPolicy = TruncationPolicy(1e-12)) -> MPO:
    """Operator product ``a · b`` (``b`` acts first), compressed with ``policy``."""
    if a.L != b.L:
        raise ValueError(f"length mismatch: {a.L} != {b.L}")
    ts = []
    for wa, wb in zip(a.tensors, b.tensors):
        if wa.shape[2] != wb.shape[1]:
            raise ValueError("physical dimensions differ")
        t = np.tensordot(wa, wb, (2, 1))  # (la, o, ra, lb, i, rb)
        t = t.transpose(0, 3, 1, 4, 2, 5)
        la, lb, o, i, ra, rb = t.shape
        ts.append(t.reshape(la * lb, o, i, ra * rb))
    out = MPO(ts)
    return compress_mpo(out, policy) if policy is not None else out


def commutator(a: MPO, b: MPO, policy: TruncationPolicy = TruncationPolicy(1e-12)) -> MPO:
    """``[a, b] = ab - ba``."""
    return add(mpo_product(a, b, policy), scale(mpo_product(b, a, policy), -1.0), policy)


def kron_mpo(a: MPO, b: MPO) -> MPO:
    """Doubled-space superoperator with ``kron_mpo(a, b) vec(X) = vec(b X a^T)``."""
    if a.L != b.L:
        raise ValueError(f"length mismatch: {a.L} != {b.L}")
    ts = []
    for wa, wb in zip(a.tensors, b.tensors):
        da, db = wa.shape[1], wb.shape[1]
        # W[(la,lb), q*d + p, t*d + s, (ra,rb)] = a[la,q,t,ra] * b[lb,p,s,rb]
        t = np.einsum("aqtr,bpsR->abqptsrR", wa, wb)
        la, lb, _, _, _, _, ra, rb = t.shape
        ts.append(t.reshape(la * lb, da * db, wa.shape[2] * wb.shape[2], ra * rb))
    return MPO(ts)


def vectorize(op: MPO) -> MPS:
    """Operator to doubled-space state, leg index ``out + d * in``."""
    ts = []
    for w in op.tensors:
        l, o, i, r = w.shape
        ts.append(w.transpose(0, 2, 1, 3).reshape(l, i * o, r))
    return MPS(ts)


def devectorize(v: MPS) -> MPO:
    """Inverse of :func:`vectorize` (square physical legs assumed)."""
    ts = []
    for t in v.tensors:
        l, dd, r = t.shape
        d = math.isqrt(dd)
        if d * d != dd:
            raise ValueError(f"doubled leg of dimension {dd} is not a square")
        ts.append(t.reshape(l, d, d, r).transpose(0, 2, 1, 3))
    return MPO(ts, discarded=v.discarded)


def frobenius_inner(a: MPO, b: MPO) -> complex:
    """``Tr(a^† b)``."""
    return inner(vectorize(a), vectorize(b))


def frobenius_norm(op: MPO) -> float:
    return math.sqrt(max(frobenius_inner(op, op).real, 0.0))


# --------------------------------------------------------------------------
# random states
# --------------------------------------------------------------------------


def haar_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_mps(L: int, physical_dim: int = 2, bond_dim: int = 10, seed=None) -> MPS:
    """Random normalized MPS from a shallow random circuit.

    A random product state is followed by ``ceil(log2(bond_dim))`` brickwork
    layers of Haar-random two-site unitaries, truncating bonds to
    ``bond_dim``. Deterministic for a given ``seed``.
    """
    if bond_dim < 1:
        raise ValueError("bond_dim must be >= 1")
    rng = np.random.default_rng(seed)
    d = physical_dim
    locs = []
    for _ in range(L):
        v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        locs.append(v / np.linalg.norm(v))
    psi = MPS.product_state(locs)
    layers = math.ceil(math.log2(bond_dim)) if bond_dim > 1 else 0
    policy = TruncationPolicy(0.0, bond_dim)
    ts = psi.tensors
    for _layer in range(layers):
        for parity in (0, 1):
            # center walks left to right; gates act on bonds (i, i+1) with i % 2 == parity
            center = 0
            for i in range(parity, L - 1, 2):
                while center < i:
                    chi_l, dd, chi_r = ts[center].shape
                    q, r = _qr(ts[center].reshape(chi_l * dd, chi_r))
                    ts[center] = q.reshape(chi_l, dd, -1)
                    ts[center + 1] = np.tensordot(r, ts[center + 1], (1, 0))
                    center += 1
                gate = haar_unitary(d * d, rng).reshape(d, d, d, d)
                theta = np.tensordot(ts[i], ts[i + 1], (2, 0))  # (l, s1, s2, r)
                theta = np.tensordot(gate, theta, ([2, 3], [1, 2])).transpose(2, 0, 1, 3)
                chi_l, _, _, chi_r = theta.shape
                u, s, vh, _ = truncated_svd(theta.reshape(chi_l * d, d * chi_r), policy)
                ts[i] = u.reshape(chi_l, d, -1)
                ts[i + 1] = (s[:, None] * vh).reshape(-1, d, chi_r)
                center = i + 1
            psi = canonicalize(MPS(ts), 0)
            ts = psi.tensors
    return normalize(canonicalize(MPS(ts), 0))
