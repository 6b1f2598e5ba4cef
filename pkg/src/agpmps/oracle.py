"""Exact reference results: free-fermion TFIM spectra and dense diagonalization."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .models import ModelFamily

DEGENERACY_TOL = 1e-12


# --------------------------------------------------------------------------
# free fermions
# --------------------------------------------------------------------------


def majorana_matrix(L: int, g: float) -> np.ndarray:
    """Real antisymmetric ``M`` with ``H_TFIM = (i/4) sum_ab M_ab c_a c_b``.

    Majoranas ``c_{2j} = (prod_{k<j} Z_k) X_j`` and ``c_{2j+1} = (prod_{k<j} Z_k) Y_j``,
    so ``Z_j = -i c_{2j} c_{2j+1}`` and ``X_j X_{j+1} = -i c_{2j+1} c_{2j+2}``.
    """
    M = np.zeros((2 * L, 2 * L))
    for j in range(L):
        M[2 * j, 2 * j + 1] = -2.0 * g
        if j < L - 1:
            M[2 * j + 1, 2 * j + 2] = -2.0
    return M - M.T


@dataclass
class FreeFermionSpectrum:
    """Single-particle data of the open TFIM chain.

    Many-body energies are ``E = -sum(eps)/1 + 2 sum_{k occupied} eps_k`` with
    ``eps`` the single-particle energies; the vacuum has parity
    ``vacuum_parity`` and each occupied mode flips it.
    """

    L: int
    g: float
    single_particle_energies: np.ndarray
    vacuum_parity: int
    vacuum_energy: float = field(init=False)

    def __post_init__(self):
        self.vacuum_energy = -float(np.sum(self.single_particle_energies))

    def energy(self, occupied) -> float:
        return self.vacuum_energy + 2.0 * float(sum(self.single_particle_energies[k] for k in occupied))

    def parity(self, occupied) -> int:
        return self.vacuum_parity * (-1) ** len(occupied)


def free_fermion_spectrum(L: int, g: float) -> FreeFermionSpectrum:
    """Diagonalize the Majorana quadratic form by a real Schur decomposition."""
    M = majorana_matrix(L, g)
    T, Z = scipy.linalg.schur(M, output="real")
    rows = Z.T  # rotated Majoranas c' = rows @ c, with rows M rows^T = T
    pairs, lam, zeros = [], [], []
    j, n = 0, 2 * L
    while j < n:
        if j + 1 < n and T[j + 1, j] != 0.0:
            b = T[j, j + 1]
            pairs.append((j, j + 1) if b >= 0 else (j + 1, j))
            lam.append(abs(b))
            j += 2
        else:
            zeros.append(j)  # exact zero modes appear as 1x1 blocks
            j += 1
    for a, b in zip(zeros[::2], zeros[1::2]):
        pairs.append((a, b))
        lam.append(0.0)
    W = np.array([rows[i] for p in pairs for i in p])
    # mode term (i/2) lam c'_a c'_b = -(lam/2) q with q = -i c'_a c'_b = +-1,
    # and prod_j (-i c_2j c_2j+1) = det(W) prod_k q_k
    eps = np.array(lam) / 2.0
    P_vac = int(round(np.linalg.det(W)))
    return FreeFermionSpectrum(L, g, np.sort(eps), P_vac)


def ff_agp_scaled_norm(L: int, g: float, tol: float = 1e-9) -> float:
    """``|A|_F / sqrt(L 2^L)`` of the exact TFIM gauge potential, from free fermions.

    The gauge potential of the quadratic form is itself quadratic,
    ``A = (1/4) sum K_ab c_a c_b`` with ``K`` the single-particle gauge
    potential of ``h = i M``, and ``Tr(A^2) / 2^L = |K|_F^2 / 8``. Pairs of
    single-particle levels closer than ``tol`` are excluded.
    """
    h = 1j * majorana_matrix(L, g)
    dh = 1j * (majorana_matrix(L, 1.0) - majorana_matrix(L, 0.0))
    e, v = np.linalg.eigh(h)
    d = v.conj().T @ dh @ v
    de = e[None, :] - e[:, None]
    mask = np.abs(de) > tol
    k2 = float(np.sum(np.abs(d[mask] / de[mask]) ** 2))
    return float(np.sqrt(k2 / 8.0 / L))


def _lowest_subsets(eps: np.ndarray):
    """Yield occupation tuples in nondecreasing order of ``sum eps``.

    ``eps`` must be sorted ascending and nonnegative.
    """
    yield ()
    n = len(eps)
    if n == 0:
        return
    heap = [(eps[0], (0,))]
    while heap:
        s, occ = heapq.heappop(heap)
        yield occ
        last = occ[-1]
        if last + 1 < n:
            heapq.heappush(heap, (s + eps[last + 1], occ + (last + 1,)))
            heapq.heappush(heap, (s - eps[last] + eps[last + 1], occ[:-1] + (last + 1,)))


def ff_low_energies(L: int, g: float, parity: str | None, k: int) -> np.ndarray:
    """The ``k`` lowest TFIM energies in a parity sector (``None`` or "both" pools them)."""
    if L < 2 or k < 1:
        raise ValueError("need L >= 2 and k >= 1")
    sector = {"even": 1, "odd": -1, None: 0, "both": 0, "none": 0}[parity]
    size = 2**L if sector == 0 else 2 ** (L - 1)
    if k > size:
        raise ValueError(f"k={k} exceeds the sector dimension {size}")
    spec = free_fermion_spectrum(L, g)
    out = []
    for occ in _lowest_subsets(spec.single_particle_energies):
        if sector == 0 or spec.parity(occ) == sector:
            out.append(spec.energy(occ))
            if len(out) == k:
                break
    return np.sort(np.array(out))


# --------------------------------------------------------------------------
# dense exact diagonalization
# --------------------------------------------------------------------------


def dense_hamiltonian(model: ModelFamily, lam: float):
    H, dH = model.build(lam)
    Hd, dHd = H.to_dense(), dH.to_dense()
    if np.abs(Hd.imag).max() == 0 and np.abs(dHd.imag).max() == 0:
        return Hd.real, dHd.real
    return Hd, dHd


def ed_spectrum(model: ModelFamily, lam: float):
    """All eigenpairs of the model's dense Hamiltonian (``L <= 14``)."""
    if model.L > 14:
        raise ValueError("exact diagonalization limited to L <= 14")
    Hd, _ = dense_hamiltonian(model, lam)
    return np.linalg.eigh(Hd)


@dataclass
class SpectralAgp:
    """Exact gauge potential in the computational basis.

    Off-diagonal eigenbasis elements are ``i <m|dH|n> / (e_n - e_m)``; the
    diagonal and pairs closer than the degeneracy tolerance are set to zero
    (the latter listed in ``degenerate_pairs``).
    """

    matrix: np.ndarray
    energies: np.ndarray
    eigenvectors: np.ndarray
    eigenbasis_matrix: np.ndarray
    degenerate_pairs: list
    fd_error: float | None = None


def spectral_agp(Hd: np.ndarray, dHd: np.ndarray, tol: float = DEGENERACY_TOL) -> SpectralAgp:
    e, v = np.linalg.eigh(Hd)
    d = v.conj().T @ dHd @ v
    de = e[None, :] - e[:, None]  # e_n - e_m at [m, n]
    mask = np.abs(de) > tol
    A = np.zeros(d.shape, dtype=complex)
    A[mask] = 1j * d[mask] / de[mask]
    m_idx, n_idx = np.nonzero(~mask)
    degenerate = [(int(a), int(b)) for a, b in zip(m_idx, n_idx) if a < b]
    return SpectralAgp(v @ A @ v.conj().T, e, v, A, degenerate)


def _aligned(vecs, ref):
    # phase of each column fixed by its overlap with the reference column
    ov = np.einsum("ij,ij->j", ref.conj(), vecs)
    return vecs * np.exp(-1j * np.angle(ov))[None, :]


def ed_agp(model: ModelFamily, lam: float, fd_eps: float = 1e-5, verify: bool = True) -> SpectralAgp:
    """Exact gauge potential for ``L <= 12``.

    With ``verify``, checks ``i d|n>/dlam = A|n>`` for every eigenstate whose
    nearest level is further than ``1e-3`` away, by central differences of
    eigenvectors phase-aligned to those at ``lam`` (component orthogonal to
    ``|n>`` compared).
    """
    if model.L > 12:
        raise ValueError("exact gauge potential limited to L <= 12")
    Hd, dHd = dense_hamiltonian(model, lam)
    agp = spectral_agp(Hd, dHd)
    if verify:
        _, vp = np.linalg.eigh(dense_hamiltonian(model, lam + fd_eps)[0])
        _, vm = np.linalg.eigh(dense_hamiltonian(model, lam - fd_eps)[0])
        v0 = agp.eigenvectors.astype(complex)
        vp, vm = _aligned(vp.astype(complex), v0), _aligned(vm.astype(complex), v0)
        e = agp.energies
        gaps = np.full(len(e), np.inf)
        gaps[1:] = np.minimum(gaps[1:], np.diff(e))
        gaps[:-1] = np.minimum(gaps[:-1], np.diff(e))
        worst = 0.0
        for n in np.nonzero(gaps > 1e-3)[0]:
            deriv = 1j * (vp[:, n] - vm[:, n]) / (2 * fd_eps)
            diff = deriv - agp.matrix @ v0[:, n]
            diff -= v0[:, n] * np.vdot(v0[:, n], diff)
            worst = max(worst, float(np.linalg.norm(diff)))
        agp.fd_error = worst
    return agp


def action(X: np.ndarray, Hd: np.ndarray, dHd: np.ndarray) -> float:
    """``|dH + i[X, H]|_F^2`` for dense matrices."""
    G = dHd + 1j * (X @ Hd - Hd @ X)
    return float(np.vdot(G, G).real)


def exact_evolution(A: np.ndarray, psi: np.ndarray, delta: float) -> np.ndarray:
    """``exp(-i A delta) psi`` for a dense Hermitian generator."""
    return scipy.linalg.expm(-1j * delta * A) @ psi
