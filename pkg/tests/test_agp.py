import numpy as np
import pytest

from agpmps.agp import (
    action,
    agp_schedule,
    build_rhs,
    build_superoperator,
    commutator_guess,
    compute_agp,
    scaled_norm,
)
from agpmps.models import SX, SY, SZ, ModelFamily, build_tfim
from agpmps.mps import (
    add,
    apply_mpo,
    devectorize,
    frobenius_norm,
    mpo_from_dense,
    product_mpo,
    scale,
    vectorize,
    zero_mpo,
)
from agpmps.oracle import dense_hamiltonian, spectral_agp
from agpmps.tensor import TruncationPolicy

K2 = np.kron(SY, SX) + np.kron(SX, SY)


def herm(rng, n):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return a + a.conj().T


def test_commuting_single_site_guess_is_zero():
    X0, alpha = commutator_guess(product_mpo([0.7 * SZ]), product_mpo([SZ]))
    assert alpha == 0.0
    assert frobenius_norm(X0) == 0.0


@pytest.mark.parametrize("g", [0.5, 1.0, 2.0])
def test_first_order_coefficient_closed_form(g):
    H, dH = build_tfim(2, g)
    X0, alpha = commutator_guess(H, dH)
    assert abs(alpha - (-1 / (4 * (1 + 4 * g**2)))) <= 1e-12


def test_first_order_guess_is_exact_for_two_sites():
    H, dH = build_tfim(2, 1.0)
    X0, alpha = commutator_guess(H, dH)
    assert alpha == pytest.approx(-0.05, abs=1e-14)
    assert np.allclose(X0.to_dense(), -K2 / 10, atol=1e-12)


def test_superoperator_kernel_contains_h():
    H, _ = build_tfim(5, 0.8)
    out = apply_mpo(build_superoperator(H), vectorize(H))
    assert np.linalg.norm(out.to_dense()) <= 1e-8


def test_superoperator_dense_three_sites():
    rng = np.random.default_rng(0)
    H, _ = build_tfim(3, 1.3)
    Hd = H.to_dense()
    X = herm(rng, 8)
    got = devectorize(apply_mpo(build_superoperator(H), vectorize(mpo_from_dense(X, [2] * 3)))).to_dense()
    ref = X @ Hd @ Hd + Hd @ Hd @ X - 2 * Hd @ X @ Hd
    assert np.linalg.norm(got - ref) <= 1e-8 * np.linalg.norm(ref)


def test_superoperator_is_psd():
    H, _ = build_tfim(2, 0.9)
    assert np.linalg.eigvalsh(build_superoperator(H).to_dense())[0] >= -1e-10


def test_rhs_cases():
    z = product_mpo([SZ, SZ])
    assert frobenius_norm(devectorize(build_rhs(z, scale(z, 2.0)))) <= 1e-12
    H, dH = build_tfim(2, 1.0)
    assert np.allclose(devectorize(build_rhs(H, dH)).to_dense(), -2 * K2)
    rng = np.random.default_rng(1)
    Hd, dHd = herm(rng, 16), herm(rng, 16)
    got = devectorize(build_rhs(mpo_from_dense(Hd, [2] * 4), mpo_from_dense(dHd, [2] * 4))).to_dense()
    ref = 1j * (dHd @ Hd - Hd @ dHd)
    assert np.linalg.norm(got - ref) <= 1e-8 * np.linalg.norm(ref)


def test_two_site_agp():
    H, dH = build_tfim(2, 1.0)
    res = compute_agp(H, dH, D=4)
    A = res.agp.to_dense()
    assert A[3, 0] == pytest.approx(-0.2j, abs=1e-8)
    assert res.rel_residual <= 1e-8
    assert res.norm == pytest.approx(np.sqrt(8) / 10, rel=1e-8)
    assert res.scaled_norm == pytest.approx(0.1, rel=1e-8)


def test_scaled_norm_values():
    assert scaled_norm(zero_mpo(4)) == 0.0
    assert scaled_norm(mpo_from_dense(-K2 / 10, [2, 2])) == pytest.approx(0.1)


def test_commuting_pair_gives_zero_agp():
    L = 4
    H = product_mpo([SZ] * L)
    res = compute_agp(H, scale(H, 0.5), D=8)
    assert res.norm == 0.0
    assert res.rel_residual == 0.0


@pytest.mark.parametrize("g", [0.6, 1.0, 1.8])
def test_agp_matches_spectral_oracle(g):
    L = 6
    H, dH = build_tfim(L, g)
    res = compute_agp(H, dH, D=64, schedule=agp_schedule(64, 1e-12, 40, rel_tol=1e-6, target=1e-10))
    Hd, dHd = dense_hamiltonian(ModelFamily("TFIM", L), g)
    ex = spectral_agp(Hd, dHd)
    v = ex.eigenvectors
    got = v.conj().T @ res.agp.to_dense() @ v
    mask = ~np.eye(len(v), dtype=bool)
    for m, n in ex.degenerate_pairs:
        mask[m, n] = mask[n, m] = False
    big = mask & (np.abs(ex.eigenbasis_matrix) > 1e-6 * np.abs(ex.eigenbasis_matrix).max())
    rel = np.abs(got[big] - ex.eigenbasis_matrix[big]) / np.abs(ex.eigenbasis_matrix[big])
    assert rel.max() <= 1e-4


@pytest.mark.parametrize("g", [0.5, 1.0, 2.0])
def test_action_not_above_first_order_guess(g):
    H, dH = build_tfim(8, g)
    X0, _ = commutator_guess(H, dH)
    res = compute_agp(H, dH, D=20)
    s0, s = action(X0, H, dH), action(res.agp, H, dH)
    assert s <= s0 + 1e-8 * frobenius_norm(dH) ** 2


def test_result_is_hermitian():
    H, dH = build_tfim(8, 1.2)
    res = compute_agp(H, dH, D=20)
    A = res.agp.to_dense()
    assert np.linalg.norm(A - A.conj().T) <= 1e-10 * np.linalg.norm(A)
    assert res.antihermitian < 1e-4
    assert res.bond_dim <= 20


def test_residual_drops_with_bond_dimension():
    H, dH = build_tfim(10, 2.0)
    r5 = compute_agp(H, dH, D=5, schedule=agp_schedule(5, 1e-10)).rel_residual
    r40 = compute_agp(H, dH, D=40, schedule=agp_schedule(40, 1e-10)).rel_residual
    assert r40 < r5


@pytest.mark.parametrize("g", [0.5, 1.0, 2.0])
def test_norm_converges_in_bond_dimension(g):
    H, dH = build_tfim(10, g)
    A = build_superoperator(H)
    norms, guess = {}, None
    for D in (5, 10, 20, 40, 80, 160):
        res = compute_agp(H, dH, guess, D, agp_schedule(D, 1e-10), superoperator=A)
        norms[D], guess = res.norm, res.agp
    ref = norms[160]
    errs = [abs(norms[D] - ref) / ref for D in (5, 10, 20, 40, 80)]
    assert all(b <= a + 1e-7 for a, b in zip(errs, errs[1:]))
    assert errs[-1] <= 1e-6


def test_warm_start_from_nearby_solution():
    H, dH = build_tfim(8, 1.5)
    prev = compute_agp(*build_tfim(8, 1.55), D=20).agp
    warm = compute_agp(H, dH, guess=prev, D=20)
    cold = compute_agp(H, dH, D=20)
    assert warm.rel_residual <= max(10 * cold.rel_residual, 1e-8)
    assert warm.scaled_norm == pytest.approx(cold.scaled_norm, rel=1e-4)


def test_action_via_mpo_algebra_matches_dense():
    H, dH = build_tfim(4, 0.7)
    X = mpo_from_dense(herm(np.random.default_rng(2), 16), [2] * 4)
    G = dH.to_dense() + 1j * (X.to_dense() @ H.to_dense() - H.to_dense() @ X.to_dense())
    assert action(X, H, dH) == pytest.approx(np.vdot(G, G).real, rel=1e-10)
    assert action(add(X, scale(X, -1.0), None), H, dH) == pytest.approx(frobenius_norm(dH) ** 2)
