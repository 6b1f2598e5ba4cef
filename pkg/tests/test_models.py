import numpy as np
import pytest

from agpmps.models import (
    ID,
    SX,
    SZ,
    ModelFamily,
    SectorSpec,
    build_ltfim,
    build_tfim,
    parity_mpo,
    sector_penalized,
)
from agpmps.mps import MPS, expect, random_mps
from agpmps.oracle import ff_low_energies


def site_op(op, i, L):
    out = np.ones((1, 1))
    for j in range(L):
        out = np.kron(out, op if j == i else ID)
    return out


def pauli_sum(L, g, h=0.0):
    H = sum(site_op(SX, i, L) @ site_op(SX, i + 1, L) for i in range(L - 1))
    H = H + g * sum(site_op(SZ, i, L) for i in range(L))
    return H + h * sum(site_op(SX, i, L) for i in range(L))


@pytest.mark.parametrize("L", [2, 3, 4, 5, 6])
def test_mpo_equals_pauli_sum(L):
    g, h = 0.73, 0.41
    H, dH = build_tfim(L, g)
    assert np.array_equal(H.to_dense(), pauli_sum(L, g))
    assert np.array_equal(dH.to_dense(), sum(site_op(SZ, i, L) for i in range(L)))
    Hl, dHl = build_ltfim(L, g, h)
    assert np.allclose(Hl.to_dense(), pauli_sum(L, g, h), atol=1e-15)
    assert np.array_equal(dHl.to_dense(), dH.to_dense())


def test_two_site_tfim_spectrum():
    H, _ = build_tfim(2, 1.0)
    assert np.allclose(np.linalg.eigvalsh(H.to_dense()), [-np.sqrt(5), -1, 1, np.sqrt(5)])


def test_classical_limit_commutes_with_x():
    H = build_tfim(4, 0.0)[0].to_dense()
    for i in range(4):
        x = site_op(SX, i, 4)
        assert np.allclose(H @ x, x @ H)


def test_ground_energy_l10_matches_free_fermions():
    H = build_tfim(10, 2.0)[0].to_dense()
    e0 = np.linalg.eigvalsh(H)[0]
    assert abs(e0 - ff_low_energies(10, 2.0, None, 1)[0]) <= 1e-10


def test_ltfim_reductions():
    assert np.allclose(build_ltfim(4, 0.6, 0.0)[0].to_dense(), build_tfim(4, 0.6)[0].to_dense())
    H = build_ltfim(2, 0.0, 1.0)[0].to_dense()
    assert np.allclose(np.linalg.eigvalsh(H), [-1, -1, -1, 3])


def test_ltfim_energy_matches_dense():
    H = build_ltfim(8, 1.0, 0.5)[0]
    psi = random_mps(8, bond_dim=6, seed=3)
    v = psi.to_dense()
    assert abs(expect(psi, H) - np.vdot(v, H.to_dense() @ v)) <= 1e-10


@pytest.mark.parametrize("L", [2, 4, 6])
def test_parity_symmetry(L):
    P = parity_mpo(L).to_dense()
    H, dH = (m.to_dense() for m in build_tfim(L, 0.8))
    assert np.abs(H @ P - P @ H).max() <= 1e-12
    assert np.abs(dH @ P - P @ dH).max() <= 1e-12
    Hl = build_ltfim(L, 0.8, 0.5)[0].to_dense()
    assert np.abs(Hl @ P - P @ Hl).max() > 1e-3


def test_parity_eigenvalues():
    up, down = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    P = parity_mpo(2)
    assert expect(MPS.product_state([up, up]), P).real == pytest.approx(1.0)
    assert expect(MPS.product_state([up, down]), P).real == pytest.approx(-1.0)


def test_penalty_leaves_sector_untouched():
    L = 4
    H = build_tfim(L, 0.9)[0]
    Hp = sector_penalized(H, SectorSpec("even")).to_dense()
    Hd, P = H.to_dense(), parity_mpo(L).to_dense()
    e, v = np.linalg.eigh(Hd)
    for n in range(len(e)):
        vec = v[:, n]
        if np.vdot(vec, P @ vec).real > 0.5:
            assert np.allclose(Hp @ vec, e[n] * vec, atol=1e-10)
        else:
            assert np.allclose(Hp @ vec, (e[n] + 4 * L) * vec, atol=1e-10)


def test_odd_sector_ground_state_l2():
    Hp = sector_penalized(build_tfim(2, 1.0)[0], SectorSpec("odd")).to_dense()
    assert np.linalg.eigvalsh(Hp)[0] == pytest.approx(-1.0)


@pytest.mark.parametrize("L", [4, 6, 8])
@pytest.mark.parametrize("g", [0.5, 1.0, 2.0])
def test_penalty_keeps_other_sector_above_targets(L, g):
    k = 10
    for parity in ("even", "odd"):
        Hp = sector_penalized(build_tfim(L, g)[0], SectorSpec(parity)).to_dense()
        e = np.linalg.eigvalsh(Hp)
        inside = ff_low_energies(L, g, parity, min(k, 2 ** (L - 1)))
        other = "odd" if parity == "even" else "even"
        lowest_outside = ff_low_energies(L, g, other, 1)[0] + SectorSpec(parity).strength(L)
        assert lowest_outside > inside[-1]
        assert np.allclose(e[: len(inside)], inside, atol=1e-10)


def test_validation():
    with pytest.raises(ValueError):
        ModelFamily("XXZ", 4)
    with pytest.raises(ValueError):
        SectorSpec("up")
    with pytest.raises(ValueError):
        build_tfim(1, 1.0)
    assert ModelFamily("TFIM", 4).conserves_parity
    assert not ModelFamily("LTFIM", 4, 0.5).conserves_parity
