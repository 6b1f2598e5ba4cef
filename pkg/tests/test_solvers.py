import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agpmps.models import SectorSpec, build_tfim, sector_penalized
from agpmps.mps import MPO, add, identity_mpo, inner, mpo_product, random_mps
from agpmps.oracle import ff_low_energies
from agpmps.solvers import PenaltySet, SweepSchedule, dmrg, dmrg_excited_set, mps_linsolve
from agpmps.tensor import TruncationPolicy

TIGHT = SweepSchedule(max_sweeps=30, policy=TruncationPolicy(1e-12, 100), rel_energy_tol=1e-13)


def test_two_site_ground_state():
    H, _ = build_tfim(2, 1.0)
    res = dmrg(H, random_mps(2, bond_dim=2, seed=0), TIGHT)
    assert res.energy == pytest.approx(-np.sqrt(5), abs=1e-10)


def test_even_sector_ground_state_l12():
    Hp = sector_penalized(build_tfim(12, 2.0)[0], SectorSpec("even"))
    res = dmrg(Hp, random_mps(12, bond_dim=8, seed=1), TIGHT)
    assert abs(res.energy - ff_low_energies(12, 2.0, "even", 1)[0]) <= 1e-9
    assert res.converged


def test_penalty_gives_first_excited_state():
    L = 12
    H, _ = build_tfim(L, 2.0)
    gs = dmrg(H, random_mps(L, bond_dim=8, seed=2), TIGHT)
    ex = dmrg(H, random_mps(L, bond_dim=8, seed=3), TIGHT, PenaltySet([gs.psi], 4.0 * L))
    assert abs(ex.energy - ff_low_energies(L, 2.0, None, 2)[1]) <= 1e-8
    assert abs(inner(gs.psi, ex.psi)) < 1e-5


def test_excited_set_two_sites():
    H, _ = build_tfim(2, 1.0)
    inits = [random_mps(2, bond_dim=2, seed=s) for s in range(4)]
    out = dmrg_excited_set(H, 4, inits, TIGHT, w=20.0)
    assert np.allclose(out.energies, [-np.sqrt(5), -1, 1, np.sqrt(5)], atol=1e-10)


def test_excited_set_l20_even_sector():
    L, g, k = 20, 2.0, 10
    Hp = sector_penalized(build_tfim(L, g)[0], SectorSpec("even"))
    inits = [random_mps(L, bond_dim=10, seed=(0, n)) for n in range(k)]
    sched = SweepSchedule(max_sweeps=20, policy=TruncationPolicy(1e-11, 100), rel_energy_tol=1e-12)
    out = dmrg_excited_set(Hp, k, inits, sched)
    assert np.abs(np.array(out.energies) - ff_low_energies(L, g, "even", k)).max() <= 1e-8
    assert out.max_overlap < 1e-4


def test_single_state_set_is_plain_dmrg():
    H, _ = build_tfim(6, 1.3)
    psi0 = random_mps(6, bond_dim=4, seed=4)
    a = dmrg_excited_set(H, 1, [psi0], TIGHT)
    b = dmrg(H, psi0, TIGHT)
    assert a.energies[0] == b.energy
    assert np.array_equal(a.states[0].to_dense(), b.psi.to_dense())


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.2, 2.5))
def test_sweep_energies_non_increasing(seed, g):
    H, _ = build_tfim(8, g)
    res = dmrg(H, random_mps(8, bond_dim=2, seed=seed), SweepSchedule(max_sweeps=6, policy=TruncationPolicy(1e-12, 64)))
    es = res.energies
    assert all(b <= a + 1e-10 for a, b in zip(es, es[1:]))


@pytest.mark.parametrize("L,g", [(6, 0.6), (8, 1.0)])
def test_penalized_excitations_match_dense(L, g):
    H, _ = build_tfim(L, g)
    e = np.linalg.eigvalsh(H.to_dense())
    inits = [random_mps(L, bond_dim=4, seed=(5, n)) for n in range(5)]
    out = dmrg_excited_set(H, 5, inits, TIGHT)
    assert np.abs(np.array(out.energies) - e[:5]).max() <= 1e-7


def test_excited_set_validation():
    H, _ = build_tfim(4, 1.0)
    with pytest.raises(ValueError):
        dmrg_excited_set(H, 2, [random_mps(4, seed=0)])
    with pytest.raises(ValueError):
        PenaltySet([], 0.0)


def spd_mpo(seed, L=4):
    rng = np.random.default_rng(seed)
    ts = []
    for k in range(L):
        l = 1 if k == 0 else 2
        r = 1 if k == L - 1 else 2
        ts.append(rng.normal(size=(l, 2, 2, r)) + 1j * rng.normal(size=(l, 2, 2, r)))
    B = MPO(ts)
    return add(mpo_product(B.dagger(), B, TruncationPolicy(0.0)), identity_mpo(L), policy=None)


def test_linsolve_identity():
    b = random_mps(6, bond_dim=4, seed=6)
    out = mps_linsolve(identity_mpo(6), b, random_mps(6, bond_dim=4, seed=7))
    assert out.rel_residual <= 1e-12
    assert np.allclose(out.x.to_dense(), b.to_dense())


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_linsolve_matches_dense_solve(seed):
    A = spd_mpo(seed)
    b = random_mps(4, bond_dim=4, seed=seed + 10)
    sched = SweepSchedule(max_sweeps=40, policy=TruncationPolicy(0.0), rel_energy_tol=1e-14, local_tol=1e-13)
    out = mps_linsolve(A, b, random_mps(4, bond_dim=2, seed=seed + 20), sched, target=1e-12, adaptive_local_tol=False)
    ref = np.linalg.solve(A.to_dense(), b.to_dense())
    assert np.linalg.norm(out.x.to_dense() - ref) <= 1e-6 * np.linalg.norm(ref)
    # monotone until the floor is reached
    r = out.residuals
    floor = 1e-10
    assert all(b <= a * 1.000001 or b <= floor for a, b in zip(r, r[1:]))
