"""Adiabatic gauge potentials as MPOs, adiabatic transport of MPS eigenstates,
and penalty excited-state DMRG for Ising chains."""

from .agp import AgpResult, build_rhs, build_superoperator, commutator_guess, compute_agp, scaled_norm
from .models import ModelFamily, SectorSpec, build_ltfim, build_tfim, parity_mpo, sector_penalized
from .mps import MPO, MPS, expect, inner, random_mps, variance
from .solvers import PenaltySet, SweepSchedule, dmrg, dmrg_excited_set, mps_linsolve
from .tdvp import TdvpOptions, evolve, tdvp_step
from .tensor import TruncationPolicy
from .transport import TransportPlan, TransportRecord, agp_path, benchmark_agp_vs_random, transport

__all__ = [
    "AgpResult",
    "MPO",
    "MPS",
    "ModelFamily",
    "PenaltySet",
    "SectorSpec",
    "SweepSchedule",
    "TdvpOptions",
    "TransportPlan",
    "TransportRecord",
    "TruncationPolicy",
    "agp_path",
    "benchmark_agp_vs_random",
    "build_ltfim",
    "build_rhs",
    "build_superoperator",
    "build_tfim",
    "commutator_guess",
    "compute_agp",
    "dmrg",
    "dmrg_excited_set",
    "evolve",
    "expect",
    "inner",
    "mps_linsolve",
    "parity_mpo",
    "random_mps",
    "scaled_norm",
    "sector_penalized",
    "tdvp_step",
    "transport",
    "variance",
]
