"""Ising chains as MPOs, parametrized by the transverse field ``g``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mps import MPO, add, identity_mpo, product_mpo, scale
from .tensor import DTYPE, TruncationPolicy

SX = np.array([[0, 1], [1, 0]], dtype=DTYPE)
SY = np.array([[0, -1j], [1j, 0]], dtype=DTYPE)
SZ = np.array([[1, 0], [0, -1]], dtype=DTYPE)
ID = np.eye(2, dtype=DTYPE)


def _ising_mpo(L: int, J: float, onsite: np.ndarray) -> MPO:
    # operator-valued matrix with boundary row 2 ("not started") and column 0 ("done")
    M = np.zeros((3, 2, 2, 3), dtype=DTYPE)
    M[0, :, :, 0] = ID
    M[1, :, :, 0] = SX
    M[2, :, :, 1] = J * SX
    M[2, :, :, 0] = onsite
    M[2, :, :, 2] = ID
    ts = [M[2:3]] + [M] * (L - 2) + [M[:, :, :, 0:1]]
    return MPO([t.copy() for t in ts])


def field_mpo(L: int, op: np.ndarray) -> MPO:
    """``sum_i op_i`` as a bond-dimension-2 MPO."""
    M = np.zeros((2, 2, 2, 2), dtype=DTYPE)
    M[0, :, :, 0] = ID
    M[1, :, :, 0] = op
    M[1, :, :, 1] = ID
    if L == 1:
        return product_mpo([op])
    ts = [M[1:2]] + [M] * (L - 2) + [M[:, :, :, 0:1]]
    return MPO([t.copy() for t in ts])


def build_tfim(L: int, g: float) -> tuple[MPO, MPO]:
    """``H = sum X_i X_{i+1} + g sum Z_i`` (open chain) and ``dH/dg = sum Z_i``."""
    if L < 2:
        raise ValueError("TFIM needs L >= 2")
    return _ising_mpo(L, 1.0, g * SZ), field_mpo(L, SZ)


def build_ltfim(L: int, g: float, h: float) -> tuple[MPO, MPO]:
    """TFIM plus a longitudinal field ``h sum X_i``; derivative taken in ``g``."""
    if L < 2:
        raise ValueError("LTFIM needs L >= 2")
    return _ising_mpo(L, 1.0, g * SZ + h * SX), field_mpo(L, SZ)


@dataclass(frozen=True)
class ModelFamily:
    """Parametrized Hamiltonian family ``H(g)`` with fixed longitudinal field ``h``."""

    name: str
    L: int
    h: float = 0.0

    def __post_init__(self):
        if self.name not in ("TFIM", "LTFIM"):
            raise ValueError(f"unknown model {self.name!r}")
        if self.L < 2:
            raise ValueError("models need L >= 2")

    @property
    def conserves_parity(self) -> bool:
        return self.name == "TFIM" or self.h == 0.0

    def build(self, g: float) -> tuple[MPO, MPO]:
        if self.name == "TFIM":
            return build_tfim(self.L, g)
        return build_ltfim(self.L, g, self.h)

    def hamiltonian(self, g: float) -> MPO:
        return self.build(g)[0]


def parity_mpo(L: int) -> MPO:
    """``P = prod_i Z_i``."""
    return product_mpo([SZ] * L)


@dataclass(frozen=True)
class SectorSpec:
    """Parity sector targeted through an energy penalty.

    ``penalty_strength`` defaults to ``4 L`` when left as None.
    """

    parity: str = "none"
    penalty_strength: float | None = None

    def __post_init__(self):
        if self.parity not in ("even", "odd", "none"):
            raise ValueError(f"parity must be even, odd or none, not {self.parity!r}")
        if self.penalty_strength is not None and self.penalty_strength <= 0:
            raise ValueError("penalty_strength must be positive")

    @property
    def sign(self) -> int:
        return {"even": 1, "odd": -1, "none": 0}[self.parity]

    def strength(self, L: int) -> float:
        return 4.0 * L if self.penalty_strength is None else self.penalty_strength


def sector_penalized(H: MPO, spec: SectorSpec) -> MPO:
    """``H + (w/2)(1 - s P)``: unchanged inside the sector, shifted by ``w`` outside."""
    if spec.parity == "none":
        return H
    L = H.L
    w = spec.strength(L)
    shift = add(identity_mpo(L), scale(parity_mpo(L), -spec.sign), policy=None)
    return add(H, scale(shift, w / 2), policy=TruncationPolicy(1e-14))
