"""Cached left/right environments for two-site sweeping algorithms."""

from __future__ import annotations

import numpy as np

from .mps import MPO, MPS, left_env_step, right_env_step
from .tensor import DTYPE


class OperatorEnv:
    """Environments of ``<psi|W|psi>`` for a state being swept.

    ``left[i]`` contracts sites ``< i``; ``right[i]`` contracts sites ``> i``.
    Both carry ``(bra, mpo, ket)`` legs.
    """

    def __init__(self, W: MPO, psi: MPS):
        L = psi.L
        self.W = W.tensors
        self.left: list = [None] * L
        self.right: list = [None] * L
        self.left[0] = np.ones((1, 1, 1), dtype=DTYPE)
        self.right[L - 1] = np.ones((1, 1, 1), dtype=DTYPE)
        for i in range(L - 1, 0, -1):
            a = psi.tensors[i]
            self.right[i - 1] = right_env_step(self.right[i], a, self.W[i], a)

    def update_left(self, i: int, a: np.ndarray):
        """Set ``left[i+1]`` from the new left-isometric tensor at site ``i``."""
        self.left[i + 1] = left_env_step(self.left[i], a, self.W[i], a)

    def update_right(self, i: int, b: np.ndarray):
        self.right[i - 1] = right_env_step(self.right[i], b, self.W[i], b)

    def apply2(self, i: int, theta: np.ndarray) -> np.ndarray:
        """Projected operator on the two-site block ``(i, i+1)``."""
        Le, Re = self.left[i], self.right[i + 1]
        t = np.tensordot(Le, theta, (2, 0))  # (a', w, s1, s2, d)
        t = np.tensordot(t, self.W[i], ([1, 2], [0, 2]))  # (a', s2, d, s1', u)
        t = np.tensordot(t, self.W[i + 1], ([4, 1], [0, 2]))  # (a', d, s1', s2', v)
        t = np.tensordot(t, Re, ([4, 1], [1, 2]))  # (a', s1', s2', d')
        return t

    def apply1(self, i: int, a: np.ndarray) -> np.ndarray:
        Le, Re = self.left[i], self.right[i]
        t = np.tensordot(Le, a, (2, 0))  # (a', w, s, d)
        t = np.tensordot(t, self.W[i], ([1, 2], [0, 2]))  # (a', d, s', v)
        t = np.tensordot(t, Re, ([3, 1], [1, 2]))  # (a', s', d')
        return t

    def apply0(self, i: int, c: np.ndarray) -> np.ndarray:
        """Projected operator on the bond matrix between sites ``i`` and ``i+1``."""
        Le, Re = self.left[i + 1], self.right[i]
        t = np.tensordot(Le, c, (2, 0))  # (a', w, d)
        return np.tensordot(t, Re, ([1, 2], [1, 2]))


class OverlapEnv:
    """Environments of ``<psi|phi>`` where ``psi`` is swept and ``phi`` fixed.

    ``vector2`` returns the projection of ``|phi>`` onto the local two-site
    space of ``psi``, so ``<psi|phi> = vdot(theta, vector2(i))``.
    """

    def __init__(self, phi: MPS, psi: MPS):
        L = psi.L
        self.phi = phi.tensors
        self.left: list = [None] * L
        self.right: list = [None] * L
        self.left[0] = np.ones((1, 1), dtype=DTYPE)
        self.right[L - 1] = np.ones((1, 1), dtype=DTYPE)
        for i in range(L - 1, 0, -1):
            self.update_right(i, psi.tensors[i])

    def update_left(self, i: int, a: np.ndarray):
        t = np.tensordot(self.left[i], self.phi[i], (1, 0))  # (a, p, c')
        self.left[i + 1] = np.tensordot(a.conj(), t, ([0, 1], [0, 1]))

    def update_right(self, i: int, b: np.ndarray):
        t = np.tensordot(self.phi[i], self.right[i], (2, 1))  # (c, p, a')
        self.right[i - 1] = np.tensordot(b.conj(), t, ([1, 2], [1, 2]))

    def vector2(self, i: int) -> np.ndarray:
        t = np.tensordot(self.left[i], self.phi[i], (1, 0))  # (a, s1, e)
        t = np.tensordot(t, self.phi[i + 1], (2, 0))  # (a, s1, s2, f)
        return np.tensordot(t, self.right[i + 1], (3, 1))  # (a, s1, s2, d)
