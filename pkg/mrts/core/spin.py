"""
Angular-momentum algebra: spin matrices, Gell-Mann generators and Clebsch-Gordan
coefficients (Racah formula, Condon-Shortley phase).
"""

from dataclasses import dataclass, field
from functools import lru_cache
from math import factorial, sqrt
from typing import List, Optional

import numpy as np

from .constants import ERROR_NEGATIVE_SPIN, ERROR_NON_HALF_INTEGER_SPIN
from .exceptions import InvalidSpinError


@dataclass(frozen=True, eq=False)
class SpinOps:
    """Cartesian spin operators (hbar = 1)."""

    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray
    spin: Optional[float] = field(default=None)

    @property
    def dim(self) -> int:
        return self.sz.shape[0]

    @property
    def plus(self) -> np.ndarray:
        return self.sx + 1j * self.sy

    @property
    def minus(self) -> np.ndarray:
        return self.sx - 1j * self.sy

    def squared(self) -> np.ndarray:
        """S^2 = Sx^2 + Sy^2 + Sz^2."""
        return self.sx @ self.sx + self.sy @ self.sy + self.sz @ self.sz

    def along(self, direction) -> np.ndarray:
        """Projection S . n onto a Cartesian direction."""
        nx, ny, nz = direction
        return nx * self.sx + ny * self.sy + nz * self.sz

    def as_tuple(self):
        return self.sx, self.sy, self.sz


def _twice(j: float) -> int:
    """Return 2j as an int, rejecting anything that is not a non-negative half-integer."""
    doubled = 2.0 * float(j)
    rounded = int(round(doubled))
    if abs(doubled - rounded) > 1e-9:
        raise InvalidSpinError(j, ERROR_NON_HALF_INTEGER_SPIN)
    return rounded


@lru_cache(maxsize=None)
def _spin_matrices_cached(two_s: int) -> SpinOps:
    s = two_s / 2.0
    m = s - np.arange(two_s + 1)
    sz = np.diag(m).astype(complex)

    # <m+1|S+|m> with m descending along the index
    sp = np.zeros((two_s + 1, two_s + 1), dtype=complex)
    for j in range(1, two_s + 1):
        sp[j - 1, j] = sqrt(s * (s + 1) - m[j] * (m[j] + 1))
    sm = sp.conj().T

    sx = (sp + sm) / 2.0
    sy = (sp - sm) / 2.0j
    for mat in (sx, sy, sz):
        mat.setflags(write=False)
    return SpinOps(sx=sx, sy=sy, sz=sz, spin=s)


def spin_matrices(s: float) -> SpinOps:
    """
    Standard spin-s matrices in the |s, m> basis ordered m = s ... -s.

    Args:
        s: Spin quantum number, a non-negative multiple of 1/2

    Returns:
        SpinOps with read-only sx, sy, sz
    """
    if s < 0:
        raise InvalidSpinError(s, ERROR_NEGATIVE_SPIN)
    return _spin_matrices_cached(_twice(s))


@lru_cache(maxsize=1)
def _gell_mann_cached() -> tuple:
    mats = [np.zeros((3, 3), dtype=complex) for _ in range(8)]
    mats[0][0, 1] = mats[0][1, 0] = 1.0
    mats[1][0, 1], mats[1][1, 0] = -1j, 1j
    mats[2][0, 0], mats[2][1, 1] = 1.0, -1.0
    mats[3][0, 2] = mats[3][2, 0] = 1.0
    mats[4][0, 2], mats[4][2, 0] = -1j, 1j
    mats[5][1, 2] = mats[5][2, 1] = 1.0
    mats[6][1, 2], mats[6][2, 1] = -1j, 1j
    mats[7][0, 0] = mats[7][1, 1] = 1.0 / sqrt(3.0)
    mats[7][2, 2] = -2.0 / sqrt(3.0)
    for mat in mats:
        mat.setflags(write=False)
    return tuple(mats)


def gell_mann_matrices() -> List[np.ndarray]:
    """The eight Gell-Mann matrices lambda_1 ... lambda_8, Tr(l_i l_j) = 2 delta_ij."""
    return list(_gell_mann_cached())


def clebsch_gordan(j1: float, m1: float, j2: float, m2: float, j: float, m: float) -> float:
    """
    Clebsch-Gordan coefficient <j1 m1; j2 m2 | j m> by the Racah formula.

    Returns 0.0 for any combination forbidden by the selection rules.
    """
    tj1, tm1, tj2, tm2, tj, tm = (
        _twice(j1), int(round(2 * m1)), _twice(j2), int(round(2 * m2)), _twice(j), int(round(2 * m))
    )
    if tm1 + tm2 != tm:
        return 0.0
    if tj < abs(tj1 - tj2) or tj > tj1 + tj2 or (tj1 + tj2 + tj) % 2:
        return 0.0
    if abs(tm1) > tj1 or abs(tm2) > tj2 or abs(tm) > tj:
        return 0.0
    if (tj1 + tm1) % 2 or (tj2 + tm2) % 2 or (tj + tm) % 2:
        return 0.0

    # integer arguments of the factorials
    a = (tj1 + tj2 - tj) // 2
    b = (tj1 - tm1) // 2
    c = (tj2 + tm2) // 2
    d = (tj - tj2 + tm1) // 2
    e = (tj - tj1 - tm2) // 2

    prefactor = sqrt(
        (tj + 1)
        * factorial((tj + tj1 - tj2) // 2)
        * factorial((tj - tj1 + tj2) // 2)
        * factorial(a)
        / factorial((tj1 + tj2 + tj) // 2 + 1)
    )
    prefactor *= sqrt(
        factorial((tj + tm) // 2)
        * factorial((tj - tm) // 2)
        * factorial((tj1 - tm1) // 2)
        * factorial((tj1 + tm1) // 2)
        * factorial((tj2 - tm2) // 2)
        * factorial((tj2 + tm2) // 2)
    )

    total = 0.0
    for k in range(max(0, -d, -e), min(a, b, c) + 1):
        total += (-1) ** k / (
            factorial(k)
            * factorial(a - k)
            * factorial(b - k)
            * factorial(c - k)
            * factorial(d + k)
            * factorial(e + k)
        )
    return prefactor * total
