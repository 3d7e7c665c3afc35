"""Dense complex kernels shared by the array, estimator and calibration code."""

from __future__ import annotations

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike

# Above this the system is treated as numerically singular.
MAX_CONDITION = 1e10
_FEJER_EPS = 1e-12


class SingularSystemError(np.linalg.LinAlgError):
    """Raised when a linear system is singular or rank deficient."""

    def __init__(self, message: str, condition: float):
        super().__init__(f"{message} (condition estimate {condition:.3e})")
        self.condition = condition


def kron(a: ArrayLike, b: ArrayLike) -> np.ndarray:
    """Kronecker product of two vectors; entry ``i*len(b)+j`` is ``a[i]*b[j]``."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 1 or b.ndim != 1:
        raise ValueError("kron expects two 1-D vectors")
    if a.size == 0 or b.size == 0:
        raise ValueError("kron operands must be nonempty")
    return np.outer(a, b).ravel()


def fejer_power(m: int, x: ArrayLike) -> np.ndarray | float:
    """Power of a uniform ``m``-term phase ramp, ``|sum_k exp(-j k x)|**2``.

    Evaluated through ``sin(m x/2)**2 / sin(x/2)**2`` with the removable
    singularity at multiples of ``2*pi`` replaced by ``m**2``.
    """
    x = np.asarray(x, dtype=float)
    half = np.sin(x / 2.0)
    small = np.abs(half) < _FEJER_EPS
    safe = np.where(small, 1.0, half)
    out = np.where(small, float(m * m), np.sin(m * x / 2.0) ** 2 / safe**2)
    return float(out) if out.ndim == 0 else out


def solve_linear(a: ArrayLike, y: ArrayLike) -> np.ndarray:
    """Solve ``a @ x = y``.

    Square systems use an LU factorisation with partial pivoting. Tall
    systems are solved in the least-squares sense through the normal
    equations ``(a^H a) x = a^H y``.

    Raises
    ------
    SingularSystemError
        If ``a`` is singular (square) or rank deficient (tall).
    """
    a = np.asarray(a, dtype=complex)
    y = np.asarray(y, dtype=complex)
    if a.ndim != 2:
        raise ValueError("coefficient matrix must be 2-D")
    rows, cols = a.shape
    if rows < cols:
        raise ValueError(f"underdetermined system {rows}x{cols}")
    if y.shape[0] != rows:
        raise ValueError(f"right-hand side has {y.shape[0]} rows, expected {rows}")

    cond = float(np.linalg.cond(a))
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        kind = "singular" if rows == cols else "rank-deficient"
        raise SingularSystemError(f"{kind} {rows}x{cols} system", cond)

    if rows == cols:
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
        return scipy.linalg.lu_solve((lu, piv), y, check_finite=False)
    gram = a.conj().T @ a
    lu, piv = scipy.linalg.lu_factor(gram, check_finite=False)
    return scipy.linalg.lu_solve((lu, piv), a.conj().T @ y, check_finite=False)
