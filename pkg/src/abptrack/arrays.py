"""Array geometries, steering vectors and per-element impairments.

Element ordering for the planar array follows the Kronecker form
``a_tx(theta) (x) a_ty(psi)``: element ``i_x * n_y + i_y`` carries phase
``i_x * theta + i_y * psi``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike

from .numerics import kron

ULA = "ULA"
UPA = "UPA"

# Lower bound on element gain so amplitude errors never flip sign.
MIN_ELEMENT_GAIN = 0.05


@dataclass(frozen=True)
class ArrayGeometry:
    """A uniform linear or planar array.

    A ULA is stored with ``n_x == 1`` and its elements along y, so the same
    Kronecker machinery serves both kinds. Spacings are in wavelengths.
    """

    kind: str
    n_x: int = 1
    n_y: int = 1
    spacing_x: float = 0.5
    spacing_y: float = 0.5

    def __post_init__(self):
        if self.kind not in (ULA, UPA):
            raise ValueError(f"unknown array kind {self.kind!r}")
        if self.n_x < 1 or self.n_y < 1:
            raise ValueError("element counts must be >= 1")
        if self.kind == ULA and self.n_x != 1:
            raise ValueError("a ULA has n_x == 1")
        if self.spacing_x <= 0 or self.spacing_y <= 0:
            raise ValueError("element spacings must be positive")

    @classmethod
    def ula(cls, m: int, spacing: float = 0.5) -> "ArrayGeometry":
        return cls(ULA, 1, m, spacing, spacing)

    @classmethod
    def upa(cls, n_x: int, n_y: int, spacing_x: float = 0.5, spacing_y: float = 0.5) -> "ArrayGeometry":
        return cls(UPA, n_x, n_y, spacing_x, spacing_y)

    @property
    def n_tot(self) -> int:
        return self.n_x * self.n_y

    def axis_size(self, axis: str) -> int:
        return self.n_y if axis == "az" else self.n_x


def _ramp(m: int, freq: float) -> np.ndarray:
    return np.exp(1j * freq * np.arange(m)) / np.sqrt(m)


def steering_ula(geom: ArrayGeometry, nu: float) -> np.ndarray:
    """Unit-norm linear-array response ``exp(j m nu) / sqrt(M)``."""
    if geom.kind != ULA:
        raise ValueError("steering_ula needs a ULA geometry")
    return _ramp(geom.n_y, nu)


def steering_upa(geom: ArrayGeometry, theta: float, psi: float) -> np.ndarray:
    """Planar-array response as ``a_tx(theta) (x) a_ty(psi)``.

    Also accepts a ULA geometry (``n_x == 1``), where ``theta`` drops out.
    """
    return kron(_ramp(geom.n_x, theta), _ramp(geom.n_y, psi))


def angles_to_spatial(mu: ArrayLike, phi: ArrayLike, geom: ArrayGeometry):
    """Map polar angle ``mu`` and azimuth ``phi`` to ``(theta, psi)``."""
    mu = np.asarray(mu, dtype=float)
    phi = np.asarray(phi, dtype=float)
    theta = 2 * np.pi * geom.spacing_x * np.sin(mu) * np.cos(phi)
    psi = 2 * np.pi * geom.spacing_y * np.sin(mu) * np.sin(phi)
    if theta.ndim == 0:
        return float(theta), float(psi)
    return theta, psi


def spatial_to_angles(theta: float, psi: float, geom: ArrayGeometry) -> tuple[float, float]:
    """Inverse of :func:`angles_to_spatial` on ``mu in (0, pi/2]``, ``phi in (-pi/2, pi/2)``."""
    u = theta / (2 * np.pi * geom.spacing_x)
    v = psi / (2 * np.pi * geom.spacing_y)
    r = float(np.hypot(u, v))
    if u <= 0 or r > 1 + 1e-12:
        raise ValueError(f"spatial frequencies ({theta:.6g}, {psi:.6g}) lie outside the invertible sector")
    return float(np.arcsin(min(r, 1.0))), float(np.arctan2(v, u))


def ula_spatial(phi: ArrayLike, spacing: float = 0.5):
    """Spatial frequency of a linear array in the horizontal plane."""
    return 2 * np.pi * spacing * np.sin(phi)


def ula_angle(psi: float, spacing: float = 0.5) -> float:
    s = psi / (2 * np.pi * spacing)
    if abs(s) > 1 + 1e-12:
        raise ValueError(f"spatial frequency {psi:.6g} is not visible for spacing {spacing}")
    return float(np.arcsin(np.clip(s, -1.0, 1.0)))


def wrap_spatial(x: ArrayLike):
    """Wrap spatial frequencies into ``[-pi, pi)``."""
    out = (np.asarray(x, dtype=float) + np.pi) % (2 * np.pi) - np.pi
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class ImpairmentModel:
    """Static per-element phase and amplitude errors, ``C = A P``.

    Both factors decompose over the planar axes:
    ``P = P_el (x) P_az`` and ``A = A_el (x) A_az``.
    """

    p_el: np.ndarray
    p_az: np.ndarray
    a_el: np.ndarray
    a_az: np.ndarray
    variance_phase: float = 0.0
    variance_amp: float = 0.0
    seed: int | None = None
    diagonal: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        diag = kron(self.a_el * np.exp(1j * self.p_el), self.a_az * np.exp(1j * self.p_az))
        object.__setattr__(self, "diagonal", diag)

    @classmethod
    def ideal(cls, geom: ArrayGeometry) -> "ImpairmentModel":
        return cls(np.zeros(geom.n_x), np.zeros(geom.n_y), np.ones(geom.n_x), np.ones(geom.n_y))

    @classmethod
    def draw(cls, geom: ArrayGeometry, variance_phase: float, variance_amp: float,
             rng: np.random.Generator | int | None = None) -> "ImpairmentModel":
        """Draw Gaussian phase errors and gains ``1 + e`` (clipped below)."""
        seed = rng if isinstance(rng, (int, np.integer)) else None
        rng = np.random.default_rng(rng)
        sp, sa = np.sqrt(variance_phase), np.sqrt(variance_amp)
        p_az = rng.normal(0.0, sp, geom.n_y)
        a_az = np.maximum(1.0 + rng.normal(0.0, sa, geom.n_y), MIN_ELEMENT_GAIN)
        if geom.n_x == 1:
            # a single row has no elevation factor of its own
            p_el, a_el = np.zeros(1), np.ones(1)
        else:
            p_el = rng.normal(0.0, sp, geom.n_x)
            a_el = np.maximum(1.0 + rng.normal(0.0, sa, geom.n_x), MIN_ELEMENT_GAIN)
        return cls(p_el, p_az, a_el, a_az, variance_phase, variance_amp, seed)

    @property
    def phase_diagonal(self) -> np.ndarray:
        return kron(np.exp(1j * self.p_el), np.exp(1j * self.p_az))

    @property
    def amplitude_diagonal(self) -> np.ndarray:
        return kron(self.a_el, self.a_az)

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(self.diagonal)


def apply_impairment(model: ImpairmentModel, w: ArrayLike) -> np.ndarray:
    """Return ``C @ w`` for the diagonal impairment matrix ``C``."""
    w = np.asarray(w)
    if w.shape != model.diagonal.shape:
        raise ValueError(f"beam has {w.shape[0]} elements, impairment model has {model.diagonal.size}")
    return model.diagonal * w
