"""Auxiliary-beam-pair angle estimation.

A pair probes ``eta - delta`` and ``eta + delta`` on one axis. The
normalised difference of the two received strengths is a monotone
function of the off-boresight offset, which is inverted in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike

from .arrays import ArrayGeometry, steering_upa, wrap_spatial
from .pilots import LTE_ROOTS, correlate_rx, pilot_pair

AZ = "az"
EL = "el"
AXES = (AZ, EL)

ZETA_CLIP = 1.0 - 1e-12
# |zeta| at or above 1 - COVERAGE_EPS means the path left the pair's span
COVERAGE_EPS = 1e-3


class NoSignalError(ValueError):
    pass


def ell_of(delta: float, n: int) -> float:
    return delta * n / (2 * math.pi)


def check_offset(delta: float, n: int) -> int:
    """Validate ``delta = 2 pi l / n`` with integer ``1 <= l <= n / 4``."""
    ell = ell_of(delta, n)
    k = round(ell)
    if abs(ell - k) > 1e-9 or not 1 <= k <= n / 4:
        raise ValueError(f"offset {delta:.6g} is not 2*pi*l/{n} with 1 <= l <= {n / 4:g}")
    return k


def offset_for(ell: int, n: int) -> float:
    return check_offset(2 * math.pi * ell / n, n) * 2 * math.pi / n


@dataclass(frozen=True, eq=False)
class AuxiliaryBeamPair:
    eta_el: float
    eta_az: float
    delta: float
    beam_minus: np.ndarray
    beam_plus: np.ndarray
    axis: str = AZ
    roots: tuple[int, int] = LTE_ROOTS

    @property
    def boresight(self) -> float:
        return self.eta_az if self.axis == AZ else self.eta_el


def make_pair(geom: ArrayGeometry, eta_el: float, eta_az: float, delta: float, *, axis: str = AZ,
              calibration: ArrayLike | None = None, roots: tuple[int, int] = LTE_ROOTS,
              validate: bool = True) -> AuxiliaryBeamPair:
    """Build a pair on ``axis``.

    ``calibration`` is the diagonal of ``K``. Calibrated weights are not
    renormalised: ``||K a||`` is the same for every steering direction, so
    both beams carry the same extra factor and the ratio metric is unchanged.
    """
    if axis not in AXES:
        raise ValueError(f"unknown axis {axis!r}")
    n = geom.n_y if axis == AZ else geom.n_x
    if validate:
        check_offset(delta, n)
    if axis == AZ:
        bm = steering_upa(geom, eta_el, eta_az - delta)
        bp = steering_upa(geom, eta_el, eta_az + delta)
    else:
        bm = steering_upa(geom, eta_el - delta, eta_az)
        bp = steering_upa(geom, eta_el + delta, eta_az)
    if calibration is not None:
        k = np.asarray(calibration)
        if k.shape != bm.shape:
            raise ValueError(f"calibration has {k.size} entries, array has {bm.size}")
        bm, bp = k * bm, k * bp
    return AuxiliaryBeamPair(eta_el, eta_az, delta, bm, bp, axis, tuple(roots))


def received_strengths(y: ArrayLike, pair: AuxiliaryBeamPair) -> tuple[float, float]:
    """Correlate occupied-subcarrier samples with both pilots, ``chi = |Lambda|^2``."""
    y = np.asarray(y)
    s0, s1 = pilot_pair(y.shape[-1], pair.roots)
    return abs(correlate_rx(y, s0)) ** 2, abs(correlate_rx(y, s1)) ** 2


def ratio_metric(chi_minus: float, chi_plus: float) -> float:
    total = chi_minus + chi_plus
    if not total > 0:
        raise NoSignalError("both beams received zero power")
    return (chi_minus - chi_plus) / total


def ratio_metric_closed_form(offset: ArrayLike, delta: float):
    """Ideal single-path ``zeta`` for ``offset = psi - eta``."""
    x = np.asarray(offset, dtype=float)
    out = -np.sin(x) * math.sin(delta) / (1.0 - np.cos(x) * math.cos(delta))
    return float(out) if out.ndim == 0 else out


def invert_ratio_metric(zeta: ArrayLike, eta: float, delta: float):
    """Closed-form angle estimate from a ratio metric."""
    z = np.asarray(zeta, dtype=float)
    if np.any(np.abs(z) > 1 + 1e-9):
        raise ValueError(f"ratio metric outside [-1, 1]: {zeta}")
    z = np.clip(z, -ZETA_CLIP, ZETA_CLIP)
    s, c = math.sin(delta), math.cos(delta)
    arg = (z * s - z * np.sqrt(1.0 - z * z) * s * c) / (s * s + z * z * c * c)
    out = eta - np.arcsin(np.clip(arg, -1.0, 1.0))
    return float(out) if out.ndim == 0 else out


def estimate_offset_magnitude(dzeta: float, delta: float) -> float:
    """Angle offset magnitude that produces ratio-metric magnitude ``dzeta``."""
    return abs(invert_ratio_metric(abs(dzeta), 0.0, delta))


def coverage_lost(zeta: float, eps: float = COVERAGE_EPS) -> bool:
    return abs(zeta) >= 1.0 - eps


def dft_grid(n: int) -> np.ndarray:
    """The ``n`` DFT directions ``2 pi i / n`` wrapped into ``[-pi, pi)``."""
    return wrap_spatial(2 * np.pi * np.arange(n) / n)


def select_pairs(powers: ArrayLike, n_paths: int, boresights: Sequence[tuple[float, float]], delta: float,
                 geom: ArrayGeometry, *, axis: str = AZ, calibration: ArrayLike | None = None,
                 roots: tuple[int, int] = LTE_ROOTS) -> list[AuxiliaryBeamPair]:
    """One pair per strongest coarse beam, strongest first, ties to lower index."""
    powers = np.asarray(powers, dtype=float)
    if len(boresights) != powers.size:
        raise ValueError("one power per codebook entry required")
    if n_paths > powers.size:
        raise ValueError(f"cannot select {n_paths} beams from a codebook of {powers.size}")
    order = np.argsort(-powers, kind="stable")[:n_paths]
    return [make_pair(geom, boresights[i][0], boresights[i][1], delta, axis=axis,
                      calibration=calibration, roots=roots) for i in order]


def offset_grid(delta: float, n: int = 201) -> np.ndarray:
    """``n`` evenly spaced offsets inside ``(-delta, delta)`` that miss zero.

    Both beams of a pair null the boresight when ``delta = 2 pi l / N``, so
    zero offset gives ``0 / 0``.
    """
    steps = n + 2 if n % 2 else n + 1
    return -delta + (np.arange(n) + 1) * 2 * delta / steps


def pattern_ratio_metric(geom: ArrayGeometry, offsets: ArrayLike, delta: float, *, eta: float = 0.0,
                         radiated: ArrayLike | None = None, axis: str = AZ) -> np.ndarray:
    """Noiseless single-path ``zeta`` against offset for a pair at ``eta``.

    ``radiated`` is the element diagonal the hardware applies to both beams
    (``C`` uncalibrated, ``C K`` calibrated); ``None`` is the ideal array.
    """
    pair = make_pair(geom, 0.0 if axis == AZ else eta, eta if axis == AZ else 0.0, delta, axis=axis)
    bm, bp = pair.beam_minus, pair.beam_plus
    if radiated is not None:
        d = np.asarray(radiated)
        bm, bp = d * bm, d * bp
    out = []
    for x in np.atleast_1d(np.asarray(offsets, dtype=float)):
        a = steering_upa(geom, 0.0, eta + x) if axis == AZ else steering_upa(geom, eta + x, 0.0)
        out.append(ratio_metric(abs(np.vdot(a, bm)) ** 2, abs(np.vdot(a, bp)) ** 2))
    return np.array(out)


def monotone_fraction(zeta: ArrayLike) -> float:
    """Share of consecutive grid steps on which ``zeta`` strictly decreases."""
    z = np.asarray(zeta, dtype=float)
    return float(np.mean(np.diff(z) < 0))
