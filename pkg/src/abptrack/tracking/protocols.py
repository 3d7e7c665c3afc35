"""Per-DTC anchor update rules.

The tracking pair is always centred on the current anchor, so the
reference angle equals the anchor and the reference ratio metric is zero
until the next update re-centres it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from ..estimator import AZ, EL, invert_ratio_metric
from .quantizer import RatioCodebook, dequantize, quantize

NO_TRACKING = "none"
BS_DIRECT = "bs_direct"
UE_DIRECT = "ue_direct"
UE_DIFFERENTIAL = "ue_differential"
BS_DIFFERENTIAL = "bs_differential"
GOB = "gob"
GENIE = "genie"
ABP_PROTOCOLS = (BS_DIRECT, UE_DIRECT, UE_DIFFERENTIAL, BS_DIFFERENTIAL)
PROTOCOLS = (NO_TRACKING, *ABP_PROTOCOLS, GOB, GENIE)


@dataclass(frozen=True)
class FeedbackEvent:
    slot: int
    axis: str
    bits: int
    value: float
    sign: int = 0


@dataclass(frozen=True)
class TrackingState:
    anchor_az: float
    anchor_el: float = 0.0
    psi0: float = 0.0
    theta0: float = 0.0
    zeta0_az: float = 0.0
    zeta0_el: float = 0.0
    gamma0: float | None = None
    delta_az: float = math.pi / 8
    delta_el: float = math.pi / 8
    threshold_az: float = 0.0
    threshold_el: float = 0.0
    # strength trigger for UE-driven direct feedback, in dB
    strength_threshold_db: float = 3.0
    # grid-of-beams keep/retarget level (linear strength)
    gob_threshold: float = 0.0
    protocol: str = BS_DIRECT
    slot: int = 0
    feedback_log: tuple[FeedbackEvent, ...] = field(default=(), repr=False)

    @classmethod
    def start(cls, anchor_el: float, anchor_az: float, **kw) -> "TrackingState":
        return cls(anchor_az=anchor_az, anchor_el=anchor_el, psi0=anchor_az, theta0=anchor_el, **kw)

    def anchor(self, axis: str) -> float:
        return self.anchor_az if axis == AZ else self.anchor_el

    def reference(self, axis: str) -> float:
        return self.psi0 if axis == AZ else self.theta0

    def zeta0(self, axis: str) -> float:
        return self.zeta0_az if axis == AZ else self.zeta0_el

    def delta(self, axis: str) -> float:
        return self.delta_az if axis == AZ else self.delta_el

    def threshold(self, axis: str) -> float:
        return self.threshold_az if axis == AZ else self.threshold_el

    def retarget(self, axis: str, value: float) -> "TrackingState":
        """Move the anchor and re-centre the reference on it."""
        if axis == AZ:
            return replace(self, anchor_az=value, psi0=value, zeta0_az=0.0)
        return replace(self, anchor_el=value, theta0=value, zeta0_el=0.0)

    def log(self, event: FeedbackEvent) -> "TrackingState":
        return replace(self, feedback_log=self.feedback_log + (event,))


def _db(x: float) -> float:
    return 10 * math.log10(max(x, 1e-300))


def _sign(x: float) -> int:
    return 1 if x > 0 else (-1 if x < 0 else 0)


def step_bs_direct(state: TrackingState, zeta: float, axis: str = AZ) -> TrackingState:
    """BS inverts the fed-back ratio metric and moves the anchor past the threshold."""
    psi_hat = invert_ratio_metric(zeta, state.anchor(axis), state.delta(axis))
    if abs(state.reference(axis) - psi_hat) >= state.threshold(axis):
        return state.retarget(axis, psi_hat)
    return state


def step_ue_direct(state: TrackingState, zeta: float, gamma: float, axis: str = AZ,
                   codebook: RatioCodebook | None = None) -> tuple[TrackingState, float | None]:
    """UE reports ``zeta`` only when the anchor strength moved by the dB threshold."""
    if state.gamma0 is None:
        return replace(state, gamma0=gamma), None
    if abs(_db(gamma) - _db(state.gamma0)) < state.strength_threshold_db:
        return state, None
    bits = 64
    if codebook is not None:
        zeta = dequantize(quantize(zeta, codebook), codebook)
        bits = codebook.bits
    psi_hat = invert_ratio_metric(zeta, state.anchor(axis), state.delta(axis))
    new = replace(state.retarget(axis, psi_hat), gamma0=None)
    return new.log(FeedbackEvent(state.slot, axis, bits, zeta)), zeta


def _differential_message(state: TrackingState, zeta: float, axis: str,
                          codebook: RatioCodebook | None) -> tuple[int, float, int]:
    z0 = state.zeta0(axis)
    dz = abs(zeta - z0)
    bits = 64
    if codebook is not None:
        dz = dequantize(quantize(dz, codebook), codebook)
        bits = codebook.bits + 1
    return _sign(zeta - z0), min(dz, 2.0), bits


def reconstruct_differential(state: TrackingState, sign: int, dzeta: float, axis: str = AZ) -> float:
    """``psi0 - sign * dpsi``: a positive ratio metric means the path sits below the boresight."""
    eta, delta, z0 = state.anchor(axis), state.delta(axis), state.zeta0(axis)
    z = float(np.clip(z0 + sign * dzeta, -1.0, 1.0))
    dpsi = abs(invert_ratio_metric(z, eta, delta) - invert_ratio_metric(z0, eta, delta))
    return state.reference(axis) - sign * dpsi


def step_ue_differential(state: TrackingState, zeta: float, axis: str = AZ,
                         codebook: RatioCodebook | None = None
                         ) -> tuple[TrackingState, tuple[int, float] | None]:
    """UE sends ``(sign, |zeta - zeta0|)`` when the implied angle change passes the threshold."""
    sign, dz, bits = _differential_message(state, zeta, axis, codebook)
    psi_hat = reconstruct_differential(state, sign, dz, axis)
    # the UE decides on its own unquantized metric
    exact = reconstruct_differential(state, _sign(zeta - state.zeta0(axis)), abs(zeta - state.zeta0(axis)), axis)
    if abs(exact - state.reference(axis)) < state.threshold(axis):
        return state, None
    new = state.retarget(axis, psi_hat).log(FeedbackEvent(state.slot, axis, bits, dz, sign))
    return new, (sign, dz)


def step_bs_differential(state: TrackingState, zeta: float, axis: str = AZ,
                         codebook: RatioCodebook | None = None
                         ) -> tuple[TrackingState, tuple[int, float]]:
    """BS polls the differential message every DTC and applies the threshold itself."""
    sign, dz, bits = _differential_message(state, zeta, axis, codebook)
    state = state.log(FeedbackEvent(state.slot, axis, bits, dz, sign))
    psi_hat = reconstruct_differential(state, sign, dz, axis)
    if abs(psi_hat - state.reference(axis)) >= state.threshold(axis):
        state = state.retarget(axis, psi_hat)
    return state, (sign, dz)


KEEP = "keep"
RETARGET = "retarget"
RESWEEP = "resweep"


def step_gob_baseline(state: TrackingState, directions: Sequence[tuple[float, float]], strengths: Sequence[float],
                      n_supporting: int, anchor_strength: float | None = None) -> tuple[TrackingState, str]:
    """Grid-of-beams update.

    The first ``n_supporting`` probes are supporting beams and the rest are
    backups. With no supporting beams the anchor's own strength decides.
    Directions are ``(el, az)`` pairs.
    """
    strengths = np.asarray(strengths, dtype=float)
    support = strengths[:n_supporting]
    level = float(np.max(support)) if support.size else anchor_strength
    if level is None:
        raise ValueError("need supporting beams or the anchor strength")
    if level >= state.gob_threshold:
        return state, KEEP
    backup = strengths[n_supporting:]
    ok = np.flatnonzero(backup >= state.gob_threshold)
    if ok.size == 0:
        return state, RESWEEP
    best = ok[np.argmax(backup[ok])]  # argmax keeps the first, i.e. lower index
    el, az = directions[n_supporting + best]
    return state.retarget(EL, el).retarget(AZ, az), RETARGET
