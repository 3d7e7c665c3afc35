"""Link metrics and trace summaries."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike

from ..arrays import wrap_spatial
from ..channel import ChannelState, PulseShape, flat_response, freq_response_all
from ..pilots import OfdmConfig

CDF_POINTS = 1001


def spectral_efficiency(h_eff: complex, snr_linear: float) -> float:
    if snr_linear <= 0:
        raise ValueError("SNR must be positive")
    return math.log2(1.0 + snr_linear * abs(h_eff) ** 2)


def se_from_gain(gain: ArrayLike, snr_linear: float):
    out = np.log2(1.0 + snr_linear * np.asarray(gain, dtype=float))
    return float(out) if out.ndim == 0 else out


def beamforming_gain(state: ChannelState, beam: ArrayLike, combiner: ArrayLike, ofdm: OfdmConfig | None = None,
                     pulse: PulseShape = PulseShape()) -> float:
    """``|w^H H[k] f|^2`` averaged over the occupied subcarriers (narrowband if ``ofdm`` is None)."""
    f = np.asarray(beam)
    w = np.asarray(combiner)
    if ofdm is None:
        return float(abs(w.conj() @ flat_response(state) @ f) ** 2)
    h = freq_response_all(state, ofdm, pulse)
    return float(np.mean(np.abs(np.einsum("m,kmn,n->k", w.conj(), h, f)) ** 2))


def emit_cdf(samples: ArrayLike, points: int = CDF_POINTS) -> list[tuple[float, float]]:
    """Empirical quantiles at ``points`` evenly spaced probabilities in ``[0, 1]``."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("no samples")
    p = np.linspace(0.0, 1.0, points)
    return list(zip(p.tolist(), np.quantile(x, p).tolist()))


def cdf_csv(samples: ArrayLike) -> str:
    rows = ["probability,value"] + [f"{p:.9g},{v:.9g}" for p, v in emit_cdf(samples)]
    return "\n".join(rows) + "\n"


class OnlineMean:
    """Running mean with compensated summation."""

    def __init__(self):
        self.n = 0
        self._sum = 0.0
        self._c = 0.0

    def add(self, x: float) -> None:
        y = x - self._c
        t = self._sum + y
        self._c = (t - self._sum) - y
        self._sum = t
        self.n += 1

    @property
    def mean(self) -> float:
        return self._sum / self.n if self.n else math.nan


def tracking_error(true_psi: ArrayLike, anchor: ArrayLike) -> np.ndarray:
    return np.abs(wrap_spatial(np.asarray(true_psi) - np.asarray(anchor)))


SUMMARY_FIELDS = ("mean_bf_gain", "median_bf_gain", "mean_se", "mean_abs_error_az", "frac_error_below_delta",
                  "n_dtc", "n_updates", "n_resweeps", "feedback_bits")


def summarize(records: Sequence, snr_linear: float, delta: float, n_dtc: int) -> dict[str, float]:
    gain = np.array([r.bf_gain for r in records])
    err = tracking_error([r.true_psi for r in records], [r.anchor_az for r in records])
    events = [r.event for r in records]
    return {
        "mean_bf_gain": float(gain.mean()),
        "median_bf_gain": float(np.median(gain)),
        "mean_se": float(np.mean(se_from_gain(gain, snr_linear))),
        "mean_abs_error_az": float(err.mean()),
        "frac_error_below_delta": float(np.mean(err < delta)),
        "n_dtc": n_dtc,
        "n_updates": events.count("update"),
        "n_resweeps": events.count("resweep"),
        "feedback_bits": sum(r.feedback_bits for r in records),
    }
