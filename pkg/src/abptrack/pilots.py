"""Zadoff-Chu beam-specific pilots, OFDM mapping and the correlation receiver."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft
from numpy.typing import ArrayLike

LTE_ROOTS = (25, 34)


@dataclass(frozen=True, eq=False)
class ZcSequence:
    root: int
    length: int
    samples: np.ndarray


def zc_generate(root: int, n_zc: int) -> ZcSequence:
    """``s[m] = exp(-j pi m (m+1) root / n_zc)`` for ``m = 0..n_zc-1``."""
    if n_zc < 1:
        raise ValueError("sequence length must be positive")
    if math.gcd(root, n_zc) != 1:
        raise ValueError(f"root {root} is not coprime with length {n_zc}")
    m = np.arange(n_zc, dtype=np.int64)
    # reduce the quadratic phase modulo 2*n_zc so large m stays exact
    phase_num = (m * (m + 1) * root) % (2 * n_zc)
    samples = np.exp(-1j * np.pi * phase_num / n_zc)
    return ZcSequence(root, n_zc, samples)


def zc_crosscorr(a: ZcSequence, b: ZcSequence) -> complex:
    """Normalised zero-lag correlation ``mean(a * conj(b))``."""
    if a.length != b.length:
        raise ValueError(f"length mismatch: {a.length} vs {b.length}")
    return complex(np.mean(a.samples * b.samples.conj()))


@dataclass(frozen=True)
class OfdmConfig:
    """OFDM numerology. ``occupied`` lists FFT bins in pilot order."""

    n_fft: int = 512
    cp_len: int = 64
    occupied: tuple[int, ...] = ()
    subcarrier_spacing: float = 270e3
    symbol_s: float = 3.7e-6

    def __post_init__(self):
        if self.cp_len >= self.n_fft:
            raise ValueError("cyclic prefix must be shorter than the FFT")
        if not self.occupied:
            object.__setattr__(self, "occupied", tuple(range(self.n_fft)))
        if len(self.occupied) > self.n_fft:
            raise ValueError("more occupied subcarriers than FFT bins")
        if len(set(self.occupied)) != len(self.occupied):
            raise ValueError("occupied subcarriers must be distinct")
        if any(k < 0 or k >= self.n_fft for k in self.occupied):
            raise ValueError("occupied subcarrier index out of range")

    @classmethod
    def centered(cls, n_fft: int = 512, cp_len: int = 64, n_used: int = 63, **kw) -> "OfdmConfig":
        """Pilots on the ``n_used`` bins closest to DC, lowest frequency first."""
        half = n_used // 2
        bins = tuple(k % n_fft for k in range(-half, n_used - half))
        return cls(n_fft, cp_len, bins, **kw)

    @classmethod
    def analysis(cls, n_fft: int, cp_len: int, **kw) -> "OfdmConfig":
        """Pilot length equal to the FFT size."""
        return cls(n_fft, cp_len, tuple(range(n_fft)), **kw)

    @property
    def n_zc(self) -> int:
        return len(self.occupied)

    @property
    def sample_period(self) -> float:
        return 1.0 / (self.n_fft * self.subcarrier_spacing)


def pilot_pair(n_zc: int, roots: tuple[int, int] = LTE_ROOTS) -> tuple[ZcSequence, ZcSequence]:
    return zc_generate(roots[0], n_zc), zc_generate(roots[1], n_zc)


def transmit_abp_symbol(beam_minus: ArrayLike, beam_plus: ArrayLike, config: OfdmConfig,
                        roots: tuple[int, int] = LTE_ROOTS) -> np.ndarray:
    """Time-domain block (with cyclic prefix) carrying both pilots.

    Returns an ``(n_tot, cp_len + n_fft)`` array. The IFFT is unitary so
    the block energy equals the summed per-subcarrier energy.
    """
    beam_minus = np.asarray(beam_minus)
    beam_plus = np.asarray(beam_plus)
    s0, s1 = pilot_pair(config.n_zc, roots)
    freq = np.zeros((beam_minus.size, config.n_fft), dtype=complex)
    occ = np.asarray(config.occupied)
    freq[:, occ] = np.outer(beam_minus, s0.samples) + np.outer(beam_plus, s1.samples)
    block = np.fft.ifft(freq, axis=1, norm="ortho")
    return np.concatenate([block[:, -config.cp_len:], block], axis=1)


def propagate_time_domain(x_cp: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Apply a delay-domain MIMO channel ``taps[d]`` (``D x M x N``) to a CP block.

    Linear convolution truncated to the block length. A few nonzero taps are
    applied directly, denser channels go through the FFT.
    """
    length = x_cp.shape[1]
    live = np.flatnonzero(np.any(taps != 0, axis=(1, 2)))
    if live.size <= 4:
        out = np.zeros((taps.shape[1], length), dtype=complex)
        for d in live:
            out[:, d:] += taps[d] @ x_cp[:, : length - d]
        return out
    n = scipy.fft.next_fast_len(length + taps.shape[0] - 1)
    xf = np.fft.fft(x_cp, n, axis=1)
    hf = np.fft.fft(taps, n, axis=0)
    yf = (hf @ xf.T[:, :, None])[:, :, 0]
    return np.fft.ifft(yf, axis=0)[:length].T


def receive_time_domain(rx_cp: np.ndarray, combiner: ArrayLike, config: OfdmConfig) -> np.ndarray:
    """Combine, strip the CP and return the occupied frequency-domain samples."""
    combined = np.asarray(combiner).conj() @ rx_cp
    spectrum = np.fft.fft(combined[config.cp_len:], norm="ortho")
    return spectrum[np.asarray(config.occupied)]


def correlate_rx(y: ArrayLike, ref: ZcSequence) -> complex:
    """``(1/N_zc) * sum_k conj(ref[k]) * y[k]`` over the occupied set."""
    y = np.asarray(y)
    if y.shape[-1] != ref.length:
        raise ValueError(f"{y.shape[-1]} samples for a length-{ref.length} reference")
    return complex(np.mean(ref.samples.conj() * y))


def add_noise(y: np.ndarray, combiner: ArrayLike, snr_linear: float, rng: np.random.Generator) -> np.ndarray:
    """Add ``w^H n`` with ``n ~ CN(0, I/snr)`` drawn per antenna and subcarrier."""
    combiner = np.asarray(combiner)
    sigma2 = 1.0 / snr_linear
    shape = (combiner.size, y.shape[-1])
    n = np.sqrt(sigma2 / 2) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    return y + combiner.conj() @ n
