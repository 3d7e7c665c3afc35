"""Geometric wideband multipath channel with temporal evolution.

Angles are carried twice per path: the physical angles (polar ``mu``,
azimuth ``phi`` at the transmitter, ``varphi`` at the receiver) and the
spatial frequencies ``theta``, ``psi``, ``nu`` the estimator works with.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.special

from .arrays import (
    ArrayGeometry,
    ULA,
    angles_to_spatial,
    spatial_to_angles,
    steering_ula,
    steering_upa,
    ula_angle,
    ula_spatial,
    wrap_spatial,
)
from .pilots import OfdmConfig

KMH = 1.0 / 3.6

STATIC = "static"
RANDOM_WALK = "random_walk"
MODEL_I = "model_i"
MODEL_II = "model_ii"
MOTION_MODELS = (STATIC, RANDOM_WALK, MODEL_I, MODEL_II)


class ChannelGenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class PulseShape:
    """Combined filter response sampled in units of the sample period."""

    kind: str = "raised_cosine"
    rolloff: float = 0.25

    def __call__(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.kind == "ideal":
            return np.where(np.abs(t) < 1e-12, 1.0, 0.0)
        if self.kind != "raised_cosine":
            raise ValueError(f"unknown pulse {self.kind!r}")
        b = self.rolloff
        if b == 0:
            return np.sinc(t)
        denom = 1.0 - (2.0 * b * t) ** 2
        edge = np.abs(denom) < 1e-10
        safe = np.where(edge, 1.0, denom)
        body = np.sinc(t) * np.cos(np.pi * b * t) / safe
        return np.where(edge, np.pi / 4 * np.sinc(1.0 / (2.0 * b)), body)


IDEAL_PULSE = PulseShape("ideal")


@dataclass(frozen=True)
class PathState:
    gain: complex
    delay: float
    theta: float
    psi: float
    nu: float
    mu: float = math.pi / 2
    phi: float = 0.0
    varphi: float = 0.0
    # mean power of the Gauss-Markov innovation
    power: float = 1.0


@dataclass(frozen=True)
class EvolutionParams:
    doppler_hz: float = 0.0
    symbol_s: float = 3.7e-6
    var_mu: float = 0.0
    var_phi: float = 0.0
    motion: str = STATIC
    v_kmh: float = 100.0
    v_el_kmh: float = 30.0
    distance_m: float = 100.0
    var_jitter: float = (math.pi / 180) ** 2
    walk_aoa: bool = False

    def __post_init__(self):
        if self.motion not in MOTION_MODELS:
            raise ValueError(f"unknown motion model {self.motion!r}")
        if self.motion in (MODEL_I, MODEL_II) and self.distance_m <= 0:
            raise ValueError("BS-UE distance must be positive")
        if self.symbol_s <= 0:
            raise ValueError("symbol duration must be positive")
        if min(self.var_mu, self.var_phi, self.var_jitter) < 0:
            raise ValueError("variances must be nonnegative")

    @property
    def rho_d(self) -> float:
        return float(scipy.special.j0(2 * math.pi * self.doppler_hz * self.symbol_s))

    @property
    def az_drift(self) -> float:
        """Physical azimuth change per symbol, radians."""
        return self.v_kmh * KMH / self.distance_m * self.symbol_s

    @property
    def el_drift(self) -> float:
        return self.v_el_kmh * KMH / self.distance_m * self.symbol_s


@dataclass(frozen=True)
class ChannelState:
    paths: tuple[PathState, ...]
    tx: ArrayGeometry
    rx: ArrayGeometry
    evolution: EvolutionParams = field(default_factory=EvolutionParams)
    slot: int = 0

    def __post_init__(self):
        if len(self.paths) < 1:
            raise ValueError("a channel needs at least one path")

    @property
    def n_paths(self) -> int:
        return len(self.paths)

    def tx_response(self, r: int) -> np.ndarray:
        p = self.paths[r]
        return steering_upa(self.tx, p.theta, p.psi)

    def rx_response(self, r: int) -> np.ndarray:
        return steering_ula(self.rx, self.paths[r].nu)

    def gains(self) -> np.ndarray:
        return np.array([p.gain for p in self.paths])

    def with_gains(self, gains: Sequence[complex]) -> "ChannelState":
        paths = tuple(replace(p, gain=complex(g)) for p, g in zip(self.paths, gains))
        return replace(self, paths=paths)


def delay_response(delay: float, ks: np.ndarray, ofdm: OfdmConfig, pulse: PulseShape) -> np.ndarray:
    """``sum_{d<D} p(d Ts - tau) exp(-j 2 pi k d / N)`` for each ``k`` in ``ks``."""
    d = np.arange(ofdm.cp_len)
    taps = pulse(d - delay / ofdm.sample_period)
    return np.exp(-2j * np.pi * np.outer(ks, d) / ofdm.n_fft) @ taps


def flat_response(state: ChannelState) -> np.ndarray:
    """Narrowband channel ``sum_r g_r a_r a_t^H``."""
    h = np.zeros((state.rx.n_tot, state.tx.n_tot), dtype=complex)
    for r, p in enumerate(state.paths):
        h += p.gain * np.outer(state.rx_response(r), state.tx_response(r).conj())
    return h


def freq_response_all(state: ChannelState, ofdm: OfdmConfig, pulse: PulseShape = PulseShape(),
                      ks: Sequence[int] | None = None) -> np.ndarray:
    """Channel matrices on subcarriers ``ks`` (default: the occupied set), ``K x M x N``."""
    ks = np.asarray(ofdm.occupied if ks is None else ks)
    out = np.zeros((ks.size, state.rx.n_tot, state.tx.n_tot), dtype=complex)
    for r, p in enumerate(state.paths):
        rho = delay_response(p.delay, ks, ofdm, pulse)
        outer = np.outer(state.rx_response(r), state.tx_response(r).conj())
        out += (p.gain * rho)[:, None, None] * outer[None]
    return out


def freq_response(state: ChannelState, k: int, ofdm: OfdmConfig, pulse: PulseShape = PulseShape()) -> np.ndarray:
    """Channel matrix ``H[k]`` (``M_tot x N_tot``) on subcarrier ``k``."""
    if not 0 <= k < ofdm.n_fft:
        raise ValueError(f"subcarrier {k} outside 0..{ofdm.n_fft - 1}")
    return freq_response_all(state, ofdm, pulse, [k])[0]


def delay_taps(state: ChannelState, ofdm: OfdmConfig, pulse: PulseShape = PulseShape()) -> np.ndarray:
    """Delay-domain channel ``H[d]`` for ``d = 0..D-1``, ``D x M x N``."""
    d = np.arange(ofdm.cp_len)
    out = np.zeros((ofdm.cp_len, state.rx.n_tot, state.tx.n_tot), dtype=complex)
    for r, p in enumerate(state.paths):
        taps = pulse(d - p.delay / ofdm.sample_period)
        outer = np.outer(state.rx_response(r), state.tx_response(r).conj())
        out += (p.gain * taps)[:, None, None] * outer[None]
    return out


def _jitter(params: EvolutionParams, rng: np.random.Generator | None, size=None):
    if rng is None or params.var_jitter == 0:
        return 0.0 if size is None else np.zeros(size)
    return rng.normal(0.0, math.sqrt(params.var_jitter), size)


def motion_step_I(psi: float, params: EvolutionParams, rng: np.random.Generator | None = None,
                  *, spacing: float = 0.5, phi: float | None = None) -> float:
    """One symbol of ring motion seen from a linear array.

    The UE's physical azimuth advances by ``(v/d) T_s``; the matching change
    of spatial frequency is added to ``psi`` together with Gaussian jitter.
    """
    if params.distance_m <= 0:
        raise ValueError("BS-UE distance must be positive")
    if phi is None:
        phi = ula_angle(psi, spacing)
    drift = ula_spatial(phi + params.az_drift, spacing) - ula_spatial(phi, spacing)
    return wrap_spatial(psi + drift + _jitter(params, rng))


def motion_step_II(theta: float, psi: float, params: EvolutionParams, rng: np.random.Generator | None = None,
                   *, geom: ArrayGeometry, mu: float | None = None, phi: float | None = None) -> tuple[float, float]:
    """One symbol of motion on a sphere seen from a planar array."""
    if params.distance_m <= 0:
        raise ValueError("BS-UE distance must be positive")
    if mu is None or phi is None:
        mu, phi = spatial_to_angles(theta, psi, geom)
    t0, p0 = angles_to_spatial(mu, phi, geom)
    t1, p1 = angles_to_spatial(mu + params.el_drift, phi + params.az_drift, geom)
    w = _jitter(params, rng, 2)
    return wrap_spatial(theta + (t1 - t0) + w[0]), wrap_spatial(psi + (p1 - p0) + w[1])


def evolve(state: ChannelState, rng: np.random.Generator | None = None,
           *, motion_rng: np.random.Generator | None = None) -> ChannelState:
    """Advance the channel by one slot.

    Gains follow ``g <- rho g + sqrt(1 - rho^2) b``; angles move according to
    the configured motion model. Delays are fixed. ``rng`` drives fading and
    ``motion_rng`` (default: ``rng``) drives the angle processes.
    """
    ev = state.evolution
    motion_rng = rng if motion_rng is None else motion_rng
    rho = ev.rho_d
    n = state.n_paths

    if rho < 1.0 and rng is not None:
        b = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / math.sqrt(2)
    else:
        b = np.zeros(n, dtype=complex)
    innov = math.sqrt(max(0.0, 1.0 - rho * rho))

    new_paths = []
    for r, p in enumerate(state.paths):
        gain = rho * p.gain + innov * math.sqrt(p.power) * b[r]
        kw = {"gain": complex(gain)}
        if ev.motion == RANDOM_WALK and motion_rng is not None:
            mu = p.mu + motion_rng.normal(0.0, math.sqrt(ev.var_mu)) if ev.var_mu else p.mu
            phi = p.phi + motion_rng.normal(0.0, math.sqrt(ev.var_phi)) if ev.var_phi else p.phi
            theta, psi = angles_to_spatial(mu, phi, state.tx)
            kw.update(mu=mu, phi=phi, theta=theta, psi=psi)
        elif ev.motion == MODEL_I:
            psi = motion_step_I(p.psi, ev, motion_rng, spacing=state.tx.spacing_y, phi=p.phi)
            kw.update(phi=p.phi + ev.az_drift, psi=psi)
        elif ev.motion == MODEL_II:
            theta, psi = motion_step_II(p.theta, p.psi, ev, motion_rng, geom=state.tx, mu=p.mu, phi=p.phi)
            kw.update(mu=p.mu + ev.el_drift, phi=p.phi + ev.az_drift, theta=theta, psi=psi)
        if ev.walk_aoa and ev.var_phi and motion_rng is not None:
            varphi = p.varphi + motion_rng.normal(0.0, math.sqrt(ev.var_phi))
            kw.update(varphi=varphi, nu=float(ula_spatial(varphi, state.rx.spacing_y)))
        new_paths.append(replace(p, **kw))
    return replace(state, paths=tuple(new_paths), slot=state.slot + 1)


@dataclass(frozen=True)
class ChannelConfig:
    """Statistical initial-path generator settings (angles in radians)."""

    n_paths: int = 1
    mu_range: tuple[float, float] = (math.radians(30), math.radians(60))
    phi_range: tuple[float, float] = (math.radians(-45), math.radians(45))
    aoa_range: tuple[float, float] = (math.radians(-45), math.radians(45))
    delay_spread_s: float = 30e-9
    max_delay_s: float | None = None
    min_separation: float = math.pi / 4
    max_retries: int = 1000


def _path_from_angles(gain, delay, mu, phi, varphi, tx, rx, power=1.0) -> PathState:
    if tx.kind == ULA:
        mu = math.pi / 2
    theta, psi = angles_to_spatial(mu, phi, tx)
    nu = float(ula_spatial(varphi, rx.spacing_y))
    return PathState(complex(gain), float(delay), theta, psi, nu, mu, phi, varphi, power)


def generate_initial(config: ChannelConfig, rng: np.random.Generator | int | None, tx: ArrayGeometry,
                     rx: ArrayGeometry, evolution: EvolutionParams = EvolutionParams(),
                     max_delay_s: float | None = None) -> ChannelState:
    """Draw a reproducible initial channel.

    Paths are sorted by gain magnitude, normalised to unit total power and
    kept at least ``min_separation`` apart in azimuth spatial frequency.
    """
    rng = np.random.default_rng(rng)
    n = config.n_paths
    if n < 1:
        raise ValueError("need at least one path")
    limit = config.max_delay_s if config.max_delay_s is not None else max_delay_s

    for _ in range(config.max_retries):
        mu = rng.uniform(*config.mu_range, n)
        phi = rng.uniform(*config.phi_range, n)
        if tx.kind == ULA:
            mu = np.full(n, math.pi / 2)
        _, psi = angles_to_spatial(mu, phi, tx)
        psi = np.atleast_1d(psi)
        gaps = np.abs(wrap_spatial(psi[:, None] - psi[None, :]))
        if n == 1 or np.min(gaps[~np.eye(n, dtype=bool)]) >= config.min_separation:
            break
    else:
        raise ChannelGenerationError(
            f"could not place {n} paths {config.min_separation:.4g} rad apart after {config.max_retries} tries")

    varphi = rng.uniform(*config.aoa_range, n)
    g = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / math.sqrt(2)
    if n == 1:
        delays = np.zeros(1)
    else:
        delays = rng.exponential(config.delay_spread_s, n)
        delays[0] = 0.0
    if limit is not None:
        delays = np.minimum(delays, 0.999 * limit)
    order = np.argsort(-np.abs(g), kind="stable")
    g = g[order] / np.sqrt(np.sum(np.abs(g) ** 2))
    paths = tuple(
        _path_from_angles(g[i], delays[i], mu[order][i], phi[order][i], varphi[i], tx, rx, float(abs(g[i]) ** 2))
        for i in range(n)
    )
    return ChannelState(paths, tx, rx, evolution)


def single_path(tx: ArrayGeometry, rx: ArrayGeometry, *, mu: float = math.pi / 2, phi: float = 0.0,
                varphi: float = 0.0, gain: complex = 1.0, evolution: EvolutionParams = EvolutionParams()) -> ChannelState:
    return ChannelState((_path_from_angles(gain, 0.0, mu, phi, varphi, tx, rx),), tx, rx, evolution)


CSV_COLUMNS = ("gain_re", "gain_im", "delay_s", "theta_rad", "psi_rad", "nu_rad")


def load_paths_csv(path: str | Path, tx: ArrayGeometry, rx: ArrayGeometry,
                   evolution: EvolutionParams = EvolutionParams()) -> ChannelState:
    """Read initial paths from CSV (one row per path, columns in ``CSV_COLUMNS``)."""
    paths = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(CSV_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            g = complex(float(row["gain_re"]), float(row["gain_im"]))
            theta, psi, nu = (float(row[c]) for c in ("theta_rad", "psi_rad", "nu_rad"))
            if tx.kind == ULA:
                mu, phi = math.pi / 2, ula_angle(psi, tx.spacing_y)
            else:
                mu, phi = spatial_to_angles(theta, psi, tx)
            varphi = ula_angle(nu, rx.spacing_y)
            paths.append(PathState(g, float(row["delay_s"]), theta, psi, nu, mu, phi, varphi, abs(g) ** 2 or 1.0))
    if not paths:
        raise ValueError(f"{path}: no paths")
    paths.sort(key=lambda p: -abs(p.gain))
    return ChannelState(tuple(paths), tx, rx, evolution)
