"""Slot-by-slot tracking simulation and its CSV trace."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .. import calibration as cal
from ..arrays import ArrayGeometry, ImpairmentModel, steering_ula, steering_upa, wrap_spatial
from ..channel import (
    ChannelConfig,
    ChannelState,
    EvolutionParams,
    PulseShape,
    delay_response,
    delay_taps,
    evolve,
    generate_initial,
    load_paths_csv,
    single_path,
)
from ..estimator import AZ, EL, coverage_lost, make_pair, offset_for, ratio_metric, invert_ratio_metric
from ..harness.rng import CALIBRATION, CHANNEL_INIT, CODEBOOK, FADING, IMPAIRMENT, MOTION, NOISE, RngStreams
from ..pilots import LTE_ROOTS, OfdmConfig, add_noise, correlate_rx, pilot_pair, propagate_time_domain, \
    receive_time_domain, transmit_abp_symbol, zc_crosscorr
from .protocols import (
    ABP_PROTOCOLS,
    BS_DIFFERENTIAL,
    BS_DIRECT,
    GENIE,
    FeedbackEvent,
    GOB,
    NO_TRACKING,
    PROTOCOLS,
    RESWEEP,
    RETARGET,
    UE_DIFFERENTIAL,
    UE_DIRECT,
    TrackingState,
    step_bs_differential,
    step_bs_direct,
    step_gob_baseline,
    step_ue_differential,
    step_ue_direct,
)
from .quantizer import RatioCodebook, dequantize, lloyd_train, quantize
from .schedule import APERIODIC, PERIODIC, FrameSchedule

TRACE_HEADER = ("slot", "true_psi_rad", "true_theta_rad", "anchor_az_rad", "anchor_el_rad", "zeta",
                "feedback_bits", "bf_gain", "event")
EVENTS = ("none", "update", "resweep", "feedback")

# payload size reported for unquantized feedback
FLOAT_BITS = 64


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class CampaignConfig:
    tx: ArrayGeometry = field(default_factory=lambda: ArrayGeometry.ula(16))
    rx: ArrayGeometry = field(default_factory=lambda: ArrayGeometry.ula(8))
    protocol: str = BS_DIRECT
    axes: tuple[str, ...] = (AZ,)
    t_tot: int = 10_000
    t_d: int = 100
    schedule_mode: str = PERIODIC
    snr_db: float = 0.0
    ell_az: int = 1
    ell_el: int = 1
    threshold_deg: float = 10.0
    # "angle": the threshold is a physical angle moved from broadside;
    # "spatial": the number is used directly as a spatial-frequency step
    threshold_domain: str = "spatial"
    strength_threshold_db: float = 3.0
    direct_bits: int | None = 4
    differential_bits: int | None = 3
    codebook_samples: int = 20_000
    wideband: bool = False
    ofdm: OfdmConfig = field(default_factory=OfdmConfig.centered)
    pulse: PulseShape = field(default_factory=PulseShape)
    n_pilot: int = 63
    roots: tuple[int, int] = LTE_ROOTS
    evolution: EvolutionParams = field(default_factory=EvolutionParams)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    # (mu, phi, varphi) in degrees for a deterministic single-path start
    initial_angles_deg: tuple[float, float, float] | None = None
    paths_csv: str | None = None
    impairment_var_phase: float = 0.0
    impairment_var_amp: float = 0.0
    calibration: str = "none"
    calibration_snr_db: float | None = 0.0
    n_rf: int = 4
    initial_refine: bool = True
    gob_supporting: tuple[float, ...] | None = None
    gob_backup: tuple[tuple[float, float], ...] | None = None
    gob_threshold_db: float = 3.0
    seed: int = 0

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"unknown protocol {self.protocol!r}; choose from {', '.join(PROTOCOLS)}")
        if not self.axes or any(a not in (AZ, EL) for a in self.axes):
            raise ConfigError(f"axes must be drawn from ('az', 'el'), got {self.axes}")
        if EL in self.axes and self.tx.n_x < 4:
            raise ConfigError("elevation tracking needs at least 4 elements along x")
        if self.t_tot < 1 or self.t_d < 1:
            raise ConfigError("T_tot and T_d must be positive")
        if self.threshold_domain not in ("angle", "spatial"):
            raise ConfigError(f"unknown threshold domain {self.threshold_domain!r}")
        if self.calibration not in ("none", "perfect", *cal.METHODS):
            raise ConfigError(f"unknown calibration {self.calibration!r}")
        if self.wideband and self.ofdm.n_zc != self.n_pilot:
            object.__setattr__(self, "n_pilot", self.ofdm.n_zc)
        try:
            offset_for(self.ell_az, self.tx.n_y)
            if EL in self.axes:
                offset_for(self.ell_el, self.tx.n_x)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def delta_az(self) -> float:
        return offset_for(self.ell_az, self.tx.n_y)

    @property
    def delta_el(self) -> float:
        return offset_for(self.ell_el, self.tx.n_x) if self.tx.n_x >= 4 else math.pi / 2

    @property
    def snr_linear(self) -> float:
        return 10 ** (self.snr_db / 10)

    def threshold(self, axis: str) -> float:
        spacing = self.tx.spacing_y if axis == AZ else self.tx.spacing_x
        if self.threshold_domain == "spatial":
            return math.radians(self.threshold_deg)
        return 2 * math.pi * spacing * math.sin(math.radians(self.threshold_deg))

    @property
    def schedule(self) -> FrameSchedule:
        return FrameSchedule(self.t_tot, self.t_d, 1, self.schedule_mode)

    def gob_layout(self) -> tuple[tuple[float, ...], tuple[tuple[float, float], ...]]:
        planar = EL in self.axes
        sup = self.gob_supporting
        back = self.gob_backup
        if sup is None:
            sup = () if planar else (-0.25, 0.25)
        if back is None:
            back = ((0, -1), (0, 1), (-1, 0), (1, 0)) if planar else ((0, -1), (0, 1), (0, -2), (0, 2))
        return tuple(sup), tuple(back)


@dataclass(frozen=True)
class TraceRecord:
    slot: int
    true_psi: float
    true_theta: float
    anchor_az: float
    anchor_el: float
    zeta: float
    feedback_bits: int
    bf_gain: float
    event: str

    def row(self) -> list[str]:
        f = "{:.9g}".format
        return [str(self.slot), f(self.true_psi), f(self.true_theta), f(self.anchor_az), f(self.anchor_el),
                f(self.zeta), str(self.feedback_bits), f(self.bf_gain), self.event]


def ratio_training_samples(n_axis: int, delta: float, snr_linear: float, n: int, rng: np.random.Generator,
                           n_pilot: int = 63) -> np.ndarray:
    """Noisy single-path ratio metrics with the offset uniform over the pair's span."""
    x = rng.uniform(-delta, delta, n)
    m = np.arange(n_axis)
    resp = lambda c: np.exp(1j * np.outer(c - x, m)).sum(axis=1) / n_axis
    sigma = math.sqrt(1.0 / (snr_linear * n_pilot) / 2)
    noise = sigma * (rng.standard_normal((2, n)) + 1j * rng.standard_normal((2, n)))
    chi_m = np.abs(resp(-delta) + noise[0]) ** 2
    chi_p = np.abs(resp(delta) + noise[1]) ** 2
    return (chi_m - chi_p) / (chi_m + chi_p)


class Link:
    """Measurements and data-beam gain for one campaign.

    ``impairment`` and ``calibration`` are element diagonals; every beam is
    pre-multiplied by ``K`` and then distorted by the hardware ``C``.
    """

    def __init__(self, cfg: CampaignConfig, impairment: np.ndarray, calibration: np.ndarray,
                 noise_rng: np.random.Generator):
        self.cfg = cfg
        self.c = impairment
        self.k = calibration
        self.rng = noise_rng
        self.combiner = None
        self._rho = None
        self._beta = None

    def attach(self, state: ChannelState) -> None:
        p = state.paths[0]
        self.combiner = steering_ula(state.rx, p.nu)
        if self.cfg.wideband:
            ks = np.asarray(self.cfg.ofdm.occupied)
            self._rho = np.array([delay_response(q.delay, ks, self.cfg.ofdm, self.cfg.pulse) for q in state.paths])
        else:
            s0, s1 = pilot_pair(self.cfg.n_pilot, self.cfg.roots)
            # Lambda_0 picks up beta * (beam-1 amplitude) and vice versa
            self._beta = (zc_crosscorr(s1, s0), zc_crosscorr(s0, s1))

    def beam(self, el: float, az: float) -> np.ndarray:
        return self.k * steering_upa(self.cfg.tx, el, az)

    def rows(self, state: ChannelState) -> np.ndarray:
        """``w^H H[k]`` on each occupied subcarrier (one row when flat)."""
        n_k = 1 if self._rho is None else self._rho.shape[1]
        out = np.zeros((n_k, state.tx.n_tot), dtype=complex)
        for r, p in enumerate(state.paths):
            rx_gain = np.vdot(self.combiner, state.rx_response(r))
            coeff = p.gain * rx_gain * (1.0 if self._rho is None else self._rho[r])
            out += np.outer(np.atleast_1d(coeff), state.tx_response(r).conj())
        return out

    def bf_gain(self, state: ChannelState, el: float, az: float) -> float:
        return float(np.mean(np.abs(self.rows(state) @ (self.c * self.beam(el, az))) ** 2))

    def probe(self, state: ChannelState, beams: Sequence[np.ndarray]) -> np.ndarray:
        """Noisy ``|Lambda|^2`` for each beam; beams go out two per symbol."""
        beams = list(beams)
        n_beams = len(beams)
        if n_beams % 2:
            beams.append(np.zeros_like(beams[0]))
        out = []
        if self.cfg.wideband:
            taps = delay_taps(state, self.cfg.ofdm, self.cfg.pulse)
            s0, s1 = pilot_pair(self.cfg.ofdm.n_zc, self.cfg.roots)
        else:
            row = self.rows(state)[0]
            sigma = math.sqrt(1.0 / (self.cfg.snr_linear * self.cfg.n_pilot) / 2)
        for i in range(0, len(beams), 2):
            b0, b1 = self.c * beams[i], self.c * beams[i + 1]
            if self.cfg.wideband:
                x = transmit_abp_symbol(b0, b1, self.cfg.ofdm, self.cfg.roots)
                y = receive_time_domain(propagate_time_domain(x, taps), self.combiner, self.cfg.ofdm)
                y = add_noise(y[None, :], self.combiner, self.cfg.snr_linear, self.rng)[0]
                lam = (correlate_rx(y, s0), correlate_rx(y, s1))
            else:
                u0, u1 = row @ b0, row @ b1
                n = sigma * (self.rng.standard_normal(2) + 1j * self.rng.standard_normal(2))
                lam = (u0 + self._beta[0] * u1 + n[0], u1 + self._beta[1] * u0 + n[1])
            out += [abs(lam[0]) ** 2, abs(lam[1]) ** 2]
        return np.array(out[:n_beams])


@dataclass
class CampaignResult:
    records: list[TraceRecord]
    config: CampaignConfig
    calibration: cal.CalibrationResult | None = None
    dtc_slots: list[int] = field(default_factory=list)

    def csv_text(self) -> str:
        return trace_csv(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])


def trace_csv(records: Sequence[TraceRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    for r in records:
        w.writerow(r.row())
    return buf.getvalue()


def write_trace(path: str | Path, records: Sequence[TraceRecord]) -> None:
    Path(path).write_text(trace_csv(records))


def read_trace(path: str | Path) -> list[TraceRecord]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != TRACE_HEADER:
            raise ValueError(f"{path}: unexpected trace header")
        return [TraceRecord(int(r[0]), float(r[1]), float(r[2]), float(r[3]), float(r[4]), float(r[5]),
                            int(r[6]), float(r[7]), r[8]) for r in reader]


def _initial_state(cfg: CampaignConfig, streams: RngStreams) -> ChannelState:
    if cfg.paths_csv:
        return load_paths_csv(cfg.paths_csv, cfg.tx, cfg.rx, cfg.evolution)
    if cfg.initial_angles_deg is not None:
        mu, phi, varphi = (math.radians(v) for v in cfg.initial_angles_deg)
        return single_path(cfg.tx, cfg.rx, mu=mu, phi=phi, varphi=varphi, evolution=cfg.evolution)
    limit = cfg.ofdm.cp_len * cfg.ofdm.sample_period if cfg.wideband else None
    return generate_initial(cfg.channel, streams[CHANNEL_INIT], cfg.tx, cfg.rx, cfg.evolution, max_delay_s=limit)


def _hardware(cfg: CampaignConfig, streams: RngStreams):
    if cfg.impairment_var_phase or cfg.impairment_var_amp:
        imp = ImpairmentModel.draw(cfg.tx, cfg.impairment_var_phase, cfg.impairment_var_amp, streams[IMPAIRMENT])
    else:
        imp = ImpairmentModel.ideal(cfg.tx)
    result = None
    if cfg.calibration == "perfect":
        k = 1.0 / imp.diagonal
    elif cfg.calibration == cal.SINGLE_SOURCE:
        result = cal.calibrate_single(imp, cfg.tx, cfg.calibration_snr_db, streams[CALIBRATION])
        k = result.k
    elif cfg.calibration == cal.DISTRIBUTED:
        n_rf = cfg.n_rf
        result = cal.calibrate_distributed(imp, cfg.tx, n_rf, cfg.tx.n_tot // n_rf, cfg.calibration_snr_db,
                                           streams[CALIBRATION])
        k = result.k
    else:
        k = np.ones(cfg.tx.n_tot, dtype=complex)
    return imp.diagonal, k, result


def _codebooks(cfg: CampaignConfig, streams: RngStreams) -> dict[tuple[str, str], RatioCodebook | None]:
    books: dict[tuple[str, str], RatioCodebook | None] = {}
    rng = streams[CODEBOOK]
    for axis in cfg.axes:
        n_axis = cfg.tx.n_y if axis == AZ else cfg.tx.n_x
        delta = cfg.delta_az if axis == AZ else cfg.delta_el
        need_direct = cfg.protocol in (BS_DIRECT, UE_DIRECT) and cfg.direct_bits is not None
        need_diff = cfg.protocol in (UE_DIFFERENTIAL, BS_DIFFERENTIAL) and cfg.differential_bits is not None
        samples = None
        if need_direct or need_diff:
            samples = ratio_training_samples(n_axis, delta, cfg.snr_linear, cfg.codebook_samples, rng, cfg.n_pilot)
        books[("direct", axis)] = lloyd_train(samples, cfg.direct_bits) if need_direct else None
        books[("diff", axis)] = lloyd_train(np.abs(samples), cfg.differential_bits) if need_diff else None
    return books


class _Runner:
    def __init__(self, cfg: CampaignConfig, streams: RngStreams, link: Link):
        self.cfg = cfg
        self.streams = streams
        self.link = link
        self.grid = cal.dft_directions(cfg.tx)

    def sweep(self, state: ChannelState) -> tuple[float, float]:
        beams = [self.link.beam(el, az) for el, az in self.grid]
        strengths = self.link.probe(state, beams)
        return self.grid[int(np.argmax(strengths))]

    def measure(self, state: ChannelState, el: float, az: float) -> dict[str, float]:
        """Ratio metric of each tracked axis around ``(el, az)``; NaN when nothing arrived."""
        out = {}
        for axis in self.cfg.axes:
            delta = self.cfg.delta_az if axis == AZ else self.cfg.delta_el
            pair = make_pair(self.cfg.tx, el, az, delta, axis=axis, calibration=self.link.k, roots=self.cfg.roots)
            chi = self.link.probe(state, [pair.beam_minus, pair.beam_plus])
            out[axis] = ratio_metric(chi[0], chi[1]) if chi.sum() > 0 else math.nan
        return out

    def refine(self, state: ChannelState, el: float, az: float) -> tuple[float, float]:
        zetas = self.measure(state, el, az)
        est = {EL: el, AZ: az}
        for axis, z in zetas.items():
            if not math.isnan(z) and not coverage_lost(z):
                delta = self.cfg.delta_az if axis == AZ else self.cfg.delta_el
                est[axis] = wrap_spatial(invert_ratio_metric(z, est[axis], delta))
        return est[EL], est[AZ]

    def acquire(self, state: ChannelState) -> tuple[float, float]:
        el, az = self.sweep(state)
        if self.cfg.initial_refine and self.cfg.protocol in (NO_TRACKING, *ABP_PROTOCOLS):
            el, az = self.refine(state, el, az)
        return el, az


def run_campaign(cfg: CampaignConfig, seed: int | None = None, *, initial: ChannelState | None = None
                 ) -> CampaignResult:
    """Simulate ``cfg.t_tot`` slots; deterministic for a given config and seed."""
    seed = cfg.seed if seed is None else seed
    streams = RngStreams(seed)
    c_diag, k_diag, cal_result = _hardware(cfg, streams)
    state = initial if initial is not None else _initial_state(cfg, streams)
    link = Link(cfg, c_diag, k_diag, streams[NOISE])
    link.attach(state)
    runner = _Runner(cfg, streams, link)
    books = _codebooks(cfg, streams)
    schedule = cfg.schedule
    fading, motion = streams[FADING], streams[MOTION]

    if cfg.protocol == GENIE:
        el0, az0 = state.paths[0].theta, state.paths[0].psi
    else:
        el0, az0 = runner.acquire(state)
    gamma0 = link.bf_gain(state, el0, az0)
    ts = TrackingState.start(
        el0, az0, delta_az=cfg.delta_az, delta_el=cfg.delta_el,
        threshold_az=cfg.threshold(AZ), threshold_el=cfg.threshold(EL),
        strength_threshold_db=cfg.strength_threshold_db, gamma0=gamma0,
        gob_threshold=gamma0 / 10 ** (cfg.gob_threshold_db / 10), protocol=cfg.protocol)
    sup, back = cfg.gob_layout()
    step_az, step_el = 2 * math.pi / cfg.tx.n_y, 2 * math.pi / cfg.tx.n_x

    records: list[TraceRecord] = []
    last_dtc = -1
    dtc_slots: list[int] = []
    for t in range(cfg.t_tot):
        if t > 0:
            state = evolve(state, fading, motion_rng=motion)
        ts = replace(ts, slot=t)
        event, zeta_out, bits = "none", math.nan, 0
        before = (ts.anchor_el, ts.anchor_az)
        if cfg.protocol == GENIE:
            ts = ts.retarget(EL, state.paths[0].theta).retarget(AZ, state.paths[0].psi)
        triggered = False
        if schedule.mode == APERIODIC and ts.gamma0 is not None:
            g_now = link.bf_gain(state, ts.anchor_el, ts.anchor_az)
            triggered = abs(10 * math.log10(max(g_now, 1e-300) / max(ts.gamma0, 1e-300))) >= cfg.strength_threshold_db
        dtc = cfg.protocol not in (NO_TRACKING, GENIE) and schedule.due(t, last_dtc, triggered)
        if dtc:
            last_dtc = t
            dtc_slots.append(t)
            n_log = len(ts.feedback_log)
            if cfg.protocol == GOB:
                ts, event = _gob_slot(ts, state, link, runner, sup, back, step_el, step_az)
            else:
                ts, event, zeta_out = _abp_slot(ts, state, link, runner, books, cfg)
            bits = sum(e.bits for e in ts.feedback_log[n_log:])
            if event == "none" and (ts.anchor_el, ts.anchor_az) != before:
                event = "update"
            if event == "none" and bits:
                event = "feedback"
        gain = link.bf_gain(state, ts.anchor_el, ts.anchor_az)
        p = state.paths[0]
        records.append(TraceRecord(t, p.psi, p.theta, ts.anchor_az, ts.anchor_el, zeta_out, bits, gain, event))
    return CampaignResult(records, cfg, cal_result, dtc_slots)


def _gob_slot(ts, state, link, runner, sup, back, step_el, step_az):
    el, az = ts.anchor_el, ts.anchor_az
    dirs = [(el, wrap_spatial(az + s * step_az)) for s in sup]
    dirs += [(wrap_spatial(el + e * step_el), wrap_spatial(az + a * step_az)) for e, a in back]
    strengths = link.probe(state, [link.beam(d_el, d_az) for d_el, d_az in dirs])
    anchor_strength = link.bf_gain(state, el, az) if not sup else None
    ts, action = step_gob_baseline(ts, dirs, strengths, len(sup), anchor_strength)
    if action == RESWEEP:
        el, az = runner.sweep(state)
        return ts.retarget(EL, el).retarget(AZ, az), "resweep"
    return ts, "update" if action == RETARGET else "none"


def _abp_slot(ts, state, link, runner, books, cfg):
    zetas = runner.measure(state, ts.anchor_el, ts.anchor_az)
    zeta_out = zetas.get(AZ, next(iter(zetas.values())))
    if any(math.isnan(z) or coverage_lost(z) for z in zetas.values()):
        el, az = runner.acquire(state)
        ts = ts.retarget(EL, el).retarget(AZ, az)
        return replace(ts, gamma0=None), "resweep", zeta_out
    proto = cfg.protocol
    if proto == UE_DIRECT:
        gamma = link.bf_gain(state, ts.anchor_el, ts.anchor_az)
        g0 = ts.gamma0
        fired = False
        for axis, z in zetas.items():
            ts, fb = step_ue_direct(replace(ts, gamma0=g0), z, gamma, axis, books[("direct", axis)])
            fired |= fb is not None
        if fired or g0 is None:
            ts = replace(ts, gamma0=None if fired else gamma)
        return ts, "none", zeta_out
    for axis, z in zetas.items():
        if proto == BS_DIRECT:
            book = books[("direct", axis)]
            fed = z if book is None else dequantize(quantize(z, book), book)
            ts = ts.log(FeedbackEvent(ts.slot, axis, FLOAT_BITS if book is None else book.bits, fed))
            ts = step_bs_direct(ts, fed, axis)
        elif proto == UE_DIFFERENTIAL:
            ts, _ = step_ue_differential(ts, z, axis, books[("diff", axis)])
        elif proto == BS_DIFFERENTIAL:
            ts, _ = step_bs_differential(ts, z, axis, books[("diff", axis)])
    return ts, "none", zeta_out

