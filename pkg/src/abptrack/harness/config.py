"""INI configuration: one section per module, every key optional.

Angles in files carry a ``_deg`` or ``_rad`` suffix; everything is
converted to radians on load. Unknown sections or keys are errors.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from ..arrays import ArrayGeometry, ULA, UPA
from ..channel import ChannelConfig, EvolutionParams, PulseShape
from ..pilots import OfdmConfig
from ..tracking.campaign import CampaignConfig, ConfigError

DEFAULT_PROFILE = "default.ini"

_KEYS = {
    "simulation": {"protocol", "t_tot", "t_d", "schedule_mode", "snr_db", "seed", "wideband", "axes",
                   "initial_refine"},
    "arrays": {"tx_kind", "tx_n_x", "tx_n_y", "tx_spacing_x", "tx_spacing_y", "rx_m", "rx_spacing"},
    "channel": {"n_paths", "mu_range_deg", "phi_range_deg", "aoa_range_deg", "delay_spread_s",
                "min_separation_rad", "paths_csv", "initial_angles_deg", "motion", "doppler_hz", "symbol_s",
                "var_mu_rad2", "var_phi_rad2", "v_kmh", "v_el_kmh", "distance_m", "var_jitter_rad2", "walk_aoa",
                "pulse", "rolloff"},
    "pilots": {"n_fft", "cp_len", "n_used", "subcarrier_spacing_hz", "roots", "n_pilot"},
    "estimator": {"ell_az", "ell_el"},
    "tracking": {"threshold_deg", "threshold_domain", "strength_threshold_db", "direct_bits", "differential_bits",
                 "codebook_samples", "gob_supporting", "gob_backup", "gob_threshold_db"},
    "impairment": {"var_phase", "var_amp"},
    "calibration": {"method", "snr_db", "n_rf"},
    "sweep": {"t_d_values", "protocols", "jobs"},
    "output": {"out_dir"},
}


@dataclass(frozen=True)
class SimulationConfig:
    campaign: CampaignConfig = field(default_factory=CampaignConfig)
    sweep_t_d: tuple[int, ...] = (10, 100, 1000, 2000)
    sweep_protocols: tuple[str, ...] = ()
    jobs: int = 1
    out_dir: str | None = None

    @property
    def seed(self) -> int:
        return self.campaign.seed

    def with_seed(self, seed: int) -> "SimulationConfig":
        return replace(self, campaign=replace(self.campaign, seed=seed))


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _optional_int(text: str) -> int | None:
    return None if text.strip().lower() in ("none", "inf", "") else int(text)


def _bool(text: str) -> bool:
    v = text.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _pairs(text: str) -> tuple[tuple[float, float], ...]:
    out = []
    for chunk in text.split(";"):
        if chunk.strip():
            el, az = _floats(chunk)
            out.append((el, az))
    return tuple(out)


def _deg_range(text: str) -> tuple[float, float]:
    lo, hi = _floats(text)
    return math.radians(lo), math.radians(hi)


def default_profile_path() -> Path:
    return Path(str(resources.files("abptrack") / "profiles" / DEFAULT_PROFILE))


def parse_config(parser: configparser.ConfigParser, source: str = "<config>") -> SimulationConfig:
    for section in parser.sections():
        if section not in _KEYS:
            raise ConfigError(f"{source}: unknown section [{section}]")
        extra = set(parser[section]) - _KEYS[section]
        if extra:
            raise ConfigError(f"{source}: unknown keys in [{section}]: {', '.join(sorted(extra))}")

    def get(section, key, conv, default):
        if parser.has_option(section, key):
            raw = parser.get(section, key)
            try:
                return conv(raw)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{source}: [{section}] {key} = {raw!r}: {exc}") from exc
        return default

    defaults = CampaignConfig()
    d = lambda name: getattr(defaults, name)

    try:
        kind = get("arrays", "tx_kind", str.upper, ULA)
        n_x = get("arrays", "tx_n_x", int, 1)
        n_y = get("arrays", "tx_n_y", int, 16)
        sx = get("arrays", "tx_spacing_x", float, 0.5)
        sy = get("arrays", "tx_spacing_y", float, 0.5)
        if kind not in (ULA, UPA):
            raise ConfigError(f"{source}: tx_kind must be ULA or UPA")
        tx = ArrayGeometry.ula(n_y, sy) if kind == ULA else ArrayGeometry.upa(n_x, n_y, sx, sy)
        rx = ArrayGeometry.ula(get("arrays", "rx_m", int, 8), get("arrays", "rx_spacing", float, 0.5))

        ev0 = EvolutionParams()
        evolution = EvolutionParams(
            doppler_hz=get("channel", "doppler_hz", float, ev0.doppler_hz),
            symbol_s=get("channel", "symbol_s", float, ev0.symbol_s),
            var_mu=get("channel", "var_mu_rad2", float, ev0.var_mu),
            var_phi=get("channel", "var_phi_rad2", float, ev0.var_phi),
            motion=get("channel", "motion", str.lower, ev0.motion),
            v_kmh=get("channel", "v_kmh", float, ev0.v_kmh),
            v_el_kmh=get("channel", "v_el_kmh", float, ev0.v_el_kmh),
            distance_m=get("channel", "distance_m", float, ev0.distance_m),
            var_jitter=get("channel", "var_jitter_rad2", float, ev0.var_jitter),
            walk_aoa=get("channel", "walk_aoa", _bool, ev0.walk_aoa),
        )
        ch0 = ChannelConfig()
        channel = ChannelConfig(
            n_paths=get("channel", "n_paths", int, ch0.n_paths),
            mu_range=get("channel", "mu_range_deg", _deg_range, ch0.mu_range),
            phi_range=get("channel", "phi_range_deg", _deg_range, ch0.phi_range),
            aoa_range=get("channel", "aoa_range_deg", _deg_range, ch0.aoa_range),
            delay_spread_s=get("channel", "delay_spread_s", float, ch0.delay_spread_s),
            min_separation=get("channel", "min_separation_rad", float, ch0.min_separation),
        )
        pulse = PulseShape(get("channel", "pulse", str.lower, "raised_cosine"), get("channel", "rolloff", float, 0.25))
        ofdm = OfdmConfig.centered(get("pilots", "n_fft", int, 512), get("pilots", "cp_len", int, 64),
                                   get("pilots", "n_used", int, 63))
        ofdm = replace(ofdm, subcarrier_spacing=get("pilots", "subcarrier_spacing_hz", float, ofdm.subcarrier_spacing),
                       symbol_s=evolution.symbol_s)
        initial = get("channel", "initial_angles_deg", _floats, None)
        if initial is not None and len(initial) != 3:
            raise ConfigError(f"{source}: initial_angles_deg needs mu, phi, varphi")
        roots = get("pilots", "roots", _ints, d("roots"))
        if len(roots) != 2:
            raise ConfigError(f"{source}: roots needs two values")
        axes = get("simulation", "axes", lambda s: tuple(a.strip().lower() for a in s.split(",") if a.strip()),
                   d("axes"))
        campaign = CampaignConfig(
            tx=tx, rx=rx, axes=axes, evolution=evolution, channel=channel, pulse=pulse, ofdm=ofdm, roots=roots,
            initial_angles_deg=initial,
            paths_csv=get("channel", "paths_csv", str, None),
            protocol=get("simulation", "protocol", str.lower, d("protocol")),
            t_tot=get("simulation", "t_tot", int, d("t_tot")),
            t_d=get("simulation", "t_d", int, d("t_d")),
            schedule_mode=get("simulation", "schedule_mode", str.lower, d("schedule_mode")),
            snr_db=get("simulation", "snr_db", float, d("snr_db")),
            seed=get("simulation", "seed", int, d("seed")),
            wideband=get("simulation", "wideband", _bool, d("wideband")),
            initial_refine=get("simulation", "initial_refine", _bool, d("initial_refine")),
            n_pilot=get("pilots", "n_pilot", int, d("n_pilot")),
            ell_az=get("estimator", "ell_az", int, d("ell_az")),
            ell_el=get("estimator", "ell_el", int, d("ell_el")),
            threshold_deg=get("tracking", "threshold_deg", float, d("threshold_deg")),
            threshold_domain=get("tracking", "threshold_domain", str.lower, d("threshold_domain")),
            strength_threshold_db=get("tracking", "strength_threshold_db", float, d("strength_threshold_db")),
            direct_bits=get("tracking", "direct_bits", _optional_int, d("direct_bits")),
            differential_bits=get("tracking", "differential_bits", _optional_int, d("differential_bits")),
            codebook_samples=get("tracking", "codebook_samples", int, d("codebook_samples")),
            gob_supporting=get("tracking", "gob_supporting", _floats, None),
            gob_backup=get("tracking", "gob_backup", _pairs, None),
            gob_threshold_db=get("tracking", "gob_threshold_db", float, d("gob_threshold_db")),
            impairment_var_phase=get("impairment", "var_phase", float, 0.0),
            impairment_var_amp=get("impairment", "var_amp", float, 0.0),
            calibration=get("calibration", "method", str.lower, d("calibration")),
            calibration_snr_db=get("calibration", "snr_db",
                                   lambda s: None if s.strip().lower() == "none" else float(s), 0.0),
            n_rf=get("calibration", "n_rf", int, d("n_rf")),
        )
        return SimulationConfig(
            campaign=campaign,
            sweep_t_d=get("sweep", "t_d_values", _ints, (10, 100, 1000, 2000)),
            sweep_protocols=get("sweep", "protocols",
                                lambda s: tuple(p.strip().lower() for p in s.split(",") if p.strip()), ()),
            jobs=get("sweep", "jobs", int, 1),
            out_dir=get("output", "out_dir", str, None),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def load_config(path: str | Path | None = None) -> SimulationConfig:
    """Read ``path`` on top of built-in defaults; ``None`` loads the shipped default profile."""
    path = default_profile_path() if path is None else Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(parser, str(path))


def loads_config(text: str) -> SimulationConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    return parse_config(parser)
