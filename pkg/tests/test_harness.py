import math

import numpy as np
import pytest

from abptrack.arrays import ArrayGeometry, steering_upa, steering_ula
from abptrack.channel import single_path
from abptrack.harness.cli import OUT_DIR_ENV, run_cli
from abptrack.harness.config import ConfigError, load_config, loads_config
from abptrack.harness.metrics import (
    OnlineMean,
    beamforming_gain,
    emit_cdf,
    se_from_gain,
    spectral_efficiency,
    summarize,
)
from abptrack.harness.rng import FADING, MOTION, NOISE, RngStreams, stream
from abptrack.numerics import fejer_power
from abptrack.pilots import OfdmConfig
from abptrack.tracking.campaign import run_campaign

LOG2_11 = 3.4594316186372973  # math.log2(11), frozen


def test_spectral_efficiency():
    assert math.log2(11) == LOG2_11
    assert spectral_efficiency(0, 10) == 0
    assert spectral_efficiency(1.0, 10) == pytest.approx(LOG2_11)
    with pytest.raises(ValueError):
        spectral_efficiency(1.0, 0)


def test_beamforming_gain():
    tx, rx = ArrayGeometry.ula(16), ArrayGeometry.ula(8)
    state = single_path(tx, rx, phi=0.3, varphi=0.1)
    p = state.paths[0]
    w = steering_ula(rx, p.nu)
    assert beamforming_gain(state, steering_upa(tx, 0, p.psi), w) == pytest.approx(1.0)
    off = beamforming_gain(state, steering_upa(tx, 0, p.psi + 0.3), w)
    assert off == pytest.approx(fejer_power(16, 0.3) / 256)
    cfg = OfdmConfig.centered()
    assert beamforming_gain(state, steering_upa(tx, 0, p.psi), w, cfg) == pytest.approx(1.0)
    rng = np.random.default_rng(0)
    for _ in range(20):
        f = rng.standard_normal(16) + 1j * rng.standard_normal(16)
        assert beamforming_gain(state, f / np.linalg.norm(f), w) <= 1.0 + 1e-12


def test_emit_cdf():
    rows = emit_cdf(np.full(10, 2.5))
    assert len(rows) == 1001 and all(v == 2.5 for _, v in rows)
    assert rows[0][0] == 0.0 and rows[-1][0] == 1.0
    with pytest.raises(ValueError):
        emit_cdf([])


def test_online_mean_matches_trace():
    r = run_campaign(load_config().campaign.__class__(t_tot=300, t_d=10, codebook_samples=2000))
    acc = OnlineMean()
    for rec in r.records:
        acc.add(float(se_from_gain(rec.bf_gain, 1.0)))
    s = summarize(r.records, 1.0, math.pi / 8, len(r.dtc_slots))
    assert abs(acc.mean - s["mean_se"]) < 1e-9
    assert s["mean_se"] >= 0 and s["n_dtc"] == 30


def test_rng_stream_isolation():
    a = RngStreams(5)
    a[FADING].standard_normal(1000)
    x = a[NOISE].standard_normal(5)
    b = RngStreams(5)
    np.testing.assert_array_equal(b[NOISE].standard_normal(5), x)
    assert not np.array_equal(stream(5, MOTION).standard_normal(5), x)
    assert a[NOISE] is a[NOISE]
    np.testing.assert_array_equal(a.fresh(NOISE).standard_normal(5), x)


def test_impairment_does_not_shift_noise():
    base = load_config().campaign.__class__(t_tot=50, t_d=10, direct_bits=None, initial_refine=False)
    from dataclasses import replace
    a = run_campaign(base, 1)
    b = run_campaign(replace(base, impairment_var_phase=0.1, impairment_var_amp=0.1), 1)
    np.testing.assert_array_equal(a.column("true_psi"), b.column("true_psi"))


def test_config_parsing(tmp_path):
    cfg = load_config()
    c = cfg.campaign
    assert c.t_tot == 10_000 and c.tx.n_y == 16 and c.rx.n_y == 8
    assert c.evolution.v_kmh == 100 and c.evolution.distance_m == 100 and c.evolution.symbol_s == 3.7e-6
    assert cfg.sweep_t_d == (10, 100, 1000, 2000)
    c2 = loads_config("[simulation]\nt_d = 1000\nprotocol = gob\n").campaign
    assert c2.t_d == 1000 and c2.protocol == "gob"
    with pytest.raises(ConfigError):
        loads_config("[simulation]\nbogus = 1\n")
    with pytest.raises(ConfigError):
        loads_config("[nowhere]\nx = 1\n")
    with pytest.raises(ConfigError):
        loads_config("[simulation]\nt_tot = many\n")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.ini")


def test_cli_exit_codes(tmp_path, capsys):
    assert run_cli(["simulate", "--config", str(tmp_path / "missing.file")]) == 2
    assert run_cli(["simulate", "--bogus"]) == 2
    assert run_cli(["frobnicate"]) == 2
    bad = tmp_path / "bad.ini"
    bad.write_text("[simulation]\nprotocol = psychic\n")
    assert run_cli(["simulate", "--config", str(bad), "--out-dir", str(tmp_path)]) == 2


def small_profile(tmp_path):
    f = tmp_path / "small.ini"
    f.write_text("[simulation]\nt_tot = 100\n[tracking]\ncodebook_samples = 2000\n")
    return f


def test_cli_simulate_and_determinism(tmp_path):
    cfg = small_profile(tmp_path)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert run_cli(["simulate", "--config", str(cfg), "--seed", "7", "--out-dir", str(out1)]) == 0
    assert run_cli(["simulate", "--config", str(cfg), "--seed", "7", "--out-dir", str(out2)]) == 0
    names = sorted(p.name for p in out1.iterdir())
    assert names == ["cdf_bf_gain_bs_direct_seed7.csv", "summary.csv", "trace_bs_direct_seed7.csv"]
    for n in names:
        assert (out1 / n).read_bytes() == (out2 / n).read_bytes()


def test_cli_sweep_file_count(tmp_path):
    cfg = small_profile(tmp_path)
    out = tmp_path / "sweep"
    assert run_cli(["sweep", "--config", str(cfg), "--out-dir", str(out)]) == 0
    traces = sorted(p.name for p in out.glob("trace_*.csv"))
    assert len(traces) == 4 and (out / "summary.csv").exists()
    assert len((out / "summary.csv").read_text().splitlines()) == 5


def test_cli_sweep_parallel_matches_serial(tmp_path):
    cfg = small_profile(tmp_path)
    assert run_cli(["sweep", "--config", str(cfg), "--out-dir", str(tmp_path / "s")]) == 0
    assert run_cli(["sweep", "--config", str(cfg), "--jobs", "2", "--out-dir", str(tmp_path / "p")]) == 0
    for f in (tmp_path / "s").iterdir():
        assert f.read_bytes() == (tmp_path / "p" / f.name).read_bytes()


def test_cli_calibrate_and_env_out_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(OUT_DIR_ENV, str(tmp_path / "env"))
    f = tmp_path / "cal.ini"
    f.write_text("[impairment]\nvar_phase = 0.5\nvar_amp = 0.5\n")
    assert run_cli(["calibrate", "--config", str(f), "--method", "distributed"]) == 0
    assert (tmp_path / "env" / "calibration_distributed_seed0.csv").exists()
