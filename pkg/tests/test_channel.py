import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from abptrack.arrays import ArrayGeometry, angles_to_spatial, ula_spatial
from abptrack.channel import (
    IDEAL_PULSE,
    MODEL_I,
    MODEL_II,
    RANDOM_WALK,
    ChannelConfig,
    ChannelGenerationError,
    EvolutionParams,
    PulseShape,
    delay_taps,
    evolve,
    flat_response,
    freq_response,
    freq_response_all,
    generate_initial,
    load_paths_csv,
    motion_step_I,
    motion_step_II,
    single_path,
)
from abptrack.pilots import OfdmConfig

# scipy.special.j0(2*pi*1300*3.7e-6) evaluated by series to 12 digits, frozen
RHO_1300HZ = 0.99977166888


def j0_series(x, terms=30):
    return sum((-1) ** m * (x / 2) ** (2 * m) / math.factorial(m) ** 2 for m in range(terms))


def test_rho_oracle_and_frozen():
    x = 2 * math.pi * 1300 * 3.7e-6
    assert j0_series(x) == pytest.approx(RHO_1300HZ, abs=1e-11)
    assert EvolutionParams(doppler_hz=1300).rho_d == pytest.approx(RHO_1300HZ, abs=1e-11)
    assert EvolutionParams().rho_d == 1.0


def test_evolution_validation():
    with pytest.raises(ValueError):
        EvolutionParams(motion="teleport")
    with pytest.raises(ValueError):
        EvolutionParams(motion=MODEL_I, distance_m=0)
    with pytest.raises(ValueError):
        EvolutionParams(var_mu=-1)


def test_pulse_nyquist():
    p = PulseShape()
    assert p(np.array([0.0]))[0] == pytest.approx(1.0)
    np.testing.assert_allclose(p(np.arange(1, 12)), 0, atol=1e-15)
    np.testing.assert_allclose(p(np.array([2.0 - 1e-12, 2.0])), [0, 0], atol=1e-9)
    # singular point for rolloff 0.5 is t = 1
    q = PulseShape(rolloff=0.5)
    assert q(np.array([1.0]))[0] == pytest.approx(q(np.array([1.0 + 1e-7]))[0], abs=1e-6)
    with pytest.raises(ValueError):
        PulseShape("gauss")(np.zeros(1))


def test_flat_rank_one():
    tx, rx = ArrayGeometry.upa(4, 8), ArrayGeometry.ula(8)
    h = flat_response(single_path(tx, rx, mu=1.0, phi=0.3, varphi=-0.2, gain=0.5j))
    s = np.linalg.svd(h, compute_uv=False)
    assert s[0] == pytest.approx(0.5)  # unit-norm steering vectors
    assert s[1] < 1e-12


def test_freq_response_is_dft_of_taps(rng):
    tx, rx = ArrayGeometry.ula(8), ArrayGeometry.ula(4)
    cfg = OfdmConfig.centered()
    state = generate_initial(ChannelConfig(n_paths=3), rng, tx, rx, max_delay_s=cfg.cp_len * cfg.sample_period)
    taps = delay_taps(state, cfg)
    d = np.arange(cfg.cp_len)
    for k in (0, 5, 511):
        ref = np.tensordot(np.exp(-2j * np.pi * k * d / cfg.n_fft), taps, axes=1)
        np.testing.assert_allclose(freq_response(state, k, cfg), ref, atol=1e-12)
    with pytest.raises(ValueError):
        freq_response(state, 512, cfg)


def test_zero_delay_ideal_pulse_is_flat():
    state = single_path(ArrayGeometry.ula(8), ArrayGeometry.ula(4), phi=0.2)
    cfg = OfdmConfig.centered()
    hk = freq_response_all(state, cfg, IDEAL_PULSE)
    np.testing.assert_allclose(hk, np.broadcast_to(flat_response(state), hk.shape), atol=1e-12)


def test_gauss_markov_statistics(rng):
    ev = EvolutionParams(doppler_hz=5e4)
    rho = ev.rho_d
    n = 40000
    state = single_path(ArrayGeometry.ula(2), ArrayGeometry.ula(1), evolution=ev, gain=1.0)
    g0 = np.empty(n, dtype=complex)
    g1 = np.empty(n, dtype=complex)
    for i in range(n):
        g0[i] = state.paths[0].gain
        state = evolve(state, rng)
        g1[i] = state.paths[0].gain
    assert np.mean(np.abs(g1) ** 2) == pytest.approx(1.0, abs=0.05)
    assert np.real(np.mean(g1 * g0.conj())) == pytest.approx(rho, abs=0.03)


def test_static_channel_unchanged(rng):
    state = single_path(ArrayGeometry.ula(4), ArrayGeometry.ula(2), phi=0.1, gain=0.3)
    nxt = evolve(state, rng)
    assert nxt.paths[0] == state.paths[0] and nxt.slot == 1


def test_model_i_deterministic_drift():
    ev = EvolutionParams(motion=MODEL_I, v_kmh=100, distance_m=100, var_jitter=0)
    phi = 0.4
    psi = float(ula_spatial(phi))
    step = motion_step_I(psi, ev, phi=phi)
    drift = 100 / 3.6 / 100 * 3.7e-6
    assert step == pytest.approx(math.pi * math.sin(phi + drift), abs=1e-15)
    state = single_path(ArrayGeometry.ula(16), ArrayGeometry.ula(8), phi=phi, evolution=ev)
    for _ in range(3):
        state = evolve(state)
    assert state.paths[0].phi == pytest.approx(phi + 3 * drift)


def test_model_i_jitter_variance(rng):
    ev = EvolutionParams(motion=MODEL_I, v_kmh=0.0, distance_m=100)
    steps = np.array([motion_step_I(0.0, ev, rng, phi=0.0) for _ in range(20000)])
    assert np.var(steps) == pytest.approx((math.pi / 180) ** 2, rel=0.05)


def test_model_ii_deterministic():
    geom = ArrayGeometry.upa(4, 8)
    ev = EvolutionParams(motion=MODEL_II, var_jitter=0, v_kmh=100, v_el_kmh=30, distance_m=50)
    mu, phi = 1.0, 0.3
    t0, p0 = angles_to_spatial(mu, phi, geom)
    t1, p1 = motion_step_II(t0, p0, ev, geom=geom, mu=mu, phi=phi)
    te, pe = angles_to_spatial(mu + ev.el_drift, phi + ev.az_drift, geom)
    assert (t1, p1) == pytest.approx((te, pe), abs=1e-14)


def test_random_walk_moves_physical_angles(rng):
    ev = EvolutionParams(motion=RANDOM_WALK, var_mu=1e-4, var_phi=1e-4)
    geom = ArrayGeometry.upa(4, 8)
    state = single_path(geom, ArrayGeometry.ula(4), mu=1.0, phi=0.2, evolution=ev)
    nxt = evolve(state, rng)
    p = nxt.paths[0]
    assert p.mu != 1.0 and p.phi != 0.2
    assert (p.theta, p.psi) == pytest.approx(angles_to_spatial(p.mu, p.phi, geom))


def test_generate_initial_properties():
    tx, rx = ArrayGeometry.ula(16), ArrayGeometry.ula(8)
    a = generate_initial(ChannelConfig(n_paths=3), 7, tx, rx)
    b = generate_initial(ChannelConfig(n_paths=3), 7, tx, rx)
    assert a == b
    g = np.abs(a.gains())
    assert np.sum(g ** 2) == pytest.approx(1.0)
    assert list(g) == sorted(g, reverse=True)
    assert a.paths[0].delay == 0.0 or min(p.delay for p in a.paths) == 0.0
    psi = np.array([p.psi for p in a.paths])
    gaps = np.abs(np.angle(np.exp(1j * (psi[:, None] - psi[None, :]))))
    assert np.min(gaps[~np.eye(3, dtype=bool)]) >= math.pi / 4


def test_generate_initial_impossible_separation():
    with pytest.raises(ChannelGenerationError):
        generate_initial(ChannelConfig(n_paths=4, min_separation=3.0, max_retries=20), 1,
                         ArrayGeometry.ula(8), ArrayGeometry.ula(2))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 4))
def test_generate_initial_unit_power(seed, n):
    state = generate_initial(ChannelConfig(n_paths=n, min_separation=0.1), seed,
                             ArrayGeometry.upa(4, 8), ArrayGeometry.ula(4), max_delay_s=1e-7)
    assert np.sum(np.abs(state.gains()) ** 2) == pytest.approx(1.0)
    assert all(p.delay < 1e-7 for p in state.paths)


def test_load_paths_csv(tmp_path):
    f = tmp_path / "paths.csv"
    f.write_text("gain_re,gain_im,delay_s,theta_rad,psi_rad,nu_rad\n0.1,0,1e-8,0,0.5,0.1\n0.9,0.1,0,0,-1.0,0.2\n")
    state = load_paths_csv(f, ArrayGeometry.ula(8), ArrayGeometry.ula(4))
    assert state.n_paths == 2 and state.paths[0].psi == -1.0
    bad = tmp_path / "bad.csv"
    bad.write_text("gain_re,gain_im\n1,0\n")
    with pytest.raises(ValueError):
        load_paths_csv(bad, ArrayGeometry.ula(8), ArrayGeometry.ula(4))
