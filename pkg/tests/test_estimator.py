import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from abptrack.arrays import ArrayGeometry, ImpairmentModel, steering_upa
from abptrack.estimator import (
    EL,
    NoSignalError,
    check_offset,
    coverage_lost,
    dft_grid,
    estimate_offset_magnitude,
    invert_ratio_metric,
    make_pair,
    monotone_fraction,
    offset_grid,
    pattern_ratio_metric,
    offset_for,
    ratio_metric,
    ratio_metric_closed_form,
    received_strengths,
    select_pairs,
)
from abptrack.numerics import fejer_power
from abptrack.pilots import pilot_pair, zc_crosscorr

DELTA = math.pi / 8
# -sin(pi/16) sin(pi/8) / (1 - cos(pi/16) cos(pi/8)), frozen
ZETA_PI16 = -0.7953105689549895


def pattern_zeta(geom, psi, eta, delta):
    return float(pattern_ratio_metric(geom, [psi - eta], delta, eta=eta)[0])


def test_frozen_zeta_oracle():
    x = math.pi / 16
    assert -math.sin(x) * math.sin(DELTA) / (1 - math.cos(x) * math.cos(DELTA)) == ZETA_PI16
    assert ratio_metric_closed_form(x, DELTA) == pytest.approx(ZETA_PI16, abs=1e-15)


def test_closed_form_boundaries():
    assert ratio_metric_closed_form(0.0, DELTA) == 0.0
    assert ratio_metric_closed_form(-DELTA, DELTA) == pytest.approx(1.0)
    assert ratio_metric_closed_form(DELTA, DELTA) == pytest.approx(-1.0)


def test_inversion_examples():
    assert invert_ratio_metric(0.0, 0.4, DELTA) == pytest.approx(0.4)
    assert invert_ratio_metric(ZETA_PI16, 0.0, DELTA) == pytest.approx(math.pi / 16, abs=1e-9)
    with pytest.raises(ValueError):
        invert_ratio_metric(1.01, 0.0, DELTA)
    assert np.isfinite(invert_ratio_metric(1.0, 0.0, DELTA))


def test_roundtrip_random(rng):
    x = rng.uniform(-DELTA, DELTA, 100)
    est = invert_ratio_metric(ratio_metric_closed_form(x, DELTA), 0.0, DELTA)
    assert np.max(np.abs(est - x)) < 1e-9


@given(st.floats(-0.999, 0.999), st.floats(-3, 3))
def test_roundtrip_property(frac, eta):
    x = frac * DELTA
    assert invert_ratio_metric(ratio_metric_closed_form(x, DELTA), eta, DELTA) == pytest.approx(eta + x, abs=1e-9)


@given(st.floats(-DELTA, DELTA))
def test_oddness(x):
    assert ratio_metric_closed_form(x, DELTA) == pytest.approx(-ratio_metric_closed_form(-x, DELTA), abs=1e-12)


def test_monotone_grid():
    x = offset_grid(DELTA)
    assert x.size == 201 and np.all(np.abs(x) < DELTA) and np.min(np.abs(x)) > 0
    assert monotone_fraction(ratio_metric_closed_form(x, DELTA)) == 1.0
    assert monotone_fraction(pattern_ratio_metric(ArrayGeometry.ula(16), x, DELTA)) == 1.0


def test_beam_pattern_matches_closed_form():
    geom = ArrayGeometry.ula(16)
    # x = 0 sits on the shared null of both beams when delta = 2 pi l / N
    for x in np.linspace(-0.35, 0.35, 10):
        assert pattern_zeta(geom, 0.2 + x, 0.2, DELTA) == pytest.approx(ratio_metric_closed_form(x, DELTA), abs=1e-9)


def test_chi_matches_fejer():
    geom = ArrayGeometry.ula(16)
    pair = make_pair(geom, 0.0, 0.0, DELTA)
    psi = 0.1
    a = steering_upa(geom, 0.0, psi)
    chi = abs(np.vdot(pair.beam_minus, a)) ** 2
    assert chi == pytest.approx(fejer_power(16, psi + DELTA) / 256, rel=1e-9)


def test_impairment_breaks_monotonicity():
    geom = ArrayGeometry.ula(16)
    x = offset_grid(DELTA)
    broken = 0
    for seed in range(10):
        c = ImpairmentModel.draw(geom, 0.5, 0.5, seed).diagonal
        broken += monotone_fraction(pattern_ratio_metric(geom, x, DELTA, radiated=c)) < 1.0
    assert broken >= 1


def test_received_strengths():
    s0, s1 = pilot_pair(63)
    y = 0.5 * s0.samples + (0.2 - 0.1j) * s1.samples
    pair = make_pair(ArrayGeometry.ula(16), 0.0, 0.0, DELTA)
    chi_m, chi_p = received_strengths(y, pair)
    assert chi_m == pytest.approx(abs(0.5 + zc_crosscorr(s1, s0) * (0.2 - 0.1j)) ** 2)
    assert chi_p == pytest.approx(abs((0.2 - 0.1j) + zc_crosscorr(s0, s1) * 0.5) ** 2)
    assert received_strengths(np.zeros(63), pair) == (0.0, 0.0)


def test_ratio_metric_no_signal():
    with pytest.raises(NoSignalError):
        ratio_metric(0.0, 0.0)
    assert ratio_metric(1.0, 0.0) == 1.0


def test_offset_validation():
    assert check_offset(DELTA, 16) == 1
    assert offset_for(2, 16) == pytest.approx(math.pi / 4)
    with pytest.raises(ValueError):
        check_offset(0.3, 16)
    with pytest.raises(ValueError):
        check_offset(2 * math.pi * 5 / 16, 16)
    with pytest.raises(ValueError):
        make_pair(ArrayGeometry.ula(16), 0, 0, DELTA, axis="diag")


def test_elevation_pair_is_axis_swap():
    geom = ArrayGeometry.upa(8, 4)
    pair = make_pair(geom, 0.1, 0.3, math.pi / 4, axis=EL)
    np.testing.assert_allclose(pair.beam_minus, steering_upa(geom, 0.1 - math.pi / 4, 0.3))
    assert pair.boresight == 0.1


def test_calibration_scale_cancels():
    geom = ArrayGeometry.ula(16)
    common = 0.7 * np.exp(0.4j) * np.ones(16)
    a = steering_upa(geom, 0, 0.05)
    plain = make_pair(geom, 0, 0, DELTA)
    scaled = make_pair(geom, 0, 0, DELTA, calibration=common)
    z = [ratio_metric(abs(np.vdot(a, p.beam_minus)) ** 2, abs(np.vdot(a, p.beam_plus)) ** 2) for p in (plain, scaled)]
    assert abs(z[0] - z[1]) < 1e-12
    with pytest.raises(ValueError):
        make_pair(geom, 0, 0, DELTA, calibration=np.ones(8))


def test_offset_magnitude_and_coverage():
    z = ratio_metric_closed_form(0.1, DELTA)
    assert estimate_offset_magnitude(z, DELTA) == pytest.approx(0.1)
    assert coverage_lost(0.9995) and not coverage_lost(0.99)


def test_select_pairs():
    geom = ArrayGeometry.ula(16)
    grid = dft_grid(16)
    bores = [(0.0, g) for g in grid]
    p = np.zeros(16)
    p[3] = 1.0
    assert [q.eta_az for q in select_pairs(p, 1, bores, DELTA, geom)] == [grid[3]]
    p[5] = 1.0
    assert [q.eta_az for q in select_pairs(p, 2, bores, DELTA, geom)] == [grid[3], grid[5]]
    with pytest.raises(ValueError):
        select_pairs(p, 17, bores, DELTA, geom)


def test_select_pairs_three_paths():
    geom = ArrayGeometry.ula(16)
    grid = dft_grid(16)
    truth = [0.31, -1.52, 2.4]
    powers = np.zeros(16)
    for psi, g in zip(truth, (1.0, 0.8, 0.6)):
        powers += g * np.array([abs(np.vdot(steering_upa(geom, 0, b), steering_upa(geom, 0, psi))) ** 2 for b in grid])
    chosen = {q.eta_az for q in select_pairs(powers, 3, [(0.0, b) for b in grid], DELTA, geom)}
    nearest = {grid[np.argmin(np.abs(np.angle(np.exp(1j * (grid - psi)))))] for psi in truth}
    assert chosen == nearest


def test_offset_grid_even_count():
    x = offset_grid(DELTA, 10)
    assert x.size == 10 and np.min(np.abs(x)) > 0


def test_elevation_pattern_matches_closed_form():
    geom = ArrayGeometry.upa(8, 4)
    x = offset_grid(math.pi / 4, 21)
    z = pattern_ratio_metric(geom, x, math.pi / 4, eta=0.2, axis=EL)
    np.testing.assert_allclose(z, ratio_metric_closed_form(x, math.pi / 4), atol=1e-9)
