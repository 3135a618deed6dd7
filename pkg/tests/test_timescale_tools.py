import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from dephase import (
    SystemSpec,
    ValidationError,
    WindowParams,
    applicability_window,
    chi,
    chi_bar,
    chi_bar_squared_integral,
    chi_squared_integral,
)


def test_window_params_half_width():
    w = WindowParams(dt=2.0, hbar=1.0)
    assert_allclose(w.half_width, math.pi / 2.0)
    assert_allclose(WindowParams.from_half_width(math.pi).dt, 1.0)


def test_window_params_rejects_nonpositive_dt():
    with pytest.raises(ValidationError):
        WindowParams(dt=0.0)


# ---------------------------------------------------------------- chi

def test_chi_at_zero_gap_is_one():
    assert chi(0.0, dt=1.0) == pytest.approx(1.0)


def test_chi_vanishes_after_full_oscillation():
    # dE * dt / hbar = 2 pi: the window holds one whole oscillation
    assert abs(chi(2.0 * math.pi, dt=1.0)) < 1e-14


def test_chi_modulus_bounded_by_one():
    de = np.linspace(-80.0, 80.0, 4001)
    assert np.all(np.abs(chi(de, dt=1.3, hbar=0.7)) <= 1.0 + 1e-14)


def test_chi_continuous_at_zero():
    eps = np.array([1e-6, 1e-7, 1e-9, 1e-12])
    values = chi(eps, dt=1.0)
    assert np.all(np.abs(values - 1.0) < 1e-6)
    assert abs(chi(1e-9, dt=1.0) - 1.0) < 1e-8


@pytest.mark.parametrize("dt,hbar", [(1.0, 1.0), (0.25, 1.0), (2.0, 0.5)])
def test_chi_squared_integral_normalization(dt, hbar):
    expected = 2.0 * math.pi * hbar / dt
    value = chi_squared_integral(dt, hbar)
    assert abs(value - expected) / expected < 1e-6


# ---------------------------------------------------------------- chi_bar

def test_chi_bar_values_and_boundary():
    assert chi_bar(0.0, dt=1.0) == 1.0
    assert chi_bar(2.0 * math.pi, dt=1.0) == 0.0
    # the boundary |dE| dt = pi hbar maps to zero
    assert chi_bar(math.pi, dt=1.0) == 0.0
    assert chi_bar(math.pi - 1e-9, dt=1.0) == 1.0


def test_chi_and_chi_bar_carry_equal_l2_mass():
    for dt, hbar in [(1.0, 1.0), (0.5, 2.0)]:
        box = chi_bar_squared_integral(dt, hbar)
        smooth = chi_squared_integral(dt, hbar)
        expected = 2.0 * math.pi * hbar / dt
        assert abs(box - expected) / expected < 1e-9
        assert abs(smooth - box) / box < 1e-6


# ---------------------------------------------------------------- applicability_window

def two_level_spec(v, dt, split=0.0):
    energies = np.array([0.0, split])
    coupling = np.array([[0.0, v], [np.conj(v), 0.0]])
    return SystemSpec.create(energies, coupling, dt=dt)


def test_window_uncoupled_system_has_infinite_amplitude_time():
    spec = SystemSpec.create([0.0, 1.0], np.zeros((2, 2)), dt=1.0)
    report = applicability_window(spec)
    assert report.t_amplitude_coupling == math.inf
    assert report.t_amplitude_rate == math.inf
    assert report.t_fast == 0.0
    assert report.admissible


def test_window_two_degenerate_states_amplitude_time():
    report = applicability_window(two_level_spec(v=0.05, dt=1.0))
    assert_allclose(report.t_amplitude_coupling, 1.0 / 0.05)


def test_window_admissibility_flips_with_coupling():
    weak = applicability_window(two_level_spec(v=0.005, dt=1.0))
    assert weak.admissible
    strong = applicability_window(two_level_spec(v=0.5, dt=1.0))
    assert not strong.admissible


def test_window_fast_timescale_uses_pairs_outside_shell():
    # shell half-width is pi/dt ~ 0.31; the split of 5.0 falls outside
    spec = two_level_spec(v=1e-4, dt=10.0, split=5.0)
    report = applicability_window(spec)
    assert_allclose(report.t_fast, 1.0 / 5.0)
    assert report.admissible  # 0.2 * 10 <= 10 <= 1e4 / 10


def test_window_monotone_in_coupling_strength():
    previous = math.inf
    for v in [0.01, 0.03, 0.1, 0.3]:
        report = applicability_window(two_level_spec(v=v, dt=1.0))
        assert report.t_slow <= previous + 1e-15
        previous = report.t_slow
