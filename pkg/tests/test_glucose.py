import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nirbench.foundation import RandomStream
from nirbench.glucose import (DAWN_WINDOW, BergmanParams, Event, LagRangeError, interstitial_lag,
                              sample_measurement_times, simulate_day, simulate_plasma)


def test_no_events_stays_basal():
    g = simulate_plasma(BergmanParams(basal=105.0), [])
    assert np.all(g == 105.0)


@pytest.mark.parametrize("basal", [80.0, 110.0, 140.0])
def test_default_meal_peak(basal):
    p = BergmanParams(basal=basal)
    t0 = 300
    g = simulate_plasma(p, [Event("meal", t0, 55.0)])
    peak = g.max() - basal
    assert 40.0 <= peak <= 70.0
    assert abs(int(np.argmax(g)) - t0 - 40) <= 10


@pytest.mark.parametrize("mag", [10.0, 20.0, 30.0])
def test_dawn_surge(mag):
    p = BergmanParams()
    lo, hi = DAWN_WINDOW
    g = simulate_plasma(p, [Event("dawn", lo, mag)])
    surge = g[lo:hi].max() - g[lo - 1]
    assert 10.0 - 1e-6 <= surge <= 30.0 + 1e-6


def test_exercise_dip():
    p = BergmanParams()
    g = simulate_plasma(p, [Event("exercise", 600, 30.0)])
    dip = p.basal - g.min()
    assert 20.0 <= dip <= 40.0


def test_constant_plasma_fixed_point():
    x = np.full(100, 123.0)
    assert np.array_equal(interstitial_lag(x, 10.0), x)


@pytest.mark.parametrize("tau", [7.0, 10.0, 15.0])
def test_step_response(tau):
    x = np.concatenate([np.zeros(10), np.ones(100)])
    # the step enters at index 10; output n minutes later is 1 - exp(-n / tau)
    y = interstitial_lag(x, tau)
    val = np.interp(10 + tau, np.arange(x.size), y)
    assert val == pytest.approx(1 - math.exp(-1), abs=0.01)


def test_slow_lag_trails_fast_on_ramp():
    x = 80.0 + np.arange(200, dtype=float)
    fast, slow = interstitial_lag(x, 7.0), interstitial_lag(x, 15.0)
    assert slow[1] == fast[1]
    assert np.all(slow[2:] < fast[2:])


def test_tau_range():
    with pytest.raises(LagRangeError):
        interstitial_lag(np.ones(5), 5.0)
    with pytest.raises(LagRangeError):
        interstitial_lag(np.ones(5), 16.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32), st.floats(7, 15))
def test_lag_contraction_and_smoothing(seed, tau):
    rng = np.random.default_rng(seed)
    x = 100 + np.cumsum(rng.normal(0, 3, 300))
    y = interstitial_lag(x, tau)
    assert np.abs(np.diff(y)).sum() <= np.abs(np.diff(x)).sum() + 1e-9
    assert np.max(np.abs(y - x)) <= x.max() - x.min() + 1e-9


def test_simulated_day_clamped():
    for k in range(20):
        tr = simulate_day(RandomStream(k, "g"))
        assert tr.plasma.min() >= 60 and tr.plasma.max() <= 400
        assert tr.interstitial.min() >= 60 and tr.interstitial.max() <= 400
        assert tr.plasma.size == tr.interstitial.size == 1440
        assert 7 <= tr.tau <= 15


def test_measurement_times():
    t = sample_measurement_times(1440, 3, RandomStream(1, "t"))
    assert len(set(t.tolist())) == 3
    assert np.all(np.diff(t) >= 60)
    assert np.array_equal(t, sample_measurement_times(1440, 3, RandomStream(1, "t")))
    one = sample_measurement_times(1440, 1, RandomStream(2, "t"))
    assert one.shape == (1,) and 0 <= one[0] < 1440
    with pytest.raises(ValueError):
        sample_measurement_times(100, 3, RandomStream(1, "t"))
    with pytest.raises(ValueError):
        sample_measurement_times(1440, 0, RandomStream(1, "t"))


def test_events_outside_grid():
    with pytest.raises(ValueError):
        simulate_plasma(BergmanParams(), [Event("meal", 2000, 50.0)])
