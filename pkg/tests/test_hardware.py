import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nirbench.foundation import HardwareConfig, RandomStream
from nirbench.hardware import (ADC_MAX, AdcModel, LedModel, PhotodiodeModel, adc_read, build_device,
                               channel_measurement, full_scale_gain, led_power, photodiode_currents,
                               shot_noise_sd, thermal_noise_sd)

CFG = HardwareConfig()
PD = PhotodiodeModel(0.5, 2e-9, 1e3, 1e6)
IDEAL = AdcModel(3.3, 1000.0, inl_amplitude=0.0, offset_drift_per_degc=0.0)


def test_led_power_examples():
    led = LedModel(5.0, 850.0)
    assert led_power(led, 25.0, noise=False) == 5.0
    assert led_power(led, 35.0, noise=False) == pytest.approx(0.98 * 5.0, rel=1e-12)
    assert led_power(LedModel(5.0, 850.0, age_h=1000.0), 25.0, noise=False) == pytest.approx(0.999 * 5.0)


@settings(max_examples=100, deadline=None)
@given(st.floats(15, 45), st.floats(0, 1e6), st.integers(0, 2**32))
def test_led_power_nonnegative(T, age, seed):
    led = LedModel(5.0, 850.0, age_h=age, flicker_sd=0.5)
    assert led_power(led, T, RandomStream(seed, "led")) >= 0.0


def test_dark_current_examples():
    assert photodiode_currents(PD, 0.0, 25.0, noise=False).dark == 2e-9
    assert photodiode_currents(PD, 0.0, 35.0, noise=False).dark == pytest.approx(2e-9 * math.e, rel=1e-12)


def test_noise_sd_examples():
    assert shot_noise_sd(1e-6, 1e4) == pytest.approx(5.6607e-11, rel=1e-4)
    assert thermal_noise_sd(25.0, 1e3, 1e6) == pytest.approx(math.sqrt(4 * 1.380649e-23 * 298.15 * 1e3 / 1e6))


def test_currents_noise_off_deterministic_and_increasing():
    prev = -1.0
    for p in np.linspace(0, 5, 50):
        a = photodiode_currents(PD, p, 30.0, noise=False)
        b = photodiode_currents(PD, p, 30.0, noise=False)
        assert a == b
        assert a.shot == 0.0 and a.thermal == 0.0
        assert a.total > prev
        prev = a.total


def test_currents_noise_statistics():
    rng = RandomStream(3, "pd")
    draws = np.array([photodiode_currents(PD, 1.0, 25.0, rng).shot for _ in range(4000)])
    sd = shot_noise_sd(0.5e-3 + 2e-9, 1e3)
    assert draws.std() == pytest.approx(sd, rel=0.06)


def test_adc_examples():
    adc = AdcModel(3.3, 1.0, inl_amplitude=0.0)
    assert adc_read(adc, 0.0, 25.0) == 0
    assert adc_read(adc, 3.3, 25.0) == 4095
    assert adc_read(adc, 3.3 / 2, 25.0) == 2048


def test_adc_monotone_and_surjective():
    adc = AdcModel(1.0, 1.0, inl_amplitude=0.0)
    v = np.linspace(0.0, 1.0, 4096 * 8 + 1)
    codes = np.array([adc_read(adc, x, 25.0) for x in v])
    assert np.all(np.diff(codes) >= 0)
    assert set(codes.tolist()) == set(range(4096))


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 3.3))
def test_quantisation_error_half_lsb(v):
    adc = AdcModel(3.3, 1.0, inl_amplitude=0.0)
    code = adc_read(adc, v, 25.0)
    assert abs(code * 3.3 / ADC_MAX - v) <= 3.3 / 8190 + 1e-15


def test_adc_clamps_and_offset():
    adc = AdcModel(3.3, 1.0, inl_amplitude=0.0, offset_drift_per_degc=1.0)
    assert adc_read(adc, 10.0, 25.0) == ADC_MAX
    assert adc_read(adc, 1.0, 35.0) == adc_read(adc, 1.0, 25.0) + 10
    assert adc_read(adc, 0.0, 15.0) == 0


def test_inl_bounded_by_amplitude():
    adc = AdcModel(3.3, 1.0, inl_amplitude=2.0, inl_phase=0.7)
    for v in np.linspace(0.05, 3.2, 200):
        ideal = adc_read(AdcModel(3.3, 1.0, inl_amplitude=0.0), v, 25.0)
        assert abs(adc_read(adc, v, 25.0) - ideal) <= 2


def test_full_scale_gain_maps_led_to_top():
    g = full_scale_gain(CFG)
    i_max = CFG.responsivity_a_per_w * CFG.p0_mw * 1e-3
    assert i_max * g == pytest.approx(CFG.v_ref)


def test_channel_transparent_and_opaque():
    dev = build_device(CFG, [850.0], None, noise=False)
    led, pd, adc = dev.leds[0], dev.photodiodes[0], dev.adc
    r = channel_measurement(led, pd, adc, 0.0, 1.0, 0.0, 25.0, noise=False)
    full = photodiode_currents(pd, led_power(led, 25.0, noise=False), 25.0, noise=False).total
    assert r.code == adc_read(adc, full, 25.0)
    assert r.intensity == pytest.approx(CFG.p0_mw)
    dark = channel_measurement(led, pd, adc, 50.0, 1.0, 0.0, 25.0, noise=False)
    assert dark.code == adc_read(adc, pd.dark_current_25, 25.0)


def test_doubling_p0_doubles_signal_only():
    a = photodiode_currents(PD, 1.0, 30.0, noise=False)
    b = photodiode_currents(PD, 2.0, 30.0, noise=False)
    assert b.signal == pytest.approx(2 * a.signal)
    assert b.dark == a.dark


def test_device_noise_off_is_ideal():
    dev = build_device(CFG, [850.0, 940.0], RandomStream(1, "hw"), noise=False)
    assert dev.adc.inl_amplitude == 0.0 and dev.adc.offset_drift_per_degc == 0.0
    assert all(led.age_h == 0.0 and led.flicker_sd == 0.0 for led in dev.leds)


def test_invalid_models_rejected():
    with pytest.raises(ValueError):
        LedModel(0.0, 850.0)
    with pytest.raises(ValueError):
        PhotodiodeModel(0.5, 0.0, 1e3, 1e6)
    with pytest.raises(ValueError):
        AdcModel(3.3, 1.0, resolution=10)
    with pytest.raises(ValueError):
        channel_measurement(LedModel(5.0, 850.0), PD, IDEAL, -1.0, 1.0, 0.0, 25.0)
