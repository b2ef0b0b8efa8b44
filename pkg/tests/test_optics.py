import math
from importlib import resources

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from nirbench.optics import (FOUR_PI, ExtinctionTable, GridError, OpticalMedium, OpticsDomainError,
                             RadianceField, UnknownWavelengthError, absorbance, diffusion_coefficient,
                             hg_phase, hg_slab_kernel, mixture_absorbance, reduced_scattering,
                             rte_residual, slab_ordinates, sweep_slab)

WL = (850.0, 940.0, 1050.0, 1150.0)


def _table(name):
    ref = resources.files("nirbench") / "data" / name
    with resources.as_file(ref) as p:
        return ExtinctionTable.from_csv(p)


def test_absorbance_examples():
    assert absorbance(2.0, 2.0) == 0.0
    assert absorbance(1.0, 1.0 / math.e) == pytest.approx(1.0, rel=1e-15)
    assert absorbance(10.0, 1.0) == pytest.approx(2.302585092994046, rel=1e-15)


def test_absorbance_names_channel():
    with pytest.raises(OpticsDomainError, match="channel 940"):
        absorbance(1.0, 0.0, channel=940)


def test_mixture_examples():
    t = ExtinctionTable(np.array([1000.0]), {c: np.array([0.01]) for c in
                                              ("glucose", "water", "hemoglobin", "lipid", "melanin")})
    assert mixture_absorbance(t, {}, 1.0, 1000.0) == 0.0
    assert mixture_absorbance(t, {"glucose": 100.0}, 1.0, 1000.0) == pytest.approx(1.0)
    with pytest.raises(UnknownWavelengthError):
        mixture_absorbance(t, {"glucose": 1.0}, 1.0, 900.0)
    with pytest.raises(OpticsDomainError):
        mixture_absorbance(t, {"glucose": -1.0}, 1.0, 1000.0)


conc = st.floats(0.0, 200.0, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(st.tuples(conc, st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 0.2)),
       st.floats(0.1, 5.0), st.floats(0.1, 4.0), st.sampled_from(WL), st.integers(0, 4))
def test_mixture_linear(c, l, k, lam, which):
    t = ExtinctionTable.default()
    names = ("glucose", "water", "hemoglobin", "lipid", "melanin")
    d = dict(zip(names, c))
    base = mixture_absorbance(t, d, l, lam)
    assert mixture_absorbance(t, d, 2 * l, lam) == pytest.approx(2 * base, rel=1e-12, abs=1e-15)
    scaled = dict(d)
    scaled[names[which]] *= k
    expect = base + (k - 1) * t.epsilon(names[which], lam) * d[names[which]] * l
    assert mixture_absorbance(t, scaled, l, lam) == pytest.approx(expect, rel=1e-10, abs=1e-12)


def test_reduced_scattering_and_diffusion():
    assert reduced_scattering(OpticalMedium(0.1, 7.0, 0.0, 1.0)) == 7.0
    assert reduced_scattering(OpticalMedium(0.1, 10.0, 0.9, 1.0)) == pytest.approx(1.0)
    assert reduced_scattering(OpticalMedium(0.1, 0.0, 0.5, 1.0)) == 0.0
    assert diffusion_coefficient(OpticalMedium(0.1, 10.0, 0.9, 1.0)) == pytest.approx(1 / 3.3, rel=1e-12)
    assert diffusion_coefficient(OpticalMedium(1 / 3, 0.0, 0.0, 1.0)) == pytest.approx(1.0, rel=1e-12)
    m = OpticalMedium(0.2, 5.0, 0.8, 1.0)
    m2 = OpticalMedium(0.4, 10.0, 0.8, 1.0)
    assert diffusion_coefficient(m2) == pytest.approx(diffusion_coefficient(m) / 2, rel=1e-12)
    with pytest.raises(OpticsDomainError):
        diffusion_coefficient(OpticalMedium(0.0, 0.0, 0.0, 1.0))


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 10), st.floats(0, 100), st.floats(0, 0.99))
def test_diffusion_positive(mu_a, mu_s, g):
    m = OpticalMedium(mu_a, mu_s, g, 1.0)
    if mu_a + reduced_scattering(m) > 0:
        assert diffusion_coefficient(m) > 0


def test_medium_invariants():
    with pytest.raises(OpticsDomainError):
        OpticalMedium(-0.1, 1.0, 0.0, 1.0)
    with pytest.raises(OpticsDomainError):
        OpticalMedium(0.1, 1.0, 1.0, 1.0)
    with pytest.raises(OpticsDomainError):
        OpticalMedium(0.1, 1.0, 0.5, 0.0)


def test_hg_examples():
    assert hg_phase(0.0, 0.3) == 1.0
    assert hg_phase(0.9, 1.0) == pytest.approx(190.0, rel=1e-12)


@pytest.mark.parametrize("g", [0.0, 0.5, 0.9])
def test_hg_normalisation_adaptive_quad(g):
    val, _ = integrate.quad(lambda c: hg_phase(g, c), -1.0, 1.0, points=[1.0], epsabs=1e-13, epsrel=1e-13)
    assert val / 2 == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("g", [0.0, 0.5, 0.9])
def test_hg_normalisation_gauss_legendre_64(g):
    # a plain 64-point rule cannot resolve the g = 0.9 forward peak, so the
    # rule is applied in the variable s = log(1 + g^2 - 2 g c), which is smooth
    x, w = np.polynomial.legendre.leggauss(64)
    if g == 0.0:
        assert 0.5 * np.sum(w * hg_phase(g, x)) == pytest.approx(1.0, abs=1e-12)
        return
    lo, hi = math.log((1 - g) ** 2), math.log((1 + g) ** 2)
    s = (hi - lo) / 2 * x + (hi + lo) / 2
    c = (1 + g * g - np.exp(s)) / (2 * g)
    dc_ds = np.exp(s) / (2 * g)
    val = (hi - lo) / 2 * np.sum(w * hg_phase(g, c) * dc_ds)
    assert val / 2 == pytest.approx(1.0, abs=1e-6)


def test_ordinates_weights():
    mu, w = slab_ordinates(8)
    assert mu.size == 16
    assert np.all(w > 0)
    assert w.sum() == pytest.approx(FOUR_PI, abs=1e-12)


@pytest.mark.parametrize("g", [0.0, 0.5, 0.9])
def test_slab_kernel_conserves(g):
    mu, w = slab_ordinates(8)
    k = hg_slab_kernel(g, mu, w)
    assert np.allclose(k @ (w / FOUR_PI), 1.0, atol=1e-12)


def _beer_field(n, mu_a=1.0, L=1.0):
    mu, w = slab_ordinates(8)
    x = np.linspace(0.0, L, n)
    rad = np.zeros((n, mu.size))
    j = int(np.argmax(mu))
    rad[:, j] = np.exp(-mu_a * x / mu[j])
    return RadianceField(x, mu, w, rad), j


def test_zero_field_zero_residual():
    mu, w = slab_ordinates(8)
    f = RadianceField(np.linspace(0, 1, 5), mu, w, np.zeros((5, 16)))
    assert np.all(rte_residual(f, OpticalMedium(0.3, 2.0, 0.5, 1.0)) == 0.0)


def test_scattering_free_convergence_second_order():
    m = OpticalMedium(1.0, 0.0, 0.0, 1.0)
    errs = []
    for n in (21, 41, 81):
        f, j = _beer_field(n)
        errs.append(np.max(np.abs(rte_residual(f, m))))
    assert errs[0] > errs[1] > errs[2]
    for a, b in zip(errs, errs[1:]):
        assert 3.0 <= a / b <= 5.0


def test_isotropic_field_scattering_cancels():
    mu, w = slab_ordinates(8)
    x = np.linspace(0.0, 1.0, 11)
    rad = np.repeat(np.exp(-x)[:, None], mu.size, axis=1)
    f = RadianceField(x, mu, w, rad)
    with_s = rte_residual(f, OpticalMedium(0.4, 7.0, 0.0, 1.0))
    without = rte_residual(f, OpticalMedium(0.4, 0.0, 0.0, 1.0))
    assert np.allclose(with_s, without, atol=1e-12)


def test_grid_errors():
    mu, w = slab_ordinates(8)
    f = RadianceField(np.linspace(0, 1, 2), mu, w, np.ones((2, 16)))
    with pytest.raises(GridError):
        rte_residual(f, OpticalMedium(0.1, 1.0, 0.0, 1.0))
    with pytest.raises(GridError):
        RadianceField(np.linspace(0, 1, 3), mu, w * 0.5, np.ones((3, 16)))
    with pytest.raises(GridError):
        RadianceField(np.linspace(0, 1, 3), mu, w, -np.ones((3, 16)))


def test_sweep_scattering_free_matches_beer_lambert():
    depth, mu, w, rad = sweep_slab(0.5, 0.0, 0.0, 1.0, n_nodes=41)
    pos = mu > 0
    exact = np.exp(-0.5 * depth[:, None] / mu[None, pos])
    assert np.allclose(rad[0][:, pos], exact, rtol=1e-2)
    assert np.all(rad >= 0)


def test_sweep_residual_small():
    m = OpticalMedium(0.3, 2.0, 0.0, 1.0)
    depth, mu, w, rad = sweep_slab(m.mu_a, m.mu_s, m.g, 1.0, n_nodes=81)
    r = rte_residual(RadianceField(depth, mu, w, rad[0]), m)
    assert np.max(np.abs(r)) < 0.05 * np.max(rad)


def test_shipped_table_nonnegative_with_expected_shape():
    t = ExtinctionTable.default()
    assert tuple(t.wavelengths) == WL
    for col in t.coefficients.values():
        assert np.all(col >= 0)
    # water dominant at long wavelengths, hemoglobin at 850, melanin decreasing
    assert t.epsilon("hemoglobin", 850) == max(t.row(850).values())
    assert np.all(np.diff(t.coefficients["melanin"]) < 0)


def test_weak_table_satisfies_water_dominance():
    t = _table("extinction_weak.csv")
    assert np.all(t.water_to_glucose_ratio(0.7, 100.0) >= 50.0)


def test_table_csv_round_trip(tmp_path):
    t = ExtinctionTable.default()
    t.to_csv(tmp_path / "t.csv")
    u = ExtinctionTable.from_csv(tmp_path / "t.csv")
    for c in t.coefficients:
        assert np.array_equal(t.coefficients[c], u.coefficients[c])


def test_table_rejects_negative():
    with pytest.raises(ValueError):
        ExtinctionTable(np.array([900.0]), {c: np.array([-1.0 if c == "lipid" else 0.1]) for c in
                                            ("glucose", "water", "hemoglobin", "lipid", "melanin")})
