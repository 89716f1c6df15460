import numpy as np
import pytest
from hypothesis import given, strategies as st

from conelab import lattice as lat
from conelab.errors import EmptyBand

from conftest import random_field


def test_gridspec_validation():
    with pytest.raises(ValueError):
        lat.GridSpec(n=2)
    with pytest.raises(ValueError):
        lat.GridSpec(N=7)
    with pytest.raises(ValueError):
        lat.GridSpec(L=0.0)


def test_coordinates_layout():
    s = lat.GridSpec(n=3, L=8.0, N=32)
    x = s.coords()
    assert x[0] == -4.0 and np.isclose(x[1] - x[0], 0.25)
    xo = s.with_offset().coords()
    assert np.all(xo != 0) and np.isclose(xo[0], -4.0 + 0.125)


def test_constant_field_has_single_coefficient(oracle_spec):
    s = oracle_spec
    F = lat.forward_transform(lat.SpatialField(s, np.ones(s.shape)))
    c = F.coefficients
    assert np.isclose(c[0, 0, 0], s.L**s.n)
    c = c.copy()
    c[0, 0, 0] = 0
    assert np.max(np.abs(c)) < 1e-12


@pytest.mark.parametrize("offset", [False, True])
def test_pure_mode_forward(offset):
    s = lat.GridSpec(n=3, L=4.0, N=8, offset=offset)
    m = np.array([1, -2, 3])
    x = np.meshgrid(*([s.coords()] * 3), indexing="ij")
    v = np.exp(2j * np.pi * sum(mi * xi for mi, xi in zip(m, x)) / s.L)
    F = lat.forward_transform(lat.SpatialField(s, v)).coefficients
    idx = tuple(mi % s.N for mi in m)
    assert np.isclose(F[idx], s.L**3)
    F = F.copy()
    F[idx] = 0
    assert np.max(np.abs(F)) < 1e-10


def test_inverse_of_delta_is_pure_mode(oracle_spec):
    s = oracle_spec
    c = np.zeros(s.shape, complex)
    c[1, 0, 2] = s.L**3
    f = lat.inverse_transform(lat.Spectrum(s, c))
    x = np.meshgrid(*([s.coords()] * 3), indexing="ij")
    expect = np.exp(2j * np.pi * (x[0] + 2 * x[2]) / s.L)
    assert np.allclose(f.values, expect, atol=1e-12)
    assert np.all(lat.inverse_transform(lat.Spectrum(s, np.zeros(s.shape))).values == 0)


@given(st.integers(0, 2**32 - 1))
def test_round_trips_and_parseval(seed):
    s = lat.GridSpec(n=3, L=3.0, N=8)
    f = random_field(s, seed)
    F = lat.forward_transform(f)
    g = lat.inverse_transform(F)
    assert np.linalg.norm(g.values - f.values) / np.linalg.norm(f.values) < 1e-12
    F2 = lat.forward_transform(lat.inverse_transform(F))
    assert np.linalg.norm(F2.coefficients - F.coefficients) / np.linalg.norm(F.coefficients) < 1e-12
    lhs = s.cell_volume * np.sum(np.abs(f.values) ** 2)
    rhs = np.sum(np.abs(F.coefficients) ** 2) / s.L**3
    assert abs(lhs - rhs) / lhs < 1e-12


@given(st.integers(0, 2**32 - 1), st.complex_numbers(max_magnitude=10), st.complex_numbers(max_magnitude=10))
def test_linearity(seed, a, b):
    s = lat.GridSpec(n=3, L=3.0, N=8)
    f, g = random_field(s, seed), random_field(s, seed + 1)
    lhs = lat.forward_transform(lat.SpatialField(s, a * f.values + b * g.values)).coefficients
    rhs = a * lat.forward_transform(f).coefficients + b * lat.forward_transform(g).coefficients
    scale = max(np.linalg.norm(rhs), 1e-300)
    assert np.linalg.norm(lhs - rhs) <= 1e-12 * scale + 1e-12


@given(st.integers(0, 2**32 - 1), st.integers(0, 2))
def test_translation_law(seed, axis):
    s = lat.GridSpec(n=3, L=3.0, N=8)
    f = random_field(s, seed)
    shifted = lat.SpatialField(s, np.roll(f.values, 1, axis=axis))  # f(x - h e_axis)
    m = s.modes()
    shape = [1, 1, 1]
    shape[axis] = s.N
    phase = np.exp(-2j * np.pi * m * s.cell / s.L).reshape(shape)
    lhs = lat.forward_transform(shifted).coefficients
    rhs = phase * lat.forward_transform(f).coefficients
    assert np.allclose(lhs, rhs, rtol=0, atol=1e-12 * np.abs(rhs).max())


def test_band_single_mode_unit_norm():
    s = lat.GridSpec(n=3, L=4.0, N=8)
    band = lat.Band(xi_n=(0.5, 1.0), r_max=0.0)  # only xi' = 0, m_n = 3
    f = lat.band_limited_test_function(s, band, seed=3)
    modes, coeffs = lat.forward_transform(f).support()
    assert modes.tolist() == [[0, 0, 3]]
    assert np.isclose(f.norm(), 1.0, atol=1e-12)
    assert np.allclose(np.abs(f.values), np.abs(f.values).flat[0])


def test_band_determinism_and_support(oracle_spec, oracle_band):
    f1 = lat.band_limited_test_function(oracle_spec, oracle_band, 11)
    f2 = lat.band_limited_test_function(oracle_spec, oracle_band, 11)
    assert np.array_equal(f1.values, f2.values)
    # transform of the samples, not the cached spectrum
    F = lat.forward_transform(lat.SpatialField(oracle_spec, f1.values)).coefficients
    xp2, xn = lat.frequency_grid(oracle_spec)
    inside = oracle_band.contains(np.sqrt(xp2), xn)
    assert np.max(np.abs(F[~inside])) < 1e-12 * np.max(np.abs(F))
    assert np.isclose(f1.norm(), 1.0)


def test_empty_band_and_nyquist(oracle_spec):
    with pytest.raises(EmptyBand):
        lat.band_limited_test_function(oracle_spec, lat.Band(xi_n=(0.76, 0.99)), 0)
    with pytest.raises(ValueError):
        lat.band_modes(oracle_spec, lat.Band(xi_n=(0.5, 3.0)))


@given(st.integers(0, 2**32 - 1), st.booleans())
def test_binary_round_trip(seed, offset):
    s = lat.GridSpec(n=3, L=2.5, N=4, offset=offset)
    f = random_field(s, seed)
    g = lat.from_bytes(lat.to_bytes(f))
    assert g.spec == s and np.array_equal(g.values, f.values)
    F = lat.forward_transform(f)
    G = lat.from_bytes(lat.to_bytes(F))
    assert np.array_equal(G.coefficients, F.coefficients)


def test_binary_layout_header(tmp_path):
    s = lat.GridSpec(n=3, L=2.0, N=4)
    f = random_field(s, 0)
    blob = lat.to_bytes(f)
    assert blob[:4] == b"CNLB"
    payload = np.frombuffer(blob[-16 * 64 :], dtype="<f8")
    assert payload[0] == f.values.flat[0].real and payload[1] == f.values.flat[0].imag
    assert payload[2] == f.values[0, 0, 1].real  # last axis fastest
    path = tmp_path / "f.cnl"
    lat.save(f, path)
    assert np.array_equal(lat.load(path).values, f.values)
