import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate
from scipy.special import beta as beta_fn, gamma

from conelab import functionals as fn
from conelab import lattice as lat
from conelab import transform as tr
from conelab.bumps import capital_psi, varphi
from conelab.errors import KindMismatch, SingularNode
from conelab.symbols import SymbolDescriptor, SymbolKind as K

from conftest import random_field


def _gauss(spec):
    x = np.meshgrid(*([spec.coords()] * spec.n), indexing="ij")
    return lat.SpatialField(spec, np.exp(-sum(a**2 for a in x) / 2))


# -- weights -------------------------------------------------------------------------


def test_weight_params_invariants():
    with pytest.raises(ValueError):
        fn.WeightParams(-0.1, 0)
    with pytest.raises(ValueError):
        fn.WeightParams(0, 1.0)
    with pytest.raises(ValueError):
        fn.WeightParams(2.0, 0).check(3)
    fn.WeightParams(2.0, 0).check(4)


@pytest.mark.parametrize("p", [1.0, 2.0, 3.5])
def test_unweighted_norm_is_lattice_norm(p):
    s = lat.GridSpec(3, 4.0, 8)
    f = random_field(s, 1)
    assert fn.weighted_norm(f, fn.WeightParams(), p) == pytest.approx(f.norm(p), rel=1e-13)


def test_unweighted_l2_is_parseval():
    s = lat.GridSpec(3, 4.0, 8)
    f = random_field(s, 2)
    F = lat.forward_transform(f)
    assert fn.weighted_norm(f, fn.WeightParams(), 2) == pytest.approx(F.norm(), rel=1e-12)


def test_single_cell_indicator():
    s = lat.GridSpec(3, 4.0, 8, offset=True)
    v = np.zeros(s.shape, complex)
    idx = (2, 5, 1)
    v[idx] = 3 - 4j
    x = s.coords()
    w = fn.WeightParams(0.7, 0.4)
    om = math.hypot(x[2], x[5]) ** -0.7 * abs(x[1]) ** -0.4
    for p in (1.0, 2.0):
        expect = (s.cell_volume * om) ** (1 / p) * 5.0
        assert fn.weighted_norm(lat.SpatialField(s, v), w, p) == pytest.approx(expect, rel=1e-13)


def test_singular_node():
    s = lat.GridSpec(3, 4.0, 8)
    with pytest.raises(SingularNode):
        fn.weighted_norm(lat.zeros(s), fn.WeightParams(0.5, 0.0))
    with pytest.raises(SingularNode):
        fn.weighted_norm(lat.zeros(s), fn.WeightParams(0.0, 0.5))
    with pytest.raises(ValueError):
        fn.weighted_norm(lat.zeros(s), fn.WeightParams(0.5, 0.0), mode="cell")


def test_gaussian_against_refined_oracle():
    w = fn.WeightParams(1.0, 0.5)
    base = fn.weighted_norm(_gauss(lat.GridSpec(3, 8.0, 32, offset=True)), w, 2, "cell")
    fine = fn.weighted_norm(_gauss(lat.GridSpec(3, 8.0, 256, offset=True)), w, 2, "cell")
    assert abs(base - fine) / fine < 1e-2
    # closed form: int e^{-|x|^2} |x'|^{-1} |x_n|^{-1/2} dx = pi^{3/2} Gamma(1/4)
    exact = math.sqrt(math.pi**1.5 * gamma(0.25))
    assert abs(base - exact) / exact < 1e-2


def test_cell_weights_average_exactly():
    s = lat.GridSpec(3, 2.0, 4, offset=True)
    w = fn.WeightParams(1.0, 0.5)
    om = fn.weight_array(s, w, "cell")
    # total integral of the weight over the box [-1, 1]^3
    r_part = integrate.dblquad(lambda y, x: (x * x + y * y) ** -0.5, 0, 1, 0, 1, epsabs=1e-12)[0] * 4
    n_part = 4.0  # int_{-1}^{1} |x|^{-1/2}
    assert np.sum(om) * s.cell_volume == pytest.approx(r_part * n_part, rel=1e-6)


# -- A_delta --------------------------------------------------------------------------


def test_a_delta_examples():
    assert fn.a_delta(0.01, fn.WeightParams(0.3, 0.2)) == pytest.approx(0.1)
    assert fn.a_delta(0.01, fn.WeightParams(0.6, 0.4)) == pytest.approx(0.1 * math.sqrt(math.log(100)))
    assert fn.a_delta(0.01, fn.WeightParams(0.6, 0.4)) == pytest.approx(0.21460, abs=1e-5)
    assert fn.a_delta(0.25, fn.WeightParams(1.0, 0.6)) == pytest.approx(0.25**0.2)
    assert fn.a_delta(0.25, fn.WeightParams(1.0, 0.6)) == pytest.approx(0.75786, abs=1e-5)


# -- maximal over R -------------------------------------------------------------------


def test_rgrid_nested_refinement():
    g = fn.RGrid(1, 64, 49)
    assert g.values[0] == 1 and g.values[-1] == pytest.approx(64)
    fine = g.refine(4)
    assert fine.K == 193
    assert np.allclose(fine.values[::4], g.values, rtol=1e-14)
    with pytest.raises(ValueError):
        fn.RGrid(2, 1, 4)


def test_maximal_constant_family(oracle_spec):
    f = lat.synthesize(oracle_spec, np.array([[0, 0, 3]]), np.array([2.0 - 1j]))
    fam = SymbolDescriptor(K.LinearCone, nu=0.5)
    out = fn.maximal_over_R(f, fam, fn.RGrid(0.5, 8, 9))
    T = tr.apply_linear(f, fam.with_(t=1.0))
    assert np.allclose(out.values, np.abs(T.values), rtol=1e-13)


def test_maximal_single_R_and_monotone(oracle_spec, oracle_band):
    f = lat.band_limited_test_function(oracle_spec, oracle_band, 4)
    fam = SymbolDescriptor(K.LinearCone, nu=1.0)
    single = fn.maximal_over_R(f, fam, [0.9])
    assert np.allclose(single.values, np.abs(tr.apply_linear(f, fam.with_(t=0.9)).values), rtol=1e-13)
    g = fn.RGrid(0.3, 3.0, 6)
    coarse = fn.maximal_over_R(f, fam, g).values.real
    fine = fn.maximal_over_R(f, fam, g.refine(2)).values.real
    assert np.all(fine >= coarse - 1e-15)
    for R in g.values:
        assert np.all(coarse >= np.abs(tr.apply_linear(f, fam.with_(t=R)).values) - 1e-15)


def test_maximal_bilinear(oracle_spec, oracle_band):
    f = lat.band_limited_test_function(oracle_spec, oracle_band, 1)
    g = lat.band_limited_test_function(oracle_spec, oracle_band, 2)
    fam = SymbolDescriptor(K.BilinearCone, lam=1.0, R=1.0)
    out = fn.maximal_over_R((f, g), fam, fn.RGrid(1.0, 4.0, 3))
    for R in (1.0, 2.0, 4.0):
        assert np.all(out.values.real >= np.abs(tr.apply_bilinear_direct(f, g, 1.0, R).values) - 1e-15)
    with pytest.raises(KindMismatch):
        fn.maximal_over_R(f, fam, [1.0])
    with pytest.raises(KindMismatch):
        fn.maximal_over_R((f, g), SymbolDescriptor(K.LinearCone, nu=0.0), [1.0])


# -- square functions -----------------------------------------------------------------


def test_square_function_zero_on_axis(spec16):
    f = lat.synthesize(spec16, np.array([[0, 0, 4], [0, 0, 5]]), np.array([1.0, 2j]))
    out = fn.square_function_t(f, SymbolDescriptor(K.SmoothAnnulus, delta=0.05))
    assert np.all(out.values == 0)


def test_square_function_single_mode_profile(spec16):
    m = np.array([1, 2, 5])
    f = lat.pure_mode(spec16, m, 0.8)
    xp2, xn = (1 + 4) / 16, 5 / 4
    rho = math.sqrt(xp2) / xn
    d = 2.0**-5
    prof = lambda t: (varphi(xn) * capital_psi((1 - rho**2 / t**2) / d)) ** 2 / t
    lo, hi = rho / math.sqrt(1 - d / 4), rho / math.sqrt(1 - d)
    ref = integrate.quad(prof, lo, hi, points=[rho / math.sqrt(1 - d / 2)], epsabs=0, epsrel=1e-13, limit=200)[0]
    out = fn.square_function_t(f, SymbolDescriptor(K.SmoothAnnulus, delta=d))
    assert np.allclose(out.values.real, 0.8 * math.sqrt(ref), rtol=1e-8)


@pytest.mark.parametrize("delta", [2.0**-3, 2.0**-6])
def test_square_function_plancherel(spec16, band16, delta):
    f = lat.band_limited_test_function(spec16, band16, 9)
    fam = SymbolDescriptor(K.SmoothAnnulus, delta=delta)
    G = fn.square_function_t(f, fam)
    ref = fn.plancherel_square_norm(f, fam)
    assert abs(G.norm() ** 2 - ref) / ref < 1e-8


def test_square_function_measures(oracle_spec):
    f = lat.pure_mode(oracle_spec, [1, 0, 3])
    fam = SymbolDescriptor(K.LinearCone, nu=0.0)
    rho = 0.25 / 0.75
    rule_range = (0.1, 2.0)
    for measure, expect in [("dt", 2.0 - rho), ("dt/t", math.log(2.0 / rho)), ("dt/R", (2.0 - rho) / 2.0)]:
        out = fn.square_function_t(f, fam, rule_range, measure)
        assert out.values.real.flat[0] == pytest.approx(math.sqrt(expect), rel=1e-10)
    with pytest.raises(ValueError):
        fn.square_function_t(f, fam, rule_range, "dR")
    with pytest.raises(KindMismatch):
        fn.square_function_t(f, SymbolDescriptor(K.BilinearCone, lam=1.0, R=1.0))


@given(st.complex_numbers(min_magnitude=1e-3, max_magnitude=1e3))
def test_square_functions_homogeneous(c):
    s = lat.GridSpec(3, 4.0, 8)
    band = lat.Band(xi_n=(0.5, 1.0), r_max=1.0, r_min=0.2)
    f = lat.band_limited_test_function(s, band, 3)
    fam = SymbolDescriptor(K.SmoothAnnulus, delta=0.05)
    a = fn.square_function_t(f * c, fam).values.real
    b = fn.square_function_t(f, fam).values.real
    assert np.allclose(a, abs(c) * b, rtol=1e-12, atol=0)
    a = fn.gnu_square(f * c, 0.0).values.real
    b = fn.gnu_square(f, 0.0).values.real
    assert np.allclose(a, abs(c) * b, rtol=1e-12, atol=0)


def test_gnu_zero_on_axis(spec16):
    f = lat.synthesize(spec16, np.array([[0, 0, 4]]), np.array([1.0]))
    assert np.all(fn.gnu_square(f, 0.0).values == 0)


def test_gnu_constant_c0():
    val = integrate.quad(lambda u: u**-5, 1, np.inf)[0]
    assert val == pytest.approx(0.25) and 0.5 * beta_fn(2, 1) == pytest.approx(0.25)
    for nu in (0.25, 0.5):
        val = integrate.quad(lambda u: u ** (-4 * nu - 5) * (u * u - 1) ** (2 * nu), 1, np.inf)[0]
        assert val == pytest.approx(0.5 * beta_fn(2, 2 * nu + 1), rel=1e-8)


@pytest.mark.parametrize("nu", [0.0, 0.25, 0.5])
def test_gnu_exact_law(spec16, band16, nu):
    f = lat.band_limited_test_function(spec16, band16, 17)
    sp = tr.SparseSpectrum(f)
    mass = np.sum(np.abs(varphi(sp.xn) * sp.coeffs) ** 2) / spec16.L**3
    ratio = fn.gnu_square(f, nu).norm() ** 2 / mass
    assert ratio == pytest.approx(0.5 * beta_fn(2, 2 * nu + 1), abs=1e-3)


def test_m_nu_axis_mode(spec16):
    f = lat.synthesize(spec16, np.array([[0, 0, 5]]), np.array([1.5j]))
    out = fn.m_nu(f, 0.5, fn.RGrid(1, 16, 9))
    assert np.allclose(out.values.real, 1.5 / spec16.L**3 * varphi(1.25), rtol=1e-12)


def test_m_nu_chain_and_monotone():
    s = lat.GridSpec(3, 4.0, 8)
    band = lat.Band(xi_n=(0.5, 1.0), r_max=1.0)
    f = lat.band_limited_test_function(s, band, 8)
    g = fn.RGrid(1, 16, 9)
    lhs, rhs = fn.mnu_chain(f, 0.0, 2, g)
    assert np.min(rhs - lhs) >= -1e-10
    rule = fn.chain_rule(f, g.refine(2))
    coarse = fn.m_nu(f, 0.0, g, rule).values.real
    fine = fn.m_nu(f, 0.0, g.refine(2), rule).values.real
    assert np.all(fine >= coarse - 1e-15)


# -- grid maximal functions -------------------------------------------------------------


def _brute_dyadic(a):
    N = a.shape[0]
    out = np.abs(a).copy()
    levels = int(math.log2(N))
    for p in range(levels + 1):
        for q in range(levels + 1):
            P, Q = 2**p, 2**q
            for i0, j0, k0 in itertools.product(range(0, N, P), range(0, N, P), range(0, N, Q)):
                block = np.abs(a[i0 : i0 + P, j0 : j0 + P, k0 : k0 + Q])
                sl = (slice(i0, i0 + P), slice(j0, j0 + P), slice(k0, k0 + Q))
                out[sl] = np.maximum(out[sl], block.mean())
    return out


@given(st.integers(0, 2**31))
def test_dyadic_brute_force(seed):
    s = lat.GridSpec(3, 1.0, 4)
    f = random_field(s, seed)
    assert np.allclose(fn.dyadic_strong_maximal(f).values.real, _brute_dyadic(f.values), rtol=1e-13, atol=0)


def test_maximal_functions_basic():
    s = lat.GridSpec(3, 1.0, 8)
    c = lat.SpatialField(s, np.full(s.shape, 2.5 + 0j))
    assert np.allclose(fn.dyadic_strong_maximal(c).values, 2.5)
    assert np.allclose(fn.hardy_littlewood(c).values, 2.5)
    f = random_field(s, 3)
    for M in (fn.dyadic_strong_maximal, fn.hardy_littlewood):
        assert np.all(M(f).values.real >= np.abs(f.values))
    with pytest.raises(ValueError):
        fn.dyadic_strong_maximal(lat.zeros(lat.GridSpec(3, 1.0, 6)))
