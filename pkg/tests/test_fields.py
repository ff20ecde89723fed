import math

import numpy as np
import pytest

from jdhym.errors import DataError, NotKahlerError, UsageError
from jdhym.fields import (ScalarField, TorusGeometry,
                          complex_hessian, constant_form, field_from_modes,
                          form_field, hessian_values, integrate, kahler_form,
                          load_scalar_field, mixed_density, mollifier_profile,
                          mollifier_normalization, mollify,
                          random_bandlimited, regularized_max,
                          relative_spectrum_field, save_scalar_field,
                          smooth_array)


@pytest.fixture
def g1():
    return TorusGeometry(1, 32)


@pytest.fixture
def g2():
    return TorusGeometry(2, 8)


class TestGeometry:
    def test_validation(self):
        with pytest.raises(UsageError):
            TorusGeometry(0, 16)
        with pytest.raises(UsageError):
            TorusGeometry(4, 16)
        with pytest.raises(UsageError):
            TorusGeometry(1, 12)
        with pytest.raises(UsageError):
            TorusGeometry(1, 4)

    def test_shape(self, g2):
        assert g2.shape == (8, 8, 8, 8)
        assert g2.grid_size == 8 ** 4


class TestScalarField:
    def test_mean_zero_flag(self, g1):
        vals = np.ones(g1.shape) * 3.0
        vals[0, 0] = 7.0
        f = ScalarField(g1, vals, mean_zero=True)
        assert abs(f.mean()) < 1e-15
        g = ScalarField(g1, vals)
        assert g.mean() > 0

    def test_finite_shape_checks(self, g1):
        with pytest.raises(UsageError):
            ScalarField(g1, np.zeros((4, 4)))


class TestComplexHessian:
    def test_constant_gives_zero(self, g1):
        H = hessian_values(ScalarField.constant(g1, 4.2))
        assert np.max(np.abs(H)) == 0.0

    def test_single_mode_analytic(self, g1):
        phi = field_from_modes(g1, [((1, 0), 1.0)])
        H = hessian_values(phi)
        assert np.allclose(H[..., 0, 0].real, -math.pi ** 2 * phi.values, atol=1e-12)
        assert np.max(np.abs(H[..., 0, 0].imag)) < 1e-14

    def test_linearity(self, g1):
        a = field_from_modes(g1, [((1, 0), 0.7)])
        b = field_from_modes(g1, [((0, 2), 0.4)])
        H = hessian_values(a + b)
        assert np.allclose(H, hessian_values(a) + hessian_values(b), atol=1e-13)

    def test_spectral_exactness_n2(self, g2):
        # cos(2 pi (x1 + y2)): mode k = (1,0), l = (0,1); zeta = pi*(l + i k)
        # entry (i,j) of the Hessian carries -zeta_i conj(zeta_j) per exponential
        phi = field_from_modes(g2, [((1, 0, 0, 1), 1.0)])
        H = hessian_values(phi)
        x = g2.coordinates()
        # the multiplier takes the same value at the +/- mode pair, so each
        # entry is (complex multiplier) * cos(arg)
        c = np.cos(2 * math.pi * (x[0] + x[3])) + 0 * x[1] + 0 * x[2]
        zeta = np.array([math.pi * 1j, math.pi])
        for i in range(2):
            for j in range(2):
                mult = -zeta[i] * np.conj(zeta[j])
                assert np.allclose(H[..., i, j], mult * c, atol=1e-10), (i, j)
        assert np.max(np.abs(H - H.conj().swapaxes(-1, -2))) < 1e-12

    def test_rejects_nonfinite(self, g1):
        vals = np.zeros(g1.shape)
        vals[0, 0] = np.nan
        with pytest.raises(DataError):
            hessian_values(ScalarField(g1, vals))


class TestKahlerForm:
    def test_constant_margin(self, g2):
        form = kahler_form(g2, np.diag([2.0, 5.0]), None)
        assert form.min_eigenvalue() == pytest.approx(2.0)

    def test_small_mode_positive(self, g1):
        eps = 0.5 / math.pi ** 2
        phi = field_from_modes(g1, [((1, 0), eps)])
        form = kahler_form(g1, np.eye(1), phi)
        assert form.min_eigenvalue() == pytest.approx(1.0 - eps * math.pi ** 2, rel=1e-9)

    def test_large_mode_raises_with_location(self, g1):
        phi = field_from_modes(g1, [((1, 0), 1.0)])
        with pytest.raises(NotKahlerError) as exc:
            kahler_form(g1, np.eye(1), phi)
        assert exc.value.grid_index is not None
        assert exc.value.margin < 0.0

    def test_form_linear_combination_tracks_potentials(self, g1):
        a = form_field(g1, np.array([[1.0]]), field_from_modes(g1, [((1, 0), 0.01)]))
        b = form_field(g1, np.array([[2.0]]), field_from_modes(g1, [((0, 1), 0.01)]))
        combo = 0.25 * a + 0.5 * b
        assert np.allclose(combo.base, np.array([[1.25]]))
        assert np.allclose(combo.values, 0.25 * a.values + 0.5 * b.values)
        assert np.allclose(combo.potential.values,
                           0.25 * a.potential.values + 0.5 * b.potential.values)


class TestIntegration:
    def test_volume_convention(self, g2):
        omega = constant_form(g2, np.eye(2))
        assert integrate(None, [omega, omega]) == pytest.approx(2.0)  # n! det

    def test_orthogonality(self, g2):
        s = field_from_modes(g2, [((1, 0, 0, 0), 1.0)])
        omega = constant_form(g2, np.eye(2))
        assert integrate(s, [omega, omega]) == pytest.approx(0.0, abs=1e-14)

    def test_mixed_determinant_oracle_n2(self):
        # D(A, B) against the explicit permutation expansion
        rng = np.random.default_rng(3)
        for _ in range(20):
            a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
            a = a + a.conj().T
            b = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
            b = b + b.conj().T
            d = float(mixed_density([a, b]))
            oracle = (a[0, 0] * b[1, 1] + a[1, 1] * b[0, 0]
                      - a[0, 1] * b[1, 0] - a[1, 0] * b[0, 1]).real
            assert d == pytest.approx(oracle, rel=1e-12)

    def test_mixed_determinant_oracle_n3(self):
        # symmetric multilinear expansion: D(A,B,B) = d/dt|0 det(B+tA) * 2
        rng = np.random.default_rng(4)
        a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        a = a + a.conj().T
        b = random_hpd3(rng)
        d = float(mixed_density([a, b, b]))
        oracle = 2.0 * np.linalg.det(b).real * np.trace(np.linalg.solve(b, a)).real
        assert d == pytest.approx(oracle, rel=1e-10)

    def test_cohomology_invariance(self, g2):
        rng = np.random.default_rng(7)
        base_chi = np.diag([1.0, 3.0])
        base_om = np.eye(2)
        ref = None
        for _ in range(4):
            chi = form_field(g2, base_chi, random_bandlimited(g2, rng, amplitude=0.005))
            om = form_field(g2, base_om, random_bandlimited(g2, rng, amplitude=0.005))
            val = integrate(None, [chi, om])
            if ref is None:
                ref = integrate(None, [constant_form(g2, base_chi), constant_form(g2, base_om)])
            assert val == pytest.approx(ref, abs=1e-11)

    def test_geometry_mismatch(self, g1, g2):
        with pytest.raises(UsageError):
            integrate(ScalarField.zeros(g1), [constant_form(g2, np.eye(2))] * 2)


def random_hpd3(rng):
    g = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    return g @ g.conj().T / 3 + 0.1 * np.eye(3)


class TestRelativeSpectrumField:
    def test_matches_pointwise_eigh(self, g2):
        rng = np.random.default_rng(5)
        chi = form_field(g2, np.diag([1.0, 2.0]),
                         random_bandlimited(g2, rng, kmax=1, amplitude=0.002))
        om = form_field(g2, np.eye(2),
                        random_bandlimited(g2, rng, kmax=1, amplitude=0.002))
        lam = relative_spectrum_field(chi.values, om.values)
        from jdhym.hermitian import relative_spectrum
        for idx in [(0, 0, 0, 0), (3, 2, 1, 0), (7, 7, 7, 7), (1, 5, 2, 6)]:
            oracle = relative_spectrum(chi.values[idx], om.values[idx]).as_array()
            assert np.allclose(lam[idx], oracle, rtol=1e-10, atol=1e-12)


class TestMollify:
    def test_profile_shape(self):
        assert mollifier_profile(np.array([0.0, 0.2, 0.25]))[0] == 1.0
        assert mollifier_profile(np.array([1.0, 1.5]))[-1] == 0.0
        r = np.linspace(0, 1.2, 200)
        vals = mollifier_profile(r)
        assert np.all(vals >= 0.0) and np.all(vals <= 1.0)

    def test_normalization_constraint(self):
        # int_0^1 rho(t) t^(2n-1) Vol(S^(2n-1)) dt = 1
        for n in (1, 2):
            rho0 = mollifier_normalization(n)
            ts = np.linspace(0, 1, 40001)
            area = 2.0 * math.pi ** n / math.gamma(n)
            val = np.trapezoid(rho0 * mollifier_profile(ts) * ts ** (2 * n - 1) * area, ts)
            assert val == pytest.approx(1.0, rel=1e-6)

    def test_constant_unchanged(self, g1):
        c = ScalarField.constant(g1, 2.5)
        assert np.allclose(mollify(c, 0.1).values, 2.5, atol=1e-14)

    def test_commutes_with_hessian(self, g1):
        phi = field_from_modes(g1, [((1, 0), 0.3), ((2, 1), 0.2)])
        lhs = hessian_values(mollify(phi, 0.08))
        rhs = smooth_array(g1, hessian_values(phi), 0.08)
        assert np.max(np.abs(lhs - rhs)) < 1e-10

    def test_single_mode_multiplier_against_radial_transform(self, g1):
        # n=1: K_hat(k) = 2 pi int rho_delta(r) J0(2 pi |k| r) r dr
        from scipy.special import j0
        delta = 0.12
        phi = field_from_modes(g1, [((1, 0), 1.0)])
        out = mollify(phi, delta)
        num = float(np.vdot(phi.values, out.values) / np.vdot(phi.values, phi.values))
        rs = np.linspace(0.0, delta, 20001)
        kern = mollifier_normalization(1) * mollifier_profile(rs / delta) / delta ** 2
        oracle = 2 * math.pi * np.trapezoid(kern * j0(2 * math.pi * 1.0 * rs) * rs, rs)
        assert 0.0 < num <= 1.0 + 1e-12
        assert num == pytest.approx(oracle, rel=2e-3)  # discrete vs continuum kernel

    def test_positivity_preserved_on_margins(self, g1):
        phi = field_from_modes(g1, [((1, 0), 0.03), ((0, 1), 0.02)])
        m0 = kahler_form(g1, np.eye(1), phi).min_eigenvalue()
        m1 = kahler_form(g1, np.eye(1), mollify(phi, 0.1)).min_eigenvalue()
        assert m1 >= m0 - 1e-10

    def test_radius_bound(self, g1):
        with pytest.raises(UsageError):
            mollify(ScalarField.zeros(g1), 0.3)


class TestRegularizedMax:
    def test_equal_inputs_offset(self, g1):
        f = field_from_modes(g1, [((1, 0), 0.2)])
        out = regularized_max(f, f, 0.05)
        d = out.values - f.values
        assert np.all(d >= -1e-15) and np.all(d <= 0.05 + 1e-15)
        assert np.ptp(d) < 1e-12  # constant offset by symmetry

    def test_equals_max_when_far(self, g1):
        f1 = field_from_modes(g1, [((1, 0), 0.3)])
        f2 = f1 - 5.0
        out = regularized_max(f1, f2, 0.1)
        assert np.max(np.abs(out.values - f1.values)) < 1e-14

    def test_bounds_and_symmetry(self, g1):
        rng = np.random.default_rng(10)
        f1 = random_bandlimited(g1, rng, amplitude=0.3)
        f2 = random_bandlimited(g1, rng, amplitude=0.3)
        eta = 0.07
        out = regularized_max(f1, f2, eta)
        m = np.maximum(f1.values, f2.values)
        assert np.all(out.values >= m - 1e-12)
        assert np.all(out.values <= m + eta + 1e-12)
        swapped = regularized_max(f2, f1, eta)
        assert np.max(np.abs(out.values - swapped.values)) < 1e-12

    def test_convexity_on_linear_slice(self):
        # two linear-in-x inputs cross at x = 0.5; the regularization must be
        # convex there (non-negative second differences away from the wrap)
        geom = TorusGeometry(1, 64)
        x = np.broadcast_to(geom.coordinates()[0], geom.shape)
        f1 = ScalarField(geom, (x - 0.5) * 0.4)
        f2 = ScalarField(geom, -(x - 0.5) * 0.5)
        out = regularized_max(f1, f2, 0.02)
        sl = out.values[:, 0]
        interior = sl[8:56]
        second = interior[2:] - 2 * interior[1:-1] + interior[:-2]
        assert np.min(second) > -1e-12


class TestSerialization:
    def test_round_trip_binary(self, tmp_path, g2):
        rng = np.random.default_rng(2)
        phi = random_bandlimited(g2, rng)
        header = save_scalar_field(tmp_path / "field", phi, base=np.diag([1.0, 2.0]))
        loaded, base = load_scalar_field(header)
        assert np.array_equal(loaded.values, phi.values)
        assert np.allclose(base, np.diag([1.0, 2.0]))

    def test_round_trip_csv(self, tmp_path, g1):
        rng = np.random.default_rng(3)
        phi = random_bandlimited(g1, rng)
        header = save_scalar_field(tmp_path / "field", phi, fmt="csv")
        loaded, base = load_scalar_field(header)
        assert np.array_equal(loaded.values, phi.values)
        assert base is None

    def test_corrupt_payload(self, tmp_path, g1):
        phi = ScalarField.zeros(g1)
        header = save_scalar_field(tmp_path / "f", phi)
        (tmp_path / "f.bin").write_bytes(b"123")
        with pytest.raises(DataError):
            load_scalar_field(header)
