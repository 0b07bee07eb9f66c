import math

import numpy as np
import pytest
from scipy.integrate import quad

from myriadkit.distributions import (
    StudentTParams,
    WrappedCauchyParams,
    pn_to_wc,
    projected_normal_logpdf,
    sample_student_t,
    sample_wrapped_cauchy,
    student_t_logpdf,
    wc_to_pn,
    wrap_angle,
    wrapped_cauchy_pdf,
)
from myriadkit.errors import InvalidNu, NotUnitVector


def t1d(nu, mu=0.0, sigma=1.0):
    return StudentTParams(np.array([mu]), np.array([[sigma]]), nu)


class TestStudentTLogpdf:
    def test_cauchy_at_mode(self):
        assert student_t_logpdf([0.0], t1d(1.0)) == pytest.approx(np.log(1 / np.pi))

    def test_cauchy_at_one(self):
        assert student_t_logpdf([1.0], t1d(1.0)) == pytest.approx(np.log(1 / (2 * np.pi)))

    def test_gaussian_limit_at_mode(self):
        got = student_t_logpdf([0.0], t1d(1e6))
        assert got == pytest.approx(np.log(1 / np.sqrt(2 * np.pi)), abs=1e-3)

    def test_gaussian_limit_pointwise(self):
        p = t1d(1e6)
        grid = np.linspace(-5, 5, 41)
        gauss = np.exp(-0.5 * grid**2) / np.sqrt(2 * np.pi)
        ours = np.array([np.exp(student_t_logpdf([x], p)) for x in grid])
        assert np.max(np.abs(ours - gauss)) <= 1e-3

    @pytest.mark.parametrize("nu", [1.0, 2.0, 5.0])
    def test_unit_mass(self, nu):
        p = t1d(nu)
        mass, _ = quad(
            lambda x: np.exp(student_t_logpdf([x], p)), -np.inf, np.inf, limit=200
        )
        assert mass == pytest.approx(1.0, abs=1e-6)

    def test_rejects_nonpositive_nu(self):
        with pytest.raises(InvalidNu):
            student_t_logpdf([0.0], StudentTParams(np.zeros(1), np.eye(1), 0.0))


class TestProjectedNormalLogpdf:
    def test_uniform_on_circle(self):
        for ang in (0.0, 0.7, 2.5):
            x = [np.cos(ang), np.sin(ang)]
            assert projected_normal_logpdf(x, np.eye(2)) == pytest.approx(
                np.log(1 / (2 * np.pi))
            )

    def test_scale_invariance_exact(self):
        rng = np.random.default_rng(1)
        a = rng.standard_normal((2, 2))
        sigma = a.T @ a + 2 * np.eye(2)
        x = np.array([np.cos(0.3), np.sin(0.3)])
        for lam in (0.5, 2.0, 7.0):
            assert projected_normal_logpdf(x, lam * sigma) == pytest.approx(
                projected_normal_logpdf(x, sigma), abs=1e-12
            )

    def test_anisotropic_value(self):
        got = projected_normal_logpdf([1.0, 0.0], np.diag([2.0, 1.0]))
        assert got == pytest.approx(np.log(np.sqrt(2) / (2 * np.pi)))

    def test_rejects_off_sphere(self):
        with pytest.raises(NotUnitVector):
            projected_normal_logpdf([1.0, 1.0], np.eye(2))


class TestWrappedCauchyPdf:
    def test_at_location(self):
        p = WrappedCauchyParams(0.5, 0.3)
        expect = (1 + 0.3) / (1 - 0.3) / (2 * np.pi)
        assert wrapped_cauchy_pdf(0.5, p) == pytest.approx(expect)

    def test_uniform_at_rho_zero(self):
        p = WrappedCauchyParams(0.0, 0.0)
        for th in (-3.0, 0.0, 1.5):
            assert wrapped_cauchy_pdf(th, p) == pytest.approx(1 / (2 * np.pi))

    def test_unit_mass_trapezoid(self):
        p = WrappedCauchyParams(1.0, 0.8)
        grid = np.linspace(-np.pi, np.pi, 100001)
        mass = np.trapezoid(wrapped_cauchy_pdf(grid, p), grid)
        assert mass == pytest.approx(1.0, abs=1e-8)


class TestStudentTSampler:
    def test_mean(self):
        p = StudentTParams(np.array([1.0, 2.0]), np.eye(2), 5.0)
        s = sample_student_t(p, 10**6, seed=42)
        assert np.allclose(s.rows.mean(axis=0), [1.0, 2.0], atol=0.01)

    def test_covariance_factor(self):
        p = StudentTParams(np.zeros(2), np.eye(2), 5.0)
        s = sample_student_t(p, 10**6, seed=43)
        cov = np.cov(s.rows.T)
        assert np.allclose(cov, (5.0 / 3.0) * np.eye(2), rtol=0.05, atol=0.05)

    def test_deterministic(self):
        p = StudentTParams(np.zeros(2), np.eye(2), 3.0)
        a = sample_student_t(p, 1000, seed=7).rows
        b = sample_student_t(p, 1000, seed=7).rows
        assert np.array_equal(a, b)

    def test_ks_against_cauchy_cdf(self):
        p = t1d(1.0)
        x = np.sort(sample_student_t(p, 10**5, seed=11).rows.ravel())
        cdf = 0.5 + np.arctan(x) / np.pi
        ecdf_hi = np.arange(1, x.size + 1) / x.size
        ecdf_lo = np.arange(0, x.size) / x.size
        ks = max(np.max(np.abs(cdf - ecdf_hi)), np.max(np.abs(cdf - ecdf_lo)))
        assert ks <= 0.01

    def test_rejects_nonpositive_nu(self):
        with pytest.raises(InvalidNu):
            sample_student_t(StudentTParams(np.zeros(1), np.eye(1), 0.0), 10, 0)


class TestWrappedCauchySampler:
    def test_point_mass_limit(self):
        p = WrappedCauchyParams(1.0, 1.0 - 1e-12)
        s = sample_wrapped_cauchy(p, 1000, seed=3)
        assert np.max(np.abs(wrap_angle(s - 1.0))) < 1e-6

    def test_uniform_fallback_at_rho_zero(self):
        s = sample_wrapped_cauchy(WrappedCauchyParams(0.0, 0.0), 10**6, seed=5)
        resultant = np.hypot(np.cos(s).mean(), np.sin(s).mean())
        assert resultant <= 0.01

    def test_mean_direction(self):
        s = sample_wrapped_cauchy(WrappedCauchyParams(1.0, 0.8), 10**6, seed=6)
        direction = math.atan2(np.sin(s).mean(), np.cos(s).mean())
        assert direction == pytest.approx(1.0, abs=0.01)

    def test_resultant_length_matches_rho(self):
        # E[cos(theta - a)] = rho for the wrapped Cauchy distribution
        s = sample_wrapped_cauchy(WrappedCauchyParams(-2.0, 0.6), 10**6, seed=8)
        resultant = np.hypot(np.cos(s).mean(), np.sin(s).mean())
        assert resultant == pytest.approx(0.6, abs=0.01)

    def test_range_and_determinism(self):
        p = WrappedCauchyParams(0.3, 0.5)
        a = sample_wrapped_cauchy(p, 5000, seed=1)
        b = sample_wrapped_cauchy(p, 5000, seed=1)
        assert np.array_equal(a, b)
        assert np.all(a >= -np.pi) and np.all(a < np.pi)


class TestConversions:
    def test_isotropic_convention(self):
        p = pn_to_wc(np.eye(2))
        assert p.rho == 0.0
        assert p.a == -np.pi

    def test_diag_2_1(self):
        p = pn_to_wc(np.diag([2.0, 1.0]))
        assert p.a == pytest.approx(0.0)
        assert p.rho == pytest.approx(3 - 2 * np.sqrt(2), abs=1e-12)

    def test_diag_1_2_wraps_to_minus_pi(self):
        p = pn_to_wc(np.diag([1.0, 2.0]))
        assert p.a == -np.pi
        assert p.rho == pytest.approx(3 - 2 * np.sqrt(2), abs=1e-12)

    def test_wc_to_pn_uniform(self):
        s = wc_to_pn(WrappedCauchyParams(0.0, 0.0))
        assert np.allclose(s.entries, 0.5 * np.eye(2))

    def test_wc_to_pn_value(self):
        s = wc_to_pn(WrappedCauchyParams(np.pi / 2, 0.5))
        assert np.allclose(s.entries, [[0.5, 0.4], [0.4, 0.5]], atol=1e-15)

    def test_round_trip_grid(self):
        for a in np.linspace(-np.pi + 0.05, np.pi - 0.05, 20):
            for rho in np.linspace(0.02, 0.95, 20):
                back = pn_to_wc(wc_to_pn(WrappedCauchyParams(a, rho)))
                assert back.a == pytest.approx(a, abs=1e-10)
                assert back.rho == pytest.approx(rho, abs=1e-10)

    def test_pn_round_trip_is_trace_normalization(self):
        rng = np.random.default_rng(9)
        for _ in range(25):
            b = rng.standard_normal((2, 2))
            sigma = b.T @ b + 0.5 * np.eye(2)
            wc = pn_to_wc(sigma)
            if wc.rho < 1e-12:
                continue
            back = wc_to_pn(wc).entries
            assert np.allclose(back, sigma / np.trace(sigma), atol=1e-12)
