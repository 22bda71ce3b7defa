import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import betaln, hyp1f1

from ancline.diffusion import (
    alpha_from_beta,
    alpha_tail,
    anc_type1_prob,
    beta_recursion,
    derivatives_fd,
    diffusion_derivatives,
    diffusion_fluxes_rates,
    solve_diffusion,
    wright_density,
    wright_moments,
    wright_normalizer,
)
from ancline.errors import DegenerateBeta, NoConvergence, SigmaZero
from ancline.params import DiffusionParams
from scipy import integrate

POINTS = [
    DiffusionParams.from_nu1(1, 1, 0.5),
    DiffusionParams.from_nu1(10, 8, 0.99),
    DiffusionParams.from_nu1(0.5, 2, 0.9),
    DiffusionParams.from_nu1(10, 0.8, 0.99),
    DiffusionParams.from_nu1(15, 8, 0.99),
    DiffusionParams.from_nu1(5, 2, 0.8),
]
PARAMS = st.builds(
    DiffusionParams.from_nu1,
    sigma=st.floats(0.0, 20.0),
    theta=st.floats(0.2, 10.0),
    nu1=st.floats(0.05, 0.99),
)


def beta_closed_form(theta, nu1, M):
    """Moments of Beta(theta nu1, theta nu0)."""
    n = np.arange(M + 1)
    return np.exp(betaln(theta * nu1 + n, theta * (1 - nu1)) - betaln(theta * nu1, theta * (1 - nu1)))


def test_uniform_moments():
    p = DiffusionParams.from_nu1(0.0, 2.0, 0.5)
    np.testing.assert_allclose(wright_moments(p, 12), 1 / (np.arange(13) + 1), rtol=1e-12)


@pytest.mark.parametrize("theta,nu1", [(0.3, 0.2), (1.0, 0.9), (8.0, 0.99), (2.5, 0.5)])
def test_neutral_moments_both_routes(theta, nu1):
    p = DiffusionParams.from_nu1(0.0, theta, nu1)
    ref = beta_closed_form(theta, nu1, 30)
    np.testing.assert_allclose(wright_moments(p, 30), ref, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(beta_recursion(p)[:31], ref, rtol=1e-10, atol=1e-13)


def test_first_moment_against_kummer():
    # E[Y] for density ~ y^(a-1)(1-y)^(b-1) e^(-sigma y) is a/(a+b) 1F1(a+1;a+b+1;-s)/1F1(a;a+b;-s)
    p = DiffusionParams.from_nu1(3.0, 2.0, 0.7)
    a, b = p.theta * p.nu1, p.theta * p.nu0
    ref = a / (a + b) * hyp1f1(a + 1, a + b + 1, -3.0) / hyp1f1(a, a + b, -3.0)
    assert solve_diffusion(p).beta[1] == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("p", POINTS)
def test_quadrature_vs_recursion(p):
    beta = solve_diffusion(p).beta
    M = min(80, len(beta) - 1)
    assert np.max(np.abs(wright_moments(p, M) - beta[: M + 1])) <= 1e-6


def test_normalizer_integrates_density_to_one():
    p = DiffusionParams.from_nu1(4.0, 3.0, 0.6)
    val, _ = integrate.quad(lambda x: wright_density(p, x), 0, 1)
    assert val == pytest.approx(1.0, abs=1e-10)
    mass, _ = integrate.quad(lambda x: x**1.8 * (1 - x) ** 0.2 * math.exp(-4.0 * x) / x, 0, 1)
    assert wright_normalizer(p) == pytest.approx(1.0 / mass, rel=1e-9)


def test_singular_endpoints_handled():
    p = DiffusionParams.from_nu1(2.0, 0.5, 0.1)  # both exponents well below zero
    beta = solve_diffusion(p).beta
    assert np.max(np.abs(wright_moments(p, 20) - beta[:21])) <= 1e-6


@pytest.mark.parametrize("p", POINTS)
def test_recursion_rows(p):
    sol = solve_diffusion(p)
    a, b = sol.alpha, sol.beta
    s, t1, t = p.sigma, p.theta * p.nu1, p.theta
    n = np.arange(1, len(a) - 1)
    ra = (n + 1 + s + t) * a[n] - (n + 1 + t1) * a[n + 1] - s * a[n - 1]
    rb = (n - 1 + s + t) * b[n] - s * b[n + 1] - (n - 1 + t1) * b[n - 1]
    assert np.max(np.abs(ra[: len(n) // 2])) <= 1e-12
    assert np.max(np.abs(rb[: len(n) // 2])) <= 1e-12


@given(PARAMS)
def test_solution_shape(p):
    sol = solve_diffusion(p)
    for x in (sol.alpha, sol.beta):
        assert x[0] == 1.0 and np.all(np.diff(x) <= 1e-15) and np.all(x >= -1e-15)
    assert np.all(sol.omega[1:] >= -1e-15)
    assert sol.alpha[-1] <= 1e-12


def test_alpha_neutral_delta():
    p = DiffusionParams.from_nu1(0.0, 1.5, 0.3)
    a = alpha_tail(p)
    assert a[0] == 1 and np.all(a[1:] == 0)
    assert np.all(alpha_from_beta(p, beta_recursion(p))[1:] == 0)


@pytest.mark.parametrize("p", POINTS[:5] + [DiffusionParams.from_nu1(5, 2, 0.8)])
def test_alpha_routes_agree(p):
    sol = solve_diffusion(p)
    lem = alpha_from_beta(p, sol.beta)
    m = len(lem)
    assert lem[0] == 1.0
    assert np.max(np.abs(lem - sol.alpha[:m])) <= 1e-8


def test_alpha_from_beta_degenerate():
    with pytest.raises(DegenerateBeta):
        alpha_from_beta(DiffusionParams.from_nu1(1, 1, 0.5), np.array([1.0, 0.5, 0.5, 0.1]))


def test_truncation_cap():
    with pytest.raises(NoConvergence):
        beta_recursion(DiffusionParams.from_nu1(1, 1, 0.5), M0=4, cap=8)


def test_neutral_rates_exact():
    r = diffusion_fluxes_rates(DiffusionParams.from_nu1(0.0, 2.0, 0.3))
    assert abs(r.q10 - 2.0 * 0.7) <= 1e-14 and abs(r.q01 - 2.0 * 0.3) <= 1e-14


@given(PARAMS)
def test_flux_balance_and_identity(p):
    r = diffusion_fluxes_rates(p)
    assert abs(r.f10 - r.f01) <= 1e-10 * r.f10
    assert np.max(np.abs(r.identity_residual)) <= 1e-10


@pytest.mark.parametrize("p", POINTS)
def test_derivatives_against_finite_differences(p):
    an, fd = diffusion_derivatives(p), derivatives_fd(p)
    assert an.q10_prime > 0 and an.q01_prime < 0
    assert an.q10_prime == pytest.approx(fd.q10_prime, rel=1e-4)
    assert an.q01_prime == pytest.approx(fd.q01_prime, rel=1e-4)
    assert an.alpha_prime[0] == 0.0
    m = min(30, len(fd.alpha_prime) - 1)
    np.testing.assert_allclose(an.alpha_prime[:m], fd.alpha_prime[:m], rtol=1e-4, atol=1e-9)


@pytest.mark.parametrize("p", POINTS[:3])
def test_beta_prime_against_quadrature_differences(p):
    an = diffusion_derivatives(p)
    h = 1e-4 * max(p.sigma, 1.0)
    M = 20
    fd = (wright_moments(p.with_sigma(p.sigma + h), M + 1) - wright_moments(p.with_sigma(p.sigma - h), M + 1)) / (2 * h)
    np.testing.assert_allclose(an.beta_prime[1 : M + 1], fd[1 : M + 1], rtol=1e-4)
    b = solve_diffusion(p).beta
    np.testing.assert_allclose(an.beta_prime[1:10], b[1] * b[1:10] - b[2:11], rtol=1e-15)


def test_sigma_zero_derivatives():
    p = DiffusionParams.from_nu1(0.0, 1.0, 0.5)
    with pytest.raises(SigmaZero):
        diffusion_derivatives(p)
    fd = derivatives_fd(p)
    assert fd.finite_difference and fd.q10_prime > 0 and fd.q01_prime < 0


SIGMAS = (0.5, 1.0, 2.0, 4.0, 8.0)


@pytest.mark.parametrize("theta,nu1", [(1.0, 0.5), (8.0, 0.99), (2.0, 0.9)])
def test_monotone_in_sigma(theta, nu1):
    sols = [solve_diffusion(DiffusionParams.from_nu1(s, theta, nu1)) for s in SIGMAS]
    for lo, hi in zip(sols, sols[1:]):
        m = min(len(lo.alpha), len(hi.alpha))
        idx = np.nonzero((lo.alpha[:m] > 1e-12) & (np.arange(m) > 0))[0]
        assert np.all(hi.alpha[idx] > lo.alpha[idx])
        idx = np.nonzero((hi.beta[:m] > 1e-12) & (np.arange(m) > 0))[0]
        assert np.all(hi.beta[idx] < lo.beta[idx])
    p1 = [anc_type1_prob(DiffusionParams.from_nu1(s, theta, nu1)) for s in SIGMAS]
    assert np.all(np.diff(p1) < 0)
