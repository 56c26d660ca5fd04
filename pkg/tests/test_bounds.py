import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gplhy.bounds import (
    C_SOB,
    F1,
    F2,
    AnsatzParams,
    anisotropy_f,
    ansatz_energy,
    bounds_report,
    closed_form_lambda1,
    dF1_dX,
    dF2_dY,
    gaussian_ansatz,
    lambda1_prefactor_derived,
    solve_F1,
    solve_F2,
    sobolev_lower_bound,
    unstable_profile,
    upper_bound,
)
from gplhy.energy import energy_breakdown
from gplhy.grid import GridSpec, sample


def f_quad(x):
    """Independent quadrature of the Gaussian dipolar factor.

    For a Gaussian density with widths (s, s, s/x) the dipolar energy relative
    to the contact energy is the average of 3 cos^2 - 1 over k-space with the
    Gaussian weight, which reduces to a one-dimensional integral in t = cos.
    """
    from scipy.integrate import quad

    def w(t):
        return 1.0 / (1.0 + (1.0 / (x * x) - 1.0) * t * t) ** 1.5

    num = quad(lambda t: (3 * t * t - 1) * w(t), 0, 1, epsabs=1e-13, epsrel=1e-13)[0]
    den = quad(w, 0, 1, epsabs=1e-13, epsrel=1e-13)[0]
    return -num / den


def F2_independent(lam, Y, alpha, b):
    """Ansatz energy divided by 2 lambda, written in (Y, alpha)."""
    sr = Y**-0.5
    sz = sr / alpha
    return (
        2 / sr**2
        + 1 / sz**2
        - lam * (b * f_quad(alpha) - 1) / (math.sqrt(2) * math.pi**1.5 * sr**2 * sz)
        + 2**6 * lam**1.5 / (5**2.5 * math.pi**2.25 * sr**3 * sz**1.5)
    )


# ------------------------------------------------------------------ anisotropy f


def test_f_values():
    assert anisotropy_f(0.5) == pytest.approx(0.47923, abs=1e-4)
    assert anisotropy_f(0.3) == pytest.approx(0.713889, abs=1e-6)
    assert abs(anisotropy_f(1.0)) < 1e-8
    assert abs(anisotropy_f(0.99)) < 1e-2 and abs(anisotropy_f(1.01)) < 1e-2
    assert anisotropy_f(1e-3) == pytest.approx(1.0, abs=1e-4)
    assert anisotropy_f(1e3) == pytest.approx(-2.0, abs=1e-2)


@pytest.mark.parametrize("x", [0.05, 0.2, 0.5, 0.9, 0.99999, 1.00001, 1.5, 4.0])
def test_f_matches_quadrature(x):
    assert anisotropy_f(x) == pytest.approx(f_quad(x), abs=1e-9)


def test_f_near_one_is_smooth():
    xs = 1 + np.linspace(-3e-4, 3e-4, 61)
    vals = np.array([anisotropy_f(x) for x in xs])
    # the slope at 1 is -4/5
    assert np.allclose(np.diff(vals) / np.diff(xs), -0.8, atol=1e-3)


def test_f_monotone_on_dyadic_mesh():
    xs = 2.0 ** np.linspace(-12, 12, 10**4)
    vals = anisotropy_f(xs)
    assert np.all(np.diff(vals) < 1e-12)
    assert np.all(np.diff(vals) < 0)


def test_f_domain():
    with pytest.raises(ValueError):
        anisotropy_f(0.0)
    with pytest.raises(ValueError):
        anisotropy_f(-1.0)


def test_f_against_grid_dipolar_energy(dipolar):
    # Gaussian at alpha = 0.5: Idd = -b f I4 up to periodic-image error
    lam, sr, sz, b = 1.0, 2.0, 4.0, 1.0
    g = GridSpec((64, 64, 64), (16 * sr, 16 * sr, 16 * sz))
    br = energy_breakdown(sample(g, gaussian_ansatz(lam, AnsatzParams(sr, sz))), b, dipolar)
    assert -br.Idd / br.I4 == pytest.approx(anisotropy_f(0.5), abs=2e-3)


# ------------------------------------------------------------------ lower bound


def test_sobolev_values():
    assert sobolev_lower_bound(2) == pytest.approx(29.8037, abs=1e-4)
    assert sobolev_lower_bound(2) == pytest.approx(math.sqrt(10) * 3 * math.pi, rel=1e-14)
    assert sobolev_lower_bound(5) == pytest.approx(0.93136, abs=1e-5)
    assert sobolev_lower_bound(1.01) > sobolev_lower_bound(1.1)
    assert C_SOB == pytest.approx(3 * (2 * math.pi) ** (2 / 3) / 4, rel=1e-15)


@pytest.mark.parametrize("b", [1.0, 0.5, -2.0])
def test_domain_errors(b):
    for fn in (sobolev_lower_bound, solve_F1, upper_bound, unstable_profile, bounds_report):
        with pytest.raises(ValueError):
            fn(b)


@pytest.mark.parametrize("b", [1.5, 2.0, 3.0, 5.0, 10.0])
def test_solve_F1_defining_system(b):
    lam0, X0 = solve_F1(b)
    assert X0 > 0
    scale = (0.4 * X0)
    assert abs(F1(lam0, X0, b)) < 1e-8 * max(1.0, scale)
    assert abs(dF1_dX(lam0, X0, b)) < 1e-8


@pytest.mark.parametrize("b", [1.5, 2.0, 5.0])
def test_solve_F1_is_threshold_of_scan(b):
    lam0, X0 = solve_F1(b)
    X = X0 * np.logspace(-3, 3, 20001)
    assert np.min(F1(lam0 * 0.99, X, b)) > 0
    assert np.min(F1(lam0 * 1.01, X, b)) < 0


@pytest.mark.parametrize("b", [1.5, 2.0, 3.0, 5.0, 10.0])
def test_solve_F1_against_closed_form(b):
    # the defining system is solved exactly; the reference closed form is
    # smaller by a constant factor 5/3 for every b
    lam0, _ = solve_F1(b)
    assert lam0 / sobolev_lower_bound(b) == pytest.approx(5 / 3, rel=1e-9)


# ------------------------------------------------------------------ ansatz energy


def test_ansatz_energy_isotropic_is_b_independent():
    a = AnsatzParams(2.5, 2.5)
    assert ansatz_energy(7.0, 1.5, a) == pytest.approx(ansatz_energy(7.0, 40.0, a), rel=1e-10)


def test_ansatz_energy_small_mass_is_kinetic():
    a = AnsatzParams(2.0, 5.0)
    lam = 1e-9
    assert ansatz_energy(lam, 2.0, a) == pytest.approx(2 * lam * (2 / 4 + 1 / 25), rel=1e-6)


def test_ansatz_params_invariants():
    a = AnsatzParams(3.0, 7.0)
    assert a.alpha == pytest.approx(3 / 7, rel=1e-12)
    assert a.Y == pytest.approx(1 / 9, rel=1e-12)
    b = AnsatzParams.from_alpha_Y(a.alpha, a.Y)
    assert b.sigma_rho == pytest.approx(3.0, rel=1e-12) and b.sigma_z == pytest.approx(7.0, rel=1e-12)
    with pytest.raises(ValueError):
        AnsatzParams(0.0, 1.0)


@settings(max_examples=40, deadline=None)
@given(
    lam=st.floats(0.1, 1e4),
    Y=st.floats(1e-5, 10.0),
    alpha=st.floats(0.05, 3.0),
    b=st.floats(0.1, 20.0),
)
def test_F2_matches_independent_expression(lam, Y, alpha, b):
    assert F2(lam, Y, alpha, b) == pytest.approx(F2_independent(lam, Y, alpha, b), rel=1e-8, abs=1e-12 * (2 + alpha**2) * Y)


# ------------------------------------------------------------------ F2 system and upper bound


@pytest.mark.parametrize("b,alpha", [(2.0, 0.2), (2.0, 0.3), (5.0, 0.2), (5.0, 0.3), (1.5, 0.1)])
def test_solve_F2_defining_system(b, alpha):
    lam1, Y0 = solve_F2(b, alpha)
    assert lam1 > 0 and Y0 > 0
    A = 2 + alpha**2
    assert abs(F2(lam1, Y0, alpha, b)) < 1e-10 * A * Y0
    assert abs(dF2_dY(lam1, Y0, alpha, b)) < 1e-10 * A
    a = AnsatzParams.from_alpha_Y(alpha, Y0)
    assert abs(ansatz_energy(lam1, b, a)) < 1e-8 * 2 * lam1 * A * Y0


def test_solve_F2_against_scan():
    b, alpha = 2.0, 0.3
    lam1, _ = solve_F2(b, alpha)
    Y = np.logspace(-7, 0, 4001)
    lams = lam1 * np.linspace(0.9, 1.1, 201)
    neg = [np.min(F2_independent(l, Y, alpha, b)) < 0 for l in lams]
    first = lams[int(np.argmax(neg))]
    assert first == pytest.approx(lam1, rel=1e-2)


def test_solve_F2_non_binding_alpha():
    with pytest.raises(ValueError, match="not binding"):
        solve_F2(2.0, 0.5)
    with pytest.raises(ValueError):
        solve_F2(2.0, 1.0)


def test_closed_form_lambda1():
    pref = math.pi**1.5 * 2 ** (19 / 12) / 3**1.5
    assert pref == pytest.approx(3.2113, abs=1e-4)
    f3 = anisotropy_f(0.3)
    want = pref * 2.09**1.5 / (0.3 * (2 * f3 - 1) ** 2.5)
    assert closed_form_lambda1(2.0, 0.3) == pytest.approx(want, rel=1e-12)
    assert closed_form_lambda1(2.0, 0.3) == pytest.approx(270.2, abs=0.1)
    assert lambda1_prefactor_derived() == pytest.approx(math.pi**1.5 * 2**6.25 / 3**1.5, rel=1e-14)


@pytest.mark.parametrize("b,alpha", [(2.0, 0.2), (2.0, 0.3), (5.0, 0.2), (5.0, 0.3)])
def test_derived_prefactor_reproduces_solver(b, alpha):
    lam1, _ = solve_F2(b, alpha)
    ratio = closed_form_lambda1(b, alpha) / lam1
    assert ratio == pytest.approx(2 ** (19 / 12 - 25 / 4), rel=1e-8)


def test_upper_bound_b2():
    up, a = upper_bound(2.0)
    assert 0 < a < 1
    assert 2 * anisotropy_f(a) > 1
    lam_scan = min(solve_F2(2.0, x)[0] for x in np.linspace(0.02, 0.45, 400))
    assert up <= lam_scan * (1 + 1e-9)
    assert up == pytest.approx(lam_scan, rel=1e-3)
    # golden-section optimum is stationary
    for x in (a * 0.99, a * 1.01):
        assert solve_F2(2.0, x)[0] >= up


@pytest.mark.parametrize("b", [1.5, 2.0, 5.0, 10.0, 100.0])
def test_sandwich(b):
    assert sobolev_lower_bound(b) <= upper_bound(b)[0]
    assert solve_F1(b)[0] <= upper_bound(b)[0]


def test_scaled_upper_non_increasing():
    scaled = [upper_bound(b)[0] * (b - 1) ** 2.5 for b in (2.0, 5.0, 10.0, 100.0)]
    assert all(y <= x for x, y in zip(scaled, scaled[1:]))


# ------------------------------------------------------------------ unstable profile


@pytest.mark.parametrize("b,alpha_max", [(2.0, 0.5), (1.05, 0.1)])
def test_unstable_profile(dipolar, b, alpha_max):
    a = unstable_profile(b)
    assert a.alpha <= alpha_max
    assert math.log2(a.alpha) == int(math.log2(a.alpha))
    assert b * anisotropy_f(a.alpha) > 1
    g = GridSpec((48, 48, 48), (16 * a.sigma_rho, 16 * a.sigma_rho, 8 * a.sigma_z))
    br = energy_breakdown(sample(g, gaussian_ansatz(1.0, a)), b, dipolar)
    assert br.I4 + br.Idd < 0


# ------------------------------------------------------------------ report


def test_bounds_report_b2():
    rep = bounds_report(2.0)
    d = rep.as_dict()
    assert d["lower"] == pytest.approx(29.8037, abs=1e-4)
    assert d["upper_numeric"] == pytest.approx(upper_bound(2.0)[0], rel=1e-12)
    assert d["upper_scaled"] == pytest.approx(d["upper_numeric"], rel=1e-12)
    assert d["reference_upper_constant"] == 84.437
    note = d["discrepancy_note"]
    assert "prefactor" in note and "2^(25/4)" in note and "2^(19/12)" in note
    assert d["lower"] <= d["upper_numeric"]
