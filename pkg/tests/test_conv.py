"""Convolution and moment evaluation against independent oracles.

Oracles never use the panel rule: they are closed forms (a P u = S delta gives
S phi_eps) or scipy adaptive quadrature of a smooth integrand obtained by
applying P to u by hand.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from remova.conv import (
    Problem,
    Quadrature,
    adjoint_kernel,
    conv_eval,
    criterion_norm,
    default_kappa_max,
    evaluate_scale,
    exact_delta_norm,
    moment,
    recover_delta,
    sliced_moment,
)
from remova.diffop import Coefficient, DiffOperator, laplacian, partial
from remova.field import AnalyticField, Box
from remova.mollify import Cutoff, EpsilonSchedule, Mollifier, bump_deriv, bump_mass, mollifier_deriv
from remova.scenarios import catalogue, lookup


def phi1(eps, t):
    return bump_deriv(0, t / eps) / (eps * bump_mass())


def field1(fn):
    return AnalyticField(lambda x: fn(x[..., 0]), 1)


@settings(max_examples=25, deadline=None)
@given(x=st.floats(-0.3, 0.3), j=st.integers(0, 9))
def test_heaviside_conv_is_phi(get_problem, x, j):
    # d/dx H = delta and a = 1 near 0, so a P u * phi_eps = phi_eps exactly
    eps = EpsilonSchedule().values()[j]
    got = conv_eval(get_problem("heaviside-1d"), eps, [x])
    assert got.real == pytest.approx(phi1(eps, x), abs=1e-9 * phi1(eps, 0))
    assert abs(got.imag) < 1e-12


def _smooth_oracle_1d(f, a, eps, x):
    """int f(x - y) a(x - y) phi_eps(y) dy for smooth f."""
    val, _ = integrate.quad(lambda y: f(x - y) * a.axis(0, x - y) * phi1(eps, y), -eps, eps, epsabs=1e-13, limit=200)
    return val


@pytest.mark.parametrize("x", [0.0, 0.2, 0.3, 0.45])
@pytest.mark.parametrize("eps", [0.2, 0.05])
def test_smooth_solution_constant_coefficients(x, eps):
    # u = x^3 - x, P = d^2: P u = 6x, so aPu * phi = int 6(x-y) a(x-y) phi_eps(y) dy
    prob = Problem(field1(lambda t: t**3 - t), partial(1, (2,)))
    ref = _smooth_oracle_1d(lambda t: 6 * t, prob.a, eps, x)
    assert conv_eval(prob, eps, [x]).real == pytest.approx(ref, abs=1e-8)


@pytest.mark.parametrize("x", [0.0, 0.25, 0.4])
def test_variable_coefficients(x):
    # P = (1 + x) d/dx + 2 on u = x^2: P u = 2x(1+x) + 2x^2 = 2x + 4x^2
    c = Coefficient(lambda beta, z: {0: 1 + z[..., 0], 1: np.ones(z.shape[:-1])}.get(beta[0], np.zeros(z.shape[:-1])), 3)
    P = DiffOperator(1, {(1,): c, (0,): 2.0})
    prob = Problem(field1(lambda t: t**2), P)
    eps = 0.1
    ref = _smooth_oracle_1d(lambda t: 2 * t + 4 * t * t, prob.a, eps, x)
    assert conv_eval(prob, eps, [x]).real == pytest.approx(ref, abs=1e-8)


def test_variable_coefficient_delta():
    # (1 + x) H' = (1 + x) delta = delta
    c = Coefficient(lambda beta, z: {0: 1 + z[..., 0], 1: np.ones(z.shape[:-1])}.get(beta[0], np.zeros(z.shape[:-1])), 2)
    prob = Problem(lookup("heaviside-1d").u, DiffOperator(1, {(1,): c}))
    for x in (0.0, 0.03):
        assert conv_eval(prob, 0.05, [x]).real == pytest.approx(phi1(0.05, x), rel=1e-8)
    assert moment(prob, (0,)).value.real == pytest.approx(1.0, abs=1e-9)


def test_adjoint_kernel_generic_path():
    # the pointwise kernel integrated by scipy reproduces the lattice evaluation
    prob = Problem(field1(lambda t: np.abs(t)), partial(1, (2,)))  # |x|'' = 2 delta
    eps, x = 0.1, 0.04
    K = adjoint_kernel(prob, eps, [x])
    val, _ = integrate.quad(lambda y: abs(x - y) * K(np.array([[y]]))[0].real, -eps, eps, points=[x], epsabs=1e-12, limit=400)
    assert val == pytest.approx(2 * phi1(eps, x), rel=1e-7)
    assert conv_eval(prob, eps, [x]).real == pytest.approx(2 * phi1(eps, x), rel=1e-9)


def test_two_dimensional_smooth_oracle():
    # u = x1^2 x2, P = d1^2: P u = 2 x2
    u = AnalyticField(lambda x: x[..., 0] ** 2 * x[..., 1], 2)
    prob = Problem(u, partial(2, (2, 0)))
    eps, x = 0.1, (0.3, 0.35)
    a = prob.a

    def integrand(y2, y1):
        z1, z2 = x[0] - y1, x[1] - y2
        return 2 * z2 * a.axis(0, z1) * a.axis(0, z2) * phi1(eps, y1) * phi1(eps, y2)

    ref, _ = integrate.dblquad(integrand, -eps, eps, -eps, eps, epsabs=1e-12)
    assert conv_eval(prob, eps, x).real == pytest.approx(ref, abs=1e-8)


def test_q_operator_derivative_of_phi():
    prob = Problem(lookup("heaviside-1d").u, partial(1, (1,)), Q=partial(1, (1,)))
    eps, x = 0.05, 0.02
    expect = bump_deriv(1, x / eps) / (eps**2 * bump_mass())
    assert conv_eval(prob, eps, [x]).real == pytest.approx(expect, rel=1e-8)


def test_moments_against_quad():
    # u = x^2, P = d^2: <a P u, x^b> = 2 int a(x) x^b dx
    prob = Problem(field1(lambda t: t**2), partial(1, (2,)))
    a = prob.a
    for b in range(4):
        ref, _ = integrate.quad(lambda t: 2 * a.axis(0, t) * t**b, -0.5, 0.5, epsabs=1e-13)
        res = moment(prob, (b,))
        assert res.value.real == pytest.approx(ref, abs=1e-10)
        assert res.error < 1e-8


def test_moments_scenarios(get_problem):
    assert moment(get_problem("log-laplace-2d"), (0, 0)).value.real == pytest.approx(2 * math.pi, rel=1e-8)
    assert moment(get_problem("cauchy-riemann"), (0, 0)).value == pytest.approx(math.pi, rel=1e-8)
    m = moment(get_problem("heaviside-1d"), (1,))
    assert abs(m.value) < 1e-12


def test_john_type_coefficient_locked():
    # fixture lock: bilaplacian of |x|^2 log|x| carries 8 pi at the origin (moment oracle)
    S = recover_delta(Problem(lookup("john-type").u, lookup("john-type").P), 2)
    assert list(S.coefficients) == [(0, 0)]
    assert S.coefficient((0, 0)).real == pytest.approx(8 * math.pi, rel=1e-6)


def test_sliced_moment_line_log(get_problem):
    res = sliced_moment(get_problem("line-log-3d"), (0, 0), 2)
    assert res.value.real == pytest.approx(2 * math.pi, rel=1e-6)


def test_cutoff_independence(get_problem):
    base = get_problem("log-laplace-2d")
    other = base.with_(a=Cutoff(0.2, 0.4))
    assert moment(other, (0, 0)).value.real == pytest.approx(moment(base, (0, 0)).value.real, rel=1e-8)
    assert criterion_norm(other, 0.05, 2) == pytest.approx(criterion_norm(base, 0.05, 2), rel=1e-6)


def test_quadrature_refinement_converges(get_problem):
    # 1/z is only integrable at the pole, so the panel next to it limits accuracy to O(h)
    base = get_problem("cauchy-riemann")
    fine = base.with_(quad=Quadrature(nodes_per_eps=32))
    exact = exact_delta_norm(lookup("cauchy-riemann").expected, base, 0.1, "inf")
    coarse_err = abs(criterion_norm(base, 0.1, "inf") - exact)
    fine_err = abs(criterion_norm(fine, 0.1, "inf") - exact)
    assert fine_err < coarse_err < 1e-3 * exact


NONREMOVABLE = [s.name for s in catalogue() if not s.removable]


@pytest.mark.slow
@pytest.mark.parametrize("name", NONREMOVABLE)
def test_oracle_equivalence(get_problem, name):
    s = lookup(name)
    prob = get_problem(name)
    k = s.codim if s.codim < s.dim else None
    for eps in EpsilonSchedule().values():
        data = evaluate_scale(prob, float(eps), k)
        for r in ("inf", 2):
            got = data.norm(r)
            exact = exact_delta_norm(s.expected, prob, float(eps), r, k)
            assert got == pytest.approx(exact, rel=0.02), (eps, r)


def test_recover_delta_filters_noise(get_problem):
    assert recover_delta(get_problem("harmonic-poly"), 2).empty
    assert recover_delta(get_problem("riemann-removable"), 1).empty


def test_default_kappa_max():
    assert default_kappa_max(2, 3, 2) == 0
    assert default_kappa_max(2, 3, "1.4") == 1     # kappa < 2 - 6/7
    assert default_kappa_max(2, 3, "1.6") == 0     # kappa < 2 - 9/8
    assert default_kappa_max(2, 3, 1) == 1         # kappa < 2, strict for finite p
    assert default_kappa_max(1, 2, "inf") == 0
    assert default_kappa_max(3, 2, None) == 3


def test_mollifier_width_variant():
    prob = Problem(lookup("heaviside-1d").u, partial(1, (1,)), phi=Mollifier(1, 0.5))
    eps = 0.1
    assert conv_eval(prob, eps, [0.0]).real == pytest.approx(2 * phi1(eps, 0.0), rel=1e-9)
    assert mollifier_deriv(Mollifier(1, 0.5), (0,), eps, np.array([0.0])) == pytest.approx(2 * phi1(eps, 0.0))


def test_problem_validation():
    u = AnalyticField(lambda x: x[..., 0], 2, box=Box.cube(2, 0.4))
    with pytest.raises(ValueError):
        Problem(u, laplacian(2))
