"""Nonlinearity family, hypothesis validators, energy and its gradient.

Oracles: closed-form calculus for the superlinearity deficit minimum
(K(q=3, theta=3) = -(3/2) 2^(1/3)), dense-grid minimization for the same
quantity, independent fsum-based recomputation for the energy, and
central finite differences for the gradient.
"""

import math

import numpy as np
import pytest

from fracmp import (
    ConfigurationError,
    ExponentWindowError,
    HypothesisError,
    NonlinearitySpec,
    Problem,
    UsageError,
    assemble_kernel,
    build_grid,
    critical_exponent,
    default_theta,
    energy,
    exponent_window,
    F_eval,
    f_eval,
    gradient,
    make_nonlinearity,
    make_potential,
    make_problem,
    min_sf,
    phi_p,
    primitive_envelope,
    residual_norm,
    validate_AR,
    validate_H1,
)


def test_phi_p_values():
    assert phi_p(2.0, 3.0) == pytest.approx(4.0)
    assert phi_p(-2.0, 3.0) == pytest.approx(-4.0)
    assert phi_p(0.0, 2.5) == 0.0


def test_phi_p_odd_increasing():
    s = np.linspace(-3.0, 3.0, 101)
    for p in (2.0, 2.5, 3.0):
        vals = phi_p(s, p)
        np.testing.assert_allclose(phi_p(-s, p), -vals, atol=1e-14)
        assert np.all(np.diff(vals) > 0.0)


def test_default_theta_inside_window():
    assert default_theta(3.0, 2.0) == pytest.approx(3.8)
    for q, p in ((3.0, 2.0), (2.0, 2.5), (5.0, 3.0)):
        th = default_theta(q, p)
        assert p < th < q + 1.0


def _spec(q=3.0, f0=1.0, theta=3.8):
    return NonlinearitySpec(q=q, f0=f0, theta=theta)


def test_f_values():
    nl = _spec(f0=1.0)
    assert f_eval(0.0, nl) == 1.0
    assert f_eval(-1.0, nl) == 0.0
    assert f_eval(-2.0, nl) == 0.0
    assert f_eval(2.0, nl) == pytest.approx(9.0)  # 2^3 + 1


def test_f_continuous_at_breakpoints():
    eps = 1e-9
    for f0 in (0.0, 1.0, -0.5):
        nl = _spec(f0=f0)
        for x in (-1.0, 0.0):
            left = f_eval(x - eps, nl)
            right = f_eval(x + eps, nl)
            assert left == pytest.approx(f_eval(x, nl), abs=1e-7)
            assert right == pytest.approx(f_eval(x, nl), abs=1e-7)


def test_F_values():
    nl = _spec(f0=1.0)
    assert F_eval(0.0, nl) == 0.0
    assert F_eval(1.0, nl) == pytest.approx(1.25)  # 1/4 + 1
    assert F_eval(-1.0, nl) == pytest.approx(-0.5)
    assert F_eval(-5.0, nl) == pytest.approx(-0.5)  # flat below -1
    # global minimum of the primitive for this family
    s = np.linspace(-6.0, 6.0, 240001)
    assert float(np.min(F_eval(s, nl))) == pytest.approx(-0.5, abs=1e-9)


def test_F_prime_is_f():
    rng = np.random.default_rng(41)
    eps = 1e-6
    for f0 in (0.0, 1.0, -0.5):
        nl = _spec(f0=f0)
        # sample away from the kink locations -1, 0
        pts = np.concatenate([rng.uniform(-0.9, -0.1, 10),
                              rng.uniform(0.1, 5.0, 10),
                              rng.uniform(-3.0, -1.1, 5)])
        for x in pts:
            fd = (F_eval(x + eps, nl) - F_eval(x - eps, nl)) / (2.0 * eps)
            assert fd == pytest.approx(f_eval(x, nl), rel=1e-5, abs=1e-8)


def test_exponent_window_arithmetic():
    assert critical_exponent(2.0, 0.4) == pytest.approx(10.0)
    lo, hi = exponent_window(2.0, 0.4)
    assert (lo, hi) == (pytest.approx(1.0), pytest.approx(9.0))


def test_validate_H1_accepts_shipped_specs():
    for f0 in (0.0, 1.0, -0.5):
        A, B = validate_H1(_spec(f0=f0), 2.0, 0.4)
        assert A == pytest.approx(1.0)
        assert B == pytest.approx(1.0)


def test_validate_H1_envelope_holds_on_samples():
    s = np.geomspace(1e-6, 1e6, 4001)
    for f0 in (0.0, 1.0, -0.5):
        nl = _spec(f0=f0)
        A, B = validate_H1(nl, 2.0, 0.4)
        f = f_eval(s, nl)
        assert np.all(A * (s ** 3 - 1.0) <= f + 1e-12)
        assert np.all(f <= B * (s ** 3 + 1.0) + 1e-12)


def test_validate_H1_rejects_exponent_window():
    # p_s^* - 1 = 9 at p = 2, s = 0.4
    with pytest.raises(ExponentWindowError):
        validate_H1(_spec(q=9.5), 2.0, 0.4)
    with pytest.raises(ExponentWindowError):
        validate_H1(_spec(q=1.0), 2.0, 0.4)  # q = p - 1
    with pytest.raises(ExponentWindowError):
        validate_H1(_spec(q=0.5), 2.0, 0.4)


def test_validate_H1_rejects_deep_semipositone():
    # f(1) = f0 + 1 < 0 breaks the lower envelope at s = 1
    with pytest.raises(HypothesisError):
        validate_H1(_spec(f0=-1.5), 2.0, 0.4)


def test_validate_AR_exact_minimum():
    # closed form: min over s >= 0 of s^4/4 - 2s is -(3/2) 2^(1/3)
    K = validate_AR(_spec(f0=1.0, theta=3.0), 2.0)
    assert K == pytest.approx(-1.5 * 2.0 ** (1.0 / 3.0), rel=1e-10)
    assert K == pytest.approx(-1.8898815748423101, rel=1e-12)


def test_validate_AR_dense_grid_oracle():
    nl = _spec(f0=1.0, theta=3.0)
    s = np.linspace(-2.0, 50.0, 100001)
    deficit = s * f_eval(s, nl) - 3.0 * F_eval(s, nl)
    assert validate_AR(nl, 2.0) == pytest.approx(float(np.min(deficit)), abs=1e-4)


def test_validate_AR_exact_cancellation_at_top():
    # theta = q + 1 with f0 = 0: s f - theta F vanishes identically on s > 0
    assert abs(validate_AR(_spec(f0=0.0, theta=4.0), 2.0)) <= 1e-8


def test_validate_AR_rejections():
    with pytest.raises(HypothesisError):
        validate_AR(_spec(f0=0.0, theta=5.0), 2.0)  # theta > q + 1
    with pytest.raises(HypothesisError):
        validate_AR(_spec(f0=1.0, theta=4.0), 2.0)  # linear decay at theta = q+1
    with pytest.raises(HypothesisError):
        validate_AR(_spec(f0=1.0, theta=2.0), 2.0)  # theta <= p


def test_min_sf_values():
    # s f(s) = s + s^2 on (-1, 0): minimum -1/4 at s = -1/2
    assert min_sf(_spec(f0=1.0)) == pytest.approx(-0.25, abs=1e-10)
    assert min_sf(_spec(f0=0.0)) == pytest.approx(0.0, abs=1e-12)


def test_make_nonlinearity_certifies_everything():
    nl = make_nonlinearity(3.0, 1.0, 2.0, 0.4)
    assert nl.theta == pytest.approx(3.8)
    assert (nl.A, nl.B) == (pytest.approx(1.0), pytest.approx(1.0))
    assert np.isfinite(nl.K) and np.isfinite(nl.min_sf)


def test_primitive_envelope_frozen_values():
    cases = {
        1.0: (0.125, 1e-9, 0.676524958756807),
        0.0: (0.125, 1e-9, 0.2625),
        -0.5: (0.125, 3.1499664695466603, 0.2625),
    }
    for f0, expected in cases.items():
        nl = make_nonlinearity(3.0, f0, 2.0, 0.4)
        A1, C1, B1 = primitive_envelope(nl)
        assert A1 == pytest.approx(expected[0], rel=1e-12)
        assert C1 == pytest.approx(expected[1], rel=1e-9)
        assert B1 == pytest.approx(expected[2], rel=1e-9)


def test_primitive_envelope_bounds_hold():
    pos = np.linspace(0.0, 50.0, 20001)
    full = np.linspace(-5.0, 50.0, 20001)
    for f0 in (1.0, 0.0, -0.5):
        nl = make_nonlinearity(3.0, f0, 2.0, 0.4)
        A1, C1, B1 = primitive_envelope(nl)
        assert np.all(F_eval(pos, nl) >= A1 * (pos ** 4 - C1) - 1e-12)
        assert np.all(F_eval(full, nl) <= B1 * (np.abs(full) ** 4 + 1.0) + 1e-12)


def test_make_potential():
    g = build_grid(0.0, 1.0, 5)
    V = make_potential(g, constant=0.25)
    np.testing.assert_allclose(V.values, 0.25)
    assert V.cV == 0.0 and V.Vinf == 0.25
    Vn = make_potential(g, constant=-0.75)
    assert Vn.cV == 0.75 and Vn.Vinf == 0.75
    Vv = make_potential(g, values=np.array([1.0, -2.0, 0.0, 3.0, 0.5]))
    assert Vv.cV == 2.0 and Vv.Vinf == 3.0
    with pytest.raises(ConfigurationError):
        make_potential(g)
    with pytest.raises(ConfigurationError):
        make_potential(g, constant=1.0, values=np.ones(5))


def _problem(n=24, s=0.4, p=2.0, q=3.0, f0=1.0, lam=1.0, V=0.5):
    g = build_grid(0.0, 1.0, n)
    K = assemble_kernel(g, s, p)
    nl = make_nonlinearity(q, f0, p, s)
    return make_problem(g, K, make_potential(g, constant=V), lam, nl)


def test_make_problem_checks():
    prob = _problem()
    assert prob.r == pytest.approx(0.5)  # 1/(q+1-p) with q=3, p=2
    g = build_grid(0.0, 1.0, 24)
    K = assemble_kernel(g, 0.4, 2.0)
    nl = make_nonlinearity(3.0, 1.0, 2.0, 0.4)
    V = make_potential(g, constant=0.5)
    with pytest.raises(ConfigurationError):
        make_problem(g, K, V, 0.0, nl)
    with pytest.raises(ConfigurationError):
        make_problem(g, K, V, -1.0, nl)
    other = build_grid(0.0, 1.0, 25)
    with pytest.raises(UsageError):
        make_problem(other, K, V, 1.0, nl)


def test_energy_zero_function():
    assert energy(np.zeros(24), _problem()) == 0.0


def test_energy_reduces_to_seminorm():
    # lambda = 0, V = 0 leaves only S(u)/p; built directly since the
    # constructor insists on lambda > 0
    from fracmp import seminorm_p

    g = build_grid(0.0, 1.0, 24)
    K = assemble_kernel(g, 0.4, 2.0)
    nl = make_nonlinearity(3.0, 1.0, 2.0, 0.4)
    prob = Problem(grid=g, kernel=K, V=make_potential(g, constant=0.0),
                   lam=0.0, nl=nl)
    rng = np.random.default_rng(13)
    u = rng.standard_normal(24)
    assert energy(u, prob) == pytest.approx(seminorm_p(u, K) / 2.0, rel=1e-12)


def test_energy_independent_summation():
    # recompute every term with explicit loops and math.fsum
    prob = _problem(n=100, lam=1.0, V=0.5)
    g, K, nl = prob.grid, prob.kernel, prob.nl
    rng = np.random.default_rng(19)
    u = rng.standard_normal(100)
    terms = []
    for i in range(100):
        for j in range(100):
            if i != j:
                terms.append(K.W[i, j] * (u[i] - u[j]) ** 2)
        terms.append(2.0 * g.h * K.tail[i] * u[i] ** 2)
    S = math.fsum(terms)
    pot = math.fsum(g.h * 0.5 * u[i] ** 2 for i in range(100))
    non = math.fsum(g.h * F_eval(u[i], nl) for i in range(100))
    expected = S / 2.0 + pot / 2.0 - 1.0 * non
    assert energy(u, prob) == pytest.approx(expected, rel=1e-10)


def test_gradient_at_zero():
    prob = _problem(f0=1.0, lam=2.0)
    g = gradient(np.zeros(24), prob)
    np.testing.assert_allclose(g, -2.0 * prob.h * 1.0, rtol=1e-14)


def test_gradient_matches_finite_differences():
    prob = _problem(n=40, p=2.0)
    rng = np.random.default_rng(29)
    for _ in range(5):
        u = rng.standard_normal(40)
        grad = gradient(u, prob)
        fd = np.empty(40)
        for i in range(40):
            step = 1e-6 * (1.0 + abs(u[i]))
            up, dn = u.copy(), u.copy()
            up[i] += step
            dn[i] -= step
            fd[i] = (energy(up, prob) - energy(dn, prob)) / (2.0 * step)
        scale = max(float(np.max(np.abs(grad))), 1e-12)
        assert float(np.max(np.abs(fd - grad))) / scale < 1e-5


def test_gradient_directional_derivatives():
    # <g, phi> against a centered difference quotient in 10 random
    # directions at 10 random points
    prob = _problem(n=30)
    rng = np.random.default_rng(37)
    eps = 1e-6
    for _ in range(10):
        u = rng.standard_normal(30)
        g = gradient(u, prob)
        for _ in range(10):
            phi = rng.standard_normal(30)
            phi /= float(np.linalg.norm(phi))
            dd = (energy(u + eps * phi, prob) - energy(u - eps * phi, prob)) / (2.0 * eps)
            assert dd == pytest.approx(float(g @ phi), rel=1e-5, abs=1e-7)


def test_gradient_chain_rule_identity():
    # d/dt J(t u) at t = 1 equals <gradient(u), u>
    prob = _problem(n=30)
    rng = np.random.default_rng(43)
    eps = 1e-7
    for _ in range(5):
        u = rng.standard_normal(30)
        dd = (energy((1.0 + eps) * u, prob) - energy((1.0 - eps) * u, prob)) / (2.0 * eps)
        assert dd == pytest.approx(float(gradient(u, prob) @ u), rel=1e-6, abs=1e-7)


def test_residual_norm_definition():
    prob = _problem(n=30)
    rng = np.random.default_rng(47)
    u = rng.standard_normal(30)
    expected = float(np.linalg.norm(gradient(u, prob))) / np.sqrt(prob.h)
    assert residual_norm(u, prob) == pytest.approx(expected, rel=1e-14)
