from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from acoustic_lab.mesh import build_mesh, h1_norm_sq, poincare_lambda
from acoustic_lab.model import (F_eval, Nonlinearity, State, check_assumptions, derive_constants,
                                f_eval, fprime_eval, functional_constants, integral_F, lift,
                                lyapunov_E_eps, make_nonlinearity, multiplier_functional,
                                norm_H0_sq, norm_Heps, norm_Heps_sq, pairing_fu, project)

from conftest import random_state


def test_double_well_values(dwell):
    assert (f_eval(dwell, 0.0), F_eval(dwell, 0.0), fprime_eval(dwell, 0.0)) == (0.0, 0.0, -2.0)
    assert (f_eval(dwell, 2.0), F_eval(dwell, 2.0), fprime_eval(dwell, 2.0)) == (4.0, 0.0, 10.0)


@pytest.mark.parametrize("nl", [make_nonlinearity("double_well", k=1.0),
                                make_nonlinearity("double_well", k=0.3),
                                make_nonlinearity("cubic_poly", coeffs=(2.0, -1.0, 0.5)),
                                make_nonlinearity("zero")])
def test_antiderivative_central_difference(nl):
    rng = np.random.default_rng(3)
    s = rng.uniform(-5, 5, 100)
    for h in (1e-2, 5e-3):
        err = np.abs((F_eval(nl, s + h) - F_eval(nl, s - h)) / (2 * h) - f_eval(nl, s))
        # error of the central difference of a quartic is exactly a3 h^2 s... bounded by O(h^2)
        assert np.all(err <= 10 * h**2 * (1 + np.abs(s)))
    assert F_eval(nl, 0.0) == 0.0


def test_derive_constants_double_well():
    nl = make_nonlinearity("double_well", k=1.0)
    assert (nl.theta, nl.ell, nl.mu0) == (2.0, 6.0, 0.5)
    assert nl.kappa_f == pytest.approx(1.125, rel=1e-12)
    # independent scan of s -> (2k - 1/2) s^2 - s^4/2
    s = np.linspace(0, 3, 300001)
    assert nl.kappa_f == pytest.approx(np.max(1.5 * s**2 - s**4 / 2), rel=1e-8)


@pytest.mark.parametrize("k,L", [(0.1, 1.0), (0.2, 2.0), (1.0, 3.0), (2.5, 0.5)])
def test_kappa_closed_form(k, L):
    nl = make_nonlinearity("double_well", L=L, k=k)
    expect = L * (2 * k - 0.5) ** 2 / 2 if 2 * k > 0.5 else 0.0
    assert nl.kappa_f == pytest.approx(expect, abs=1e-12)


def test_zero_kind_constants():
    nl = make_nonlinearity("zero")
    assert (nl.ell, nl.theta, nl.kappa_f, nl.mu0) == (0.0, 0.0, 0.0, 1.0)


def test_bad_nonlinearity():
    with pytest.raises(ValueError):
        Nonlinearity(kind="quintic")
    with pytest.raises(ValueError):
        Nonlinearity(kind="double_well", k=0.0)
    with pytest.raises(ValueError):
        derive_constants(Nonlinearity(kind="cubic_poly", coeffs=(-1.0, 0.0, 0.0)))


@pytest.mark.parametrize("nl", [make_nonlinearity("double_well", k=1.0),
                                make_nonlinearity("cubic_poly", coeffs=(1.0, -3.0, 0.7))])
def test_sampled_assumptions(nl):
    assert all(check_assumptions(nl).values())


def test_state_validation():
    with pytest.raises(FloatingPointError):
        State(np.array([np.nan, 0, 0]), np.zeros(3), np.zeros(2), np.zeros(2), 1.0)
    with pytest.raises(ValueError):
        State(np.zeros(3), np.zeros(3), np.zeros(2), np.zeros(2), 1.5)
    with pytest.raises(ValueError):
        State(np.zeros(3), np.zeros(4), np.zeros(2), np.zeros(2), 1.0)


def test_norm_examples():
    m = build_mesh(11)
    assert norm_Heps_sq(m, State.zeros(11, 1.0)) == 0.0
    st = State(np.ones(11), np.zeros(11), np.ones(2), np.ones(2), 1.0)
    assert norm_Heps_sq(m, st) == pytest.approx(5.0, rel=1e-12)
    st0 = State(np.ones(11), np.ones(11), np.ones(2), np.ones(2), 0.0)
    assert norm_Heps_sq(m, st0) == pytest.approx(norm_H0_sq(m, st0) + 2.0, rel=1e-14)
    with pytest.raises(ValueError):
        norm_Heps_sq(build_mesh(12), st)


def test_project_and_lift():
    m = build_mesh(5)
    u = np.array([2.0, 0, 1, 0, 4.0])
    v = np.array([1.0, 5, 5, 5, 3.0])
    st = lift(u, v, 0.5)
    np.testing.assert_array_equal(st.delta, [1.0, 2.0])
    np.testing.assert_array_equal(st.gamma, [-1.0, -3.0])
    z = lift(u, v, 0.0)
    np.testing.assert_array_equal(z.delta, [0.0, 0.0])
    np.testing.assert_array_equal(z.gamma, [-1.0, -3.0])
    p = project(st)
    np.testing.assert_array_equal(p.u, u)
    np.testing.assert_array_equal(p.v, v)
    assert p.eps == 0.0 and not p.delta.any() and not p.gamma.any()
    assert norm_Heps(m, p) <= norm_Heps(m, st)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 1.0))
def test_project_idempotent_and_contractive(seed, eps):
    m = build_mesh(9)
    s = random_state(np.random.default_rng(seed), 9, eps)
    p = project(s)
    pp = project(p)
    assert all(np.array_equal(getattr(p, f), getattr(pp, f)) for f in ("u", "v", "delta", "gamma"))
    assert norm_H0_sq(m, p) <= norm_Heps_sq(m, s) + 1e-12


def test_pairing_lower_bound(mesh201, dwell):
    rng = np.random.default_rng(4)
    for _ in range(1000):
        u = rng.uniform(-10, 10, 201)
        mass = u @ (mesh201.mass @ u)
        assert pairing_fu(mesh201, dwell, u) >= -(1 - dwell.mu0) * mass - dwell.kappa_f - 1e-9


def test_F_pairing_bound_sampled(mesh201, dwell):
    # int F(u) <= <f(u), u> + theta/(2 lambda) ||u||_1^2 on iid samples with |u| <= 10
    lam = poincare_lambda(mesh201)
    rng = np.random.default_rng(5)
    for _ in range(1000):
        u = rng.uniform(-10, 10, 201)
        rhs = pairing_fu(mesh201, dwell, u) + dwell.theta / (2 * lam) * h1_norm_sq(mesh201, u)
        assert integral_F(mesh201, dwell, u) <= rhs + 1e-9


def test_F_pairing_bound_needs_l2_weight_for_flat_states(mesh201, dwell):
    # F(s) - f(s)s = k s^2 - 3 s^4 / 4 <= theta/2 s^2 pointwise, and the L^2 weight theta/2
    # cannot be traded for theta/(2 lambda) on the H^1 norm: flat small u breaks that form.
    lam = poincare_lambda(mesh201)
    u = 0.1 * np.ones(201)
    gap = integral_F(mesh201, dwell, u) - pairing_fu(mesh201, dwell, u)
    assert gap > dwell.theta / (2 * lam) * h1_norm_sq(mesh201, u)
    assert gap <= dwell.theta / 2 * (mesh201.lumped @ u**2) + 1e-15


def test_functional_constants(mesh201, dwell, fc201):
    fc = fc201
    assert fc.eta1 > 0 and fc.m_star > 0
    assert fc.m1 == 2 * fc.m_star
    assert fc.M1 == pytest.approx(2 * fc.eta1 * dwell.kappa_f)
    assert fc.beta >= dwell.theta
    # the cap itself is positive; eta1 sits strictly inside it
    C = fc.trace_C
    cap = min(0.5 / (2 + C), 0.75, 2 / (3 + 2 * C))
    assert fc.eta_cap == pytest.approx(cap) and 0 < fc.eta1 < cap


def test_eta_cap_degenerates_margin(mesh201, dwell):
    with pytest.raises(ValueError):
        functional_constants(mesh201, dwell, eta_fraction=1.0)


def test_absorbing_radius_dominates_direct_derivation(mesh201, dwell, fc201):
    fc = fc201
    r2 = fc.eta1 * dwell.kappa_f / fc.m_star + 1
    r = math.sqrt(r2)
    direct = math.sqrt((fc.C2 * r * (1 + r**3) + dwell.kappa_f) / fc.C1)
    assert fc.R1 >= direct


def test_sandwich_random_states(mesh201, dwell, fc201):
    rng = np.random.default_rng(6)
    x = mesh201.x
    for i in range(1000):
        eps = rng.uniform(0, 1)
        scale = 10 ** rng.uniform(-2, 0.7)
        c = rng.normal(size=(2, 4))
        u = scale * sum(c[0, j] * np.cos(j * np.pi * x) for j in range(4))
        v = scale * sum(c[1, j] * np.cos(j * np.pi * x) for j in range(4))
        st = State(u, v, scale * rng.normal(size=2), scale * rng.normal(size=2), eps)
        z2 = norm_Heps_sq(mesh201, st)
        z = math.sqrt(z2)
        E = lyapunov_E_eps(mesh201, dwell, fc201, st)
        assert fc201.C1 * z2 - dwell.kappa_f <= E + 1e-9
        assert E <= fc201.C2 * z * (1 + z**3) + 1e-9


def test_lyapunov_reductions(mesh51, dwell):
    zero = State.zeros(51, 0.3)
    assert lyapunov_E_eps(mesh51, dwell, 0.1, zero) == 0.0
    assert multiplier_functional(mesh51, dwell, 0.1, zero) == 0.0
    st = random_state(np.random.default_rng(7), 51, 0.3)
    base = norm_Heps_sq(mesh51, st) + 2 * integral_F(mesh51, dwell, st.u)
    assert lyapunov_E_eps(mesh51, dwell, 0.0, st) == pytest.approx(base, rel=1e-14)
    assert multiplier_functional(mesh51, dwell, 0.0, st) == pytest.approx(base, rel=1e-14)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 1.0), st.floats(0.0, 0.5))
def test_multiplier_functional_close_to_lyapunov(seed, eps, eta):
    m = build_mesh(9)
    s = random_state(np.random.default_rng(seed), 9, eps)
    nl = make_nonlinearity("double_well", k=1.0)
    gap = multiplier_functional(m, nl, eta, s) - lyapunov_E_eps(m, nl, eta, s)
    assert abs(gap) <= (eta + eta**2) * norm_Heps_sq(m, s) + 1e-10
