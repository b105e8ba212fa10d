from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import acoustic_lab.attractor as attractor
from acoustic_lab.attractor import (Cloud, compare_series, compare_trajectories,
                                    epsilon_sweep, fit_power_law, hausdorff_semidist, make_seeds,
                                    sample_omega_limit, seed_state, upper_semicontinuity_report)
from acoustic_lab.integrator import Stepper
from acoustic_lab.mesh import build_mesh
from acoustic_lab.model import (State, aic2_state, lift_state, norm_H0_sq, norm_Heps, norm_Heps_sq,
                                project)

from conftest import random_state


def _brute(mesh, A, B, norm):
    worst = 0.0
    for a in A.states:
        best = math.inf
        for b in B.states:
            d = a - b
            if norm == "H_0":
                d2 = norm_H0_sq(mesh, d)
            else:
                d2 = norm_Heps_sq(mesh, State(d.u, d.v, d.delta, d.gamma, A.eps))
            best = min(best, d2)
        worst = max(worst, best)
    return math.sqrt(worst)


def _cloud(rng, n, eps, size):
    return Cloud([random_state(rng, n, eps) for _ in range(size)], eps)


def test_semidist_self_zero():
    m = build_mesh(7)
    A = _cloud(np.random.default_rng(0), 7, 0.3, 6)
    assert hausdorff_semidist(m, A, A) == 0.0
    assert hausdorff_semidist(m, A, A, "H_0") == 0.0


def test_semidist_asymmetry_caricature():
    # constants have ||c||_1 = |c| on (0, 1)
    m = build_mesh(5)
    def const(c):
        return State(np.full(5, c), np.zeros(5), np.zeros(2), np.zeros(2), 0.0)
    A = Cloud([const(0.0), const(3.0)], 0.0)
    B = Cloud([const(1.0)], 0.0)
    assert hausdorff_semidist(m, A, B, "H_0") == pytest.approx(2.0, rel=1e-12)
    assert hausdorff_semidist(m, B, A, "H_0") == pytest.approx(1.0, rel=1e-12)


def test_semidist_subset_and_errors():
    m = build_mesh(7)
    B = _cloud(np.random.default_rng(1), 7, 0.5, 8)
    A = Cloud(B.states[2:5], 0.5)
    assert hausdorff_semidist(m, A, B) == 0.0
    with pytest.raises(ValueError):
        hausdorff_semidist(m, Cloud([], 0.5), B)
    with pytest.raises(ValueError):
        hausdorff_semidist(m, A, B, "H_2")
    with pytest.raises(ValueError):
        Cloud([State.zeros(7, 0.5), State.zeros(7, 0.4)], 0.5)


def test_semidist_matches_brute_force():
    rng = np.random.default_rng(2)
    m = build_mesh(6)
    for _ in range(100):
        eps = float(rng.uniform(0, 1))
        A = _cloud(rng, 6, eps, int(rng.integers(1, 6)))
        B = _cloud(rng, 6, eps, int(rng.integers(1, 6)))
        for norm in ("H_eps", "H_0"):
            assert math.isclose(hausdorff_semidist(m, A, B, norm), _brute(m, A, B, norm),
                                rel_tol=1e-12, abs_tol=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(1, 4), st.integers(1, 4))
def test_semidist_triangle(seed, na, nb, nc):
    rng = np.random.default_rng(seed)
    m = build_mesh(5)
    A, B, C = (_cloud(rng, 5, 0.7, k) for k in (na, nb, nc))
    d = lambda X, Y: hausdorff_semidist(m, X, Y)
    assert d(A, C) <= d(A, B) + d(B, C) + 1e-12


def test_make_seeds_deterministic(mesh51):
    a = make_seeds(mesh51, 3, 5.0, rng_seed=4)
    b = make_seeds(mesh51, 3, 5.0, rng_seed=4)
    for x, y in zip(a, b):
        assert all(np.array_equal(p, q) for p, q in zip(x, y))
    for base in a:
        for eps in (1.0, 0.1):
            assert norm_Heps(mesh51, seed_state(base, eps)) <= 5.0 + 1e-12
        assert norm_Heps(mesh51, seed_state(base, 1.0)) >= 2.5 - 1e-12


def test_compare_initial_difference_by_hand(mesh51, dwell):
    x = mesh51.x
    u0, u1 = 1 + x**2, np.cos(np.pi * x)
    d0, d1 = np.array([0.5, -1.0]), np.array([2.0, 0.25])
    eps = 0.2
    # delta(0) - eps u0|G = (1 - eps) u0|G + eps d0, gamma(0) + u1|G = d1 + u1|G
    tr_u, tr_v = np.array([1.0, 2.0]), np.array([1.0, -1.0])
    expected = np.sum(((1 - eps) * tr_u + eps * d0) ** 2) + eps * np.sum((d1 + tr_v) ** 2)
    cmp = compare_series(mesh51, dwell, eps, (u0, u1, d0, d1), 0.01, 1e-3, 0.01)
    assert cmp.diff[0] ** 2 == pytest.approx(expected, rel=1e-12)
    z = aic2_state(u0, u1, d0, d1, eps)
    assert norm_Heps_sq(mesh51, z - lift_state(project(z), eps)) == pytest.approx(expected, rel=1e-12)


def test_compare_nondegenerate_linear(mesh51, zero_nl):
    base = make_seeds(mesh51, 1, 2.0, rng_seed=3)[0]
    assert compare_trajectories(mesh51, zero_nl, 1.0, base, 1.0, 1e-3) > 0


def test_compare_dt_converged(mesh51, dwell):
    base = make_seeds(mesh51, 1, 3.0, rng_seed=5)[0]
    a = compare_trajectories(mesh51, dwell, 0.01, base, 2.0, 1e-3)
    b = compare_trajectories(mesh51, dwell, 0.01, base, 2.0, 5e-4)
    assert abs(a - b) / b < 0.01


def test_power_law_fit_exact():
    eps = np.array([1e-1, 1e-2, 1e-3, 1e-4])
    rho, logM, res = fit_power_law(eps, 3.0 * eps**0.5)
    assert rho == pytest.approx(0.5, abs=1e-12)
    assert math.exp(logM) == pytest.approx(3.0, rel=1e-10)
    assert res < 1e-12


def test_sweep_excludes_degenerate_points(monkeypatch, mesh51, zero_nl):
    vals = {0.1: 0.3, 0.01: 0.0, 0.001: 0.03}
    monkeypatch.setattr(attractor, "compare_trajectories", lambda m, nl, e, s, T, dt: vals[e])
    with pytest.warns(UserWarning):
        res = epsilon_sweep(mesh51, zero_nl, [None], [0.1, 0.01, 0.001], 1.0, 1e-3, check_dt=False)
    assert res.rho == pytest.approx(0.5, abs=1e-12)
    csv = res.to_csv().splitlines()
    assert csv[0] == "eps,D,log_eps,log_D" and len(csv) == 4 and csv[2].endswith("nan")


def test_sweep_grid_validation(mesh51, zero_nl):
    with pytest.raises(ValueError):
        epsilon_sweep(mesh51, zero_nl, [None], [0.01, 0.1], 1.0, 1e-3)
    with pytest.raises(ValueError):
        epsilon_sweep(mesh51, zero_nl, [None], [0.1], 1.0, 1e-3)


def test_sweep_threads_match_serial(mesh51, zero_nl):
    seeds = make_seeds(mesh51, 2, 2.0, rng_seed=1)
    a = epsilon_sweep(mesh51, zero_nl, seeds, [0.1, 0.01], 0.5, 1e-3, check_dt=False)
    b = epsilon_sweep(mesh51, zero_nl, seeds, [0.1, 0.01], 0.5, 1e-3, threads=3, check_dt=False)
    assert a.to_csv() == b.to_csv()


def test_omega_limit_errors(mesh51, dwell):
    stp = Stepper(mesh51, dwell, "transport")
    with pytest.raises(ValueError):
        sample_omega_limit(stp, [], 1.0, 1.0, 0.1)
    with pytest.raises(ValueError):
        sample_omega_limit(stp, [State.zeros(51, 0.0)], 1.0, 0.0, 0.1)


def test_omega_limit_counts(mesh51, dwell):
    stp = Stepper(mesh51, dwell, "acoustic", eps=0.5)
    seeds = [seed_state(b, 0.5) for b in make_seeds(mesh51, 2, 2.0)]
    cloud = sample_omega_limit(stp, seeds, 0.5, 1.0, 0.25)
    assert len(cloud) == 2 * 5
    assert cloud.eps == 0.5 and cloud.meta["seeds"] == 2
    assert cloud.states[0].t == pytest.approx(0.5)


@pytest.mark.slow
def test_linear_cloud_collapses():
    m = build_mesh(51)
    from acoustic_lab.model import make_nonlinearity
    stp = Stepper(m, make_nonlinearity("zero"), "acoustic", eps=1.0, dt=1e-2)
    seeds = [seed_state(b, 1.0) for b in make_seeds(m, 3, 5.0)]
    cloud = sample_omega_limit(stp, seeds, 60.0, 2.0, 0.5)
    diam = max(norm_Heps(m, a - b) for a in cloud.states for b in cloud.states)
    assert diam <= 1e-3


def test_usc_report_self_zero(mesh51, dwell):
    stp = Stepper(mesh51, dwell, "transport")
    seeds = [project(seed_state(b, 1.0)) for b in make_seeds(mesh51, 2, 2.0)]
    cloud0 = sample_omega_limit(stp, seeds, 0.1, 0.2, 0.1)
    assert upper_semicontinuity_report(mesh51, cloud0.lifted(0.3), cloud0, 0.3) == 0.0
    with pytest.raises(ValueError):
        upper_semicontinuity_report(mesh51, Cloud([], 0.3), cloud0, 0.3)


@pytest.mark.slow
def test_usc_decreases_and_consistent(mesh51, dwell):
    from acoustic_lab.model import functional_constants
    fc = functional_constants(mesh51, dwell)
    seeds = make_seeds(mesh51, 2, 3.0, rng_seed=11)
    T_b, T_w = 15.0, 2.0
    cloud0 = sample_omega_limit(Stepper(mesh51, dwell, "transport"),
                                [project(seed_state(b, 1.0, aic2=True)) for b in seeds], T_b, T_w, 0.5)
    dists = []
    for eps in (1e-1, 1e-2, 1e-3):
        stp = Stepper(mesh51, dwell, "acoustic", eps=eps)
        cloud = sample_omega_limit(stp, [seed_state(b, eps, aic2=True) for b in seeds], T_b, T_w, 0.5)
        assert max(norm_Heps(mesh51, s) for s in cloud.states) <= fc.R1
        d = upper_semicontinuity_report(mesh51, cloud, cloud0, eps)
        sup = max(compare_trajectories(mesh51, dwell, eps, b, T_b + T_w, 1e-3) for b in seeds)
        assert d <= sup
        dists.append(d)
    assert dists[0] > dists[1] > dists[2]
