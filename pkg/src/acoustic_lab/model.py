"""Phase-space states, epsilon-weighted norms, the nonlinearity and its constants.

The boundary ODE and the norm both carry first-power epsilon:

    eps * delta_tt + delta_t + delta = -u_t   on {0, L}
    ||zeta||^2 = ||u||_1^2 + ||v||^2 + |delta|^2 + eps * |gamma|^2
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .mesh import Mesh, h1_norm_sq, l2_norm_sq, sup_embedding_constant, trace_constant

SAMPLE_S = 100.0


@dataclass(frozen=True)
class State:
    u: np.ndarray
    v: np.ndarray
    delta: np.ndarray
    gamma: np.ndarray
    eps: float
    t: float = 0.0

    def __post_init__(self):
        for name in ("u", "v", "delta", "gamma"):
            a = np.asarray(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(a)):
                raise FloatingPointError(f"non-finite entries in {name} at t={self.t}")
            object.__setattr__(self, name, a)
        if self.u.shape != self.v.shape:
            raise ValueError("u and v must have the same length")
        if self.delta.shape != (2,) or self.gamma.shape != (2,):
            raise ValueError("delta and gamma live on the two boundary points")
        if not 0.0 <= self.eps <= 1.0:
            raise ValueError(f"eps must lie in [0, 1], got {self.eps}")

    def __add__(self, other: State) -> State:
        return replace(self, u=self.u + other.u, v=self.v + other.v,
                       delta=self.delta + other.delta, gamma=self.gamma + other.gamma)

    def __sub__(self, other: State) -> State:
        return replace(self, u=self.u - other.u, v=self.v - other.v,
                       delta=self.delta - other.delta, gamma=self.gamma - other.gamma)

    def vector(self) -> np.ndarray:
        return np.concatenate([self.u, self.v, self.delta, self.gamma])

    @classmethod
    def zeros(cls, n: int, eps: float, t: float = 0.0) -> State:
        return cls(np.zeros(n), np.zeros(n), np.zeros(2), np.zeros(2), eps, t)


# --- nonlinearity ---------------------------------------------------------

@dataclass(frozen=True)
class Nonlinearity:
    """Polynomial f with F(0) = 0.

    kind is "zero", "double_well" (f = s^3 - 2ks) or "cubic_poly"
    (f = a3 s^3 + a1 s + a0). Structural constants are filled by
    derive_constants.
    """
    kind: str = "zero"
    k: float = 0.0
    coeffs: tuple[float, float, float] = (0.0, 0.0, 0.0)
    ell: float = 0.0
    theta: float = 0.0
    mu0: float = 1.0
    kappa_f: float = 0.0

    def __post_init__(self):
        if self.kind not in ("zero", "double_well", "cubic_poly"):
            raise ValueError(f"unknown nonlinearity kind {self.kind!r}")
        if self.kind == "double_well" and not self.k > 0:
            raise ValueError("double_well requires k > 0")

    @property
    def cubic(self) -> tuple[float, float, float]:
        """(a3, a1, a0) of f(s) = a3 s^3 + a1 s + a0."""
        if self.kind == "zero":
            return (0.0, 0.0, 0.0)
        if self.kind == "double_well":
            return (1.0, -2.0 * self.k, 0.0)
        return tuple(float(c) for c in self.coeffs)


def f_eval(nl: Nonlinearity, s):
    a3, a1, a0 = nl.cubic
    return a3 * s**3 + a1 * s + a0


def F_eval(nl: Nonlinearity, s):
    a3, a1, a0 = nl.cubic
    return a3 * s**4 / 4 + a1 * s**2 / 2 + a0 * s


def fprime_eval(nl: Nonlinearity, s):
    a3, a1, _ = nl.cubic
    return 3 * a3 * s**2 + a1


def _min_quartic(c4: float, c2: float, c1: float) -> float:
    """min over s of c4 s^4 + c2 s^2 + c1 s, for c4 > 0."""
    crit = np.roots([4 * c4, 0.0, 2 * c2, c1])
    crit = crit[np.abs(crit.imag) < 1e-9].real
    vals = c4 * crit**4 + c2 * crit**2 + c1 * crit
    return float(min(0.0, vals.min()))


def derive_constants(nl: Nonlinearity, L: float = 1.0, mu0: float = 0.5) -> Nonlinearity:
    """Fill ell, theta, mu0, kappa_f for the polynomial families.

    kappa_f is the smallest offset with 2 F(s) >= -(1 - mu0) s^2 - kappa_f / L
    pointwise, so that integrating over (0, L) gives the H^1 lower bound.
    """
    if nl.kind == "zero":
        return replace(nl, ell=0.0, theta=0.0, mu0=1.0, kappa_f=0.0)
    a3, a1, a0 = nl.cubic
    if a3 < 0 or (a3 == 0 and a1 <= -(1 - mu0)):
        raise ValueError("f violates liminf f(s)/s > -1 for the chosen mu0")
    ell = 6.0 * abs(a3)
    theta = max(0.0, -a1)
    # 2F(s) + (1 - mu0) s^2 = a3/2 s^4 + (a1 + 1 - mu0) s^2 + 2 a0 s
    if a3 > 0:
        low = _min_quartic(a3 / 2, a1 + 1 - mu0, 2 * a0)
    else:
        c2 = a1 + 1 - mu0
        low = min(0.0, -(a0**2) / c2)
    return replace(nl, ell=ell, theta=theta, mu0=mu0, kappa_f=-low * L)


def make_nonlinearity(kind: str, L: float = 1.0, k: float = 1.0,
                      coeffs: tuple[float, float, float] = (0.0, 0.0, 0.0)) -> Nonlinearity:
    nl = Nonlinearity(kind=kind, k=k if kind == "double_well" else 0.0, coeffs=tuple(coeffs))
    return derive_constants(nl, L=L)


def check_assumptions(nl: Nonlinearity, L: float = 1.0, S: float = SAMPLE_S,
                      num: int = 20001) -> dict[str, bool]:
    """Sampled checks of the growth, monotonicity and coercivity bounds on [-S, S]."""
    s = np.linspace(-S, S, num)
    a3, _, _ = nl.cubic
    fpp = 6 * a3 * s
    return {
        "growth": bool(np.all(np.abs(fpp) <= nl.ell * (1 + np.abs(s)) + 1e-12)),
        "monotone": bool(np.all(fprime_eval(nl, s) >= -nl.theta - 1e-12)),
        "coercive": bool(np.all(
            F_eval(nl, s) >= -(1 - nl.mu0) / 2 * s**2 - nl.kappa_f / (2 * L) - 1e-9 * (1 + s**4))),
    }


# --- discrete integrals of the nonlinearity --------------------------------

def integral_F(mesh: Mesh, nl: Nonlinearity, u: np.ndarray) -> float:
    """Trapezoid value of int F(u) dx; its gradient is the lumped load of f."""
    return float(mesh.lumped @ F_eval(nl, u))


def load_f(mesh: Mesh, nl: Nonlinearity, u: np.ndarray) -> np.ndarray:
    return mesh.lumped * f_eval(nl, u)


def pairing_fu(mesh: Mesh, nl: Nonlinearity, u: np.ndarray) -> float:
    """Discrete <f(u), u>."""
    return float(load_f(mesh, nl, u) @ u)


# --- norms and maps ---------------------------------------------------------

def _check_state(mesh: Mesh, st: State) -> None:
    if st.u.shape != (mesh.n,):
        raise ValueError(f"state has {st.u.shape[0]} nodes, mesh has {mesh.n}")


def norm_H0_sq(mesh: Mesh, st: State) -> float:
    _check_state(mesh, st)
    return h1_norm_sq(mesh, st.u) + l2_norm_sq(mesh, st.v)


def norm_Heps_sq(mesh: Mesh, st: State) -> float:
    _check_state(mesh, st)
    return (h1_norm_sq(mesh, st.u) + l2_norm_sq(mesh, st.v)
            + float(st.delta @ st.delta) + st.eps * float(st.gamma @ st.gamma))


def norm_Heps(mesh: Mesh, st: State) -> float:
    return math.sqrt(norm_Heps_sq(mesh, st))


def project(st: State) -> State:
    return State(st.u.copy(), st.v.copy(), np.zeros(2), np.zeros(2), 0.0, st.t)


def lift(u: np.ndarray, v: np.ndarray, eps: float, t: float = 0.0) -> State:
    """(u, v) -> (u, v, eps * u|_Gamma, -v|_Gamma)."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return State(u.copy(), v.copy(), eps * np.array([u[0], u[-1]]),
                 -np.array([v[0], v[-1]]), eps, t)


def lift_state(st: State, eps: float) -> State:
    return lift(st.u, st.v, eps, st.t)


def aic2_state(u0: np.ndarray, u1: np.ndarray, delta0: np.ndarray, delta1: np.ndarray,
               eps: float) -> State:
    """Acoustic data with delta(0) = u0|_Gamma + eps*delta0 and delta_t(0) = delta1."""
    u0 = np.asarray(u0, dtype=float)
    tr = np.array([u0[0], u0[-1]])
    return State(u0.copy(), np.asarray(u1, dtype=float).copy(),
                 tr + eps * np.asarray(delta0, dtype=float),
                 np.asarray(delta1, dtype=float).copy(), eps)


# --- Lyapunov-functional constants -------------------------------------------

@dataclass(frozen=True)
class FunctionalConstants:
    eta1: float
    m_star: float
    m1: float
    M1: float
    C1: float
    C2: float
    R1: float
    beta: float
    trace_C: float = field(default=0.0)
    eta_cap: float = field(default=0.0)

    def entry_time(self, R: float, kappa_f: float) -> float:
        """Theoretical absorbing time t1 for data of H_eps-norm at most R."""
        return (self.C2 * R * (1 + R**3) + kappa_f) / (2 * self.m_star)


def functional_constants(mesh: Mesh, nl: Nonlinearity, eta_fraction: float = 0.5) -> FunctionalConstants:
    """Constants of the perturbed energy and its differential inequality.

    eta1 is taken as eta_fraction times the cap min{mu0/(2+C), 3/4, 2/(3+2C)};
    at the cap itself one of the terms defining m_star vanishes.
    """
    C = trace_constant(mesh)
    mu0, kappa = nl.mu0, nl.kappa_f
    cap = min(mu0 / (2 + C), 0.75, 2 / (3 + 2 * C))
    eta1 = eta_fraction * cap
    m_star = min(mu0 - eta1 * (2 + C), 0.75 - eta1,
                 eta1 / 2 * (1 - eta1 / 2), 1 - eta1 * (1.5 + C))
    if not (eta1 > 0 and m_star > 0):
        raise ValueError("degenerate functional constants")

    # lower bound: 2 eta |<u, delta>| <= 2 eta^2 C ||u||_1^2 + |delta|^2 / 2
    C1 = min(mu0 - 2 * eta1**2 * C, 0.5)
    # upper bound E <= A|z| + B|z|^2 + D|z|^4 <= (A + B + D) |z| (1 + |z|^3)
    a3, a1, a0 = nl.cubic
    c_inf = sup_embedding_constant(mesh)
    A = 2 * abs(a0) * math.sqrt(mesh.L)
    B = 1 + eta1 * max(C, 1.0) + max(a1, 0.0)
    D = max(a3, 0.0) / 2 * c_inf
    C2 = A + B + D

    r2 = eta1 * kappa / m_star + 1
    R1 = math.sqrt(C2 * math.sqrt(r2) * (1 + r2**1.5 + kappa) / C1)
    return FunctionalConstants(eta1=eta1, m_star=m_star, m1=2 * m_star, M1=2 * eta1 * kappa,
                               C1=C1, C2=C2, R1=R1, beta=nl.theta, trace_C=C, eta_cap=cap)


def lyapunov_E_eps(mesh: Mesh, nl: Nonlinearity, fc: FunctionalConstants | float, st: State) -> float:
    eta = fc if isinstance(fc, (int, float)) else fc.eta1
    return (norm_Heps_sq(mesh, st) + 2 * eta * float(mesh.trace(st.u) @ st.delta)
            + 2 * integral_F(mesh, nl, st.u))


def energy_base(mesh: Mesh, nl: Nonlinearity, st: State) -> float:
    return norm_Heps_sq(mesh, st) + 2 * integral_F(mesh, nl, st.u)


def multiplier_functional(mesh: Mesh, nl: Nonlinearity, fc: FunctionalConstants | float,
                          st: State) -> float:
    """Energy after the multiplier v + eta*u, eps*gamma + eta*delta:

        ||u||_1^2 + ||v + eta u||^2 + |delta|^2 + eps |gamma + eta delta|^2
            + 2 eta <u, delta>_Gamma + 2 int F(u)

    It differs from lyapunov_E_eps by cross terms bounded by (eta + eta^2)||zeta||^2
    and is the functional whose time derivative obeys dE/dt + m1 ||zeta||^2 <= M1.
    """
    eta = fc if isinstance(fc, (int, float)) else fc.eta1
    _check_state(mesh, st)
    w = st.v + eta * st.u
    g = st.gamma + eta * st.delta
    return (h1_norm_sq(mesh, st.u) + l2_norm_sq(mesh, w) + float(st.delta @ st.delta)
            + st.eps * float(g @ g) + 2 * eta * float(mesh.trace(st.u) @ st.delta)
            + 2 * integral_F(mesh, nl, st.u))
