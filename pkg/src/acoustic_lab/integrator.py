"""Implicit-midpoint time stepping for the acoustic, transport and Robin problems.

Unknown per step is the midpoint velocity a = (v^n + v^{n+1}) / 2; then
u_mid = u^n + dt/2 a and the boundary pair (delta, gamma) of each endpoint is
eliminated in closed form, which leaves a tridiagonal system in a plus a
diagonal nonlinear term resolved by Newton's method.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.linalg import solve_banded

from .diagnostics import EnergyLedger
from .mesh import Mesh
from .model import Nonlinearity, State, f_eval, fprime_eval, integral_F

MODES = ("acoustic", "transport", "robin")
SPLIT_NEWTON_TOL = 1e-12


class StepFailure(RuntimeError):
    def __init__(self, msg: str, t: float):
        super().__init__(f"{msg} (t={t:.6g})")
        self.t = t


# load(u_mid) -> (load vector, diagonal of its derivative in u_mid)
LoadFn = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class Stepper:
    mesh: Mesh
    nl: Nonlinearity
    bc_mode: str = "acoustic"
    eps: float = 1.0
    dt: float = 1e-3
    newton_tol: float = 1e-10
    newton_max: int = 25
    _lin: np.ndarray = field(init=False, repr=False, compare=False)
    _bcoef: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.bc_mode not in MODES:
            raise ValueError(f"unknown boundary mode {self.bc_mode!r}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.bc_mode == "acoustic" and not 0 < self.eps <= 1:
            raise ValueError("acoustic mode requires eps in (0, 1]")
        if self.bc_mode != "acoustic" and self.eps != 0:
            object.__setattr__(self, "eps", 0.0)
        m, dt = self.mesh, self.dt
        # (2 + dt) M + dt^2/2 (K + M) + dt * c * B
        ab = m.banded((2 + dt) * m.mass + dt**2 / 2 * (m.stiffness + m.mass))
        if self.bc_mode == "acoustic":
            c = dt / (2 * self.eps + dt + dt**2 / 2)
        elif self.bc_mode == "transport":
            c = 1.0
        else:
            c = 1 + dt / 2
        for i in m.gamma_idx:
            ab[1, i] += dt * c
        object.__setattr__(self, "_lin", ab)
        object.__setattr__(self, "_bcoef", c)

    @property
    def state_eps(self) -> float:
        return self.eps if self.bc_mode == "acoustic" else 0.0

    def energy(self, st: State) -> float:
        """Quadratic energy plus 2 int F(u); the Robin mode adds |u|_Gamma|^2."""
        m = self.mesh
        e = (float(st.u @ (m.stiffness @ st.u) + st.u @ (m.mass @ st.u) + st.v @ (m.mass @ st.v))
             + 2 * integral_F(m, self.nl, st.u))
        if self.bc_mode == "acoustic":
            e += float(st.delta @ st.delta) + self.eps * float(st.gamma @ st.gamma)
        elif self.bc_mode == "robin":
            tr = m.trace(st.u)
            e += float(tr @ tr)
        return e

    def nonlinear_load(self, u_mid: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        w = self.mesh.lumped
        return w * f_eval(self.nl, u_mid), w * fprime_eval(self.nl, u_mid)


@dataclass
class StepInfo:
    """Midpoint quantities of the last step, used for the energy audit."""
    a: np.ndarray
    g: np.ndarray
    u_mid: np.ndarray
    iterations: int


def _advance(stp: Stepper, st: State, load: LoadFn) -> tuple[State, StepInfo]:
    m, dt = stp.mesh, stp.dt
    M, KM = m.mass, m.stiffness + m.mass
    i0, i1 = m.gamma_idx

    rhs = 2 * (M @ st.v) - dt * (KM @ st.u)
    if stp.bc_mode == "acoustic":
        den = 2 * stp.eps + dt + dt**2 / 2
        g0 = (2 * stp.eps * st.gamma - dt * st.delta) / den
        rhs[[i0, i1]] += dt * g0
    elif stp.bc_mode == "robin":
        rhs[[i0, i1]] -= dt * st.u[[i0, i1]]

    w = m.lumped
    a = st.v.copy()
    for it in range(stp.newton_max + 1):
        u_mid = st.u + dt / 2 * a
        q, dq = load(u_mid)
        lin = stp._lin
        res = (lin[1] * a
               + np.concatenate([lin[0, 1:] * a[1:], [0.0]])
               + np.concatenate([[0.0], lin[2, :-1] * a[:-1]])
               + dt * q - rhs)
        if not np.all(np.isfinite(res)):
            raise StepFailure("non-finite residual", st.t)
        if np.sqrt(np.sum(res**2 / w)) <= stp.newton_tol:
            break
        if it == stp.newton_max:
            raise StepFailure(f"Newton did not converge in {stp.newton_max} iterations", st.t)
        J = lin.copy()
        J[1] += dt * dt / 2 * dq
        a = a - solve_banded((1, 1), J, res)

    u_new = st.u + dt * a
    v_new = 2 * a - st.v
    if stp.bc_mode == "acoustic":
        g = g0 - dt / den * a[[i0, i1]]
        delta_new = st.delta + dt * g
        gamma_new = 2 * g - st.gamma
    else:
        g = np.zeros(2)
        delta_new, gamma_new = st.delta, st.gamma
    if not (np.all(np.isfinite(u_new)) and np.all(np.isfinite(v_new))):
        raise StepFailure("NaN in state", st.t)
    new = State(u_new, v_new, delta_new, gamma_new, st.eps, st.t + dt)
    return new, StepInfo(a=a, g=g, u_mid=u_mid, iterations=it)


def _check(stp: Stepper, st: State) -> None:
    if st.u.shape != (stp.mesh.n,):
        raise ValueError("state does not match the stepper's mesh")
    if stp.bc_mode == "acoustic" and st.eps != stp.eps:
        raise ValueError(f"state eps={st.eps} but stepper eps={stp.eps}")
    if stp.bc_mode != "acoustic" and st.eps != 0:
        raise ValueError("transport/robin states carry eps=0")


def step(stp: Stepper, st: State) -> State:
    _check(stp, st)
    return _advance(stp, st, stp.nonlinear_load)[0]


def dissipation(stp: Stepper, info: StepInfo) -> tuple[float, float]:
    """Interior and boundary dissipation rates at the midpoint."""
    m = stp.mesh
    interior = float(info.a @ (m.mass @ info.a))
    if stp.bc_mode == "acoustic":
        boundary = float(info.g @ info.g)
    else:
        tr = m.trace(info.a)
        boundary = float(tr @ tr)
    return interior, boundary


def _step_counts(stp: Stepper, T: float, sample_dt: float) -> tuple[int, int]:
    if not T > 0:
        raise ValueError("T must be positive")
    if sample_dt < stp.dt * (1 - 1e-12):
        raise ValueError("sample_dt must be at least dt")
    n_steps = int(round(T / stp.dt))
    every = max(1, int(round(sample_dt / stp.dt)))
    return n_steps, every


def run(stp: Stepper, st0: State, T: float, sample_dt: Optional[float] = None,
        ledger: Optional[EnergyLedger] = None) -> list[State]:
    """States at t0 + k*sample_dt up to t0 + T, including the initial state."""
    _check(stp, st0)
    n_steps, every = _step_counts(stp, T, sample_dt or stp.dt)
    out = [st0]
    st = st0
    E = stp.energy(st) if ledger is not None else 0.0
    worst = 0.0
    if ledger is not None:
        ledger.add(stp, st, 0.0)
    for k in range(1, n_steps + 1):
        new, info = _advance(stp, st, stp.nonlinear_load)
        if ledger is not None:
            E_new = stp.energy(new)
            di, db = dissipation(stp, info)
            r = (E_new - E) / stp.dt + 2 * (di + db)
            if abs(r) > abs(worst):
                worst = r
            E = E_new
        st = new
        if k % every == 0 or k == n_steps:
            out.append(st)
            if ledger is not None:
                ledger.add(stp, st, worst)
                worst = 0.0
    return out


@dataclass
class SplitRun:
    """Decaying part xi, bounded part chi and the full trajectory they sum to."""
    xi: list[State]
    chi: list[State]
    full: list[State]
    beta: float


def run_split(stp: Stepper, st0: State, T: float, sample_dt: Optional[float] = None,
              beta: Optional[float] = None) -> SplitRun:
    """Co-evolve the full problem and its split with psi(s) = f(s) + beta*s.

    chi starts from zero and is driven by beta*u; xi starts from st0 and feels
    psi(u) - psi(w). Both reuse the full step's u_mid, so xi + chi reproduces
    the full scheme up to Newton tolerance. The three systems are solved to
    SPLIT_NEWTON_TOL at least, since per-step solver error accumulates in the sum.
    """
    if stp.bc_mode == "robin":
        raise ValueError("split runs are defined for acoustic and transport modes")
    _check(stp, st0)
    if stp.newton_tol > SPLIT_NEWTON_TOL:
        stp = replace(stp, newton_tol=SPLIT_NEWTON_TOL)
    beta = stp.nl.theta if beta is None else beta
    if beta < stp.nl.theta:
        raise ValueError("beta must be at least theta so that psi is monotone")
    n_steps, every = _step_counts(stp, T, sample_dt or stp.dt)
    w = stp.mesh.lumped
    nl = stp.nl

    def psi(s):
        return f_eval(nl, s) + beta * s

    full, xi = st0, st0
    chi = State.zeros(stp.mesh.n, st0.eps, st0.t)
    out_full, out_xi, out_chi = [full], [xi], [chi]
    for k in range(1, n_steps + 1):
        full, info = _advance(stp, full, stp.nonlinear_load)
        u_mid = info.u_mid

        def chi_load(w_mid, u_mid=u_mid):
            return (w * (psi(w_mid) - beta * u_mid),
                    w * (fprime_eval(nl, w_mid) + beta))

        chi_prev = chi
        chi, cinfo = _advance(stp, chi_prev, chi_load)
        coupling = w * (psi(u_mid) - psi(cinfo.u_mid))
        xi, _ = _advance(stp, xi, lambda _u, c=coupling: (c, np.zeros_like(c)))
        if k % every == 0 or k == n_steps:
            out_full.append(full)
            out_xi.append(xi)
            out_chi.append(chi)
    return SplitRun(xi=out_xi, chi=out_chi, full=out_full, beta=beta)
