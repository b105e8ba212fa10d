"""Finite-cloud surrogates of attractors and the perturbed-vs-limit comparison."""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .integrator import Stepper, run
from .mesh import Mesh
from .model import (Nonlinearity, State, aic2_state, lift_state, norm_Heps, norm_Heps_sq, project)

# (u0, u1, delta0', delta1'): data from which both problems are started
BaseData = tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]


@dataclass
class Cloud:
    states: list[State]
    eps: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.states:
            n = self.states[0].u.shape
            if any(s.u.shape != n for s in self.states):
                raise ValueError("cloud members must share the mesh")
            if any(s.eps != self.eps for s in self.states):
                raise ValueError("cloud members must share eps")

    def __len__(self) -> int:
        return len(self.states)

    def lifted(self, eps: float) -> Cloud:
        return Cloud([lift_state(s, eps) for s in self.states], eps, dict(self.meta))

    def projected(self) -> Cloud:
        return Cloud([project(s) for s in self.states], 0.0, dict(self.meta))


def _weighted_sq(mesh: Mesh, D: np.ndarray, eps: float, norm: str) -> np.ndarray:
    """Squared norms of stacked difference rows [u | v | delta | gamma]."""
    n = mesh.n
    u, v = D[:, :n], D[:, n:2 * n]
    KM = mesh.stiffness + mesh.mass
    out = np.einsum("ij,ij->i", u, (KM @ u.T).T) + np.einsum("ij,ij->i", v, (mesh.mass @ v.T).T)
    if norm == "H_eps":
        d, g = D[:, 2 * n:2 * n + 2], D[:, 2 * n + 2:]
        out = out + np.sum(d * d, axis=1) + eps * np.sum(g * g, axis=1)
    elif norm != "H_0":
        raise ValueError(f"norm must be 'H_eps' or 'H_0', got {norm!r}")
    return np.maximum(out, 0.0)


def hausdorff_semidist(mesh: Mesh, A: Cloud, B: Cloud, norm: str = "H_eps") -> float:
    """sup over a in A of inf over b in B of ||a - b||, by exhaustive search."""
    if not len(A) or not len(B):
        raise ValueError("clouds must be nonempty")
    eps = A.eps
    XA = np.array([s.vector() for s in A.states])
    XB = np.array([s.vector() for s in B.states])
    if XA.shape[1] != XB.shape[1]:
        raise ValueError("clouds live on different meshes")
    worst = 0.0
    for a in XA:
        d2 = _weighted_sq(mesh, a[None, :] - XB, eps, norm)
        worst = max(worst, float(d2.min()))
    return math.sqrt(worst)


def make_seeds(mesh: Mesh, count: int, radius: float, rng_seed: int = 0,
               modes: int = 4) -> list[BaseData]:
    """Smooth random data (u0, u1, delta0', delta1') with ||(u0,u1,d0,d1)||_{H_1} in [radius/2, radius].

    The norm is taken with unit weight on delta1', the largest of the
    eps-weighted norms, so every eps in (0, 1] sees data of norm <= radius.
    """
    rng = np.random.default_rng(rng_seed)
    x = mesh.x / mesh.L
    out = []
    for _ in range(count):
        cu = rng.normal(size=modes) / (1 + np.arange(modes))
        cv = rng.normal(size=modes) / (1 + np.arange(modes))
        u0 = sum(c * np.cos(j * np.pi * x) for j, c in enumerate(cu))
        u1 = sum(c * np.cos(j * np.pi * x) for j, c in enumerate(cv))
        d0, d1 = rng.normal(size=2), rng.normal(size=2)
        st = State(u0, u1, d0, d1, 1.0)
        target = radius * rng.uniform(0.5, 1.0)
        s = target / norm_Heps(mesh, st)
        out.append((u0 * s, u1 * s, d0 * s, d1 * s))
    return out


def seed_state(base: BaseData, eps: float, aic2: bool = False) -> State:
    """Acoustic initial state from base data; (aic2) puts u0|Gamma into delta(0)."""
    u0, u1, d0, d1 = base
    if aic2:
        return aic2_state(u0, u1, d0, d1, eps)
    return State(u0, u1, d0, d1, eps)


def sample_omega_limit(stp: Stepper, seeds: Sequence[State], T_b: float, T_w: float,
                       cadence: float) -> Cloud:
    """Post-transient samples on [T_b, T_b + T_w] from every seed."""
    if not seeds:
        raise ValueError("no seeds given")
    if not T_w > 0:
        raise ValueError("window must be positive")
    states = []
    for i, s0 in enumerate(seeds):
        try:
            burned = run(stp, s0, T_b, T_b)[-1] if T_b > 0 else s0
            states.extend(run(stp, burned, T_w, cadence))
        except Exception as exc:
            raise RuntimeError(f"seed {i} failed: {exc}") from exc
    return Cloud(states, stp.state_eps, {"T_b": T_b, "T_w": T_w, "seeds": len(seeds),
                                         "cadence": cadence})


# --- perturbed vs limit ---------------------------------------------------------

@dataclass
class Comparison:
    t: np.ndarray
    diff: np.ndarray

    @property
    def sup(self) -> float:
        return float(np.max(self.diff))


def compare_series(mesh: Mesh, nl: Nonlinearity, eps: float, base: BaseData, T: float,
                   dt: float, sample_dt: Optional[float] = None) -> Comparison:
    """||S_eps(t) zeta0 - L S_0(t) Pi zeta0||_{H_eps} on the sample grid.

    zeta0 is built from base with (aic2); the transport run starts from (u0, u1).
    """
    sample_dt = sample_dt or max(dt, T / 500)
    zeta0 = seed_state(base, eps, aic2=True)
    acoustic = run(Stepper(mesh, nl, "acoustic", eps=eps, dt=dt), zeta0, T, sample_dt)
    transport = run(Stepper(mesh, nl, "transport", dt=dt), project(zeta0), T, sample_dt)
    diff = []
    for a, b in zip(acoustic, transport):
        lifted = lift_state(b, eps)
        if not (np.array_equal(project(lifted).u, b.u) and np.array_equal(project(lifted).v, b.v)):
            raise AssertionError("lift is not a right inverse of the projection")
        diff.append(math.sqrt(norm_Heps_sq(mesh, a - lifted)))
    return Comparison(np.array([s.t for s in acoustic]), np.array(diff))


def compare_trajectories(mesh: Mesh, nl: Nonlinearity, eps: float, base: BaseData, T: float,
                         dt: float, sample_dt: Optional[float] = None) -> float:
    return compare_series(mesh, nl, eps, base, T, dt, sample_dt).sup


@dataclass
class SweepResult:
    eps: np.ndarray
    D: np.ndarray
    rho: float
    log_M: float
    residual: float
    dt_change: float = float("nan")

    @property
    def M(self) -> float:
        return math.exp(self.log_M)

    def to_csv(self) -> str:
        lines = ["eps,D,log_eps,log_D"]
        for e, d in zip(self.eps, self.D):
            lines.append(",".join(repr(float(v)) for v in (e, d, math.log(e),
                                                           math.log(d) if d > 0 else float("nan"))))
        return "\n".join(lines) + "\n"

    def summary_line(self) -> str:
        return f"rho={self.rho!r} M={self.M!r} residual={self.residual!r}"


def fit_power_law(eps: np.ndarray, D: np.ndarray) -> tuple[float, float, float]:
    """Least-squares slope/intercept of log D on log eps and the RMS log residual."""
    le, ld = np.log(eps), np.log(D)
    rho, logM = np.polyfit(le, ld, 1)
    res = ld - (rho * le + logM)
    return float(rho), float(logM), float(np.sqrt(np.mean(res**2)))


def epsilon_sweep(mesh: Mesh, nl: Nonlinearity, seeds: Sequence[BaseData],
                  eps_grid: Sequence[float], T: float, dt: float, threads: int = 1,
                  check_dt: bool = True) -> SweepResult:
    """D_i = max over seeds of the sup-difference at eps_i, with a log-log fit."""
    eps_grid = [float(e) for e in eps_grid]
    if any(b >= a for a, b in zip(eps_grid, eps_grid[1:])):
        raise ValueError("eps_grid must be strictly decreasing")
    if len(eps_grid) < 2:
        raise ValueError("need at least two eps values")
    jobs = [(e, s) for e in eps_grid for s in range(len(seeds))]

    def work(job):
        e, s = job
        return compare_trajectories(mesh, nl, e, seeds[s], T, dt)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            vals = list(pool.map(work, jobs))
    else:
        vals = [work(j) for j in jobs]
    D = np.array(vals).reshape(len(eps_grid), len(seeds)).max(axis=1)
    eps = np.array(eps_grid)
    keep = D > 0
    if not keep.all():
        warnings.warn(f"excluding degenerate sweep points eps={eps[~keep].tolist()}")
    if keep.sum() < 2:
        raise ValueError("fewer than two nondegenerate sweep points")
    rho, logM, res = fit_power_law(eps[keep], D[keep])
    change = float("nan")
    if check_dt:
        e = eps_grid[-1]
        fine = max(compare_trajectories(mesh, nl, e, s, T, dt / 2) for s in seeds)
        change = abs(fine - D[-1]) / max(D[-1], 1e-300)
    return SweepResult(eps=eps, D=D, rho=rho, log_M=logM, residual=res, dt_change=change)


def upper_semicontinuity_report(mesh: Mesh, cloud_eps: Cloud, cloud_0: Cloud, eps: float) -> float:
    """Numerical dist_{H_eps}(A_eps, L A_0) between a perturbed and a lifted limit cloud."""
    if not len(cloud_eps) or not len(cloud_0):
        raise ValueError("clouds must be nonempty")
    return hausdorff_semidist(mesh, cloud_eps, cloud_0.lifted(eps), "H_eps")
