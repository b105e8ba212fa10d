"""Uniform P1 finite elements on the interval (0, L).

The boundary is the two-point set {0, L}. Boundary mass is the identity on
those two nodes, so boundary inner products reduce to plain sums over the
endpoint values.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solve_banded

EIG_TOL = 1e-10
EIG_MAXITER = 10_000


@dataclass(frozen=True)
class Mesh:
    n: int
    L: float
    h: float
    mass: sp.csr_matrix = field(repr=False)
    stiffness: sp.csr_matrix = field(repr=False)
    gamma_idx: tuple[int, int]
    normal_sign: tuple[int, int] = (-1, 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, self.L, self.n)

    @property
    def lumped(self) -> np.ndarray:
        """Row sums of the mass matrix (trapezoid weights)."""
        w = np.full(self.n, self.h)
        w[0] = w[-1] = self.h / 2
        return w

    def trace(self, u: np.ndarray) -> np.ndarray:
        return np.array([u[self.gamma_idx[0]], u[self.gamma_idx[1]]])

    def boundary_mass(self) -> sp.csr_matrix:
        d = np.zeros(self.n)
        d[list(self.gamma_idx)] = 1.0
        return sp.diags(d, format="csr")

    def banded(self, A: sp.spmatrix) -> np.ndarray:
        """(3, n) banded storage of a tridiagonal matrix for solve_banded."""
        A = sp.dia_matrix(A)
        ab = np.zeros((3, self.n))
        ab[0, 1:] = A.diagonal(1)
        ab[1] = A.diagonal(0)
        ab[2, :-1] = A.diagonal(-1)
        return ab

    def check(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.n,):
            raise ValueError(f"expected nodal vector of length {self.n}, got shape {u.shape}")
        return u


def build_mesh(n: int, L: float = 1.0) -> Mesh:
    if int(n) != n or n < 3:
        raise ValueError(f"node count must be an integer >= 3, got {n}")
    if not L > 0:
        raise ValueError(f"domain length must be positive, got {L}")
    n = int(n)
    h = L / (n - 1)

    main = np.full(n, 2.0 / h)
    main[0] = main[-1] = 1.0 / h
    off = np.full(n - 1, -1.0 / h)
    K = sp.diags([off, main, off], [-1, 0, 1], format="csr")

    main = np.full(n, 4.0 * h / 6.0)
    main[0] = main[-1] = h / 3.0
    off = np.full(n - 1, h / 6.0)
    M = sp.diags([off, main, off], [-1, 0, 1], format="csr")

    return Mesh(n=n, L=float(L), h=h, mass=M, stiffness=K, gamma_idx=(0, n - 1))


def l2_norm_sq(mesh: Mesh, u: np.ndarray) -> float:
    u = mesh.check(u)
    return float(u @ (mesh.mass @ u))


def h1_norm_sq(mesh: Mesh, u: np.ndarray) -> float:
    u = mesh.check(u)
    return float(u @ (mesh.stiffness @ u) + u @ (mesh.mass @ u))


def endpoint_sq(mesh: Mesh, u: np.ndarray) -> float:
    t = mesh.trace(mesh.check(u))
    return float(t @ t)


def rayleigh(A: sp.spmatrix, B: sp.spmatrix, x: np.ndarray) -> float:
    return float(x @ (A @ x)) / float(x @ (B @ x))


def _iterate(step, x0: np.ndarray, quotient) -> tuple[float, np.ndarray]:
    x = x0 / np.linalg.norm(x0)
    q = quotient(x)
    for _ in range(EIG_MAXITER):
        y = step(x)
        x = y / np.linalg.norm(y)
        q_new = quotient(x)
        if abs(q_new - q) <= EIG_TOL * abs(q_new):
            return q_new, x
        q = q_new
    raise RuntimeError("eigenvalue iteration did not converge")


def poincare_lambda(mesh: Mesh, return_vector: bool = False):
    """Smallest eigenvalue of (K + B) u = lambda M u, by inverse iteration.

    Discrete counterpart of lambda * int u^2 <= int |u'|^2 + sum_Gamma u^2.
    """
    A = (mesh.stiffness + mesh.boundary_mass()).tocsr()
    ab = mesh.banded(A)
    M = mesh.mass
    # the constant vector is close to the lowest mode
    x0 = np.ones(mesh.n) + 1e-3 * np.cos(np.pi * mesh.x / mesh.L)
    lam, x = _iterate(lambda x: solve_banded((1, 1), ab, M @ x), x0,
                      lambda x: rayleigh(A, M, x))
    return (lam, x) if return_vector else lam


def trace_constant(mesh: Mesh, return_vector: bool = False):
    """Largest C with sum_Gamma u^2 <= C ||u||_1^2 attained, by power iteration."""
    A = (mesh.stiffness + mesh.mass).tocsr()
    ab = mesh.banded(A)
    B = mesh.boundary_mass()
    x0 = solve_banded((1, 1), ab, np.ones(mesh.n))
    C, x = _iterate(lambda x: solve_banded((1, 1), ab, B @ x), x0,
                    lambda x: rayleigh(B, A, x))
    return (C, x) if return_vector else C


def sup_embedding_constant(mesh: Mesh) -> float:
    """Smallest c with max_i u_i^2 <= c ||u||_1^2, i.e. max diag of (K + M)^-1."""
    ab = mesh.banded(mesh.stiffness + mesh.mass)
    G = solve_banded((1, 1), ab, np.eye(mesh.n))
    return float(np.max(np.diag(G)))
