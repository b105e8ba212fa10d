"""Energy ledgers and numerical verifiers for the dissipative structure."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .model import (FunctionalConstants, State, lyapunov_E_eps, multiplier_functional,
                    norm_Heps_sq)

LEDGER_COLUMNS = ("t", "E_base", "E_eps", "diss_interior", "diss_boundary",
                  "identity_residual", "utt_boundary_sq", "E_mult")


@dataclass
class EnergyLedger:
    """Rows recorded at the sample cadence of a run.

    identity_residual is the largest per-step residual of the energy identity
    in rate form, (E^{n+1} - E^n)/dt + 2 D_mid, over the steps since the
    previous row. utt_boundary_sq comes from second differences of the stored
    boundary trace of u. E_mult is multiplier_functional, the form of the
    perturbed energy used by check_diff_inequality.
    """
    eta: float = 0.0
    mode: str = ""
    dt: float = 0.0
    t: list = field(default_factory=list)
    E_base: list = field(default_factory=list)
    E_eps: list = field(default_factory=list)
    E_mult: list = field(default_factory=list)
    diss_interior: list = field(default_factory=list)
    diss_boundary: list = field(default_factory=list)
    identity_residual: list = field(default_factory=list)
    norm_sq: list = field(default_factory=list)
    trace_u: list = field(default_factory=list)

    def add(self, stp, st: State, residual: float) -> None:
        m = stp.mesh
        if self.t and not st.t > self.t[-1]:
            raise ValueError("ledger times must increase strictly")
        self.mode = stp.bc_mode
        self.dt = stp.dt
        self.t.append(st.t)
        self.E_base.append(stp.energy(st))
        self.E_eps.append(lyapunov_E_eps(m, stp.nl, self.eta, st))
        self.E_mult.append(multiplier_functional(m, stp.nl, self.eta, st))
        self.diss_interior.append(float(st.v @ (m.mass @ st.v)))
        if stp.bc_mode == "acoustic":
            self.diss_boundary.append(float(st.gamma @ st.gamma))
        else:
            tr = m.trace(st.v)
            self.diss_boundary.append(float(tr @ tr))
        self.identity_residual.append(float(residual))
        self.norm_sq.append(norm_Heps_sq(m, st))
        self.trace_u.append(m.trace(st.u))

    def __len__(self) -> int:
        return len(self.t)

    @property
    def utt_boundary_sq(self) -> np.ndarray:
        t = np.asarray(self.t)
        tr = np.asarray(self.trace_u)
        if len(t) < 3:
            return np.zeros(len(t))
        utt = np.empty_like(tr)
        for j in range(2):
            utt[:, j] = np.gradient(np.gradient(tr[:, j], t), t)
        return np.sum(utt**2, axis=1)

    @property
    def norm(self) -> np.ndarray:
        return np.sqrt(np.asarray(self.norm_sq))

    def columns(self) -> dict[str, np.ndarray]:
        cols = {name: np.asarray(getattr(self, name), dtype=float) for name in LEDGER_COLUMNS
                if name != "utt_boundary_sq"}
        cols["utt_boundary_sq"] = self.utt_boundary_sq
        return {name: cols[name] for name in LEDGER_COLUMNS}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(LEDGER_COLUMNS)
        cols = self.columns()
        for i in range(len(self)):
            w.writerow([repr(float(cols[c][i])) for c in LEDGER_COLUMNS])
        return buf.getvalue()


def max_step_residual(ledger: EnergyLedger) -> float:
    """Largest per-step residual of the energy identity (not divided by dt)."""
    return float(np.max(np.abs(ledger.identity_residual))) * ledger.dt


# --- differential inequality ------------------------------------------------

@dataclass
class InequalityReport:
    max_violation: float
    tol: float
    t_worst: float

    @property
    def ok(self) -> bool:
        return self.max_violation <= self.tol


def check_diff_inequality(ledger: EnergyLedger, fc: FunctionalConstants,
                          m1: Optional[float] = None, M1: Optional[float] = None) -> InequalityReport:
    """max_t [dE/dt + m1 ||zeta||^2 - M1] along a recorded run, E = E_mult.

    Centered differences inside, one-sided at the ends; tolerance 10*dt of
    the run. The ledger must have been recorded with eta = fc.eta1.
    """
    if len(ledger) < 3:
        raise ValueError("need at least 3 ledger samples")
    if not math.isclose(ledger.eta, fc.eta1, rel_tol=1e-12):
        raise ValueError("ledger eta does not match fc.eta1")
    t = np.asarray(ledger.t)
    dE = np.gradient(np.asarray(ledger.E_mult), t)
    m1 = fc.m1 if m1 is None else m1
    M1 = fc.M1 if M1 is None else M1
    viol = dE + m1 * np.asarray(ledger.norm_sq) - M1
    i = int(np.argmax(viol))
    return InequalityReport(float(viol[i]), 10 * ledger.dt, float(t[i]))


# --- exponential fit ----------------------------------------------------------

@dataclass
class DecayFit:
    Q: float
    omega: float
    P: float
    rms_residual: float
    flagged: bool = False


def fit_decay(t: Sequence[float], y: Sequence[float], tail: float = 0.1,
              floor_tol: float = 1e-3) -> DecayFit:
    """Fit y ~ Q exp(-omega t) + P.

    P is the mean of the last `tail` fraction; the log of y - P is regressed
    on t over the transient where y - P still exceeds floor_tol of its start.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.size < 8 or t.size != y.size:
        raise ValueError("need at least 8 (t, y) samples")
    if np.any(y < 0):
        raise ValueError("series must be nonnegative")
    k = max(2, int(math.ceil(tail * t.size)))
    P = float(np.mean(y[-k:]))
    z = y - P
    scale = max(abs(z[0]), 1e-300)
    flat = np.max(np.abs(z)) <= 1e-12 * max(1.0, abs(P))
    if flat:
        return DecayFit(Q=0.0, omega=float("nan"), P=P, rms_residual=0.0, flagged=True)
    tail_y = y[-k:]
    flagged = bool(np.ptp(tail_y) > 0.05 * max(abs(P), np.max(np.abs(z))))
    mask = z > floor_tol * scale
    # first contiguous run of the transient
    stop = int(np.argmin(mask)) if not mask.all() else mask.size
    if stop < 3:
        return DecayFit(Q=float(z[0]), omega=float("nan"), P=P,
                        rms_residual=float(np.sqrt(np.mean(z**2))), flagged=True)
    slope, icpt = np.polyfit(t[:stop], np.log(z[:stop]), 1)
    Q, omega = float(math.exp(icpt)), float(-slope)
    pred = Q * np.exp(-omega * t) + P
    rms = float(np.sqrt(np.mean((pred - y) ** 2)))
    return DecayFit(Q=Q, omega=omega, P=P, rms_residual=rms, flagged=flagged or not omega > 0)


# --- Gronwall-type lemma ----------------------------------------------------

class GronwallPreconditionError(ValueError):
    pass


@dataclass
class GronwallResult:
    holds: bool
    margin: float


def _cumtrapz(t: np.ndarray, h: np.ndarray) -> np.ndarray:
    return np.concatenate([[0.0], np.cumsum(np.diff(t) * (h[1:] + h[:-1]) / 2)])


def verify_gronwall(t: Sequence[float], Lam: Sequence[float], h: Sequence[float],
                    eta: float, k: float, m: float, tol: float = 1e-12) -> GronwallResult:
    """Check Lam(t) <= Lam(0) e^m e^{-eta t} + k e^m / eta on every sample.

    The hypothesis int_s^t h <= eta (t - s) + m is checked first over all
    sample windows; failing it raises GronwallPreconditionError.
    """
    t = np.asarray(t, dtype=float)
    Lam = np.asarray(Lam, dtype=float)
    h = np.asarray(h, dtype=float)
    H = _cumtrapz(t, h)
    # max over s <= t of (H(t) - eta t) - (H(s) - eta s)
    g = H - eta * t
    worst = np.max(g - np.minimum.accumulate(g))
    if worst > m + tol:
        raise GronwallPreconditionError(
            f"int h exceeds eta*(t-s) + m by {worst - m:.3g} on some window")
    bound = Lam[0] * math.exp(m) * np.exp(-eta * t) + k * math.exp(m) / eta
    slack = bound - Lam
    margin = float(np.min(slack))
    return GronwallResult(holds=margin >= -tol, margin=margin)


# --- absorbing ball ------------------------------------------------------------

@dataclass
class EntryReport:
    entry_time: Optional[float]
    t1_theory: float

    @property
    def within_theory(self) -> bool:
        return self.entry_time is not None and self.entry_time <= self.t1_theory


def verify_abs_entry(ledger: EnergyLedger, R1: float, t1_bound: float) -> EntryReport:
    """First sample time after which ||zeta(t)|| <= R1 for the rest of the ledger."""
    r = ledger.norm
    t = np.asarray(ledger.t)
    outside = np.nonzero(r > R1)[0]
    if outside.size == 0:
        return EntryReport(float(t[0]), t1_bound)
    last = int(outside[-1])
    if last == len(t) - 1:
        return EntryReport(None, t1_bound)
    return EntryReport(float(t[last + 1]), t1_bound)


def small_ball_sup(fc: FunctionalConstants, kappa_f: float) -> float:
    """Upper bound of E_mult on the ball m1 ||zeta||^2 <= M1 + iota, iota = 2 m_star.

    r^2 = (M1 + iota)/m1; E_eps <= C2 r (1 + r^3) there and the multiplier
    cross terms add at most (eta1 + eta1^2) r^2.
    """
    r2 = (fc.M1 + 2 * fc.m_star) / fc.m1
    r = math.sqrt(r2)
    return fc.C2 * r * (1 + r**3) + (fc.eta1 + fc.eta1**2) * r2


@dataclass
class EventualReport:
    t_from: float
    t1: float
    bound: float
    max_E: float

    @property
    def ok(self) -> bool:
        return self.max_E <= self.bound


def eventual_energy_bound(ledger: EnergyLedger, fc: FunctionalConstants, kappa_f: float,
                          R: float, tail: float = 0.1) -> EventualReport:
    """E_mult(t) <= small_ball_sup for the recorded t >= t1(R).

    When t1(R) lies beyond the ledger, the last `tail` fraction of the
    samples stands in for the eventual regime.
    """
    t1 = fc.entry_time(R, kappa_f)
    t = np.asarray(ledger.t)
    t_from = min(t1, t[0] + (1 - tail) * (t[-1] - t[0]))
    E = np.asarray(ledger.E_mult)[t >= t_from]
    return EventualReport(float(t_from), t1, small_ball_sup(fc, kappa_f), float(np.max(E)))


# --- boundary acceleration ------------------------------------------------------

def utt_boundary_integral(ledger: EnergyLedger) -> np.ndarray:
    """Cumulative trapezoid integral of ||u_tt||^2_Gamma along the ledger."""
    return _cumtrapz(np.asarray(ledger.t), ledger.utt_boundary_sq)


def saturation_ratio(t: np.ndarray, I: np.ndarray, window: float = 0.2) -> float:
    """Mean slope over the last `window` fraction divided by the peak slope."""
    t = np.asarray(t)
    I = np.asarray(I)
    slope = np.gradient(I, t)
    peak = float(np.max(slope))
    if peak <= 0:
        return 0.0
    start = int((1 - window) * len(t))
    tail_slope = (I[-1] - I[start]) / (t[-1] - t[start])
    return float(tail_slope / peak)


def gronwall_dissipation_offset(t: np.ndarray, integrand: np.ndarray, eta: float) -> float:
    """Smallest Q with int_s^t integrand <= eta/2 (t - s) + Q on all windows (reported only)."""
    g = _cumtrapz(np.asarray(t), np.asarray(integrand)) - eta / 2 * np.asarray(t)
    return float(max(0.0, np.max(g - np.minimum.accumulate(g))))
