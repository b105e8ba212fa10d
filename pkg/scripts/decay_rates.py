"""Fitted decay (omega, Q, P) of the split's decaying part versus eps.

The rates are measured and printed only; no asymptotic order is asserted.
"""
from __future__ import annotations

import argparse

from acoustic_lab.attractor import make_seeds, seed_state
from acoustic_lab.diagnostics import fit_decay
from acoustic_lab.integrator import Stepper, run_split
from acoustic_lab.mesh import build_mesh
from acoustic_lab.model import make_nonlinearity, norm_Heps


def cli():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=101)
    ap.add_argument("--T", type=float, default=30.0)
    ap.add_argument("--eps", type=float, nargs="+", default=[1.0, 0.3, 0.1, 0.03, 0.01])
    args = ap.parse_args()
    mesh = build_mesh(args.n)
    nl = make_nonlinearity("double_well", k=1.0)
    base = make_seeds(mesh, 1, 5.0, rng_seed=0)[0]
    print(f"{'eps':>6} {'omega':>9} {'Q':>9} {'P':>10} {'rms':>9} flagged")
    for eps in args.eps:
        sr = run_split(Stepper(mesh, nl, "acoustic", eps=eps), seed_state(base, eps), args.T, 0.1)
        fit = fit_decay([s.t for s in sr.xi], [norm_Heps(mesh, s) for s in sr.xi])
        print(f"{eps:6g} {fit.omega:9.4f} {fit.Q:9.4f} {fit.P:10.3e} {fit.rms_residual:9.2e} "
              f"{fit.flagged}")


if __name__ == "__main__":
    cli()
