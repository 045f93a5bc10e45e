"""Random g0 + Hess f round trips through decompose_on_torus.

Prints one line per case: dimension, bandwidth, certificate status and the
recovery errors for the flat part and the potential.
"""
import argparse

import numpy as np

from koszul.forms import FlatTorusSpace, PQForm, random_form
from koszul.hessian import MetricField, certify_spd, decompose_on_torus, default_resolution, hessian_of
from koszul.operators import norm


def case(rng, n, B, amplitude):
    S = FlatTorusSpace.identity(n, B)
    A = rng.normal(size=(n, n)) * 0.4
    flat = 2 * (np.eye(n) + A @ A.T)
    f = random_form(S, 0, 0, rng, real=True, decay=0.3)
    f = f - PQForm.constant(S, 0, 0, f.zero_mode().real)
    f = f * (amplitude / norm(hessian_of(f)))
    g = MetricField.from_potential(S, flat, f)
    while not certify_spd(g, default_resolution(S)).certified:
        f = f * 0.5
        g = MetricField.from_potential(S, flat, f)
    return flat, f, g


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--cases", type=int, default=12)
    ap.add_argument("--amplitude", type=float, default=0.3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    print(f"{'n':>2} {'B':>2} {'status':>12} {'margin':>9} {'|flat err|':>10} {'|f err|':>9} {'residual':>9}")
    for i in range(args.cases):
        n, B = 1 + i % 3, 1 + (i // 3) % 3
        flat, f, g = case(rng, n, B, args.amplitude)
        dec = decompose_on_torus(g)
        cert = dec.spd_certificate
        print(
            f"{n:>2} {B:>2} {cert.status:>12} {cert.margin:9.3f} {np.abs(dec.flat_part - flat).max():10.1e} "
            f"{norm(dec.potential - f):9.1e} {dec.residual:9.1e}"
        )


if __name__ == "__main__":
    main()
