"""Run verify_kunneth over every bidegree of several product tori."""
import argparse
import time

from koszul.kunneth import ProductSpace, verify_kunneth

PRODUCTS = [(1, 1), (1, 2), (2, 1), (2, 2), (1, 3)]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--bandwidth", type=int, default=1)
    args = ap.parse_args()
    for m, n in PRODUCTS:
        prod = ProductSpace.identity(m, n, args.bandwidth)
        t0 = time.perf_counter()
        reps = [verify_kunneth(prod, p, q) for p in range(m + n + 1) for q in range(m + n + 1)]
        worst = max(r["max_projection_residual"] for r in reps)
        bad = [(r["p"], r["q"]) for r in reps if not r["pass"]]
        status = "pass" if not bad else f"FAIL at {bad}"
        print(f"T^{m} x T^{n}: {len(reps)} bidegrees, worst residual {worst:.1e}, {status} ({time.perf_counter() - t0:.2f}s)")


if __name__ == "__main__":
    main()
