"""Averaged Hessian decomposition on the Klein bottle T^2 / <(x, y) -> (x + 1/2, -y)>."""
import numpy as np

from koszul.forms import FlatTorusSpace, PQForm, random_form
from koszul.hessian import MetricField
from koszul.quotient import AffineAutomorphism, average, close_group, decompose_on_quotient


def main():
    rng = np.random.default_rng(1)
    G = close_group([AffineAutomorphism([[1, 0], [0, -1]], ["1/2", "0"])])
    print(f"group order {G.order}, free action: {G.free}")
    S = FlatTorusSpace.identity(2, 2)
    f = average(G, random_form(S, 0, 0, rng, real=True, scale=0.004, decay=0.3))
    f = f - PQForm.constant(S, 0, 0, f.zero_mode().real)
    g = MetricField.from_potential(S, np.diag([2.0, 3.0]), f)
    dec = decompose_on_quotient(g, G)
    for key, value in sorted(dec.to_json().items()):
        print(f"  {key}: {value}")


if __name__ == "__main__":
    main()
