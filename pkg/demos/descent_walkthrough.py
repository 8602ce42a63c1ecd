"""Walk a Kisin module through the Breuil functor, scramble it, and descend back.

    python demos/descent_walkthrough.py [p]
"""
import sys

from kisinbreuil import EisensteinData, PrecisionProfile, get_ring
from kisinbreuil.errors import NotUnipotent
from kisinbreuil.functors import breuil_to_kisin_descent, kisin_to_breuil
from kisinbreuil.literals import matrix_literal, parse_matrix
from kisinbreuil.modules import SemilinearModule, classify, convergence_verdict, make_module
from kisinbreuil.rings import FRAK, SIGMA, RingTag, mat_inverse, mat_mul, mat_phi


def show(title, M):
    print(f"{title} [{M.tag.name}, rank {M.d}, r={M.r}]")
    for row in matrix_literal(M.A):
        print("   ", row)


def main(p=3):
    ctx = EisensteinData(p, 1, (-p, 1))
    ring = get_ring(ctx, PrecisionProfile(6, 16, 16, 6))
    r = p - 1

    # neither etale nor multiplicative, but with no etale quotient
    K = make_module(ring, FRAK, r, parse_matrix(ring, [["u", "1"], [f"E^{r}", "0"]]))
    show("Kisin module", K)
    print("  classify:", classify(K))
    v = convergence_verdict(K, "unipotent")
    print(f"  unipotent: {v['verdict']} (step {v['step']}, precision {v['precision']})")

    M = kisin_to_breuil(K)
    show("\nBreuil module", M)

    # hide the Kisin structure behind a base change with entries in Sigma only
    Yb = parse_matrix(ring, [["1 + Y", "u*Y"], ["0", "1"]])
    A = mat_mul(mat_mul(Yb, M.A), mat_inverse(mat_phi(Yb)))
    W = mat_mul(mat_mul(mat_phi(Yb), M.witness), mat_inverse(Yb))
    hidden = SemilinearModule(ring, RingTag(SIGMA), r, A, W)
    show("\nafter a Sigma base change", hidden)

    res = breuil_to_kisin_descent(hidden)
    print(f"\ndescent: {res.steps} steps, divisibility reached at step {res.phase1_steps}")
    show("recovered Kisin module", res.module)
    print("  checks:", res.checks)

    # an etale quotient blocks the descent
    T = make_module(ring, FRAK, r, parse_matrix(ring, [["1", "u"], ["0", f"E^{r}"]]))
    try:
        breuil_to_kisin_descent(kisin_to_breuil(T))
    except NotUnipotent as exc:
        print("\nupper-triangular module with an etale quotient:", exc)


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 3)
