"""From a filtered (phi, N)-module to the Breuil module of a lattice inside it.

    python demos/filtered_lattices.py
"""
from fractions import Fraction as F

from kisinbreuil import EisensteinData, PrecisionProfile, get_ring
from kisinbreuil.filtered import (FilteredPhiNModule, LatticeCandidate, build_DD,
                                  dual_filtered, extract_module, invariants, lattice_check,
                                  predicate_summary, wa_report)
from kisinbreuil.literals import matrix_literal, parse_matrix


def main():
    ctx = EisensteinData(3, 1, (-3, 1))
    ring = get_ring(ctx, PrecisionProfile.default(ctx, 6))

    # phi = diag(1, 3) with the Hodge line on the slope-one eigenvector
    D = FilteredPhiNModule(ctx, [[F(1), F(0)], [F(0), F(3)]], [[F(0)] * 2, [F(0)] * 2],
                           [(1, [[(F(0),), (F(1),)]])], r=1)
    print("t_H, t_N:", invariants(D))
    print("weak admissibility:", wa_report(D, search=True))
    print("dual invariants:", invariants(dual_filtered(D, 1)))

    # moving the Hodge line onto the unit-root line breaks admissibility
    bad = FilteredPhiNModule(ctx, D.phi, D.n, [(1, [[(F(1),), (F(0),)]])], r=1)
    print("\nwrong Hodge line, weakly admissible?", wa_report(bad, search=True)["wa"])

    DD = build_DD(D, ring)
    L = LatticeCandidate(parse_matrix(ring, [["1", "0"], ["0", "1"]]))
    for mode in ("quasi", "strong", "n_in_sigma"):
        rep = lattice_check(DD, L, mode)
        print(f"\n{mode}: passed={rep['passed']} axioms={rep['axioms']}")

    L9 = LatticeCandidate(L.basis, parse_matrix(ring, [["0", "gamma(9)"], ["0", "0"]]))
    rep = lattice_check(DD, L9, "n_in_sigma")
    print(f"\nmonodromy entry gamma(9): passed={rep['passed']} witness={rep['witness']}")

    M = extract_module(DD, L)
    print("\nextracted Breuil matrix:", matrix_literal(M.A))
    print("D-side vs module-side verdicts:", predicate_summary(DD, L))


if __name__ == "__main__":
    main()
