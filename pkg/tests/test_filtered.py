from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import rand_filtered, ring_for, seeded
from kisinbreuil.errors import NotStableCandidate, ProfileOverflow
from kisinbreuil.filtered import (FilteredPhiNModule, LatticeCandidate, build_DD,
                                  dd_fil_member, dual_filtered, extract_module, invariants,
                                  lattice_check, parse_k, predicate_summary, same_filtration,
                                  sub_invariants, validate, wa_check, wa_report)
from kisinbreuil.literals import parse_matrix

R3 = ring_for(3, 1, 6)
CTX3 = R3.ctx


def K(*a):
    return tuple(F(x) for x in a)


def crystalline():
    """phi = diag(1, p), N = 0, Fil^1 spanned by the second basis vector."""
    return FilteredPhiNModule(CTX3, [[F(1), F(0)], [F(0), F(3)]], [[F(0)] * 2, [F(0)] * 2],
                              [(1, [[K(0), K(1)]])], r=1)


def identity_lattice(ring, d, n_matrix=None):
    rows = [["1" if i == j else "0" for j in range(d)] for i in range(d)]
    N = parse_matrix(ring, n_matrix) if n_matrix else None
    return LatticeCandidate(parse_matrix(ring, rows), N)


# -- validation and invariants ---------------------------------------------


def test_validate_examples():
    D = FilteredPhiNModule(CTX3, [[F(6), F(0)], [F(0), F(2)]], [[F(0), F(1)], [F(0), F(0)]])
    assert validate(D)
    bad = FilteredPhiNModule(CTX3, [[F(1), F(0)], [F(0), F(1)]], [[F(1), F(0)], [F(0), F(1)]])
    assert bad.problems() == ["N_phi_relation"]
    sing = FilteredPhiNModule(CTX3, [[F(0)]], [[F(0)]])
    assert "phi_injective" in sing.problems()
    high = FilteredPhiNModule(CTX3, [[F(1)]], [[F(0)]], [(3, [[K(1)]])], r=2)
    assert high.problems() == ["filtration_range"]


def test_invariants_examples():
    assert invariants(crystalline()) == (1, 1)
    D = FilteredPhiNModule(CTX3, [[F(9, 2)]], [[F(0)]], [(2, [[K(1)]])], r=2)
    assert invariants(D) == (2, 2)
    # fractional phi has negative valuation
    assert invariants(FilteredPhiNModule(CTX3, [[F(1, 3)]], [[F(0)]]))[1] == -1


def test_k_arithmetic_in_filtration():
    R = ring_for(3, 2, 6)
    E = [F(a) for a in R.ctx.E_coeffs]
    # u^2 = 3 in K, so u * u is the constant 3
    assert parse_k("u*u", E) == K(3, 0)
    D = FilteredPhiNModule(R.ctx, [[F(1), F(0)], [F(0), F(1)]], [[F(0)] * 2] * 2,
                           [(1, [[K(1, 0), K(0, 1)]])], r=1)
    assert D.fil_dim(1) == 1
    assert invariants(D) == (1, 0)


# -- weak admissibility -----------------------------------------------------


@pytest.mark.parametrize("h,want", [(0, False), (1, True), (2, False)])
def test_rank_one_wa(h, want):
    D = FilteredPhiNModule(CTX3, [[F(3)]], [[F(0)]], [(h, [[K(1)]])] if h else [], r=2)
    assert wa_check(D) is want


def test_wa_report_searches_eigenlines():
    rep = wa_report(crystalline(), search=True)
    assert rep["wa"] and not rep["heuristic"]
    assert [(s["t_H"], s["t_N"]) for s in rep["submodules"]] == [(0, 0), (1, 1)]
    # same D with Fil^1 on the phi = 1 line fails on that line
    D = FilteredPhiNModule(CTX3, crystalline().phi, crystalline().n, [(1, [[K(1), K(0)]])], r=1)
    assert not wa_check(D, search=True)


def test_scalar_phi_uses_heuristic_search():
    D = FilteredPhiNModule(CTX3, [[F(3), F(0)], [F(0), F(3)]], [[F(0)] * 2] * 2,
                           [(1, [[K(1), K(1)]])], r=1)
    rep = wa_report(D, search=True)
    assert rep["heuristic"] and not rep["wa"]


def test_unstable_candidate_rejected():
    with pytest.raises(NotStableCandidate):
        sub_invariants(crystalline(), [[F(1), F(1)]])


@pytest.mark.parametrize("p", [2, 3, 5])
def test_rank_one_wa_iff_jump_equals_slope(p):
    ctx = ring_for(p, 1, 4).ctx
    for s in range(4):
        for h in range(4):
            D = FilteredPhiNModule(ctx, [[F(p ** s * 7)]], [[F(0)]], [(h, [[K(1)]])] if h else [], r=3)
            assert wa_check(D) is (h == s)


# -- duality ----------------------------------------------------------------


def test_dual_example():
    D = crystalline()
    Dd = dual_filtered(D, 1)
    assert Dd.phi == [[F(3), F(0)], [F(0), F(1)]]
    assert Dd.jumps == [(1, [[K(1), K(0)]])]
    assert invariants(Dd) == (1, 1)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), pe=st.sampled_from([(2, 1), (3, 1), (3, 2), (5, 1), (2, 2)]))
def test_dual_identities(seed, pe):
    rng = seeded(seed)
    D = rand_filtered(ring_for(*pe, N=4).ctx, rng)
    assert validate(D)
    Dd = dual_filtered(D, D.r)
    assert validate(Dd)
    (th, tn), (thd, tnd) = invariants(D), invariants(Dd)
    assert th + thd == D.r * D.d
    assert tn + tnd == D.r * D.d
    back = dual_filtered(Dd, D.r)
    assert back.phi == D.phi and back.n == D.n and same_filtration(back, D)
    assert all(isinstance(a, F) for row in Dd.phi for a in row)


# -- the S-module DD ------------------------------------------------------


def test_dd_filtration_examples():
    D1 = FilteredPhiNModule(CTX3, [[F(3)]], [[F(0)]], [(1, [[K(1)]])], r=1)
    DD1 = build_DD(D1, R3)
    assert dd_fil_member(DD1, DD1.basis_element(0, R3.gamma(1)), 1)
    assert dd_fil_member(DD1, DD1.basis_element(0), 1)
    assert not dd_fil_member(DD1, DD1.basis_element(0), 2)
    D0 = FilteredPhiNModule(CTX3, [[F(1)]], [[F(0)]], [], r=1)
    DD0 = build_DD(D0, R3)
    assert not dd_fil_member(DD0, DD0.basis_element(0), 1)
    assert dd_fil_member(DD0, DD0.basis_element(0, R3.gamma(1)), 1)


def test_dd_frobenius_scales_by_phi_D():
    D1 = FilteredPhiNModule(CTX3, [[F(1, 3)]], [[F(0)]], [], r=1)
    DD1 = build_DD(D1, R3)
    x = DD1.phi(DD1.basis_element(0))
    assert x.shift == 1 and x.coeffs[0].eq(R3.one())


# -- lattices ---------------------------------------------------------------


def test_crystalline_lattice_passes():
    DD = build_DD(crystalline(), R3)
    L = identity_lattice(R3, 2)
    for mode in ("quasi", "strong", "n_in_sigma"):
        rep = lattice_check(DD, L, mode)
        assert rep["passed"] and rep["violated"] is None


def test_n_matrix_outside_sigma_is_flagged():
    DD = build_DD(crystalline(), R3)
    L = identity_lattice(R3, 2, [["0", "gamma(9)"], ["0", "0"]])
    rep = lattice_check(DD, L, "n_in_sigma")
    assert not rep["passed"]
    assert rep["violated"] == "n_in_sigma" and rep["witness"] == "gamma(9)"


def test_scaled_lattice_fails_phi_stability():
    # phi = 1/p does not preserve the standard lattice
    D = FilteredPhiNModule(CTX3, [[F(1, 3)]], [[F(0)]], [], r=1)
    rep = lattice_check(build_DD(D, R3), identity_lattice(R3, 1), "quasi")
    assert not rep["passed"] and rep["violated"] == "phi_stable"


def one(e):
    return (F(1),) + (F(0),) * (e - 1)


def zero(e):
    return (F(0),) * e


LIBRARY = [
    # (p, e, phi, jumps-builder, expected D verdicts)
    (3, 1, [[9]], lambda e: [(2, [[one(e)]])], (True, False)),
    (3, 1, [[1, 0], [0, 1]], lambda e: [], (False, True)),
    (2, 1, [[2, 0], [0, 2]], lambda e: [(1, [[one(e), zero(e)], [zero(e), one(e)]])], (True, False)),
    (2, 2, [[1, 0], [0, 2]], lambda e: [(1, [[zero(e), one(e)]])], (False, False)),
    (3, 2, [[1]], lambda e: [], (False, True)),
    (5, 1, [[625, 0], [0, 625]], lambda e: [(4, [[one(e), zero(e)], [zero(e), one(e)]])], (True, False)),
]


@pytest.mark.parametrize("p,e,phi,jumps,want", LIBRARY)
def test_predicates_transfer_to_extracted_module(p, e, phi, jumps, want):
    R = ring_for(p, e, 6, 12 if p == 5 else None)
    d = len(phi)
    r = p - 1
    D = FilteredPhiNModule(R.ctx, [[F(a) for a in row] for row in phi], [[F(0)] * d] * d,
                           jumps(e), r)
    DD = build_DD(D, R)
    L = identity_lattice(R, d)
    assert lattice_check(DD, L, "quasi")["passed"]
    Dside, Mside = predicate_summary(DD, L)
    assert (Dside["etale"], Dside["multiplicative"]) == want
    assert Dside == Mside
    M = extract_module(DD, L)
    assert M.check_witness()


def test_extraction_needs_room_in_the_profile():
    R = ring_for(5, 1, 6, 8)
    D = FilteredPhiNModule(R.ctx, [[F(1), F(0)], [F(0), F(1)]], [[F(0)] * 2] * 2, [], 4)
    with pytest.raises(ProfileOverflow, match="raise I"):
        extract_module(build_DD(D, R), identity_lattice(R, 2))
