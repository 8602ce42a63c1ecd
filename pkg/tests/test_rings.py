import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import ring_for
from kisinbreuil.errors import NotDivisible, NotInFiltration, NotUnit, ProfileError
from kisinbreuil.literals import parse_element, to_literal
from kisinbreuil.padic_core import EisensteinData
from kisinbreuil.rings import (FRAK, S, SIGMA, E_power, PrecisionProfile, canonicalize,
                               compute_c, decompose, divide_exact, fil_degree, invert,
                               membership, monodromy, phi, phi_r, quotient_poly)
from oracles import c_oracle

R3 = ring_for(3, 1, 6)


def coords_of(x, n=None):
    """Integer coordinates mod p^n (n defaults to the profile target)."""
    n = x.ring.target if n is None else n
    m = x.ring.p ** n
    return [a % m for a in x.coords]


def lit(ring, text):
    return parse_element(ring, text)


# -- canonical form ---------------------------------------------------------


def test_canonicalize_E():
    assert R3.E_elem().coeff_dict() == {1: 1}


def test_canonicalize_u():
    assert R3.u().coeff_dict() == {0: 3, 1: 1}


def test_canonicalize_cubic():
    R = ring_for(3, 1, 4)
    x = canonicalize(R, [-3, 0, 0, 1])
    assert x.coeff_dict() == {0: 24, 1: 27, 2: 18, 3: 6}


def test_canonicalize_idempotent():
    x = canonicalize(R3, [5, 0, 7, 1])
    assert canonicalize(R3, x) is x


# -- c and phi --------------------------------------------------------------


def test_c_frozen_value():
    assert to_literal(R3.c()) == "8 + 9*gamma(1) + 6*gamma(2) + 2*gamma(3)"
    assert to_literal(ring_for(2, 1, 6).c()) == "1 + 2*gamma(1) + gamma(2)"


@pytest.mark.parametrize("p,e", [(3, 1), (2, 1), (2, 2), (3, 2)])
def test_c_matches_binomial_oracle(p, e):
    R = ring_for(p, e, 6)
    c = compute_c(R.ctx, R.prof)
    want = c_oracle(p, list(R.ctx.E_coeffs), 6)
    got = coords_of(c)
    assert got[:len(want)] == want
    assert not any(got[len(want):])
    assert c.is_unit()


def test_phi_examples():
    assert phi(R3.one()).eq(R3.one())
    assert phi(R3.E_elem()).eq(R3.c() * 3)
    assert phi(R3.u()).coeff_dict() == {0: 27, 1: 27, 2: 18, 3: 6}


def test_monodromy_examples():
    m = R3.p ** R3.target
    assert monodromy(R3.one()).is_zero()
    assert monodromy(R3.u()).eq(-R3.u())
    assert coords_of(monodromy(R3.u()))[:2] == [m - 3, m - 1]
    n2 = monodromy(R3.gamma(2))
    assert n2.eq(-(R3.u() * R3.gamma(1)))
    assert coords_of(n2)[:3] == [0, m - 3, m - 2]


def test_fil_degree_examples():
    assert fil_degree(R3.gamma(3)) == 3
    assert fil_degree(R3.one()) == 0
    assert fil_degree(R3.const(3)) == 0


def test_quotient_description():
    # E^2 + 5 in W[u]/(E^2) is 5
    x = E_power(R3, 2) + 5
    assert quotient_poly(x, 2) == [5]
    assert quotient_poly(R3.u(), 1) == [3]


def test_phi_r_examples():
    assert phi_r(R3.E_elem(), 1).eq(R3.c())
    assert phi_r(E_power(R3, 2), 2).eq(R3.c() ** 2)
    u3 = R3.u() ** 3
    assert phi_r(R3.u() * R3.gamma(1), 1).eq(u3 * R3.c())
    with pytest.raises(NotInFiltration):
        phi_r(R3.u(), 1)


def test_invert_examples():
    assert invert(R3.one()).eq(R3.one())
    c = R3.c()
    assert (invert(c) * c).eq(R3.one())
    assert (invert(c) * c).reported_prec == R3.target
    with pytest.raises(NotUnit):
        invert(R3.u())


def test_divide_exact_examples():
    assert divide_exact(phi(R3.E_elem()), ("p", 1)).eq(R3.c())
    assert divide_exact(R3.E_elem() * R3.gamma(1), ("E", 1)).eq(R3.gamma(1))
    with pytest.raises(NotDivisible):
        divide_exact(R3.one(), ("p", 1))


# -- membership -------------------------------------------------------------


@pytest.mark.parametrize("p", [2, 3])
def test_membership_examples(p):
    R = ring_for(p, 1, 6, 12)
    assert membership(R.gamma(p), SIGMA)
    assert not membership(R.gamma(p * p), SIGMA)
    assert not membership(R.gamma(p), FRAK)
    assert membership(R.u() ** 5, FRAK)


def test_fil_sigma_generators():
    # Fil^i Sigma = (E^i, Y): Y lies in every Fil^i Sigma with i <= p - 1
    p = 3
    Y = R3.Y()
    for i in range(p):
        assert fil_degree(Y) >= i and membership(Y, SIGMA)
        assert fil_degree(E_power(R3, i) * R3.u()) >= i


# -- decompositions ---------------------------------------------------------


def test_s_split():
    x = R3.c()
    b, d = decompose(x, "s_split")
    assert b.eq(x) and d.is_zero()
    R = ring_for(3, 1, 6, 12)
    g = R.gamma(9)
    b, d = decompose(g, "s_split")
    assert b.is_zero() and d.eq(g)


def test_c_split():
    t, y = decompose(R3.c(), "c_split")
    assert to_literal(t) == "8 + 9*gamma(1) + 6*gamma(2)"
    assert to_literal(y) == "2*gamma(3)"
    assert membership(t, FRAK)


def test_sigma_bcd_sums_back():
    x = lit(R3, "1 + u*gamma(1) + 4*gamma(3) + 9*gamma(4) + 27*gamma(6)")
    b, c, d = decompose(x, "sigma_bcd")
    assert membership(b, FRAK) and membership(c, FRAK)
    assert fil_degree(d) >= 4
    assert (b + c * R3.Y() + d).eq(x)


# -- precision profiles -----------------------------------------------------


def test_profile_checks():
    ctx = EisensteinData(3, 1, (-3, 1))
    with pytest.raises(ProfileError):
        PrecisionProfile(6, 4, 4, 4).check(ctx)
    with pytest.raises(ProfileError):
        PrecisionProfile(6, 10, 5, 6).check(ctx)
    with pytest.raises(ProfileError, match="raise I"):
        PrecisionProfile(30, 6, 6, 6).check(ctx)
    prof = PrecisionProfile.default(ctx, 6)
    assert prof.phi_bound(3) >= 6


def test_p2_profile_uses_larger_I():
    ctx = EisensteinData(2, 1, (-2, 1))
    assert PrecisionProfile.default(ctx, 6).I > PrecisionProfile.default(
        EisensteinData(3, 1, (-3, 1)), 6).I


# -- literals ---------------------------------------------------------------


@pytest.mark.parametrize("text", ["8 + 9*gamma(1) + 6*gamma(2) + 2*gamma(3)", "u^2 - 3*u",
                                  "Y^2 + E", "(u + 1)*gamma(4)"])
def test_literal_round_trip(text):
    x = lit(R3, text)
    assert lit(R3, to_literal(x)).eq(x)


# -- properties -------------------------------------------------------------

CTX = [(2, 1), (3, 1), (3, 2), (5, 1)]


def rand_elem(ring, seed_coords, start=0):
    m = ring.p ** ring.target
    n = ring.I * ring.e
    coords = [(seed_coords[i % len(seed_coords)] * (i + 7)) % m for i in range(n)]
    for i in range(start * ring.e):
        coords[i] = 0
    return ring.elem(coords, tag=S)


elem_seeds = st.lists(st.integers(0, 10**9), min_size=1, max_size=8)


@settings(max_examples=40, deadline=None)
@given(pe=st.sampled_from(CTX), a=elem_seeds, b=elem_seeds)
def test_phi_is_multiplicative(pe, a, b):
    R = ring_for(*pe, N=5)
    x, y = rand_elem(R, a), rand_elem(R, b)
    assert phi(x * y).eq(phi(x) * phi(y))
    assert phi(x + y).eq(phi(x) + phi(y))


@settings(max_examples=40, deadline=None)
@given(pe=st.sampled_from(CTX), a=elem_seeds, b=elem_seeds)
def test_monodromy_is_derivation(pe, a, b):
    R = ring_for(*pe, N=5)
    x, y = rand_elem(R, a), rand_elem(R, b)
    assert monodromy(x * y).eq(monodromy(x) * y + x * monodromy(y))
    assert monodromy(phi(x)).eq(phi(monodromy(x)) * R.p)


@settings(max_examples=40, deadline=None)
@given(pe=st.sampled_from(CTX), a=elem_seeds, b=elem_seeds, i=st.integers(0, 3),
       j=st.integers(0, 3))
def test_filtration_is_multiplicative(pe, a, b, i, j):
    R = ring_for(*pe, N=5)
    x, y = rand_elem(R, a, i), rand_elem(R, b, j)
    assert fil_degree(x * y) >= min(i + j, (x * y).depth)


@settings(max_examples=40, deadline=None)
@given(pe=st.sampled_from(CTX), a=elem_seeds, data=st.data())
def test_phi_of_fil_is_divisible(pe, a, data):
    R = ring_for(*pe, N=5)
    j = data.draw(st.integers(1, R.p - 1)) if R.p > 2 else 1
    x = rand_elem(R, a, j)
    y = divide_exact(phi(x), ("p", j))
    assert (y * R.p ** j).eq(phi(x))


@settings(max_examples=40, deadline=None)
@given(pe=st.sampled_from(CTX), a=elem_seeds)
def test_invert_units(pe, a):
    R = ring_for(*pe, N=5)
    x = rand_elem(R, a)
    x = x + (1 - x.coords[0] % R.p)  # force a unit constant term
    assert (invert(x) * x).eq(R.one())


def test_phi_r_kills_high_filtration_mod_p():
    for p in (2, 3, 5):
        R = ring_for(p, 1, 6)
        for i in range(p + 1, min(2 * p + 1, R.I)):
            for r in range(p):
                assert phi_r(R.gamma(i), r).reduce_prec(1).is_zero()
