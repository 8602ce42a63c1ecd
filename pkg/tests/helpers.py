"""Random module generators and independent oracles shared by the tests."""
from __future__ import annotations

import random

from kisinbreuil.modules import SemilinearModule
from kisinbreuil.padic_core import EisensteinData
from kisinbreuil.rings import (FRAK, SIGMA, E_power, PrecisionProfile, RingTag, get_ring,
                               identity, mat_inverse, mat_map, mat_mul, mat_phi)

CONTEXTS = {
    (3, 1): (-3, 1),
    (2, 1): (-2, 1),
    (2, 2): (-2, 0, 1),
    (3, 2): (-3, 0, 1),
    (5, 1): (-5, 1),
    (5, 2): (-5, 0, 1),
}


def ring_for(p, e=1, N=6, I=None, conv_order=None):
    ctx = EisensteinData(p, e, CONTEXTS[(p, e)])
    if I is None:
        prof = PrecisionProfile.default(ctx, N, conv_order)
    else:
        prof = PrecisionProfile(N, I, e * I, conv_order or N)
    return get_ring(ctx, prof)


def rand_poly(ring, rng, deg=2):
    m = ring.p ** ring.target
    return ring.from_poly([rng.randrange(m) for _ in range(deg * ring.e + 1)])


def rand_unimodular(ring, rng, d, deg=2):
    """Permutation times unit-triangular times triangular with unit diagonal, over Frak."""
    p = ring.p
    L = [[ring.one() if i == j else (rand_poly(ring, rng, deg) if i > j else ring.zero())
          for j in range(d)] for i in range(d)]
    U = [[ring.const(rng.randrange(1, p)) if i == j else
          (rand_poly(ring, rng, deg) if i < j else ring.zero()) for j in range(d)] for i in range(d)]
    perm = list(range(d))
    rng.shuffle(perm)
    Pm = [[ring.one() if perm[i] == j else ring.zero() for j in range(d)] for i in range(d)]
    return mat_mul(Pm, mat_mul(L, U))


def rand_kisin(ring, rng, d, r, exps=None):
    """Kisin module A = G diag(E^k) H with witness H^-1 diag(E^(r-k)) G^-1."""
    exps = exps if exps is not None else [rng.randint(0, r) for _ in range(d)]
    G = rand_unimodular(ring, rng, d)
    H = rand_unimodular(ring, rng, d)
    D = [[E_power(ring, exps[i]) if i == j else ring.zero() for j in range(d)] for i in range(d)]
    Dp = [[E_power(ring, r - exps[i]) if i == j else ring.zero() for j in range(d)] for i in range(d)]
    A = mat_mul(mat_mul(G, D), H)
    Ap = mat_mul(mat_mul(mat_inverse(H), Dp), mat_inverse(G))
    return SemilinearModule(ring, RingTag(FRAK), r, A, Ap)


def rand_sigma_unit_matrix(ring, rng, d, density=0.7):
    """Id plus random multiples of Y = E^p/p: invertible over Sigma, not over Frak."""
    Y = ring.Y()
    out = identity(ring, d)
    for i in range(d):
        for j in range(d):
            if rng.random() < density:
                out[i][j] = out[i][j] + rand_poly(ring, rng, 1) * Y
    return mat_map(lambda a: a.with_tag(SIGMA), out)


def breuil_base_change(M, Yb, tag=None):
    """Change generators alpha -> Yb alpha; then e -> phi(Yb) e."""
    A = mat_mul(mat_mul(Yb, M.A), mat_inverse(mat_phi(Yb)))
    W = mat_mul(mat_mul(mat_phi(Yb), M.witness), mat_inverse(Yb))
    return SemilinearModule(M.ring, tag or M.tag, M.r, A, W)


def rand_breuil(ring, rng, d, r, tag=SIGMA):
    """Breuil module over Sigma: a Kisin witness conjugated by a random Sigma base change."""
    K = rand_kisin(ring, rng, d, r)
    base = SemilinearModule(ring, RingTag(tag), r, K.witness, K.A)
    return breuil_base_change(base, rand_sigma_unit_matrix(ring, rng, d), RingTag(tag))


def seeded(seed):
    return random.Random(seed)


def rand_filtered(ctx, rng, d=None, r=None):
    """Random valid filtered (phi, N)-module: a monodromy chain conjugated by a rational matrix."""
    from fractions import Fraction

    from kisinbreuil import qlinalg as Q
    from kisinbreuil.filtered import FilteredPhiNModule

    p, e = ctx.p, ctx.e
    d = d or rng.randint(1, 3)
    r = rng.randint(1, 3) if r is None else r
    lam = [Fraction(p ** rng.randint(0, 3) * rng.choice([1, -1, 2, 5, 7]), rng.choice([1, 7, 11]))
           for _ in range(d)]
    n = [[Fraction(0)] * d for _ in range(d)]
    # phi N = p N phi on the diagonal model needs lam_i = p lam_j wherever N_ij != 0
    for i in reversed(range(d - 1)):
        if rng.random() < 0.5:
            lam[i] = p * lam[i + 1]
            n[i][i + 1] = Fraction(rng.randint(1, 4))
    phi0 = [[lam[i] if i == j else Fraction(0) for j in range(d)] for i in range(d)]
    while True:
        P = [[Fraction(rng.randint(-3, 3)) for _ in range(d)] for _ in range(d)]
        if Q.det(P):
            break
    Pi = Q.inverse(P)
    phi_ = Q.mat_mul(Q.mat_mul(P, phi0), Pi)
    n_ = Q.mat_mul(Q.mat_mul(P, n), Pi)
    jumps = []
    for i in sorted(rng.sample(range(1, r + 1), rng.randint(0, r))):
        vecs = [[tuple(Fraction(rng.randint(-3, 3)) for _ in range(e)) for _ in range(d)]
                for _ in range(rng.randint(1, d))]
        jumps.append((i, vecs))
    return FilteredPhiNModule(ctx, phi_, n_, jumps, r)
