"""Semilinear modules over Frak, Sigma and S.

Conventions.  For Kisin modules (tag Frak) the matrix A gives phi(e) = A e.
For Sigma- and S-modules A is the Breuil matrix: alpha = A e generates Fil^r
modulo Fil^p, and e = phi_r(alpha) / c^r.  In both cases the witness A' solves
A A' = E^r Id.  Vectors of basis elements are columns, so rows of a matrix
are coordinates of one new basis element.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from . import zpn
from .errors import NotFiniteHeight, ShapeMismatch
from .padic_core import vp_factorial
from .rings import (FRAK, RingTag, E_power, det, fact, fil_degree, height_witness,
                    identity, invert, mat_add, mat_eq, mat_inverse, mat_is_zero, mat_map,
                    mat_mul, mat_phi, mat_scale, mat_sub, phi_r, transpose)


def truncate_fil(A, k):
    """Drop the coordinates of index >= k, i.e. reduce entries modulo Fil^k S."""
    e = A[0][0].ring.e if A and A[0] else 1
    return [[a._new(a.coords[:k * e] + (0,) * max(len(a.coords) - k * e, 0),
                    a.pv[:k] + (a.ring.N,) * max(a.depth - k, 0), a.depth, a.tag)
             for a in row] for row in A]


@dataclass
class SemilinearModule:
    ring: object
    tag: RingTag
    r: int
    A: list
    witness: list = None
    label: str = ""

    def __post_init__(self):
        if self.witness is None and self.A:
            try:
                self.witness = height_witness(self.A, self.r)
            except NotFiniteHeight:
                if self.kisin:
                    raise
                # Breuil modules only need E^r e in S alpha + Fil^p S M
                self.witness = height_witness(truncate_fil(self.A, self.ring.p + 1), self.r)
                if not self.check_witness():
                    raise
        if self.witness is None:
            self.witness = []

    @property
    def d(self):
        return len(self.A)

    @property
    def kisin(self):
        return self.tag.kind == FRAK

    def frobenius_matrix(self):
        """Matrix of phi on the basis e."""
        if self.kisin:
            return self.A
        W = mat_phi(self.witness)
        F = self.witness_defect()
        if mat_is_zero(F):
            return W
        # c^r phi(e) = phi_r(E^r e) = c^r phi(A') e - phi_r(F) phi(e)
        cr_inv = invert(self.ring.c() ** self.r)
        G = mat_scale(mat_map(lambda a: phi_r(a, self.r), F), cr_inv)
        return mat_mul(mat_inverse(mat_add(identity(self.ring, self.d), G)), W)

    def witness_defect(self):
        """F = A'A - E^r Id; zero except for S-modules without an exact witness."""
        Er = E_power(self.ring, self.r)
        return mat_sub(mat_mul(self.witness, self.A), mat_scale(identity(self.ring, self.d), Er))

    def check_witness(self):
        if not self.A:
            return True
        F = self.witness_defect()
        if self.kisin:
            return mat_is_zero(F)
        # coordinates past the tracked depth are outside the truncation anyway
        return all(fil_degree(a) >= min(self.ring.p + 1, a.depth) for row in F for a in row)


@dataclass
class FittingResult:
    unit_rank: int
    nil_rank: int
    base_change: list = field(default_factory=list)


def make_module(ring, tag, r, A, witness=None, label=""):
    if isinstance(tag, int):
        tag = RingTag(tag)
    if tag.mod_p:
        A = mat_map(lambda a: a.reduce_prec(1), A)
        if witness is not None:
            witness = mat_map(lambda a: a.reduce_prec(1), witness)
    return SemilinearModule(ring, tag, r, A, witness, label)


def classify(M):
    """{etale, multiplicative} from unit tests on det A and det A'."""
    if M.d == 0:
        return {"etale": True, "multiplicative": True}
    dA = det(M.A).is_unit()
    dW = det(M.witness).is_unit()
    if M.kisin:
        return {"etale": dW, "multiplicative": dA}
    return {"etale": dA, "multiplicative": dW}


def in_convergence_ideal(x, K, pk):
    """x in (p^pk, Fil^K) on the coordinates we know; False if precision is too low."""
    m = x.ring.p ** pk
    e = x.ring.e
    for i in range(min(K, x.depth)):
        if x.pv[i] < pk:
            return False
        if any(a % m for a in x.coords[i * e:(i + 1) * e]):
            return False
    return True


def _product_orders(M, mode):
    """(matrix, multiply-on-right?) for the twisted product deciding the verdict."""
    if M.kisin:
        if mode == "nilpotent":
            return M.A, False
        return M.witness, True
    if mode == "unipotent":
        return M.A, True
    return M.witness, False


def convergence_verdict(M, mode, max_steps=None):
    """Iterate the twisted Frobenius product until it enters the convergence ideal."""
    if mode not in ("unipotent", "nilpotent"):
        raise ValueError("mode must be unipotent or nilpotent")
    ring = M.ring
    prof = ring.prof
    K = prof.conv_order
    pk = 1 if M.tag.mod_p else min(prof.N, K)
    out = {"mode": mode, "conv_order": K, "p_power": pk}
    if M.d == 0:
        out.update(verdict="holds", step=0, precision=prof.N)
        return out
    steps = max_steps or K * M.d
    X, right = _product_orders(M, mode)
    Q = mat_phi(X) if M.tag.mod_p else X
    P = Q
    # step counts the Frobenius twists: the product has step + 1 factors
    for step in range(steps + 1):
        if step:
            Q = mat_phi(Q)
            P = mat_mul(P, Q) if right else mat_mul(Q, P)
        if all(in_convergence_ideal(a, K, pk) for row in P for a in row):
            out.update(verdict="holds", step=step, precision=min(a.reported_prec for row in P for a in row))
            return out
    out.update(verdict="fails", step=steps, precision=min(a.reported_prec for row in P for a in row))
    return out


def cartier_dual(M):
    """Dual module: matrix (A')^T, witness A^T."""
    return SemilinearModule(M.ring, M.tag, M.r, transpose(M.witness), transpose(M.A),
                            (M.label + "^dual") if M.label else "")


def eval_at_zero(x, N=None):
    """x(u=0) in Z/p^N; coordinates contribute a_i(0) E(0)^i / i!."""
    ring = x.ring
    p = ring.p
    # coordinate i contributes a_i E(0)^i / i!, which gains i - v_p(i!)
    n = min(ring.target if N is None else N, ring.bound(x.tag, x.depth))
    for i, v in enumerate(x.pv):
        n = min(n, v + i - vp_factorial(p, i))
    m = p ** n
    if m == 1:
        return 0
    E0 = ring.E[0]
    acc = 0
    for i in range(x.depth):
        a = x.coords[i * ring.e]
        if not a:
            continue
        f = fact(i)
        v = 0
        while f % p == 0:
            f //= p
            v += 1
        num = E0 ** i
        acc += a * (num // p ** v) * pow(f, -1, m)
    return acc % m


def fitting_decomposition(phi0, p, N):
    """Unit/nil split of (Z/p^N)^d under phi0 (acting on column vectors)."""
    d = len(phi0)
    if d == 0:
        return FittingResult(0, 0, [])
    m = p ** N
    F = zpn.mat_pow_mod(phi0, d * N, m)
    img, ker = zpn.column_image_kernel(F, p, N)
    cols = img + ker
    base = [[cols[j][i] for j in range(d)] for i in range(d)]
    return FittingResult(len(img), len(ker), base)


def phi0_matrix(M):
    """Constant term of the Frobenius matrix, acting on coordinate columns."""
    X = M.A if M.kisin else M.witness
    N = 1 if M.tag.mod_p else M.ring.target
    # phi(v e) = phi(v) X e for row vectors v; the linear map on columns is X^T
    return [[eval_at_zero(X[j][i], N) for j in range(M.d)] for i in range(M.d)]


def _const_matrix(ring, rows):
    return [[ring.const(a) for a in row] for row in rows]


def max_multiplicative(M, max_steps=None):
    """(rank, Q, M^m): rows of Q give a basis f = Q e of the maximal multiplicative submodule."""
    ring = M.ring
    d = M.d
    if d == 0:
        return 0, [], SemilinearModule(ring, M.tag, M.r, [], [])
    p = ring.p
    N = 1 if M.tag.mod_p else ring.target
    fit = fitting_decomposition(phi0_matrix(M), p, N)
    mr = fit.unit_rank
    if mr == 0:
        return 0, [], SemilinearModule(ring, M.tag, M.r, [], [])
    B = zpn.transpose(fit.base_change)
    Bel = _const_matrix(ring, zpn.inverse_mod(B, p, N))
    Fm = M.frobenius_matrix()
    # iterate f -> phi(f), normalised on the unit coordinates
    Q = _const_matrix(ring, B[:mr])
    steps = max_steps or ring.prof.conv_order * d * ring.target
    for _ in range(steps):
        nxt = mat_mul(mat_phi(Q), Fm)
        lead = [row[:mr] for row in mat_mul(nxt, Bel)]
        nxt = mat_mul(mat_inverse(lead), nxt)
        if mat_eq(nxt, Q):
            Q = nxt
            break
        Q = nxt
    T = _restricted_frobenius(M, Q, Bel, mr)
    if M.kisin:
        sub = SemilinearModule(ring, M.tag, M.r, T, mat_scale(mat_inverse(T), E_power(ring, M.r)))
    else:
        sub = SemilinearModule(ring, M.tag, M.r, mat_scale(mat_inverse(T), E_power(ring, M.r)), T)
    return mr, Q, sub


def _restricted_frobenius(M, Q, Pel, mr):
    """T with phi(f) = T f for f = Q e."""
    img = mat_mul(mat_phi(Q), M.frobenius_matrix())
    coords_img = mat_mul(img, Pel)
    coords_Q = mat_mul(Q, Pel)
    lead_img = [row[:mr] for row in coords_img]
    lead_Q = [row[:mr] for row in coords_Q]
    return mat_mul(lead_img, mat_inverse(lead_Q))


def _complement_rows(M, mr):
    ring = M.ring
    p = ring.p
    N = 1 if M.tag.mod_p else ring.target
    fit = fitting_decomposition(phi0_matrix(M), p, N)
    return _const_matrix(ring, zpn.transpose(fit.base_change)[mr:])


def _adapted(M, Q, mr):
    """Change basis so that the first mr basis vectors span M^m; returns (A_new, A'_new)."""
    C = _complement_rows(M, mr)
    if M.kisin:
        G = Q + C
        Anew = mat_mul(mat_mul(mat_phi(G), M.A), mat_inverse(G))
        Wnew = mat_mul(mat_mul(G, M.witness), mat_inverse(mat_phi(G)))
        return Anew, Wnew
    W = mat_mul(Q, M.witness) + C
    Anew = mat_mul(mat_mul(W, M.A), mat_inverse(mat_phi(W)))
    Wnew = mat_mul(mat_mul(mat_phi(W), M.witness), mat_inverse(W))
    return Anew, Wnew


def _block(X, lo, hi):
    return [row[lo:hi] for row in X[lo:hi]]


def quotient_by_mm(M):
    """(rank of M^m, M^m, M / M^m)."""
    ring = M.ring
    mr, Q, sub = max_multiplicative(M)
    d = M.d
    if mr == 0:
        return 0, sub, M
    if mr == d:
        return mr, sub, SemilinearModule(ring, M.tag, M.r, [], [])
    Anew, Wnew = _adapted(M, Q, mr)
    quo = SemilinearModule(ring, M.tag, M.r, _block(Anew, mr, d), _block(Wnew, mr, d))
    return mr, sub, quo


def canonical_sequences(M):
    """(M^m, M^nil, M^uni, M^et) together with their ranks."""
    _, mm, nil = quotient_by_mm(M)
    Md = cartier_dual(M)
    _, dmm, dnil = quotient_by_mm(Md)
    uni = cartier_dual(dnil)
    et = cartier_dual(dmm)
    ranks = (mm.d, nil.d, uni.d, et.d)
    return {"m": mm, "nil": nil, "uni": uni, "et": et, "ranks": ranks}


def verify_morphism(M1, M2, T):
    """T (d1 x d2) sends e^1 to T e^2; check Frobenius compatibility and Fil^r."""
    if M1.tag.kind != M2.tag.kind or M1.r != M2.r:
        raise ShapeMismatch("modules have different tags or weights")
    if len(T) != M1.d or any(len(row) != M2.d for row in T):
        raise ShapeMismatch(f"T must be {M1.d} x {M2.d}")
    if M1.d == 0 or M2.d == 0:
        return True
    if M1.kisin:
        return mat_eq(mat_mul(M1.A, T), mat_mul(mat_phi(T), M2.A))
    lhs = mat_mul(mat_phi(M1.witness), T)
    rhs = mat_mul(mat_phi(T), mat_phi(M2.witness))
    if not mat_eq(lhs, rhs):
        return False
    X = mat_mul(mat_mul(M1.A, T), M2.witness)
    return all(fil_degree(a) >= M1.r for row in X for a in row)
