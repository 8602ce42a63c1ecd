"""Filtered (phi, N)-modules over Q_p, the S-module DD = S (x) D, and lattice checks.

D has a basis d_1..d_d.  Matrices act on rows: phi(d_j) = sum_l A[j][l] d_l and
likewise for N, so N phi = p phi N reads A N = p N A.  D_K = K^d with
K = Q[u]/E(u); the filtration is given by jumps [(i, vectors)], and Fil^i D_K
is spanned by the vectors of every jump at index >= i.
"""
from __future__ import annotations

import ast
import itertools
import threading
from dataclasses import dataclass, field
from fractions import Fraction

from . import qlinalg as Q
from .errors import NotALattice, NotStableCandidate, ParseError, ProfileOverflow
from .literals import to_literal
from .modules import SemilinearModule, classify
from .padic_core import vp
from .rings import (S, SIGMA, RingTag, E_power, adjugate, det, divide_exact, fil_degree, invert,
                    mat_inverse, mat_mul, mat_phi, membership, monodromy, phi, phi_r)

# -- the field K = Q[u]/E(u) --------------------------------------------------


def k_reduce(f, E):
    """Remainder of a rational polynomial modulo the monic E."""
    e = len(E) - 1
    f = [Fraction(a) for a in f]
    for k in range(len(f) - 1, e - 1, -1):
        a = f[k]
        if a:
            for j in range(e + 1):
                f[k - e + j] -= a * E[j]
    f = f[:e] + [Fraction(0)] * max(0, e - len(f))
    return tuple(f)


def k_mul(a, b, E):
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return k_reduce(out, E)


def k_mul_matrix(a, E):
    """Matrix of multiplication by a on the basis 1, u, ..., u^(e-1) (rows = images)."""
    e = len(E) - 1
    return [list(k_mul(tuple(int(i == s) for i in range(e)), a, E)) for s in range(e)]


def parse_k(text, E):
    """K-literal: rational polynomial in u, e.g. "1/2 + 3*u" or "u^2 - 1"."""
    src = str(text).replace("^", "**")
    try:
        node = ast.parse(src, mode="eval").body
    except SyntaxError as exc:
        raise ParseError(f"cannot parse K-literal {text!r}: {exc.msg}") from None
    return k_reduce(_k_eval(node, text), E)


def _k_eval(node, text):
    if isinstance(node, ast.Constant) and isinstance(node.value, int):
        return [Fraction(node.value)]
    if isinstance(node, ast.Name) and node.id == "u":
        return [Fraction(0), Fraction(1)]
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _k_eval(node.operand, text)
        return [-a for a in v] if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp):
        left = _k_eval(node.left, text)
        if isinstance(node.op, ast.Pow):
            if not (isinstance(node.right, ast.Constant) and isinstance(node.right.value, int)
                    and node.right.value >= 0):
                raise ParseError(f"exponents must be nonnegative integers in {text!r}")
            out = [Fraction(1)]
            for _ in range(node.right.value):
                out = _poly_mul(out, left)
            return out
        right = _k_eval(node.right, text)
        if isinstance(node.op, ast.Add):
            return _poly_add(left, right)
        if isinstance(node.op, ast.Sub):
            return _poly_add(left, [-a for a in right])
        if isinstance(node.op, ast.Mult):
            return _poly_mul(left, right)
        if isinstance(node.op, ast.Div):
            if len(right) != 1 or right[0] == 0:
                raise ParseError(f"only division by nonzero constants in {text!r}")
            return [a / right[0] for a in left]
    raise ParseError(f"unsupported syntax in K-literal {text!r}")


def _poly_add(a, b):
    n = max(len(a), len(b))
    return [(a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0) for i in range(n)]


def _poly_mul(a, b):
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


def k_literal(a):
    terms = []
    for k, x in enumerate(a):
        if not x:
            continue
        mono = "" if k == 0 else ("u" if k == 1 else f"u^{k}")
        coef = str(x)
        if not mono:
            terms.append(coef)
        else:
            terms.append(mono if x == 1 else f"{coef}*{mono}")
    return " + ".join(terms) if terms else "0"


def parse_rational(x):
    try:
        return Fraction(str(x))
    except (ValueError, ZeroDivisionError):
        raise ParseError(f"not a rational number: {x!r}") from None


# -- filtered (phi, N)-modules -------------------------------------------------


@dataclass
class FilteredPhiNModule:
    ctx: object
    phi: list
    n: list
    jumps: list = field(default_factory=list)
    r: int = None
    label: str = ""

    @property
    def d(self):
        return len(self.phi)

    @property
    def e(self):
        return self.ctx.e

    @property
    def E(self):
        return [Fraction(a) for a in self.ctx.E_coeffs]

    def flatten(self, vec):
        """D_K vector (d elements of K) -> Q^(de)."""
        return [a for x in vec for a in x]

    def k_span_rows(self, vectors):
        """Q-basis of the K-span of the given D_K vectors, as rows in Q^(de)."""
        rows = []
        E = self.E
        for v in vectors:
            for s in range(self.e):
                us = tuple(Fraction(int(i == s)) for i in range(self.e))
                rows.append(self.flatten([k_mul(us, x, E) for x in v]))
        return Q.row_basis(rows)

    def fil_vectors(self, i):
        if i <= 0:
            return [[tuple(Fraction(int(a == b and s == 0)) for s in range(self.e))
                     for b in range(self.d)] for a in range(self.d)]
        return [v for j, vs in self.jumps if j >= i for v in vs]

    def fil_rows(self, i):
        return self.k_span_rows(self.fil_vectors(i))

    def fil_dim(self, i):
        return len(self.fil_rows(i)) // self.e

    def top(self):
        return max((j for j, vs in self.jumps if vs), default=0)

    def problems(self):
        """Names of the violated axioms (empty when D is valid)."""
        out = []
        d = self.d
        if any(len(row) != d for row in self.phi) or len(self.n) != d or \
                any(len(row) != d for row in self.n):
            return ["square_matrices"]
        for j, vs in self.jumps:
            if any(len(v) != d for v in vs):
                return ["filtration_shape"]
        lhs = Q.mat_mul(self.phi, self.n)
        rhs = Q.mat_mul(self.n, self.phi)
        if any(a != self.ctx.p * b for ra, rb in zip(lhs, rhs) for a, b in zip(ra, rb)):
            out.append("N_phi_relation")
        if Q.det(self.phi) == 0:
            out.append("phi_injective")
        if any(j <= 0 for j, vs in self.jumps if vs):
            out.append("filtration_shape")
        elif self.r is not None and self.top() > self.r:
            out.append("filtration_range")
        return out


def validate(D):
    """True iff N phi = p phi N, phi is injective and the filtration has the right shape."""
    return not D.problems()


def t_N(D):
    return Q.fval(Q.det(D.phi), D.ctx.p) if D.d else 0


def t_H(D):
    return sum(D.fil_dim(i) for i in range(1, D.top() + 1))


def invariants(D):
    return t_H(D), t_N(D)


def _sub_phi(D, W, A):
    """Matrix of the restriction of A to the row space of W; None if not stable."""
    out = []
    for row in Q.mat_mul(W, A):
        c = Q.coordinates(W, row)
        if c is None:
            return None
        out.append(c)
    return out


def sub_invariants(D, W):
    """(t_H, t_N) of the submodule spanned by the rows of W with the induced filtration."""
    W = Q.row_basis([[Fraction(a) for a in row] for row in W])
    Aphi = _sub_phi(D, W, D.phi)
    if Aphi is None or _sub_phi(D, W, D.n) is None:
        raise NotStableCandidate("candidate is not stable under phi and N")
    k = len(W)
    sub_rows = D.k_span_rows([[tuple([a] + [Fraction(0)] * (D.e - 1)) for a in row] for row in W])
    th = 0
    for i in range(1, D.top() + 1):
        fil = D.fil_rows(i)
        both = len(Q.row_basis(sub_rows + fil)) if sub_rows or fil else 0
        th += (len(sub_rows) + len(fil) - both) // D.e
    tn = Q.fval(Q.det(Aphi), D.ctx.p) if k else 0
    return th, tn


def eigen_candidates(D, height=6):
    """Rank-1 (phi, N)-stable lines for d <= 2; heuristic box search when phi is scalar."""
    if D.d != 2:
        return [], False
    A = D.phi
    lines = []
    heuristic = False
    if A[0][1] == 0 and A[1][0] == 0 and A[0][0] == A[1][1]:
        heuristic = True
        seen = set()
        for a in range(-height, height + 1):
            for b in range(-height, height + 1):
                if (a, b) == (0, 0):
                    continue
                g = _gcd(a, b)
                key = (a // g, b // g) if (a, b) > (0, 0) else (-a // g, -b // g)
                if key in seen:
                    continue
                seen.add(key)
                lines.append([Fraction(key[0]), Fraction(key[1])])
    else:
        tr = A[0][0] + A[1][1]
        dt = Q.det(A)
        disc = tr * tr - 4 * dt
        root = _rational_sqrt(disc)
        if root is not None:
            for lam in {(tr + root) / 2, (tr - root) / 2}:
                M = [[A[0][0] - lam, A[0][1]], [A[1][0], A[1][1] - lam]]
                # left eigenvectors: v M = 0
                for v in Q.nullspace(Q.transpose(M), 2):
                    lines.append(v)
    out = []
    for v in lines:
        if _sub_phi(D, [v], D.phi) is not None and _sub_phi(D, [v], D.n) is not None:
            out.append([v])
    return out, heuristic


def _gcd(a, b):
    from math import gcd
    return gcd(a, b) or 1


def _rational_sqrt(x):
    from math import isqrt
    x = Fraction(x)
    if x < 0:
        return None
    n, d = isqrt(x.numerator), isqrt(x.denominator)
    if n * n == x.numerator and d * d == x.denominator:
        return Fraction(n, d)
    return None


def wa_report(D, submodules=(), search=False, height=6):
    """Weak admissibility relative to the supplied (phi, N)-stable subspaces."""
    th, tn = invariants(D)
    cands = [list(W) for W in submodules]
    heuristic = False
    if search:
        extra, heuristic = eigen_candidates(D, height)
        cands += extra
    subs = []
    ok = th == tn
    for W in cands:
        sh, sn = sub_invariants(D, W)
        subs.append({"t_H": sh, "t_N": sn, "ok": sh <= sn})
        ok = ok and sh <= sn
    return {"t_H": th, "t_N": tn, "wa": ok, "submodules": subs, "heuristic": heuristic}


def wa_check(D, submodules=(), search=False):
    return wa_report(D, submodules, search)["wa"]


def _perp_vectors(D, vectors):
    """K-basis of the annihilator of span(vectors) under the pairing sum x_j y_j."""
    E = D.E
    d, e = D.d, D.e
    rows = D.k_span_rows(vectors)
    # y in K^d pairs to zero with every row iff the trace-free condition holds coordinatewise:
    # solve over Q for y with sum_j x_j y_j = 0 in K for all x in the span
    conds = []
    for x in rows:
        xs = [tuple(x[j * e:(j + 1) * e]) for j in range(d)]
        # coefficient of u^t in sum_j x_j y_j, as a linear form in the coordinates of y
        for t in range(e):
            form = []
            for j in range(d):
                M = k_mul_matrix(xs[j], E)
                form.extend(M[s][t] for s in range(e))
            conds.append(form)
    basis = Q.nullspace(conds, d * e)
    return [[tuple(v[j * e:(j + 1) * e]) for j in range(d)] for v in basis]


def dual_filtered(D, r):
    """phi^dual = p^r (A^-1)^T, Fil^i = (Fil^(r+1-i))^perp, N^dual = -N^T."""
    p = D.ctx.p
    Ainv = Q.inverse(D.phi)
    phi_d = [[p ** r * a for a in row] for row in Q.transpose(Ainv)]
    n_d = [[-a for a in row] for row in Q.transpose(D.n)]
    jumps = []
    for i in range(1, r + 1):
        vs = _perp_vectors(D, D.fil_vectors(r + 1 - i))
        if vs:
            jumps.append((i, vs))
    return FilteredPhiNModule(D.ctx, phi_d, n_d, jumps, r, (D.label + "^dual") if D.label else "")


def same_filtration(D1, D2):
    top = max(D1.top(), D2.top())
    for i in range(1, top + 2):
        a, b = D1.fil_rows(i), D2.fil_rows(i)
        if len(a) != len(b) or Q.rank(a + b) != len(a):
            return False
    return True


# -- exact arithmetic in S[1/p] truncated along gamma_i ----------------------


def _exact_carry(ring, raw):
    """Canonical coordinates of sum raw[i](u) gamma_i, extending the depth until no carry is left."""
    depth = len(raw)
    while True:
        out, carry = ring._carry(raw, depth)
        if not any(carry):
            return out
        depth += 1
        raw = list(raw) + [[]]


def exact_monodromy(ring, coords):
    """N on exact rational coordinates (flat, e per gamma index)."""
    e = ring.e
    E = ring.E
    NE = [-k * a for k, a in enumerate(E)]
    depth = len(coords) // e
    raw = [[Fraction(0)] * (2 * e) for _ in range(depth)]
    for i in range(depth):
        for s in range(e):
            a = coords[i * e + s]
            if not a:
                continue
            raw[i][s] += -s * a
            if i:
                for t, b in enumerate(NE):
                    if b:
                        raw[i - 1][s + t] += a * b
    return _exact_carry(ring, raw)


def exact_mul(ring, a, b, depth):
    """Product of exact coordinate vectors, truncated to gamma indices below depth."""
    e = ring.e
    raw = [[Fraction(0)] * (2 * e - 1) for _ in range(depth)]
    da, db = len(a) // e, len(b) // e
    for i in range(min(da, depth)):
        ai = a[i * e:(i + 1) * e]
        if not any(ai):
            continue
        for j in range(min(db, depth - i)):
            bj = b[j * e:(j + 1) * e]
            if not any(bj):
                continue
            cf = _binom(i + j, i)
            for s, x in enumerate(ai):
                if x:
                    for t, y in enumerate(bj):
                        raw[i + j][s + t] += cf * x * y
    out, _ = ring._carry(raw, depth)
    return out


def _binom(n, k):
    from math import comb
    return comb(n, k)


# -- DD = S (x) D -------------------------------------------------------------


@dataclass
class DDElement:
    """p^(-shift) * sum_j coeffs[j] (x) d_j with coeffs in S."""

    coeffs: list
    shift: int = 0

    def exact(self):
        ring = self.coeffs[0].ring
        scale = Fraction(1, ring.p ** self.shift)
        return [[Fraction(a) * scale for a in c.coords] for c in self.coeffs]


def _integral(M, p):
    """(k, M_int) with M = p^(-k) M_int and M_int p-integral."""
    k = 0
    for row in M:
        for a in row:
            if a:
                k = max(k, -Q.fval(a, p))
    return k, [[a * p ** k for a in row] for row in M]


def _to_ring(ring, a):
    a = Fraction(a)
    m = ring.mod
    return ring.const(a.numerator * pow(a.denominator, -1, m) % m)


class BreuilDD:
    """S (x) D with phi = phi_S (x) phi_D, N = N (x) 1 + 1 (x) N and the recursive filtration."""

    def __init__(self, D, ring):
        self.D = D
        self.ring = ring
        p = ring.p
        self.phi_shift, phi_int = _integral(D.phi, p)
        self.n_shift, n_int = _integral(D.n, p)
        self.phi_int = [[_to_ring(ring, a) for a in row] for row in phi_int]
        self.n_int = [[_to_ring(ring, a) for a in row] for row in n_int]
        self._memo = {}
        self._lock = threading.Lock()
        self._ann = {}

    @property
    def d(self):
        return self.D.d

    def element(self, coeffs, shift=0):
        return DDElement(list(coeffs), shift)

    def basis_element(self, j, s=None):
        ring = self.ring
        s = ring.one() if s is None else s
        return DDElement([s if k == j else ring.zero() for k in range(self.d)])

    def phi(self, x):
        row = [phi(c) for c in x.coeffs]
        out = mat_mul([row], self.phi_int)[0]
        return DDElement(out, x.shift + self.phi_shift)

    def N(self, x):
        p = self.ring.p
        own = [monodromy(c) * p ** self.n_shift for c in x.coeffs]
        twist = mat_mul([x.coeffs], self.n_int)[0]
        return DDElement([a + b for a, b in zip(own, twist)], x.shift + self.n_shift)

    # exact side: vectors are lists (one per d_j) of rational coordinate lists

    def exact_N(self, v):
        ring = self.ring
        D = self.D
        e = ring.e
        own = [exact_monodromy(ring, c) for c in v]
        depth = max([len(c) for c in own] + [len(c) for c in v]) // e
        out = []
        for j in range(self.d):
            acc = _pad(own[j], depth * e)
            for l_ in range(self.d):
                a = D.n[l_][j]
                if a:
                    src = _pad(v[l_], depth * e)
                    acc = [x + a * y for x, y in zip(acc, src)]
            out.append(acc)
        return out

    def f_pi(self, v):
        """s(u) (x) d -> s(pi) d: only the gamma_0 coordinate survives."""
        e = self.ring.e
        return [tuple(_pad(c, e)[:e]) for c in v]

    def annihilator(self, i):
        """Linear forms on Q^(de) cutting out Fil^i D_K."""
        with self._lock:
            if i not in self._ann:
                rows = self.D.fil_rows(i)
                self._ann[i] = Q.nullspace(rows, self.d * self.D.e)
            return self._ann[i]

    def in_fil_DK(self, vec, i):
        flat = [a for x in vec for a in x]
        return all(sum((f * a for f, a in zip(form, flat)), Fraction(0)) == 0
                   for form in self.annihilator(i))

    def member_exact(self, v, i):
        if i <= 0:
            return True
        key = (tuple(tuple(c) for c in v), i)
        with self._lock:
            hit = self._memo.get(key)
        if hit is not None:
            return hit
        ok = self.in_fil_DK(self.f_pi(v), i) and self.member_exact(self.exact_N(v), i - 1)
        with self._lock:
            self._memo[key] = ok
        return ok

    def conditions(self, v, i):
        """Linear-form values whose vanishing is equivalent to v in Fil^i DD."""
        out = []
        for t in range(i):
            vec = self.f_pi(v)
            flat = [a for x in vec for a in x]
            for form in self.annihilator(i - t):
                out.append(sum((f * a for f, a in zip(form, flat)), Fraction(0)))
            v = self.exact_N(v)
        return out


def _pad(c, n):
    c = list(c)
    return c[:n] + [Fraction(0)] * max(0, n - len(c))


def build_DD(D, ring):
    return BreuilDD(D, ring)


def dd_fil_member(DD, x, i):
    """x in Fil^i DD: N(x) in Fil^(i-1) DD and f_pi(x) in Fil^i D_K."""
    v = x.exact() if isinstance(x, DDElement) else x
    return DD.member_exact(v, i)


# -- lattices -----------------------------------------------------------------


@dataclass
class LatticeCandidate:
    """Rows of `basis` express the lattice generators m_k in the basis 1 (x) d_j."""

    basis: list
    n_matrix: list = None
    label: str = ""


def _exact_row(x):
    return [Fraction(a) for a in x.coords]


class _Lattice:
    def __init__(self, DD, L, r):
        self.DD, self.L, self.r = DD, L, r
        ring = DD.ring
        self.ring = ring
        p, d = ring.p, DD.d
        D = det(L.basis)
        a0 = D.coords[0] if D.depth else 0
        if a0 == 0:
            raise NotALattice("basis matrix is not invertible over S[1/p]")
        k = vp(a0, p)
        try:
            y = divide_exact(D, ("p", k))
        except Exception:
            raise NotALattice("determinant is not a power of p times a unit") from None
        if not y.is_unit():
            raise NotALattice("determinant is not a power of p times a unit")
        self.k = k
        self.adj_scaled = [[a * invert(y) for a in row] for row in adjugate(L.basis)] if d > 1 \
            else [[invert(y)]]

    def to_lattice(self, M, shift):
        """M L^-1 / p^shift as an S-matrix; None if not integral."""
        T = mat_mul(M, self.adj_scaled)
        try:
            return [[divide_exact(a, ("p", self.k + shift)) for a in row] for row in T]
        except Exception:
            return None

    def kernel(self):
        """Z_(p)-basis of Fil^r M / Fil^r S M inside (S/Fil^r S)^d, plus the projection."""
        ring, DD, r = self.ring, self.DD, self.r
        d, e = DD.d, ring.e
        cols = []
        for k in range(d):
            Lk = [_exact_row(a) for a in self.L.basis[k]]
            for i in range(r):
                for s in range(e):
                    unit = [Fraction(0)] * ((i + 1) * e)
                    unit[i * e + s] = Fraction(1)
                    v = [exact_mul(ring, unit, c, r) for c in Lk]
                    cols.append(DD.conditions(v, r))
        n = len(cols)
        rows = Q.transpose(cols) if cols and cols[0] else []
        basis = Q.nullspace(rows, n) if rows else [[Fraction(int(i == j)) for j in range(n)]
                                                   for i in range(n)]
        if not basis:
            return [], Q.inverse([[Fraction(int(i == j)) for j in range(n)] for i in range(n)]) \
                if n else []
        return Q.saturate(basis, ring.p)

    def lift(self, vec):
        """Z_(p) coordinates (k, i, s) -> vector of S elements."""
        ring = self.ring
        d, e, r = self.DD.d, ring.e, self.r
        m = ring.mod
        out = []
        for k in range(d):
            coords = []
            for t in range(r * e):
                a = Fraction(vec[k * r * e + t])
                coords.append(a.numerator * pow(a.denominator, -1, m) % m)
            out.append(ring.elem(coords, tag=None))
        return out

    def reduce(self, vec):
        """Vector of S elements -> its coordinates (k, i, s) below Fil^r, as integers."""
        e, r = self.ring.e, self.r
        out = []
        for c in vec:
            out.extend(c.coords[i] if i < len(c.coords) else 0 for i in range(r * e))
        return out


def _row_mul(v, M):
    return mat_mul([v], M)[0]


def _vec_is_zero(v, prec):
    return all(a.is_zero(prec) for a in v)


def _first_literal(v):
    return [to_literal(a) for a in v]


def lattice_check(DD, L, mode="quasi", r=None):
    """Check a lattice candidate; the report names the first violated axiom and a witness."""
    if mode not in ("quasi", "strong", "n_in_sigma"):
        raise ValueError("mode must be quasi, strong or n_in_sigma")
    ring = DD.ring
    p = ring.p
    r = DD.D.r if r is None else r
    if r is None:
        r = DD.D.top()
    lat = _Lattice(DD, L, r)
    n = ring.target
    report = {"mode": mode, "r": r, "passed": False, "violated": None, "witness": None,
              "axioms": {}}

    def fail(name, witness=None):
        report["violated"] = name
        report["witness"] = witness
        report["axioms"][name] = False
        report["precision"] = n
        return report

    B = L.basis
    Phi_M = lat.to_lattice(mat_mul(mat_phi(B), DD.phi_int), DD.phi_shift)
    if Phi_M is None:
        return fail("phi_stable")
    report["axioms"]["phi_stable"] = True
    gens, W = lat.kernel()
    report["fil_r_rank"] = len(gens)
    lifts = [lat.lift(g) for g in gens]
    rhos = []
    for lam in lifts:
        v = _row_mul([phi(a) for a in lam], Phi_M)
        try:
            rhos.append([divide_exact(a, ("p", r)) for a in v])
        except Exception:
            return fail("phi_fil_divisible", _first_literal(lam))
    report["axioms"]["phi_fil_divisible"] = True
    # phi_r(Fil^r M) generates M: check modulo the maximal ideal (p, u, Fil^1)
    images = [list(v) for v in rhos]
    for i in range(r, ring.I):
        g = phi_r(ring.gamma(i), r)
        images.extend([[g * a for a in row] for row in Phi_M])
    resid = [[(a.coords[0] if a.depth else 0) % p for a in v] for v in images]
    if _rank_mod_p(resid, p) < DD.d:
        return fail("phi_r_generates")
    report["axioms"]["phi_r_generates"] = True
    if mode == "quasi":
        report["passed"] = True
        report["precision"] = min([ring.target] + [a.reported_prec for row in Phi_M for a in row])
        return report
    # monodromy
    NB = [[monodromy(a) * p ** DD.n_shift for a in row] for row in B]
    twist = mat_mul(B, DD.n_int)
    N_M = lat.to_lattice([[a + b for a, b in zip(ra, rb)] for ra, rb in zip(NB, twist)],
                         DD.n_shift)
    if mode == "n_in_sigma":
        mat = L.n_matrix if L.n_matrix is not None else N_M
        if mat is None:
            return fail("n_stable")
        for row in mat:
            for a in row:
                if not membership(a, SIGMA):
                    return fail("n_in_sigma", to_literal(a))
        report["axioms"]["n_in_sigma"] = True
        report["passed"] = True
        report["precision"] = min([n] + [a.reported_prec for row in mat for a in row])
        return report
    if N_M is None:
        return fail("n_stable")
    report["axioms"]["n_stable"] = True
    if L.n_matrix is not None:
        same = all(a.eq(b, n) for ra, rb in zip(L.n_matrix, N_M) for a, b in zip(ra, rb))
        if not same:
            return fail("n_matrix_consistent")
        report["axioms"]["n_matrix_consistent"] = True
    Eel = E_power(ring, 1)
    c = ring.c()
    k = len(gens)
    for lam, rho in zip(lifts, rhos):
        nl = [a + b for a, b in zip([monodromy(x) for x in lam], _row_mul(lam, N_M))]
        mu = [Eel * a for a in nl]
        coords = lat.reduce(mu)
        proj = Q.mat_mul([[Fraction(a) for a in coords]], W)[0][k:] if W else []
        if any(_frac_mod(a, p, n) for a in proj):
            return fail("EN_preserves_fil", _first_literal(mu))
        lhs = _row_mul([phi(a) for a in mu], Phi_M)
        lhs = [divide_exact(a, ("p", r)) for a in lhs]
        nr = [a + b for a, b in zip([monodromy(x) for x in rho], _row_mul(rho, N_M))]
        rhs = [c * a for a in nr]
        if not all(a.eq(b, n) for a, b in zip(lhs, rhs)):
            return fail("commuting_square", _first_literal(lam))
    report["axioms"]["EN_preserves_fil"] = True
    report["axioms"]["commuting_square"] = True
    report["passed"] = True
    report["precision"] = min([n] + [a.reported_prec for row in N_M for a in row])
    return report


def _frac_mod(a, p, n):
    """Nonzero residue of a p-integral rational modulo p^n?"""
    a = Fraction(a)
    m = p ** n
    return a.numerator * pow(a.denominator, -1, m) % m


def _rank_mod_p(rows, p):
    M = [list(r) for r in rows]
    rank = 0
    ncols = len(M[0]) if M else 0
    for c in range(ncols):
        piv = next((i for i in range(rank, len(M)) if M[i][c] % p), None)
        if piv is None:
            continue
        M[rank], M[piv] = M[piv], M[rank]
        inv = pow(M[rank][c], -1, p)
        for i in range(len(M)):
            if i != rank and M[i][c] % p:
                f = M[i][c] * inv % p
                M[i] = [(a - f * b) % p for a, b in zip(M[i], M[rank])]
        rank += 1
    return rank


def extract_module(DD, L, r=None, max_subsets=50000):
    """The Breuil module (M, Fil^r M, phi_r) of a quasi-strongly divisible lattice.

    Generators alpha of Fil^r M are searched among the Fil^r generators and their
    E-multiples; e = phi_r(alpha) / c^r then gives the Breuil matrix.
    """
    ring = DD.ring
    e = ring.e
    r = (DD.D.r if DD.D.r is not None else DD.D.top()) if r is None else r
    lat = _Lattice(DD, L, r)
    d = DD.d
    if r * d >= ring.I:
        raise ProfileOverflow(f"extraction needs I > r*d = {r * d}; raise I")
    Phi_M = lat.to_lattice(mat_mul(mat_phi(L.basis), DD.phi_int), DD.phi_shift)
    if Phi_M is None:
        raise NotALattice("lattice is not phi-stable")
    gens, W = lat.kernel()
    k = len(gens)
    lifts = [lat.lift(g) for g in gens]
    units = [[ring.one() if a == b else ring.zero() for b in range(d)] for a in range(d)]
    pool = list(lifts)
    for j in range(1, r + 1):
        Ej = E_power(ring, j)
        for v in lifts + units:
            w = [Ej * a for a in v]
            if _in_kernel(lat, W, k, w, ring.target):
                pool.append(w)
    want = d * r * e - k * 1
    tried = 0
    for combo in itertools.combinations(range(len(pool)), d):
        tried += 1
        if tried > max_subsets:
            break
        Am = [pool[i] for i in combo]
        dt = det(Am)
        s = fil_degree(dt)
        if s * e != want or s >= dt.depth:
            continue
        try:
            q = divide_exact(dt, ("E", s))
        except Exception:
            continue
        if not q.is_unit():
            continue
        if not _spans_kernel(lat, W, k, Am, ring):
            continue
        rows = [_row_mul([phi(a) for a in alpha], Phi_M) for alpha in Am]
        cr_inv = invert(ring.c() ** r)
        X = [[divide_exact(a, ("p", r)) * cr_inv for a in row] for row in rows]
        try:
            Xinv = mat_inverse(X)
        except Exception:
            continue
        A = mat_mul(Am, Xinv)
        return SemilinearModule(ring, RingTag(S), r, A, label=L.label)
    raise NotALattice("could not extract generators of Fil^r from the candidate pool")


def _in_kernel(lat, W, k, vec, prec):
    coords = lat.reduce(vec)
    if not W:
        return True
    proj = Q.mat_mul([[Fraction(a) for a in coords]], W)[0][k:]
    return not any(_frac_mod(a, lat.ring.p, prec) for a in proj)


def _spans_kernel(lat, W, k, Am, ring):
    """Do the S-multiples of the rows of Am reach all of Fil^r M modulo Fil^r S M?"""
    if k == 0:
        return all(_in_kernel(lat, W, k, v, ring.target) for v in Am)
    e, r, p = ring.e, lat.r, ring.p
    rows = []
    for v in Am:
        if not _in_kernel(lat, W, k, v, ring.target):
            return False
        for i in range(r):
            for s in range(e):
                g = ring.gamma(i, tuple(int(t == s) for t in range(e)))
                coords = lat.reduce([g * a for a in v])
                rows.append(Q.mat_mul([[Fraction(a) for a in coords]], W)[0][:k])
    resid = [[_frac_mod(a, p, 1) for a in row] for row in rows]
    return _rank_mod_p(resid, p) == k


def predicate_summary(DD, L):
    """(D-side verdicts, lattice-side verdicts) for etale / multiplicative."""
    D = DD.D
    r = D.r if D.r is not None else D.top()
    etale_D = D.fil_dim(r) == D.d
    mult_D = D.fil_dim(1) == 0
    M = extract_module(DD, L, r)
    cl = classify(M)
    return {"etale": etale_D, "multiplicative": mult_D}, cl
