"""The rings Frak = W(k)[[u]], Sigma and S in divided-power coordinates.

An element of S is written x = sum_i a_i(u) * gamma_i(E) with deg a_i < e and
gamma_i(E) = E^i / i!.  We keep a_i for i < depth, modulo p^prec.  The element
also carries a ring tag (Frak, Sigma or S): the value is a class of elements of
that ring whose coordinates below depth agree with ours modulo p^prec.  The tag
decides how much precision the Frobenius can guarantee after truncation.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass
from math import comb

from .errors import (NoWitness, NotDivisible, NotFiniteHeight, NotInFiltration,
                     NotInSourceRing, NotUnit, ProfileError, ProfileOverflow)
from .padic_core import EisensteinData, poly_divmod_int, poly_mul, vp, vp_factorial

FRAK, SIGMA, S = 0, 1, 2
TAG_NAMES = {FRAK: "Frak", SIGMA: "Sigma", S: "S"}
TAG_BY_NAME = {v: k for k, v in TAG_NAMES.items()}


@dataclass(frozen=True)
class RingTag:
    """Which ring an element or module lives over, plus the mod-p flag."""

    kind: int
    mod_p: bool = False

    @property
    def name(self):
        return TAG_NAMES[self.kind] + ("_1" if self.mod_p else "")


def sigma_threshold(p, i):
    """Minimal valuation of the i-th coordinate of an element of Sigma."""
    return vp_factorial(p, i) - i // p


def threshold(tag, p, i):
    if tag == FRAK:
        return vp_factorial(p, i)
    if tag == SIGMA:
        return sigma_threshold(p, i)
    return 0


def phi_gain(p, i):
    """v_p(phi(gamma_i(E))) = i - v_p(i!)."""
    return i - vp_factorial(p, i)


def phi_truncation_bound(tag, p, depth):
    """Lower bound for the valuation of phi applied to anything in Fil^depth of the tagged ring."""
    if tag == FRAK:
        return depth
    if tag == SIGMA:
        return depth - depth // p
    if p == 2:
        return 0 if depth == 0 else 1
    best = None
    i = depth
    while True:
        v = phi_gain(p, i)
        best = v if best is None else min(best, v)
        # i - v_p(i!) >= i(p-2)/(p-1) eventually exceeds the running minimum
        if i * (p - 2) >= best * (p - 1) + p:
            return best
        i += 1


@dataclass(frozen=True)
class PrecisionProfile:
    """Caps: p-adic order N, divided-power degree I, u-degree U, convergence order."""

    N: int
    I: int
    U: int
    conv_order: int

    def check(self, ctx: EisensteinData):
        p, e = ctx.p, ctx.e
        if self.N < 1:
            raise ProfileError("N must be >= 1")
        if self.I < p + 2:
            raise ProfileError(f"I={self.I} must be >= p+2={p + 2}")
        if self.U < e * self.I:
            raise ProfileError(f"U={self.U} must be >= e*I={e * self.I}")
        if not 1 <= self.conv_order <= self.I:
            raise ProfileError("conv_order must lie in [1, I]")
        b = self.phi_bound(p)
        if b < self.N:
            raise ProfileError(f"phi-truncation bound {b} < N={self.N}; raise I")
        return self

    def phi_bound(self, p):
        # for p = 2 the bound over all of S is 1, so the check uses Sigma
        tag = SIGMA if p == 2 else S
        return phi_truncation_bound(tag, p, self.I)

    @classmethod
    def default(cls, ctx, N, conv_order=None):
        I = ctx.p + 2
        while True:
            prof = cls(N, I, ctx.e * I, min(conv_order or N, I))
            if prof.phi_bound(ctx.p) >= N:
                return prof.check(ctx)
            I += 1

    def as_dict(self):
        return {"N": self.N, "I": self.I, "U": self.U, "conv_order": self.conv_order}


_RING_CACHE = {}
_RING_LOCK = threading.Lock()


def get_ring(ctx, prof):
    """Shared ring tables for (ctx, prof); creation is guarded by a lock."""
    key = (ctx, prof)
    with _RING_LOCK:
        ring = _RING_CACHE.get(key)
        if ring is None:
            ring = SRing(ctx, prof)
            _RING_CACHE[key] = ring
        return ring


class SRing:
    """Arithmetic tables for S/(p^N, Fil^I) in a fixed Eisenstein context."""

    def __init__(self, ctx: EisensteinData, prof: PrecisionProfile):
        prof.check(ctx)
        self.ctx = ctx
        self.prof = prof
        self.p, self.e, self.I = ctx.p, ctx.e, prof.I
        # literals are exact integers, so we may work with guard digits above
        # the profile precision; results are reported modulo p^target
        self.target = prof.N
        self.guard = 2 * vp_factorial(self.p, max(self.I - 1, 0)) + self.p
        self.N = self.target + self.guard
        self.mod = self.p ** self.N
        self.E = list(ctx.E_coeffs)
        self.binom = [[comb(k, i) for i in range(k + 1)] for k in range(self.I)]
        self.vbin = [[vp(b, self.p) for b in row] for row in self.binom]
        self.vint = [0] + [vp(k, self.p) for k in range(1, self.I + 1)]
        self.pows = [self.p ** k for k in range(self.N + 1)]
        self.thresholds = {t: [threshold(t, self.p, i) for i in range(self.I + 1)]
                           for t in (FRAK, SIGMA, S)}
        self._bounds = {}
        self._c = None
        self._phi_table = None
        self._phi_vals = None
        self._n_table = None
        self._n_vals = None
        self._lock = threading.Lock()

    # -- low level coordinate helpers -------------------------------------

    def _carry(self, raw, depth):
        """Reduce raw polynomials per gamma index into canonical form."""
        e, E = self.e, self.E
        out = []
        carry = []
        for i in range(depth):
            poly = raw[i] if i < len(raw) else []
            if carry:
                poly = list(poly) + [0] * max(0, len(carry) - len(poly))
                for k, a in enumerate(carry):
                    poly[k] += a
            q, r = poly_divmod_int(poly, E)
            r = list(r) + [0] * (e - len(r))
            out.extend(r[:e])
            carry = [(i + 1) * a for a in q] if any(q) else []
        return out, carry

    def canon_int_poly(self, f, depth=None, exact=False):
        """Integer polynomial in u -> flat gamma coordinates (exact integers)."""
        depth = self.I if depth is None else depth
        out, carry = self._carry([list(f)], depth)
        if exact and any(carry):
            raise ProfileOverflow("polynomial does not fit below the divided-power cap")
        return out

    def bound(self, tag, depth):
        key = (tag, depth)
        b = self._bounds.get(key)
        if b is None:
            b = phi_truncation_bound(tag, self.p, depth)
            self._bounds[key] = b
        return b

    def _pv(self, prec, depth):
        N = self.N
        if prec is None:
            return (N,) * depth
        if isinstance(prec, int):
            return (max(min(prec, N), 0),) * depth
        return tuple(max(min(v, N), 0) for v in prec[:depth])

    def _make(self, coords, prec, depth, tag):
        """Element with coordinates reduced mod p^pv_i."""
        pv = self._pv(prec, depth)
        e, pows = self.e, self.pows
        out = []
        for i, n in enumerate(pv):
            m = pows[n]
            out.extend(a % m for a in coords[i * e:(i + 1) * e])
        return SElement(self, tuple(out), pv, tag)

    def _mul_prec(self, pa, va, pb, vb, depth):
        """Precision of a product: the error of a_i b_j is bounded by the known valuations."""
        vbin = self.vbin
        N = self.N
        out = []
        for k in range(depth):
            best = N
            row = vbin[k]
            for i in range(k + 1):
                j = k - i
                t = pa[i] + vb[j]
                s = pb[j] + va[i]
                if s < t:
                    t = s
                t += row[i]
                if t < best:
                    best = t
            out.append(best)
        return out

    def elem(self, coords, prec=None, depth=None, tag=None):
        """Build an element; tag=None infers the smallest ring containing it."""
        depth = self.I if depth is None else depth
        coords = list(coords)[: depth * self.e]
        coords += [0] * (depth * self.e - len(coords))
        x = self._make(coords, prec, depth, S if tag is None else tag)
        if tag is None:
            if membership(x, FRAK):
                x.tag = FRAK
            elif membership(x, SIGMA):
                x.tag = SIGMA
        return x

    def zero(self, tag=FRAK):
        return SElement(self, (0,) * (self.I * self.e), (self.N,) * self.I, tag)

    def one(self):
        return self.const(1)

    def const(self, a, prec=None):
        c = [0] * (self.I * self.e)
        c[0] = a
        return self.elem(c, prec, tag=FRAK)

    def from_poly(self, f, prec=None):
        """Integer polynomial in u (low first) into canonical form."""
        if len(f) > self.prof.U:
            raise ProfileOverflow(f"u-degree {len(f) - 1} exceeds U={self.prof.U}")
        return self.elem(self.canon_int_poly(f), prec, tag=FRAK)

    def u(self):
        return self.from_poly([0, 1])

    def E_elem(self):
        return self.gamma(1)

    def gamma(self, i, poly=(1,)):
        """poly(u) * gamma_i(E); poly of degree < e."""
        if i >= self.I:
            raise ProfileOverflow(f"gamma({i}) exceeds I={self.I}")
        raw = [[] for _ in range(self.I)]
        raw[i] = list(poly)
        out, _ = self._carry(raw, self.I)
        return self.elem(out)

    def Y(self):
        """Y = E^p / p = (p-1)! gamma_p."""
        p = self.p
        return self.gamma(p) * fact(p - 1)

    # -- Frobenius and monodromy tables ----------------------------------

    def c(self):
        with self._lock:
            if self._c is None:
                p = self.p
                Eup = [0] * (p * self.e + 1)
                for k, a in enumerate(self.E):
                    Eup[p * k] = a
                exact = self.canon_int_poly(Eup, exact=True)
                if any(a % p for a in exact):
                    raise AssertionError("phi(E) is not divisible by p")
                self._c = self.elem([a // p for a in exact], tag=SIGMA)
            return self._c

    def _mul_int(self, a, b, depth, mod):
        """Product of flat integer coordinate vectors, reduced mod `mod`."""
        e = self.e
        raw = [[0] * (2 * e - 1) for _ in range(depth)]
        for i in range(depth):
            ai = a[i * e:(i + 1) * e]
            if not any(ai):
                continue
            for j in range(depth - i):
                bj = b[j * e:(j + 1) * e]
                if not any(bj):
                    continue
                cf = self.binom[i + j][i]
                slot = raw[i + j]
                for s_, x in enumerate(ai):
                    if x:
                        for t, y in enumerate(bj):
                            slot[s_ + t] += cf * x * y
        out, _ = self._carry(raw, depth)
        return [v % mod for v in out]

    def phi_table(self):
        """[i][k] = coordinates of phi(u^k gamma_i) = u^{pk} p^i c^i / i!, mod p^{N+p}.

        The extra p digits let phi_r divide by p^r without losing precision.
        """
        with self._lock:
            if self._phi_table is not None:
                return self._phi_table
        p, e, I = self.p, self.e, self.I
        wide = p ** (self.N + p)
        Eup = [0] * (p * e + 1)
        for k, a in enumerate(self.E):
            Eup[p * k] = a
        c = [a // p for a in self.canon_int_poly(Eup, exact=True)]
        upk = [self.canon_int_poly([0] * (p * k) + [1]) for k in range(e)]
        one = [1] + [0] * (I * e - 1)
        table = []
        cpow = one
        for i in range(I):
            if i:
                cpow = self._mul_int(cpow, c, I, wide)
            v = vp_factorial(p, i)
            unit = fact(i) // p ** v
            scal = p ** (i - v) * pow(unit, -1, wide) % wide
            gi = [a * scal % wide for a in cpow]
            table.append([tuple(self._mul_int(upk[k], gi, I, wide)) for k in range(e)])
        with self._lock:
            self._phi_table = table
        return table

    def n_table(self):
        with self._lock:
            if self._n_table is not None:
                return self._n_table
        e, I, E = self.e, self.I, self.E
        NE = [-k * a for k, a in enumerate(E)]  # -u E'(u)
        table = []
        for i in range(I):
            row = []
            for k in range(e):
                raw = [[] for _ in range(I)]
                mono = [0] * k + [1]
                raw[i] = [0] * k + [-k]
                if i:
                    raw[i - 1] = poly_mul(mono, NE)
                out, _ = self._carry(raw, I)
                row.append(tuple(a % self.mod for a in out))
            table.append(row)
        with self._lock:
            self._n_table = table
        return table

    def _table_vals(self, table, cap):
        e, I, p = self.e, self.I, self.p
        out = []
        for i in range(I):
            row = [cap] * I
            for k in range(e):
                vec = table[i][k]
                for t in range(I * e):
                    a = vec[t]
                    if a:
                        v = min(vp(a, p), cap)
                        if v < row[t // e]:
                            row[t // e] = v
            out.append(row)
        return out

    def phi_vals(self):
        """[i][t] = valuation of the gamma_t coordinate of phi(u^k gamma_i), min over k."""
        if self._phi_vals is None:
            self._phi_vals = self._table_vals(self.phi_table(), self.N + self.p)
        return self._phi_vals

    def n_vals(self):
        if self._n_vals is None:
            self._n_vals = self._table_vals(self.n_table(), self.N)
        return self._n_vals

    def phi_prec(self, x, skip=0):
        """Precision of phi(x) per output index: known part plus the truncated tail."""
        vals = self.phi_vals()
        th = self.thresholds[SIGMA]
        b = self.bound(x.tag, x.depth)
        out = []
        for t in range(self.I):
            best = b + th[t]
            for i in range(skip, x.depth):
                v = x.pv[i] + vals[i][t]
                if v < best:
                    best = v
            out.append(best)
        return out


def fact(n):
    out = 1
    for k in range(2, n + 1):
        out *= k
    return out


class SElement:
    """Element of S in divided-power coordinates with per-coordinate precision.

    Coordinate i is known modulo p^pv[i].  Tracking this per index matters
    because E-division costs precision only at the top indices while the
    Frobenius restores it there.
    """

    __slots__ = ("ring", "coords", "pv", "tag")

    def __init__(self, ring, coords, pv, tag):
        self.ring = ring
        self.coords = coords
        self.pv = pv
        self.tag = tag

    @property
    def depth(self):
        return len(self.pv)

    @property
    def prec(self):
        return min(self.pv) if self.pv else self.ring.N

    @property
    def reported_prec(self):
        return min(self.prec, self.ring.target)

    # -- access ------------------------------------------------------------

    def coeff(self, i):
        """a_i as a tuple of e integers (u^0 first)."""
        e = self.ring.e
        if i >= self.depth:
            return (0,) * e
        return self.coords[i * e:(i + 1) * e]

    def coeff_dict(self):
        """{i: a_i} for nonzero a_i, residues mod p^min(pv_i, target)."""
        out = {}
        p, t = self.ring.p, self.ring.target
        for i in range(self.depth):
            m = p ** min(self.pv[i], t)
            a = tuple(v % m for v in self.coeff(i))
            if any(a):
                out[i] = a[0] if self.ring.e == 1 else a
        return out

    def vals(self):
        """Per-index valuation of the known part, capped by the precision."""
        e, p = self.ring.e, self.ring.p
        out = []
        for i, n in enumerate(self.pv):
            best = n
            for a in self.coords[i * e:(i + 1) * e]:
                if a:
                    best = min(best, vp(a, p))
            out.append(best)
        return out

    def _new(self, coords, prec, depth, tag):
        return self.ring._make(coords, prec, depth, tag)

    def _lift(self, other):
        if isinstance(other, SElement):
            return other
        return self.ring.const(int(other))

    # -- ring operations ---------------------------------------------------

    def __add__(self, other):
        o = self._lift(other)
        depth = min(self.depth, o.depth)
        d = depth * self.ring.e
        c = [a + b for a, b in zip(self.coords[:d], o.coords[:d])]
        pv = [min(a, b) for a, b in zip(self.pv, o.pv)]
        return self._new(c, pv, depth, max(self.tag, o.tag))

    __radd__ = __add__

    def __neg__(self):
        return self._new([-a for a in self.coords], self.pv, self.depth, self.tag)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        ring = self.ring
        if not isinstance(other, SElement):
            k = int(other)
            if k == 0:
                return ring.zero(self.tag)
            v = vp(k, ring.p)
            return self._new([a * k for a in self.coords], [n + v for n in self.pv],
                             self.depth, self.tag)
        o = other
        e = ring.e
        depth = min(self.depth, o.depth)
        a, b = self.coords, o.coords
        binom = ring.binom
        tag = max(self.tag, o.tag)
        pv = ring._mul_prec(self.pv, self.vals(), o.pv, o.vals(), depth)
        if e == 1:
            nza = [(i, a[i]) for i in range(depth) if a[i]]
            nzb = [(j, b[j]) for j in range(depth) if b[j]]
            out = [0] * depth
            for i, x in nza:
                for j, y in nzb:
                    k = i + j
                    if k >= depth:
                        break
                    out[k] += binom[k][i] * x * y
            return self._new(out, pv, depth, tag)
        raw = [[0] * (2 * e - 1) for _ in range(depth)]
        for i in range(depth):
            ai = a[i * e:(i + 1) * e]
            if not any(ai):
                continue
            for j in range(depth - i):
                bj = b[j * e:(j + 1) * e]
                if not any(bj):
                    continue
                cf = binom[i + j][i]
                slot = raw[i + j]
                for s, x in enumerate(ai):
                    if x:
                        for t, y in enumerate(bj):
                            slot[s + t] += cf * x * y
        out, _ = ring._carry(raw, depth)
        # the carry moves (k+1) * quotient from index k to k+1
        for k in range(depth - 1):
            pv[k + 1] = min(pv[k + 1], pv[k] + ring.vint[k + 1])
        return self._new(out, pv, depth, tag)

    __rmul__ = __mul__

    def __pow__(self, k):
        out = self.ring.one()
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def with_tag(self, tag):
        return SElement(self.ring, self.coords, self.pv, tag)

    def with_prec(self, pv):
        return self._new(self.coords, pv, self.depth, self.tag)

    def reduce_prec(self, n):
        return self._new(self.coords, [min(n, v) for v in self.pv], self.depth, self.tag)

    # -- comparisons -------------------------------------------------------

    def is_zero(self, prec=None):
        p, e = self.ring.p, self.ring.e
        for i, n in enumerate(self.pv):
            m = p ** (n if prec is None else min(n, prec))
            if any(a % m for a in self.coords[i * e:(i + 1) * e]):
                return False
        return True

    def eq(self, other, prec=None):
        o = self._lift(other)
        return (self - o).is_zero(prec)

    def __eq__(self, other):
        if not isinstance(other, (SElement, int)):
            return NotImplemented
        return self.eq(other)

    __hash__ = None

    def valuation(self):
        """Smallest p-adic valuation among known coordinates (capped by precision)."""
        v = self.vals()
        return min(v) if v else self.ring.N

    def is_unit(self):
        if not self.depth or self.pv[0] < 1:
            return False
        return self.coords[0] % self.ring.p != 0

    def __repr__(self):
        from .literals import to_literal
        return f"SElement({to_literal(self)!r}, prec={self.prec}, depth={self.depth}, {TAG_NAMES[self.tag]})"


# -- ring operations -------------------------------------------------------

def canonicalize(ring: SRing, f, prec=None):
    """Integer polynomial in u (list, low first) or SElement -> canonical SElement."""
    if isinstance(f, SElement):
        return f
    return ring.from_poly(list(f), prec)


def compute_c(ctx, prof):
    """c = phi(E)/p."""
    return get_ring(ctx, prof).c()


def _phi_wide(x, skip=0):
    """Integer coordinates of phi of the stored representative, mod p^{N+p}."""
    ring = x.ring
    table = ring.phi_table()
    e, I = ring.e, ring.I
    out = [0] * (I * e)
    for i in range(skip, x.depth):
        row = table[i]
        for k in range(e):
            a = x.coords[i * e + k]
            if a:
                vec = row[k]
                for t in range(I * e):
                    if vec[t]:
                        out[t] += a * vec[t]
    return out


def phi(x: SElement) -> SElement:
    """Frobenius: u -> u^p, identity on Z_p."""
    return x._new(_phi_wide(x), x.ring.phi_prec(x), x.ring.I, x.tag)


def monodromy(x: SElement) -> SElement:
    """The derivation N with N(u) = -u."""
    ring = x.ring
    table = ring.n_table()
    vals = ring.n_vals()
    e, I = ring.e, ring.I
    out = [0] * (I * e)
    for i in range(x.depth):
        for k in range(e):
            a = x.coords[i * e + k]
            if a:
                vec = table[i][k]
                for t in range(I * e):
                    if vec[t]:
                        out[t] += a * vec[t]
    depth = x.depth
    pv = []
    for t in range(depth):
        best = ring.N
        for i in (t, t + 1):
            if i < depth:
                best = min(best, x.pv[i] + vals[i][t])
        pv.append(best)
    # the unknown coordinate `depth` leaks p * threshold into coordinate depth-1
    if depth:
        pv[-1] = min(pv[-1], 1 + ring.thresholds[x.tag][depth])
    return x._new(out[: depth * e], pv, depth, x.tag)


def fil_degree(x: SElement, prec=None) -> int:
    """Largest j with x in Fil^j S at tracked precision (or at p^prec if smaller)."""
    p, e = x.ring.p, x.ring.e
    for i in range(x.depth):
        n = x.pv[i] if prec is None else min(prec, x.pv[i])
        m = p ** n
        if any(a % m for a in x.coords[i * e:(i + 1) * e]):
            return i
    return x.depth


def quotient_poly(x: SElement, j: int):
    """Image of x in S/Fil^j S = W(k)[u]/(E^j) for j <= p, as integer list mod p^prec."""
    ring = x.ring
    if j > ring.p:
        raise ValueError("quotient description only for j <= p")
    n = min(x.pv[:j], default=ring.N)
    f = [0]
    Epow = [1]
    for i in range(j):
        a = list(x.coeff(i))
        inv = pow(fact(i), -1, ring.p ** n) if n else 0
        term = poly_mul([v * inv for v in a], Epow)
        f = [s + t for s, t in zip(f + [0] * len(term), term + [0] * len(f))]
        Epow = poly_mul(Epow, ring.E)
    Ej = Epow
    _, r = poly_divmod_int(f, Ej) if len(f) >= len(Ej) else ([], f)
    m = ring.p ** n
    r = [a % m for a in r]
    while r and r[-1] == 0:
        r.pop()
    return r


def phi_r(x: SElement, r: int) -> SElement:
    """phi / p^r on Fil^r S.

    Coordinates below r vanish and phi gains at least r on the others, so the
    division by p^r is exact on the known digits.
    """
    ring = x.ring
    p = ring.p
    if not 0 <= r <= p - 1:
        raise ValueError("r must lie in [0, p-1]")
    if fil_degree(x) < r:
        raise NotInFiltration(f"element has filtration degree {fil_degree(x)} < {r}")
    pv = [max(min(v, ring.N + r), r) for v in ring.phi_prec(x, skip=r)]
    e = ring.e
    wide = _phi_wide(x, skip=r)
    out = []
    pr = p ** r
    for t, n in enumerate(pv):
        m = p ** n
        for a in wide[t * e:(t + 1) * e]:
            a %= m
            if a % pr:
                raise NotDivisible(f"phi(x) is not divisible by p^{r}")
            out.append(a // pr)
    return x._new(out, [n - r for n in pv], ring.I, SIGMA if x.tag <= SIGMA else S)


def invert(x: SElement) -> SElement:
    """Inverse of a unit: Newton iteration on the representative, then error propagation."""
    ring = x.ring
    if not x.is_unit():
        raise NotUnit("constant term is not a p-adic unit")
    xe = x.with_prec(None)
    y = ring.const(pow(x.coords[0], -1, ring.mod)).with_tag(x.tag)
    for _ in range(64):
        nxt = y * (2 - xe * y)
        if nxt.eq(y):
            break
        y = nxt
    else:
        raise NotUnit("Newton iteration did not converge")
    y = _truncate(y, x.depth)
    # first-order error of x^{-1} is y * dx * y
    err = y * (x * y)
    return y.with_prec(err.pv).with_tag(x.tag)


def _truncate(x, depth):
    e = x.ring.e
    return x._new(x.coords[: depth * e], x.pv[:depth], depth, x.tag)


def divide_exact(x: SElement, d) -> SElement:
    """Exact division by d = ("p", k) or ("E", k); raises NotDivisible.

    Division by E^k loses the p-part of (i+k)!/i! on coordinate i.
    """
    kind, k = d
    ring = x.ring
    p, e = ring.p, ring.e
    if kind == "p":
        if k == 0:
            return x
        for i, n in enumerate(x.pv):
            m = p ** min(k, n)
            if any(a % m for a in x.coords[i * e:(i + 1) * e]):
                raise NotDivisible(f"not divisible by p^{k} at precision {n}")
        if x.prec < k:
            raise NotDivisible("precision exhausted")
        return x._new([a // p ** k for a in x.coords], [n - k for n in x.pv], x.depth,
                      x.tag if x.tag == S else S)
    if kind == "E":
        if k == 0:
            return x
        if x.depth < k:
            raise NotDivisible("depth exhausted")
        for i in range(k):
            m = p ** x.pv[i]
            if any(a % m for a in x.coords[i * e:(i + 1) * e]):
                raise NotDivisible(f"not divisible by E^{k}")
        depth = x.depth - k
        out = []
        pv = []
        for i in range(depth):
            ratio = fact(i + k) // fact(i)
            v = vp(ratio, p)
            n = x.pv[i + k]
            m = p ** max(n - v, 0)
            inv = pow(ratio // p ** v, -1, m) if m > 1 else 0
            for a in x.coords[(i + k) * e:(i + k + 1) * e]:
                if a % p ** min(v, n):
                    raise NotDivisible(f"coordinate {i + k} not divisible by {ratio}")
                out.append((a // p ** v) * inv)
            pv.append(n - v)
        tag = FRAK if x.tag == FRAK else S
        return x._new(out, pv, depth, tag)
    raise ValueError(f"unknown divisor kind {kind}")


def membership(x: SElement, tag) -> bool:
    """Coordinate criterion for Frak / Sigma / S at tracked precision."""
    if isinstance(tag, RingTag):
        tag = tag.kind
    if tag == S:
        return True
    ring = x.ring
    th = ring.thresholds[tag]
    e, p = ring.e, ring.p
    for i in range(x.depth):
        t = min(th[i], x.pv[i])
        if t <= 0:
            continue
        m = p ** t
        for a in x.coords[i * e:(i + 1) * e]:
            if a % m:
                return False
    return True


def _residue_split(x, tag, start):
    """Split coordinates i >= start into (multiple of p^threshold, residue)."""
    ring = x.ring
    e, p = ring.e, ring.p
    th = ring.thresholds[tag]
    big, small = list(x.coords), [0] * len(x.coords)
    for i in range(start, x.depth):
        m = p ** min(th[i], x.pv[i])
        for k in range(e):
            a = x.coords[i * e + k]
            small[i * e + k] = a % m
            big[i * e + k] = a - a % m
    return big, small


def decompose(x: SElement, kind: str):
    """s_split -> (Sigma part, Fil^{p+1}S part); sigma_bcd -> (b, c, d); c_split -> (t, Y-coefficient)."""
    ring = x.ring
    p, e = ring.p, ring.e
    if kind == "s_split":
        big, small = _residue_split(x, SIGMA, p + 1)
        return (x._new(big, x.pv, x.depth, SIGMA),
                x._new(small, x.pv, x.depth, S))
    if kind in ("sigma_bcd", "c_split"):
        if not membership(x, SIGMA):
            raise NotInSourceRing("element is not in Sigma")
        big, small = _residue_split(x, FRAK, p)
        # coordinate p: residue mod p is the Y-part
        ycoef = small[p * e:(p + 1) * e]
        small[p * e:(p + 1) * e] = [0] * e
        yprec = x.pv[p] if x.depth > p else 0
        inv = pow(fact(p - 1), -1, ring.p ** max(yprec, 1))
        cpoly = [a * inv for a in ycoef]
        b = x._new(big, x.pv, x.depth, FRAK)
        d = x._new(small, x.pv, x.depth, SIGMA)
        c = ring.elem(ring.canon_int_poly(cpoly), yprec, tag=FRAK)
        if kind == "sigma_bcd":
            return b, c, d
        if not d.is_zero():
            raise NotInSourceRing("element has a Fil^{p+1} component beyond c = Y + t")
        return b, c * ring.Y()
    raise ValueError(f"unknown decomposition {kind}")


# -- matrices over S --------------------------------------------------------

def identity(ring, d, scale=1):
    return [[ring.const(scale) if i == j else ring.zero() for j in range(d)] for i in range(d)]


def mat_mul(A, B):
    n, m, k = len(A), len(B), len(B[0]) if B else 0
    out = []
    for i in range(n):
        row = []
        for j in range(k):
            acc = None
            for t in range(m):
                term = A[i][t] * B[t][j]
                acc = term if acc is None else acc + term
            row.append(acc)
        out.append(row)
    return out


def mat_add(A, B):
    return [[a + b for a, b in zip(ra, rb)] for ra, rb in zip(A, B)]


def mat_sub(A, B):
    return [[a - b for a, b in zip(ra, rb)] for ra, rb in zip(A, B)]


def mat_scale(A, s):
    return [[a * s for a in row] for row in A]


def mat_map(f, A):
    return [[f(a) for a in row] for row in A]


def transpose(A):
    return [list(r) for r in zip(*A)] if A else []


def mat_is_zero(A, prec=None):
    return all(a.is_zero(prec) for row in A for a in row)


def mat_eq(A, B, prec=None):
    return mat_is_zero(mat_sub(A, B), prec)


def mat_prec(A):
    return min((a.prec for row in A for a in row), default=None)


def det(A):
    d = len(A)
    if d == 0:
        return None
    if d == 1:
        return A[0][0]
    if d == 2:
        return A[0][0] * A[1][1] - A[0][1] * A[1][0]
    acc = None
    for j in range(d):
        minor = [row[:j] + row[j + 1:] for row in A[1:]]
        term = A[0][j] * det(minor)
        if j % 2:
            term = -term
        acc = term if acc is None else acc + term
    return acc


def adjugate(A):
    d = len(A)
    ring = A[0][0].ring
    if d == 1:
        return [[ring.one()]]
    out = [[None] * d for _ in range(d)]
    for i in range(d):
        for j in range(d):
            minor = [row[:j] + row[j + 1:] for k, row in enumerate(A) if k != i]
            c = det(minor)
            out[j][i] = -c if (i + j) % 2 else c
    return out


def mat_inverse(A):
    """Inverse of a matrix whose determinant is a unit."""
    d = len(A)
    if d == 0:
        return []
    D = det(A)
    Dinv = invert(D)
    return [[a * Dinv for a in row] for row in adjugate(A)]


def mat_phi(A):
    return mat_map(phi, A)


def E_power(ring, k):
    """E^k = k! gamma_k."""
    return ring.gamma(k) * fact(k) if k else ring.one()


def height_witness(A, r):
    """A' with A A' = A' A = E^r Id, from the adjugate; raises NotFiniteHeight."""
    d = len(A)
    if d == 0:
        return []
    ring = A[0][0].ring
    D = det(A)
    s = fil_degree(D)
    if s > r * d or s >= D.depth:
        raise NotFiniteHeight("determinant is not a unit times a power of E")
    try:
        q = divide_exact(D, ("E", s))
    except Exception as exc:
        raise NotFiniteHeight(f"determinant not divisible by E^{s}: {exc}") from None
    if not q.is_unit():
        raise NotFiniteHeight("determinant is not a unit times a power of E")
    qinv = invert(q)
    adj = adjugate(A)
    if s <= r:
        Er = E_power(ring, r - s)
        Ap = [[a * Er * qinv for a in row] for row in adj]
    else:
        try:
            Ap = [[divide_exact(a, ("E", s - r)) * qinv for a in row] for row in adj]
        except NotDivisible as exc:
            raise NotFiniteHeight(str(exc)) from None
    if not mat_eq(mat_mul(A, Ap), mat_scale(identity(ring, d), E_power(ring, r))):
        raise NotFiniteHeight("witness check A A' = E^r Id failed")
    return Ap


def split_matrix(A, kind):
    """Entrywise decomposition of a matrix; returns a tuple of matrices."""
    parts = [[decompose(a, kind) for a in row] for row in A]
    n = len(parts[0][0]) if parts and parts[0] else 0
    return tuple([[cell[t] for cell in row] for row in parts] for t in range(n))


def lift_inverse_matrix(A, r, witness=None, target=FRAK):
    """Given A over Sigma (target Frak) or S (target Sigma) with A A' = E^r Id,
    split A = B + C and return B' over the target ring with B B' = E^r Id."""
    d = len(A)
    if d == 0:
        return []
    ring = A[0][0].ring
    if witness is None:
        try:
            witness = height_witness(A, r)
        except NotFiniteHeight as exc:
            raise NoWitness(str(exc)) from None
    Er = E_power(ring, r)
    if not mat_eq(mat_mul(A, witness), mat_scale(identity(ring, d), Er)):
        raise NoWitness("supplied witness does not satisfy A A' = E^r Id")
    if target == FRAK:
        B = split_matrix(A, "sigma_bcd")[0]
        B1 = split_matrix(witness, "sigma_bcd")[0]
    else:
        B = split_matrix(A, "s_split")[0]
        B1 = split_matrix(witness, "s_split")[0]
    F = mat_sub(mat_mul(B, B1), mat_scale(identity(ring, d), Er))
    try:
        F = mat_map(lambda a: divide_exact(a, ("E", r)).with_tag(target), F)
    except NotDivisible as exc:
        raise NoWitness(f"B B_1 - E^r Id is not divisible by E^r: {exc}") from None
    try:
        Bp = mat_mul(B1, mat_inverse(mat_add(identity(ring, d), F)))
    except NotUnit as exc:
        raise NoWitness(str(exc)) from None
    Bp = mat_map(lambda a: a.with_tag(target), Bp)
    if not mat_eq(mat_mul(B, Bp), mat_scale(identity(ring, d), Er)):
        raise NoWitness("lifted witness fails B B' = E^r Id")
    return Bp
