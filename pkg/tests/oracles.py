"""Independent reference computations built on sympy, not on the package."""
from __future__ import annotations

from math import factorial

import sympy as sp

u = sp.Symbol("u")


def E_expr(coeffs):
    return sum(sp.Integer(a) * u ** k for k, a in enumerate(coeffs))


def e_adic_digits(f, coeffs):
    """Digits r_i (deg < e) with f = sum r_i E^i, as lists of rationals."""
    E = sp.Poly(E_expr(coeffs), u)
    e = len(coeffs) - 1
    rem = sp.Poly(sp.expand(f), u, domain=sp.QQ)
    out = []
    while not rem.is_zero:
        q, r = sp.div(rem, E)
        c = [sp.Rational(0)] * e
        for (k,), a in r.terms():
            c[k] = sp.Rational(a)
        out.append(c)
        rem = q
    return out


def gamma_coords(f, coeffs):
    """Flat gamma-basis coordinates a_i = i! r_i of a rational polynomial."""
    out = []
    for i, digit in enumerate(e_adic_digits(f, coeffs)):
        out.extend(sp.Rational(factorial(i)) * a for a in digit)
    return out


def as_integers(coords, m):
    """Reduce rational p-integral coordinates modulo m."""
    out = []
    for a in coords:
        a = sp.Rational(a)
        out.append(int(a.p) * pow(int(a.q), -1, m) % m)
    return out


def c_oracle(p, coeffs, n):
    """Coordinates of phi(E)/p mod p^n by binomial expansion of E(u^p)/p."""
    f = E_expr(coeffs).subs(u, u ** p) / p
    return as_integers(gamma_coords(f, coeffs), p ** n)


def sigma_native(p, coeffs, parts):
    """sum b_j(u) Y^j with Y = E^p/p, parts[j] an integer coefficient list of b_j."""
    E = E_expr(coeffs)
    f = sum(sum(sp.Integer(a) * u ** k for k, a in enumerate(b)) * (E ** p / p) ** j
            for j, b in enumerate(parts))
    return gamma_coords(sp.expand(f), coeffs)


def legendre(p, n):
    t, q = 0, p
    while q <= n:
        t += n // q
        q *= p
    return t


# -- brute-force stable rank of the phi*-span ---------------------------------


def _vp_int(a, p):
    v = 0
    while a % p == 0:
        a //= p
        v += 1
    return v


def zp_length(rows, p, N):
    """Length over Z/p^N of the row span (valuation-pivot elimination)."""
    m = p ** N
    M = [[a % m for a in r] for r in rows if any(a % m for a in r)]
    ncols = len(M[0]) if M else 0
    total = 0
    col_done = [False] * ncols
    while M:
        best = None
        for i, r in enumerate(M):
            for j, a in enumerate(r):
                if a and not col_done[j]:
                    v = _vp_int(a, p)
                    if best is None or v < best[0]:
                        best = (v, i, j)
        if best is None:
            break
        v, i, j = best
        piv = M.pop(i)
        total += N - v
        col_done[j] = True
        unit = pow(piv[j] // p ** v, -1, m)
        nxt = []
        for r in M:
            if r[j]:
                f = (r[j] // p ** v) * unit % m
                r = [(a - f * b) % m for a, b in zip(r, piv)]
            if any(r):
                nxt.append(r)
        M = nxt
    return total


def poly_mul_trunc(a, b, L, m):
    out = [0] * L
    for i, x in enumerate(a[:L]):
        if x:
            for j, y in enumerate(b[:L - i]):
                out[i + j] = (out[i + j] + x * y) % m
    return out


def frak_to_upoly(x, L, m):
    """u-expansion mod (m, u^L) of a Frak element sum a_i(u) E^i / i!."""
    ring = x.ring
    p = ring.p
    Epoly = [a % m for a in ring.E]
    out = [0] * L
    Epow = [1] + [0] * (L - 1)
    for i in range(x.depth):
        f = factorial(i)
        v = _vp_int(f, p) if f > 1 else 0
        coef = []
        for a in x.coeff(i):
            if a % p ** v:
                raise ValueError("not an element of Frak")
            coef.append((a // p ** v) * pow(f // p ** v, -1, m) % m)
        term = poly_mul_trunc(coef + [0] * L, Epow, L, m)
        out = [(s + t) % m for s, t in zip(out, term)]
        Epow = poly_mul_trunc(Epow, Epoly + [0] * L, L, m)
    return out


def _phi_upoly(f, p, L):
    out = [0] * L
    for k, a in enumerate(f):
        if k * p < L:
            out[k * p] = a
    return out


def _stable(lengths, unit, window=3):
    if len(lengths) < window or len(set(lengths[-window:])) != 1:
        return None
    q, r = divmod(lengths[-1], unit)
    return q if r == 0 else None


def kisin_stable_rank(A, p, N, L, max_steps=60):
    """rank of the intersection of the (phi*)^n spans, for Frob matrix A over Z/p^N[u]/u^L."""
    m = p ** N
    d = len(A)
    Ap = [[frak_to_upoly(a, L, m) for a in row] for row in A]
    P = [[[int(i == j)] + [0] * (L - 1) for j in range(d)] for i in range(d)]
    lengths = []
    Q = Ap
    for _ in range(max_steps):
        # P <- phi^k(A) ... A with the newest twist on the left
        P = [[[sum(vals) % m for vals in zip(*[poly_mul_trunc(Q[i][k], P[k][j], L, m)
                                                for k in range(d)])]
              for j in range(d)] for i in range(d)]
        Q = [[_phi_upoly(f, p, L) for f in row] for row in Q]
        rows = []
        for i in range(d):
            for s in range(L):
                rows.append([c for j in range(d) for c in ([0] * s + P[i][j])[:L]])
        lengths.append(zp_length(rows, p, N))
        got = _stable(lengths, N * L)
        if got is not None:
            return got
    raise AssertionError(f"span length did not stabilise: {lengths[-5:]}")


def s_stable_rank(Phi, mat_mul, mat_phi, max_steps=60):
    """Same count inside S/(p^N, Fil^I), via the gamma-coordinates of the package ring."""
    ring = Phi[0][0].ring
    p, N, I, e = ring.p, ring.target, ring.I, ring.e
    m = p ** N
    mons = [ring.gamma(i, tuple(int(t == s) for t in range(e))) for i in range(I) for s in range(e)]
    P = Phi
    Q = Phi
    lengths = []
    for step in range(max_steps):
        if step:
            Q = mat_phi(Q)
            P = mat_mul(Q, P)
        rows = []
        for row in P:
            for g in mons:
                rows.append([a % m for x in row for a in (g * x).coords[:I * e]])
        lengths.append(zp_length(rows, p, N))
        got = _stable(lengths, N * I * e)
        if got is not None:
            return got
    raise AssertionError(f"span length did not stabilise: {lengths[-5:]}")
