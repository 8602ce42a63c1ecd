"""Exact linear algebra over Q, plus saturation of Q-subspaces in Z_(p)^n."""
from __future__ import annotations

from fractions import Fraction

from .padic_core import vp


def fval(x, p):
    """p-adic valuation of a nonzero rational."""
    x = Fraction(x)
    return vp(x.numerator, p) - vp(x.denominator, p)


def rref(rows):
    """Reduced row echelon form; returns (nonzero rows, pivot columns)."""
    M = [[Fraction(a) for a in row] for row in rows]
    if not M:
        return [], []
    n = len(M[0])
    pivots = []
    r = 0
    for c in range(n):
        piv = next((i for i in range(r, len(M)) if M[i][c] != 0), None)
        if piv is None:
            continue
        M[r], M[piv] = M[piv], M[r]
        inv = 1 / M[r][c]
        M[r] = [a * inv for a in M[r]]
        for i in range(len(M)):
            if i != r and M[i][c] != 0:
                f = M[i][c]
                M[i] = [a - f * b for a, b in zip(M[i], M[r])]
        pivots.append(c)
        r += 1
        if r == len(M):
            break
    return M[:r], pivots


def rank(rows):
    return len(rref(rows)[0])


def row_basis(rows, n=None):
    return rref(rows)[0] if rows else []


def nullspace(rows, n):
    """Basis of {x in Q^n : row . x = 0 for every row}."""
    R, piv = rref(rows) if rows else ([], [])
    free = [c for c in range(n) if c not in piv]
    out = []
    for f in free:
        x = [Fraction(0)] * n
        x[f] = Fraction(1)
        for row, c in zip(R, piv):
            x[c] = -row[f]
        out.append(x)
    return out


def in_span(basis, v):
    return rank(list(basis) + [v]) == rank(basis) if basis else all(a == 0 for a in v)


def coordinates(basis, v):
    """c with sum c_i basis_i = v (basis independent); None if v is outside the span."""
    k = len(basis)
    if k == 0:
        return [] if all(a == 0 for a in v) else None
    n = len(v)
    # solve c B = v: columns of the augmented system are the basis vectors
    aug = [[basis[i][j] for i in range(k)] + [v[j]] for j in range(n)]
    R, piv = rref(aug)
    if k in piv:
        return None
    c = [Fraction(0)] * k
    for row, col in zip(R, piv):
        c[col] = row[k]
    return c


def det(M):
    d = len(M)
    A = [[Fraction(a) for a in row] for row in M]
    out = Fraction(1)
    for c in range(d):
        piv = next((i for i in range(c, d) if A[i][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            A[c], A[piv] = A[piv], A[c]
            out = -out
        out *= A[c][c]
        for i in range(c + 1, d):
            f = A[i][c] / A[c][c]
            if f:
                A[i] = [a - f * b for a, b in zip(A[i], A[c])]
    return out


def inverse(M):
    d = len(M)
    aug = [[Fraction(a) for a in row] + [Fraction(int(i == j)) for j in range(d)]
           for i, row in enumerate(M)]
    R, piv = rref(aug)
    if piv[:d] != list(range(d)):
        raise ZeroDivisionError("matrix is singular")
    return [row[d:] for row in R]


def mat_mul(A, B):
    return [[sum((a * b for a, b in zip(row, col)), Fraction(0)) for col in zip(*B)] for row in A]


def transpose(A):
    return [list(r) for r in zip(*A)] if A else []


def saturate(rows, p):
    """Z_(p)-basis of span_Q(rows) intersected with Z_(p)^n.

    Returns (basis, W): W is in GL_n(Z_(p)) and v lies in the saturated lattice
    plus p^k Z_(p)^n iff the entries of v W past the first len(basis) vanish mod p^k.
    """
    rows = row_basis(rows)
    k = len(rows)
    n = len(rows[0]) if rows else 0
    M = [list(r) for r in rows]
    V = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    for s in range(k):
        best = None
        for i in range(s, k):
            for j in range(s, n):
                if M[i][j] != 0:
                    v = fval(M[i][j], p)
                    if best is None or v < best[0]:
                        best = (v, i, j)
        _, i, j = best
        M[s], M[i] = M[i], M[s]
        if j != s:
            for row in M:
                row[s], row[j] = row[j], row[s]
            V[s], V[j] = V[j], V[s]
        piv = M[s][s]
        for i in range(s + 1, k):
            f = M[i][s] / piv
            if f:
                M[i] = [a - f * b for a, b in zip(M[i], M[s])]
        for j in range(s + 1, n):
            t = M[s][j] / piv
            if t:
                for row in M:
                    row[j] -= t * row[s]
                V[s] = [a + t * b for a, b in zip(V[s], V[j])]
    return V[:k], inverse(V) if n else []
