"""Linear algebra over Z/p^N: Smith form, images, kernels, ranks."""
from __future__ import annotations


def _val(a, p, N):
    a %= p ** N
    if a == 0:
        return N
    v = 0
    while a % p == 0:
        a //= p
        v += 1
    return v


def mat_mul_mod(A, B, m):
    if not A:
        return []
    k = len(B[0]) if B else 0
    return [[sum(A[i][t] * B[t][j] for t in range(len(B))) % m for j in range(k)]
            for i in range(len(A))]


def identity_mod(d):
    return [[1 if i == j else 0 for j in range(d)] for i in range(d)]


def mat_pow_mod(A, k, m):
    out = identity_mod(len(A))
    base = [row[:] for row in A]
    while k:
        if k & 1:
            out = mat_mul_mod(out, base, m)
        base = mat_mul_mod(base, base, m)
        k >>= 1
    return out


def smith(A, p, N):
    """Return (U, D, V) with U*A*V = D diagonal mod p^N; U, V invertible.

    Pivots are chosen with minimal valuation, ties broken by lowest (row, col).
    """
    m = p ** N
    rows, cols = len(A), len(A[0]) if A else 0
    D = [[a % m for a in row] for row in A]
    U = identity_mod(rows)
    V = identity_mod(cols)
    for t in range(min(rows, cols)):
        best = None
        for i in range(t, rows):
            for j in range(t, cols):
                v = _val(D[i][j], p, N)
                if v < N and (best is None or v < best[0]):
                    best = (v, i, j)
        if best is None:
            break
        v, i, j = best
        D[t], D[i] = D[i], D[t]
        U[t], U[i] = U[i], U[t]
        for row in D:
            row[t], row[j] = row[j], row[t]
        for row in V:
            row[t], row[j] = row[j], row[t]
        piv = D[t][t]
        unit = piv // p ** v
        inv = pow(unit, -1, m)
        for i2 in range(rows):
            if i2 != t and D[i2][t] % m:
                f = (D[i2][t] // p ** v) * inv % m
                D[i2] = [(a - f * b) % m for a, b in zip(D[i2], D[t])]
                U[i2] = [(a - f * b) % m for a, b in zip(U[i2], U[t])]
        for j2 in range(cols):
            if j2 != t and D[t][j2] % m:
                f = (D[t][j2] // p ** v) * inv % m
                for row in D:
                    row[j2] = (row[j2] - f * row[t]) % m
                for row in V:
                    row[j2] = (row[j2] - f * row[t]) % m
    return U, D, V


def inverse_mod(A, p, N):
    """Inverse of a matrix invertible mod p."""
    m = p ** N
    d = len(A)
    M = [[a % m for a in row] + identity_mod(d)[i] for i, row in enumerate(A)]
    for c in range(d):
        piv = next((r for r in range(c, d) if M[r][c] % p), None)
        if piv is None:
            raise ValueError("matrix not invertible mod p")
        M[c], M[piv] = M[piv], M[c]
        inv = pow(M[c][c], -1, m)
        M[c] = [a * inv % m for a in M[c]]
        for r in range(d):
            if r != c and M[r][c]:
                f = M[r][c]
                M[r] = [(a - f * b) % m for a, b in zip(M[r], M[c])]
    return [row[d:] for row in M]


def transpose(A):
    return [list(r) for r in zip(*A)] if A else []


def rank_mod_p(A, p):
    """Rank over F_p."""
    if not A or not A[0]:
        return 0
    _, D, _ = smith(A, p, 1)
    return sum(1 for i in range(min(len(D), len(D[0]))) if D[i][i] % p)


def column_image_kernel(F, p, N):
    """For F whose image is a free direct summand: bases (as columns) of image and kernel."""
    d = len(F)
    m = p ** N
    U, D, V = smith(F, p, N)
    Uinv = inverse_mod(U, p, N)
    img, ker = [], []
    for i in range(d):
        v = _val(D[i][i], p, N) if i < len(D[0]) else N
        if v == 0:
            img.append([Uinv[r][i] % m for r in range(d)])
        else:
            ker.append([V[r][i] % m for r in range(d)])
    return img, ker


def span_basis(vectors, p, N):
    """Echelon generators (rows) of the Z/p^N-span of vectors, with pivot valuations."""
    if not vectors:
        return []
    m = p ** N
    rows = [[a % m for a in v] for v in vectors]
    n = len(rows[0])
    out = []
    col = 0
    while rows and col < n:
        best = None
        for idx, r in enumerate(rows):
            v = _val(r[col], p, N)
            if v < N and (best is None or v < best[0]):
                best = (v, idx)
        if best is None:
            col += 1
            continue
        v, idx = best
        piv = rows.pop(idx)
        unit = piv[col] // p ** v
        inv = pow(unit, -1, m)
        piv = [a * inv % m for a in piv]
        new = []
        for r in rows:
            f = (r[col] // p ** v) % m
            r2 = [(a - f * b) % m for a, b in zip(r, piv)]
            if any(r2):
                new.append(r2)
        # p^(N-v) * piv has zero pivot entry but may be nonzero elsewhere
        extra = [a * p ** (N - v) % m for a in piv]
        if any(extra):
            new.append(extra)
        rows = new
        out.append((v, col, piv))
        col += 1
    return out
