"""Truncated p-adic integers, polynomials over them and Eisenstein data."""
from __future__ import annotations

from dataclasses import dataclass

from .errors import NonMonicDivisor, NotDivisible, NotEisenstein


def vp(n: int, p: int) -> int:
    """p-adic valuation of a nonzero integer."""
    if n == 0:
        raise ValueError("valuation of zero")
    n = abs(n)
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


def vp_mod(n: int, p: int, cap: int) -> int:
    """Valuation of n read modulo p^cap; returns cap for zero."""
    n %= p ** cap
    if n == 0:
        return cap
    return vp(n, p)


def vp_factorial(p: int, n: int) -> int:
    """Legendre's formula for v_p(n!)."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    total, q = 0, p
    while q <= n:
        total += n // q
        q *= p
    return total


def is_prime(p: int) -> bool:
    if p < 2:
        return False
    d = 2
    while d * d <= p:
        if p % d == 0:
            return False
        d += 1
    return True


class PadicInt:
    """Residue mod p^N together with its precision N."""

    __slots__ = ("p", "value", "precision")

    def __init__(self, p, value, precision):
        self.p = p
        self.precision = precision
        self.value = value % p ** precision

    def _coerce(self, other):
        if isinstance(other, PadicInt):
            if other.p != self.p:
                raise ValueError("mixed primes")
            return other
        return PadicInt(self.p, other, self.precision)

    def __add__(self, other):
        o = self._coerce(other)
        return PadicInt(self.p, self.value + o.value, min(self.precision, o.precision))

    __radd__ = __add__

    def __neg__(self):
        return PadicInt(self.p, -self.value, self.precision)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        o = self._coerce(other)
        return PadicInt(self.p, self.value * o.value, min(self.precision, o.precision))

    __rmul__ = __mul__

    def __eq__(self, other):
        o = self._coerce(other)
        n = min(self.precision, o.precision)
        return (self.value - o.value) % self.p ** n == 0

    def __hash__(self):
        return hash((self.p, self.value, self.precision))

    def valuation(self):
        return vp_mod(self.value, self.p, self.precision)

    def is_unit(self):
        return self.value % self.p != 0

    def inverse(self):
        if not self.is_unit():
            raise ZeroDivisionError("not a p-adic unit")
        return PadicInt(self.p, pow(self.value, -1, self.p ** self.precision), self.precision)

    def divide_by_p(self, k):
        """Exact division by p^k; precision drops by k."""
        if self.value % self.p ** min(k, self.precision):
            raise NotDivisible(f"{self.value} not divisible by {self.p}^{k}")
        n = max(self.precision - k, 0)
        return PadicInt(self.p, self.value // self.p ** k, n)

    def __repr__(self):
        return f"PadicInt({self.value} mod {self.p}^{self.precision})"


class Poly:
    """Polynomial in u with coefficients in Z/p^N, lowest degree first."""

    __slots__ = ("p", "precision", "coeffs")

    def __init__(self, p, coeffs, precision):
        m = p ** precision
        c = [int(a) % m for a in coeffs]
        while c and c[-1] == 0:
            c.pop()
        self.p = p
        self.precision = precision
        self.coeffs = tuple(c)

    @property
    def degree(self):
        return len(self.coeffs) - 1

    def _coerce(self, other):
        if isinstance(other, Poly):
            return other
        return Poly(self.p, [other], self.precision)

    def __add__(self, other):
        o = self._coerce(other)
        n = max(len(self.coeffs), len(o.coeffs))
        a = self.coeffs + (0,) * (n - len(self.coeffs))
        b = o.coeffs + (0,) * (n - len(o.coeffs))
        return Poly(self.p, [x + y for x, y in zip(a, b)], min(self.precision, o.precision))

    __radd__ = __add__

    def __neg__(self):
        return Poly(self.p, [-a for a in self.coeffs], self.precision)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __mul__(self, other):
        o = self._coerce(other)
        return Poly(self.p, poly_mul(self.coeffs, o.coeffs), min(self.precision, o.precision))

    __rmul__ = __mul__

    def __eq__(self, other):
        o = self._coerce(other)
        return (self - o).coeffs == ()

    def __hash__(self):
        return hash((self.p, self.coeffs, self.precision))

    def is_monic(self):
        return bool(self.coeffs) and self.coeffs[-1] == 1

    def __repr__(self):
        return f"Poly({list(self.coeffs)} mod {self.p}^{self.precision})"


def poly_mul(a, b):
    if not a or not b:
        return []
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return out


def poly_divmod_int(f, g):
    """Schoolbook division of integer lists by a monic integer list."""
    f = list(f)
    dg = len(g) - 1
    if len(f) <= dg:
        return [], f
    q = [0] * (len(f) - dg)
    for k in range(len(f) - 1, dg - 1, -1):
        a = f[k]
        if a:
            q[k - dg] = a
            for j in range(dg + 1):
                f[k - dg + j] -= a * g[j]
    return q, f[:dg]


def divmod_monic(f: Poly, g: Poly):
    """Return (q, r) with f = q*g + r and deg r < deg g."""
    if not g.is_monic():
        raise NonMonicDivisor(f"divisor {list(g.coeffs)} is not monic")
    n = min(f.precision, g.precision)
    q, r = poly_divmod_int(f.coeffs, g.coeffs)
    return Poly(f.p, q, n), Poly(f.p, r, n)


@dataclass(frozen=True)
class EisensteinData:
    """Prime p, ramification e, and E(u) given by integer coefficients (low first)."""

    p: int
    e: int
    E_coeffs: tuple

    def __post_init__(self):
        object.__setattr__(self, "E_coeffs", tuple(int(a) for a in self.E_coeffs))
        problems = check_eisenstein(self.p, self.e, self.E_coeffs)
        if problems:
            raise NotEisenstein("; ".join(problems))

    def E_poly(self, precision):
        return Poly(self.p, self.E_coeffs, precision)


def check_eisenstein(p, e, coeffs):
    """List of violated conditions (empty when E is Eisenstein)."""
    out = []
    if not is_prime(p):
        out.append(f"p={p} is not prime")
        return out
    if e < 1:
        out.append("e must be >= 1")
        return out
    if len(coeffs) != e + 1:
        out.append(f"E must have degree e={e} (got {len(coeffs) - 1})")
        return out
    if coeffs[-1] != 1:
        out.append(f"leading coefficient {coeffs[-1]} is not 1")
    for k, a in enumerate(coeffs[:-1]):
        if a % p:
            out.append(f"coefficient of u^{k} ({a}) is not divisible by p")
    if coeffs[0] % (p * p) == 0:
        out.append(f"constant term {coeffs[0]} is divisible by p^2")
    return out
