"""Element literal grammar, e.g. "8 + 9*gamma(1) + 6*gamma(2) + 2*gamma(3)".

Terms are integer-coefficient monomials in u, with optional gamma(i), E^k and
Y^j factors, joined by + and -.  Parentheses are accepted as well.
"""
from __future__ import annotations

import ast

from .errors import ParseError
from .rings import E_power


def parse_element(ring, text):
    """Parse a literal into an SElement of the ring."""
    src = str(text).replace("^", "**")
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as exc:
        raise ParseError(f"cannot parse element literal {text!r}: {exc.msg}") from None
    return _eval(ring, tree.body, text)


def _eval(ring, node, text):
    if isinstance(node, ast.Constant) and isinstance(node.value, int):
        return ring.const(node.value)
    if isinstance(node, ast.Name):
        if node.id == "u":
            return ring.u()
        if node.id == "E":
            return ring.gamma(1)
        if node.id == "Y":
            return ring.Y()
        raise ParseError(f"unknown symbol {node.id!r} in {text!r}")
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        val = _eval(ring, node.operand, text)
        return -val if isinstance(node.op, ast.USub) else val
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id == "gamma":
        if len(node.args) != 1 or not isinstance(node.args[0], ast.Constant):
            raise ParseError(f"gamma() takes one integer in {text!r}")
        return ring.gamma(int(node.args[0].value))
    if isinstance(node, ast.BinOp):
        if isinstance(node.op, ast.Pow):
            if not (isinstance(node.right, ast.Constant) and isinstance(node.right.value, int)):
                raise ParseError(f"exponents must be integers in {text!r}")
            k = node.right.value
            if k < 0:
                raise ParseError(f"negative exponent in {text!r}")
            if isinstance(node.left, ast.Name) and node.left.id == "E":
                return E_power(ring, k)
            if isinstance(node.left, ast.Name) and node.left.id == "u":
                return ring.from_poly([0] * k + [1])
            return _eval(ring, node.left, text) ** k
        left = _eval(ring, node.left, text)
        right = _eval(ring, node.right, text)
        if isinstance(node.op, ast.Add):
            return left + right
        if isinstance(node.op, ast.Sub):
            return left - right
        if isinstance(node.op, ast.Mult):
            return left * right
    raise ParseError(f"unsupported syntax in {text!r}")


def _poly_str(coeffs):
    terms = []
    for k, a in enumerate(coeffs):
        if not a:
            continue
        if k == 0:
            terms.append(str(a))
        else:
            mono = "u" if k == 1 else f"u^{k}"
            terms.append(mono if a == 1 else f"{a}*{mono}")
    return terms


def to_literal(x):
    """Canonical literal: coordinate i as nonnegative residues mod p^pv_i (capped at the profile N)."""
    out = []
    p, cap = x.ring.p, x.ring.target
    for i in range(x.depth):
        m = p ** min(x.pv[i], cap)
        terms = _poly_str([a % m for a in x.coeff(i)])
        if not terms:
            continue
        if i == 0:
            out.extend(terms)
            continue
        g = f"gamma({i})"
        if len(terms) == 1:
            t = terms[0]
            out.append(g if t == "1" else f"{t}*{g}")
        else:
            out.append("(" + " + ".join(terms) + f")*{g}")
    return " + ".join(out) if out else "0"


def parse_matrix(ring, rows):
    if isinstance(rows, (str, int)):
        rows = [[rows]]
    return [[parse_element(ring, a) for a in row] for row in rows]


def matrix_literal(A):
    return [[to_literal(a) for a in row] for row in A]
