"""Passing between Kisin modules and Breuil modules over Sigma and S.

All descents share one iteration.  Given alpha_n = A_n e_n with
A_n = B_n + R_n, B_n in the smaller ring and R_n in Fil^p, set
alpha_{n+1} = B_n e_n and e_{n+1} = phi_r(alpha_{n+1}) / c^r = P_n e_n with

    P_n = Id - c^{-r} phi_r(R_n) Phi_n,

where Phi_n is the Frobenius matrix on e_n.  Then A_{n+1} = B_n P_n^{-1} and
Phi_{n+1} = phi(P_n) Phi_n P_n^{-1}.  The cumulative base change X_n with
e_n = X_n e_0 is tracked so the result can be checked against the input.
A witness W_n for A_n stays a witness for B_n up to W_n R_n, so
W_{n+1} = P_n W_n is carried along as well.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .errors import KisinBreuilError, NoConvergence, NotUnipotent, NotUnit
from .modules import SemilinearModule, convergence_verdict, truncate_fil
from .rings import (FRAK, S, SIGMA, RingTag, decompose, fil_degree, height_witness,
                    identity, invert, lift_inverse_matrix, mat_eq, mat_inverse, mat_map,
                    mat_mul, mat_phi, mat_scale, mat_sub, membership, phi_r)


@dataclass
class DescentState:
    """Snapshot of one run: current matrices plus the tracked base change."""

    step: int
    A: list
    B: list
    C: list = None
    D: list = None
    frobenius: list = None
    base_change: list = None
    history: list = field(default_factory=list)
    witness: list = None


@dataclass
class DescentResult:
    module: SemilinearModule
    base_change: list
    steps: int
    phase1_steps: int = None
    checks: dict = field(default_factory=dict)
    history: list = field(default_factory=list)


def _min_val(M):
    """Smallest p-adic valuation among the nonzero entries (prec if all vanish)."""
    best = None
    for row in M:
        for a in row:
            v = a.valuation()
            best = v if best is None else min(best, v)
    return best


def _split(A, target):
    """(B, C, D): B over the target ring, R = C*Y + D the part to be pushed away."""
    ring = A[0][0].ring
    if target == SIGMA:
        parts = [[decompose(a, "s_split") for a in row] for row in A]
        B = [[x[0] for x in row] for row in parts]
        D = [[x[1] for x in row] for row in parts]
        C = [[ring.zero() for _ in row] for row in A]
        return B, C, D
    parts = [[decompose(a, "sigma_bcd") for a in row] for row in A]
    return ([[x[0] for x in row] for row in parts],
            [[x[1] for x in row] for row in parts],
            [[x[2] for x in row] for row in parts])


def _remainder(C, D):
    Y = C[0][0].ring.Y()
    return [[c * Y + d for c, d in zip(rc, rd)] for rc, rd in zip(C, D)]


def _descend(M, target, max_steps=None):
    ring = M.ring
    d, r = M.d, M.r
    prof = ring.prof
    if target == FRAK and any(not membership(a, SIGMA) for row in M.A for a in row):
        raise KisinBreuilError("matrix is not over Sigma; run s_to_sigma_descent first")
    cap = max_steps or prof.conv_order * d * prof.N
    cr_inv = invert(ring.c() ** r)
    A = M.A
    try:
        Phi = M.frobenius_matrix()
    except NotUnit:
        raise NoConvergence("Frobenius matrix is not invertible at tracked precision",
                            {"step": 0, "profile": prof.as_dict()}) from None
    W = M.witness
    X = identity(ring, d)
    hist = []
    phase1 = None
    for step in range(cap + 1):
        B, C, D = _split(A, target)
        c_clear = all(a.valuation() >= 1 for row in C for a in row)
        if phase1 is None and c_clear:
            phase1 = step
        hist.append({"step": step, "C_valuation": _min_val(C), "D_valuation": _min_val(D)})
        R = _remainder(C, D)
        if all(a.is_zero(ring.target) for row in R for a in row):
            state = DescentState(step, A, B, C, D, Phi, X, hist, W)
            return state, phase1
        if step == cap:
            break
        P = mat_sub(identity(ring, d), mat_scale(mat_mul(mat_map(lambda a: phi_r(a, r), R), Phi), cr_inv))
        try:
            Pinv = mat_inverse(P)
        except NotUnit:
            raise NoConvergence("base change lost invertibility",
                                {"step": step, "history": hist}) from None
        A = mat_mul(B, Pinv)
        Phi = mat_mul(mat_mul(mat_phi(P), Phi), Pinv)
        X = mat_mul(P, X)
        W = mat_mul(P, W)
    raise NoConvergence(f"no convergence within {cap} steps",
                        {"steps": cap, "phase1_step": phase1, "history": hist,
                         "profile": prof.as_dict()})


def _checks(M, out, X, Phi_out):
    """Machine checks that the output presents the same Breuil module as M."""
    ring = M.ring
    p, r, d = ring.p, M.r, M.d
    n = ring.target
    A_out = out.witness if out.kisin else out.A
    delta = mat_map(lambda a: a.reduce_prec(n), mat_sub(mat_mul(A_out, X), M.A))
    in_fil = all(fil_degree(a) >= p for row in delta for a in row)
    # phi_r(alpha_out) = c^r e_out with alpha_out = alpha_0 + delta e_0
    cr = ring.c() ** r
    Phi0 = M.frobenius_matrix()
    lhs = mat_scale(X, cr)
    rhs = _add_scalar(mat_mul(mat_map(lambda a: phi_r(a, r), delta), Phi0), cr, d)
    frob_l = mat_mul(mat_phi(X), Phi0)
    frob_r = mat_mul(Phi_out, X)
    # for Kisin output the Frobenius of S tensor_phi K is phi(K.A)
    try:
        own = mat_phi(out.A) if out.kisin else out.frobenius_matrix()
    except NotUnit:
        # precision ran out before the output Frobenius could be inverted
        return {"fil_data_preserved": in_fil, "phi_r_relation": mat_eq(lhs, rhs, n),
                "frobenius_relation": mat_eq(frob_l, frob_r, n), "witness_consistent": False,
                "precision": 0}
    prec = min(_reported(m) for m in (lhs, rhs, frob_l, frob_r, own, A_out))
    return {"fil_data_preserved": in_fil, "phi_r_relation": mat_eq(lhs, rhs, n),
            "frobenius_relation": mat_eq(frob_l, frob_r, n),
            "witness_consistent": mat_eq(own, Phi_out, n), "precision": prec}


def _reported(M):
    return min((a.reported_prec for row in M for a in row), default=0)


def _add_scalar(A, s, d):
    return [[a + s if i == j else a for j, a in enumerate(row)] for i, row in enumerate(A)]


def sigma_to_s(M):
    """Base change along Sigma -> S: same matrix, now read over S."""
    return SemilinearModule(M.ring, RingTag(S, M.tag.mod_p), M.r, M.A, M.witness, M.label)


def s_to_sigma_descent(M, max_steps=None):
    """Find a basis in which the Breuil matrix of an S-module lies over Sigma."""
    if M.kisin:
        raise KisinBreuilError("expected a Breuil module")
    if M.d == 0:
        return DescentResult(_retag(M, SIGMA), [], 0, 0)
    st, phase1 = _descend(M, SIGMA, max_steps)
    A_out = mat_map(lambda a: a.with_tag(SIGMA), st.B)
    W_out = mat_map(lambda a: a.with_tag(SIGMA) if membership(a, SIGMA) else a, st.witness)
    out = SemilinearModule(M.ring, RingTag(SIGMA, M.tag.mod_p), M.r, A_out, W_out, M.label)
    checks = _checks(M, out, st.base_change, st.frobenius)
    return DescentResult(out, st.base_change, st.step, phase1, checks, st.history)


def _retag(M, kind):
    return SemilinearModule(M.ring, RingTag(kind, M.tag.mod_p), M.r, M.A, M.witness, M.label)


def kisin_to_breuil(K):
    """S tensor_phi K: the Breuil matrix is the Kisin witness, the witness is the Kisin matrix."""
    if not K.kisin:
        raise KisinBreuilError("expected a Kisin module")
    return SemilinearModule(K.ring, RingTag(S, K.tag.mod_p), K.r, K.witness, K.A, K.label)


def breuil_to_kisin_descent(M, max_steps=None):
    """Recover the Kisin module of a unipotent Breuil module with r = p - 1."""
    ring = M.ring
    if M.kisin:
        raise KisinBreuilError("expected a Breuil module")
    if M.r != ring.p - 1:
        raise KisinBreuilError(f"descent to Kisin modules needs r = p - 1 = {ring.p - 1}")
    verdict = convergence_verdict(M, "unipotent")
    if verdict["verdict"] != "holds":
        raise NotUnipotent("module fails the unipotent convergence test", verdict)
    if M.d == 0:
        return DescentResult(SemilinearModule(ring, RingTag(FRAK, M.tag.mod_p), M.r, [], []), [], 0, 0)
    src = M
    pre = None
    if any(not membership(a, SIGMA) for row in M.A for a in row):
        pre = s_to_sigma_descent(M, max_steps)
        src = pre.module
    st, phase1 = _descend(src, FRAK, max_steps)
    B = mat_map(lambda a: a.with_tag(FRAK), st.B)
    Bp = lift_inverse_matrix(B, M.r, target=FRAK)
    K = SemilinearModule(ring, RingTag(FRAK, M.tag.mod_p), M.r, Bp, B, M.label)
    X = st.base_change if pre is None else mat_mul(st.base_change, pre.base_change)
    checks = _checks(M, K, X, st.frobenius)
    steps = st.step + (pre.steps if pre else 0)
    return DescentResult(K, X, steps, phase1, checks, st.history)


def mod_p_reduce(M):
    """Reduce all data mod p; S-modules keep only the Sigma part of their matrix."""
    tag = RingTag(M.tag.kind, True)
    A = mat_map(lambda a: a.reduce_prec(1), M.A)
    W = mat_map(lambda a: a.reduce_prec(1), M.witness)
    if M.tag.kind == S:
        # phi_r kills Fil^{p+1} S_1, so only the coordinates up to p matter
        A = truncate_fil(A, M.ring.p + 1)
        try:
            W = height_witness(A, M.r)
        except KisinBreuilError:
            pass
    return SemilinearModule(M.ring, tag, M.r, A, W, M.label)
