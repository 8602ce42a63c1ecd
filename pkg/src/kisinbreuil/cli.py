"""Batch front-end: read a JSON job file, run its commands, print a report.

Job files look like

    {"schema": "kisinbreuil-job/1",
     "ctx": {"p": 3, "e": 1, "E_coeffs": [-3, 1]},
     "precision": {"N": 6},
     "items": [{"id": "M", "kind": "module", "tag": "Sigma", "r": 2, "matrix": [["E^2"]]}],
     "commands": [{"run": "classify", "item": "M"}, {"run": "functor descend", "item": "M"}]}

See README.md for the full schema.  Exit codes: 0 when every command succeeds,
1 on parse or validation failures, 2 when an iteration does not converge or a
module is not unipotent.
"""
from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

from . import filtered as flt
from .errors import KisinBreuilError, NoConvergence, NotUnipotent
from .functors import breuil_to_kisin_descent, kisin_to_breuil, s_to_sigma_descent, sigma_to_s
from .literals import matrix_literal, parse_matrix, to_literal
from .modules import (canonical_sequences, cartier_dual, classify,
                      convergence_verdict, make_module, max_multiplicative)
from .padic_core import EisensteinData
from .rings import FRAK, SIGMA, TAG_BY_NAME, PrecisionProfile, RingTag, SElement, get_ring

JOB_SCHEMA = "kisinbreuil-job/1"
REPORT_SCHEMA = "kisinbreuil-report/1"

MODULE_COMMANDS = ("validate", "classify", "dual", "mm", "sequences", "functor sigma-to-s",
                   "functor s-to-sigma", "functor kisin-to-breuil", "functor descend")
FILTERED_COMMANDS = ("validate", "dual", "filtered invariants", "filtered wa")
LATTICE_COMMANDS = ("classify", "lattice quasi", "lattice strong", "lattice n-in-sigma")


class JobError(Exception):
    """Malformed job; reported with exit code 1."""


class ValidationFailed(KisinBreuilError):
    """A validate command found violated axioms."""


# -- json helpers --------------------------------------------------------------


def jsonable(x):
    if isinstance(x, bool) or x is None or isinstance(x, (int, str)):
        return x
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, SElement):
        return to_literal(x)
    if isinstance(x, RingTag):
        return x.name
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    return str(x)


def render_text(obj, prefix=""):
    """Flat `path: value` lines, one per leaf."""
    lines = []
    if isinstance(obj, dict):
        for k in sorted(obj):
            lines += render_text(obj[k], f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(obj, list) and any(isinstance(v, (dict, list)) for v in obj):
        for i, v in enumerate(obj):
            lines += render_text(v, f"{prefix}[{i}]")
    else:
        lines.append(f"{prefix}: {json.dumps(obj, sort_keys=True)}")
    return lines


# -- job parsing ---------------------------------------------------------------


def _need(rec, key, where):
    if key not in rec:
        raise JobError(f"{where}: missing field {key!r}")
    return rec[key]


class Job:
    def __init__(self, data, precision_n=None):
        if not isinstance(data, dict):
            raise JobError("job file must hold a JSON object")
        if data.get("schema") != JOB_SCHEMA:
            raise JobError(f"unsupported schema {data.get('schema')!r}; expected {JOB_SCHEMA!r}")
        c = _need(data, "ctx", "job")
        self.ctx = EisensteinData(int(_need(c, "p", "ctx")), int(_need(c, "e", "ctx")),
                                  tuple(_need(c, "E_coeffs", "ctx")))
        self.profile = self._profile(data.get("precision", {}), precision_n)
        self.ring = get_ring(self.ctx, self.profile)
        self.items = {}
        self.order = []
        for rec in _need(data, "items", "job"):
            iid = str(_need(rec, "id", "item"))
            if iid in self.items:
                raise JobError(f"duplicate item id {iid!r}")
            self.items[iid] = self._item(rec, iid)
            self.order.append(iid)
        self.commands = [self._command(c) for c in _need(data, "commands", "job")]

    def _profile(self, rec, precision_n):
        N = int(precision_n if precision_n is not None else rec.get("N", 6))
        keys = ("I", "U", "conv_order")
        if all(k not in rec for k in keys):
            return PrecisionProfile.default(self.ctx, N)
        base = PrecisionProfile.default(self.ctx, N, rec.get("conv_order"))
        I = int(rec.get("I", base.I))
        U = int(rec.get("U", self.ctx.e * I))
        K = int(rec.get("conv_order", min(N, I)))
        return PrecisionProfile(N, I, U, K).check(self.ctx)

    def _item(self, rec, iid):
        kind = _need(rec, "kind", iid)
        if kind == "module":
            tname = _need(rec, "tag", iid)
            if tname not in TAG_BY_NAME:
                raise JobError(f"{iid}: unknown tag {tname!r}; use one of {sorted(TAG_BY_NAME)}")
            tag = RingTag(TAG_BY_NAME[tname], bool(rec.get("mod_p", False)))
            A = parse_matrix(self.ring, _need(rec, "matrix", iid))
            W = parse_matrix(self.ring, rec["witness"]) if "witness" in rec else None
            return ("module", make_module(self.ring, tag, int(_need(rec, "r", iid)), A, W, iid))
        if kind == "filtered":
            E = [Fraction(a) for a in self.ctx.E_coeffs]
            phi = [[flt.parse_rational(a) for a in row] for row in _need(rec, "phi", iid)]
            d = len(phi)
            n = [[flt.parse_rational(a) for a in row] for row in rec.get("n", [[0] * d] * d)]
            jumps = [(int(_need(j, "index", iid)),
                      [[flt.parse_k(x, E) for x in v] for v in _need(j, "vectors", iid)])
                     for j in rec.get("jumps", [])]
            r = rec.get("r")
            D = flt.FilteredPhiNModule(self.ctx, phi, n, jumps, None if r is None else int(r), iid)
            subs = [[[flt.parse_rational(a) for a in row] for row in W]
                    for W in rec.get("submodules", [])]
            return ("filtered", (D, subs, bool(rec.get("search", False))))
        if kind == "lattice":
            src = _need(rec, "filtered", iid)
            if self.items.get(src, (None,))[0] != "filtered":
                raise JobError(f"{iid}: {src!r} is not an earlier filtered item")
            B = parse_matrix(self.ring, _need(rec, "basis", iid))
            Nm = parse_matrix(self.ring, rec["n_matrix"]) if "n_matrix" in rec else None
            return ("lattice", (src, flt.LatticeCandidate(B, Nm, iid)))
        raise JobError(f"{iid}: unknown item kind {kind!r}")

    def _command(self, c):
        if isinstance(c, str):
            c = {"run": c}
        run = " ".join(str(_need(c, "run", "command")).split())
        iid = c.get("item")
        if iid is None:
            if len(self.order) != 1:
                raise JobError(f"command {run!r} must name an item")
            iid = self.order[0]
        if iid not in self.items:
            raise JobError(f"command {run!r}: unknown item {iid!r}")
        kind = self.items[iid][0]
        allowed = {"module": MODULE_COMMANDS, "filtered": FILTERED_COMMANDS,
                   "lattice": LATTICE_COMMANDS}[kind]
        if run not in allowed:
            raise JobError(f"command {run!r} does not apply to {kind} item {iid!r}")
        return run, iid


# -- commands ------------------------------------------------------------------


def module_record(M):
    return {"tag": M.tag.name, "r": M.r, "rank": M.d, "matrix": matrix_literal(M.A),
            "witness": matrix_literal(M.witness)}


def _verdicts(M, max_steps):
    return {m: convergence_verdict(M, m, max_steps) for m in ("unipotent", "nilpotent")}


def _run_module(job, run, M, max_steps):
    if run == "validate":
        problems = []
        if not M.check_witness():
            problems.append("witness")
        if M.d and any(len(row) != M.d for row in M.A):
            problems.append("square_matrix")
        if problems:
            raise ValidationFailed(f"module {M.label} is invalid", problems)
        return {"valid": True, "module": module_record(M)}
    if run == "classify":
        out = dict(classify(M))
        if M.tag.kind in (FRAK, SIGMA) or M.tag.mod_p:
            out.update(_verdicts(M, max_steps))
        return out
    if run == "dual":
        return {"module": module_record(cartier_dual(M))}
    if run == "mm":
        rank, Q, sub = max_multiplicative(M, max_steps)
        return {"rank": rank, "base_change": matrix_literal(Q), "module": module_record(sub)}
    if run == "sequences":
        seq = canonical_sequences(M)
        return {"ranks": dict(zip(("m", "nil", "uni", "et"), seq["ranks"])),
                **{k: module_record(seq[k]) for k in ("m", "nil", "uni", "et")}}
    if run == "functor sigma-to-s":
        return {"module": module_record(sigma_to_s(M))}
    if run == "functor kisin-to-breuil":
        return {"module": module_record(kisin_to_breuil(M))}
    if run == "functor s-to-sigma":
        res = s_to_sigma_descent(M, max_steps)
        return _descent_record(res)
    if run == "functor descend":
        res = breuil_to_kisin_descent(M, max_steps)
        out = _descent_record(res)
        out["kisin_matrix"] = out["module"]["matrix"]
        out["unipotent"] = convergence_verdict(M, "unipotent", max_steps)
        return out
    raise JobError(run)


def _descent_record(res):
    return {"module": module_record(res.module), "base_change": matrix_literal(res.base_change),
            "steps": res.steps, "phase1_step": res.phase1_steps, "checks": res.checks}


def _run_filtered(job, run, item):
    D, subs, search = item
    if run == "validate":
        problems = D.problems()
        if problems:
            raise ValidationFailed(f"filtered module {D.label} is invalid", problems)
        return {"valid": True}
    if run == "filtered invariants":
        th, tn = flt.invariants(D)
        return {"t_H": th, "t_N": tn}
    if run == "filtered wa":
        return flt.wa_report(D, subs, search)
    if run == "dual":
        r = D.r if D.r is not None else D.top()
        Dd = flt.dual_filtered(D, r)
        return {"phi": Dd.phi, "n": Dd.n, "r": r,
                "jumps": [{"index": i, "vectors": [[flt.k_literal(x) for x in v] for v in vs]}
                          for i, vs in Dd.jumps]}
    raise JobError(run)


def _run_lattice(job, run, item):
    src, L = item
    D = job.items[src][1][0]
    DD = flt.build_DD(D, job.ring)
    if run == "classify":
        side_d, side_m = flt.predicate_summary(DD, L)
        return {"filtered": side_d, "module": side_m}
    mode = run.split()[1].replace("-", "_")
    return flt.lattice_check(DD, L, mode)


def run_command(job, run, iid, max_steps=None):
    """One report record; exit code 0, 1 or 2."""
    kind, item = job.items[iid]
    rec = {"command": run, "item": iid}
    try:
        if kind == "module":
            body = _run_module(job, run, item, max_steps)
        elif kind == "filtered":
            body = _run_filtered(job, run, item)
        else:
            body = _run_lattice(job, run, item)
    except (NoConvergence, NotUnipotent) as exc:
        rec.update(status="error", error=type(exc).__name__, message=str(exc),
                   diagnostics=exc.diagnostics)
        return rec, 2
    except ValidationFailed as exc:
        rec.update(status="invalid", problems=exc.args[1])
        return rec, 1
    except KisinBreuilError as exc:
        rec.update(status="error", error=type(exc).__name__, message=str(exc))
        return rec, 1
    rec.update(status="ok", result=body)
    return rec, 0


def run_job(data, precision_n=None, max_steps=None, parallel=False):
    """(report dict, exit code) for a parsed job file."""
    try:
        job = Job(data, precision_n)
    except (JobError, KisinBreuilError, ValueError, TypeError) as exc:
        return {"schema": REPORT_SCHEMA, "status": "error", "error": type(exc).__name__,
                "message": str(exc)}, 1
    cmds = job.commands
    if parallel and len(cmds) > 1:
        with ThreadPoolExecutor() as pool:
            outs = list(pool.map(lambda c: run_command(job, c[0], c[1], max_steps), cmds))
    else:
        outs = [run_command(job, run, iid, max_steps) for run, iid in cmds]
    code = max((c for _, c in outs), default=0)
    report = {"schema": REPORT_SCHEMA, "ctx": {"p": job.ctx.p, "e": job.ctx.e,
                                               "E_coeffs": list(job.ctx.E_coeffs)},
              "profile": job.profile.as_dict(), "results": [r for r, _ in outs],
              "status": "ok" if code == 0 else "error", "exit_code": code}
    return report, code


def format_report(report, style="json"):
    obj = jsonable(report)
    if style == "text":
        return "\n".join(render_text(obj)) + "\n"
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def main(argv=None):
    ap = argparse.ArgumentParser(prog="kisinbreuil", description=__doc__.splitlines()[0])
    ap.add_argument("job", nargs="?", help="job file (same as --input)")
    ap.add_argument("--input", help="path to the JSON job file")
    ap.add_argument("--report", choices=("json", "text"), default="json")
    ap.add_argument("--precision-n", type=int, help="override the p-adic precision N")
    ap.add_argument("--max-steps", type=int, help="cap on iteration steps")
    ap.add_argument("--parallel", action="store_true", help="run commands concurrently")
    args = ap.parse_args(argv)
    path = args.input or args.job
    if not path:
        ap.error("a job file is required")
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        report, code = {"schema": REPORT_SCHEMA, "status": "error", "error": type(exc).__name__,
                        "message": str(exc)}, 1
    else:
        report, code = run_job(data, args.precision_n, args.max_steps, args.parallel)
    sys.stdout.write(format_report(report, args.report))
    return code


if __name__ == "__main__":
    sys.exit(main())
