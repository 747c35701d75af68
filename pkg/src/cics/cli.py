"""Command-line front end.

Exit codes: 0 ok, 2 parse error, 3 cap exceeded, 4 domain error.  Errors are
written to stderr as a JSON object ``{"error": kind, "message": text}``.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

from .amort import mdp_curve, mdp_surrogate, water_fill
from .curve import first_order_witness, second_order_witness
from .errors import CapExceeded, DomainError, ParseError
from .instance_io import canonical_json, commitment_to_json, load_instance
from .selection import brute_force_opt, commitment_gap, index_policy_value, semilocal_compose
from .variants import additive_static_commit, pbpi_commit, pboi_params, pboi_semilocal_rule, semilocal_witness


def _emit(obj) -> None:
    sys.stdout.write(canonical_json(obj))


def _alt(inst, i: int):
    if not 0 <= i < len(inst.alternatives):
        raise DomainError(f"--alt {i} out of range (0..{len(inst.alternatives) - 1})")
    return inst.alternatives[i]


def _pair(text: str, what: str) -> tuple[str, str]:
    parts = text.split(",")
    if len(parts) != 2:
        raise ParseError(f"{what} expects two comma-separated values, got {text!r}")
    return parts[0], parts[1]


def cmd_index(args) -> None:
    inst = load_instance(args.file)
    out = []
    for i, a in enumerate(inst.alternatives):
        chain = a.default_chain(inst.mode)
        row = {"alt": i, "type": a.kind, "root_index": water_fill(chain, inst.mode).index}
        if a.kind == "pb":
            row["g"] = row["root_index"]
        elif a.kind == "pbpi":
            row.update(g_open=a.obj.g_open, commit=pbpi_commit(a.obj)["action"])
            if a.obj.has_peek:
                row["g_peek"] = a.obj.g_peek
        elif a.kind == "additive":
            row["ordering"] = list(additive_static_commit(a.obj)["ordering"])
        elif a.kind == "ws":
            w = a.obj
            row.update(g=w.g, mu=w.mu, M=w.median)
            if w.h is not None:
                row["h"] = w.h
            if w.kappa is not None:
                row["kappa"] = w.kappa
        elif a.kind == "pboi":
            prm = pboi_params(a.obj)
            row.update(mu=prm.mu, g=prm.g, h=prm.h, normalized=prm.normalized)
        out.append(row)
    _emit({"alternatives": out})


def cmd_curve(args) -> None:
    inst = load_instance(args.file)
    f = mdp_curve(_alt(inst, args.alt).mdp, inst.mode)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["y", "f", "slope"])
        for y, v, s in f.table():
            w.writerow([repr(y), repr(v), repr(s)])
    finally:
        if args.out:
            fh.close()


def cmd_surrogate(args) -> None:
    inst = load_instance(args.file)
    _emit(mdp_surrogate(_alt(inst, args.alt).mdp, inst.mode).to_pairs())


def cmd_eval(args) -> None:
    inst = load_instance(args.file)
    choices = [None] * len(inst.alternatives)
    if args.commit:
        try:
            choices = json.loads(args.commit)
        except json.JSONDecodeError as exc:
            raise ParseError(f"--commit is not valid JSON: {exc}") from exc
        if not isinstance(choices, list) or len(choices) != len(inst.alternatives):
            raise ParseError("--commit must be a JSON list with one entry per alternative")
    chains = [a.chain_for(c, inst.mode) for a, c in zip(inst.alternatives, choices)]
    method = "exact"
    if args.mc:
        seed, reps = _pair(args.mc, "--mc")
        try:
            method = ("mc", int(seed), int(reps))
        except ValueError as exc:
            raise ParseError(f"--mc expects integers: {exc}") from exc
    _emit({"value": index_policy_value(chains, inst.matroid, inst.mode, method)})


def cmd_opt(args) -> None:
    inst = load_instance(args.file)
    res = brute_force_opt(inst.instance())
    _emit({"value": res.value, "root_action": res.root_action})


def cmd_gap(args) -> None:
    inst = load_instance(args.file)
    res = commitment_gap(inst.instance())
    best = [commitment_to_json(a.mdp, pi) for a, pi in zip(inst.alternatives, res.best)]
    _emit({"gap": res.gap, "best": best, "best_value": res.best_value, "opt": res.opt})


def cmd_verify(args) -> None:
    inst = load_instance(args.file)
    a = _alt(inst, args.alt)
    alpha = args.alpha
    if args.semilocal:
        if a.kind != "pboi":
            raise DomainError("semilocal checks apply to optional-inspection boxes only")
        beta, p = (float(x) for x in _pair(args.semilocal, "--semilocal"))
        y = semilocal_witness(pboi_params(a.obj).box, p, alpha, beta)
        _emit({"pass": y is None, "witness_y": y})
        return
    W_pi = water_fill(a.default_chain(inst.mode), inst.mode).surrogate
    W_M = mdp_surrogate(a.mdp, inst.mode).scale(alpha)
    if args.pointwise:
        q = first_order_witness(W_pi, W_M) if inst.mode == "min" else first_order_witness(W_M, W_pi)
        _emit({"pass": q is None, "witness_q": q})
        return
    y = second_order_witness(W_pi, W_M, inst.mode)
    _emit({"pass": y is None, "witness_y": y})


def cmd_compose(args) -> None:
    inst = load_instance(args.file)
    if inst.mode != "max" or any(a.kind != "pboi" for a in inst.alternatives):
        raise DomainError("compose-semilocal needs a max-mode instance of optional-inspection boxes")
    boxes = [a.obj for a in inst.alternatives]
    rules = [pboi_semilocal_rule(b, args.beta) for b in boxes]
    probs = [r["p"] for r in rules]
    value = semilocal_compose(boxes, inst.matroid, probs)
    _emit({"value": value, "probs": probs, "alphas": [r["alpha"] for r in rules]})


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cics", description="Costly-information selection toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", help="root indices and key scalars per alternative")
    p.add_argument("file")
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("curve", help="breakpoint table of an optimality curve")
    p.add_argument("file")
    p.add_argument("--alt", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("surrogate", help="atoms of the surrogate cost")
    p.add_argument("file")
    p.add_argument("--alt", type=int, required=True)
    p.set_defaults(func=cmd_surrogate)

    p = sub.add_parser("eval", help="index policy value under commitments")
    p.add_argument("file")
    p.add_argument("--commit", help="JSON list, one choice (or null) per alternative")
    p.add_argument("--mc", help="seed,reps for Monte Carlo evaluation")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("opt", help="optimal adaptive value by backward induction")
    p.add_argument("file")
    p.set_defaults(func=cmd_opt)

    p = sub.add_parser("gap", help="commitment gap and the best commitment tuple")
    p.add_argument("file")
    p.set_defaults(func=cmd_gap)

    p = sub.add_parser("verify", help="check a local, pointwise or semilocal approximation")
    p.add_argument("file")
    p.add_argument("--alt", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--pointwise", action="store_true")
    g.add_argument("--semilocal", metavar="BETA,P")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("compose-semilocal", help="value of the randomized grab-or-open composition")
    p.add_argument("file")
    p.add_argument("--beta", type=float, required=True)
    p.set_defaults(func=cmd_compose)
    return ap


def _fail(kind: str, code: int, exc: Exception) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": str(exc)}) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        args.func(args)
    except ParseError as exc:
        return _fail("parse", 2, exc)
    except CapExceeded as exc:
        return _fail("cap", 3, exc)
    except (DomainError, ValueError) as exc:
        return _fail("domain", 4, exc)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
