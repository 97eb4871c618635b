"""Command-line front door.

Subcommands: closure (coefficient tables), verify (suite harness),
equilibrium (state functions of one state), moments (kinetic moments and
residual blocks).

Output is deterministic: floats are rendered as 17-significant-digit strings,
rationals as "p/q" strings, keys are sorted, and files are written atomically
(temp file then rename).  CSV is a projection of the same rows as the JSON.

Exit codes: 0 success, 1 verification failure, 2 usage error, 3 resource cap.
ETCLOSURE_THREADS caps suite parallelism.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from typing import Dict, List, Optional, Sequence

from .closure import RANK_CAP, ClosureSpec, RankCapError, _max_workers, closure_table
from .equilibrium import (
    ThermoState,
    gibbs_residual,
    thermo_functions,
)
from .moments import (
    MultiplierState,
    delta_hprime,
    equilibrium_moments_with_traces,
    symmetry_residual,
)
from .scalar import FunctionRegistry
from .tensors import DenseSymTensor, FourVector
from .verify import SUITES, VerifyConfig, run_suites

STATS_ALIASES = {"mb": "nondegenerate", "fd": "fermion", "be": "boson"}


# ---------------------------------------------------------------------------
# canonical rendering


def _render(obj):
    """Recursively convert values to their canonical JSON-ready forms."""
    if isinstance(obj, float):
        return format(obj, ".17g")
    if isinstance(obj, Fraction):
        if obj.denominator == 1:
            return str(obj.numerator)
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, dict):
        return {str(k): _render(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_render(v) for v in obj]
    if isinstance(obj, DenseSymTensor):
        return _render(obj.to_json_obj())
    if isinstance(obj, FourVector):
        return {"components": _render(list(obj.components)), "variance": obj.variance}
    return obj


def _to_json(obj) -> str:
    return json.dumps(_render(obj), sort_keys=True, indent=2) + "\n"


def _to_csv(rows: List[dict]) -> str:
    buf = io.StringIO()
    if not rows:
        return ""
    fields = list(rows[0].keys())
    writer = csv.DictWriter(buf, fieldnames=fields)
    writer.writeheader()
    for row in rows:
        flat = {}
        for key in fields:
            val = _render(row.get(key))
            if isinstance(val, (dict, list)):
                val = json.dumps(val, sort_keys=True)
            flat[key] = "" if val is None else val
        writer.writerow(flat)
    return buf.getvalue()


def _write_out(text: str, out: Optional[str]) -> None:
    if not out:
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(out))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".etclosure-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, out)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# argument plumbing


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="etclosure",
        description="Moment-closure coefficient tables, verification suites, "
        "and equilibrium thermodynamics.",
    )
    parser.add_argument("--config", help="key = value file merged under explicit flags")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--M", type=int, default=2, help="even rank of the first multiplier")
        p.add_argument("--N", type=int, default=1, help="odd rank of the second multiplier")
        p.add_argument("--hmax", type=int, default=2)
        p.add_argument("--kmax", type=int, default=2)
        p.add_argument("--lambda", dest="lam", type=float, default=1.0)
        p.add_argument("--gamma", type=float, default=1.0)
        for i in range(4):
            p.add_argument(f"--mu{i}", type=float, default=None,
                           help="contravariant component (overrides --gamma)")
        p.add_argument("--m", type=float, default=1.0)
        p.add_argument("--stats", choices=sorted(STATS_ALIASES), default="mb")
        p.add_argument("--tol", type=float, default=None)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--out", default=None)

    p_closure = sub.add_parser("closure", help="emit the coefficient table")
    common(p_closure)

    p_verify = sub.add_parser("verify", help="run verification suites")
    common(p_verify)
    p_verify.add_argument("--suite", action="append", default=None,
                          help=f"suite name (repeatable); one of: {', '.join(SUITES)}")
    p_verify.add_argument("--mutate", type=int, default=0,
                          help="corrupt K coefficients first (negative control)")

    p_eq = sub.add_parser("equilibrium", help="state functions of one state")
    common(p_eq)

    p_mom = sub.add_parser("moments", help="kinetic moments plus residual blocks")
    common(p_mom)
    return parser


def _apply_config_file(parser: argparse.ArgumentParser, argv: Sequence[str]) -> Sequence[str]:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return argv
    defaults: Dict[str, object] = {}
    with open(known.config) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"config line is not key = value: {line!r}")
            key, val = (part.strip() for part in line.split("=", 1))
            key = {"lambda": "lam"}.get(key, key)
            defaults[key] = val
    # cast using the types of the existing defaults where known
    for action in parser._actions:
        if action.dest in defaults and action.type is not None:
            defaults[action.dest] = action.type(defaults[action.dest])
    for sub_action in (a for a in parser._actions if isinstance(a, argparse._SubParsersAction)):
        for sp in sub_action.choices.values():
            known_dests = {a.dest for a in sp._actions}
            cast = {}
            for key, val in defaults.items():
                if key not in known_dests:
                    continue
                for a in sp._actions:
                    if a.dest == key and a.type is not None and isinstance(val, str):
                        val = a.type(val)
                cast[key] = val
            sp.set_defaults(**cast)
    return argv


def _state_from_args(args) -> ThermoState:
    mu_given = [getattr(args, f"mu{i}") for i in range(4)]
    if any(c is not None for c in mu_given):
        comps = tuple(0.0 if c is None else float(c) for c in mu_given)
        mu = FourVector(comps, "upper")
    else:
        if args.gamma <= 0:
            raise ValueError("gamma must be positive")
        mu = FourVector((args.gamma, 0.0, 0.0, 0.0), "upper")
    return ThermoState(args.lam, mu, args.m, statistics=STATS_ALIASES[args.stats])


def _spec_from_args(args, registry: Optional[FunctionRegistry] = None) -> ClosureSpec:
    return ClosureSpec(
        args.M, args.N, h_max=args.hmax, k_max=args.kmax,
        registry=registry or FunctionRegistry.polynomials(args.seed), m=1,
    )


# ---------------------------------------------------------------------------
# subcommands


def cmd_closure(args) -> int:
    spec = _spec_from_args(args)
    # the table must cover every requested order; a truncation reaching past
    # the rank cap is a resource error, not a silently smaller table
    top_h = spec.h_max if spec.M >= 2 else 0
    top_k = spec.k_max if spec.N >= 3 else 0
    if spec.rank(top_h, top_k) > RANK_CAP:
        raise RankCapError(
            f"rank {spec.rank(top_h, top_k)} at (h,k)=({top_h},{top_k}) "
            f"exceeds cap {RANK_CAP}; lower --hmax/--kmax"
        )
    rows = closure_table(spec)
    if args.format == "csv":
        _write_out(_to_csv(rows), args.out)
    else:
        doc = {"M": spec.M, "N": spec.N, "h_max": spec.h_max, "k_max": spec.k_max,
               "rows": rows}
        _write_out(_to_json(doc), args.out)
    return 0


def cmd_verify(args) -> int:
    names = None
    if args.suite:
        names = []
        for entry in args.suite:
            names.extend(s.strip() for s in entry.split(",") if s.strip())
    cfg = VerifyConfig(
        M=args.M, N=args.N, h_max=args.hmax, k_max=args.kmax,
        seed=args.seed, mutate=args.mutate, tol=args.tol,
    )
    chosen = list(SUITES) if not names else names
    for name in chosen:
        if name not in SUITES:
            raise KeyError(f"unknown suite {name!r}")
    with ThreadPoolExecutor(max_workers=_max_workers()) as pool:
        results = list(pool.map(lambda name: SUITES[name](cfg), chosen))
    doc = {
        "passed": all(r.passed for r in results),
        "seed": args.seed,
        "mutate": args.mutate,
        "results": [r.to_json_obj() for r in results],
    }
    if args.format == "csv":
        rows = [
            {"suite": r.name, "cases": r.cases, "failures": r.failures,
             "max_residual": r.max_residual, "seed": r.seed}
            for r in results
        ]
        _write_out(_to_csv(rows), args.out)
    else:
        _write_out(_to_json(doc), args.out)
    return 0 if doc["passed"] else 1


def cmd_equilibrium(args) -> int:
    state = _state_from_args(args)
    funcs = thermo_functions(state)
    doc = {
        "lambda": state.lam,
        "gamma": state.gamma,
        "m": state.m,
        "statistics": state.statistics,
        "n": funcs.n,
        "p": funcs.p,
        "e": funcs.e,
        "s": funcs.s,
        "T": funcs.T,
        "gibbs_residual": gibbs_residual(state),
    }
    if args.format == "csv":
        _write_out(_to_csv([doc]), args.out)
    else:
        _write_out(_to_json(doc), args.out)
    return 0


def cmd_moments(args) -> int:
    state = _state_from_args(args)
    spec = _spec_from_args(args)
    mset, report = equilibrium_moments_with_traces(state, spec)
    mstate = MultiplierState.at_equilibrium(state, spec)
    delta = delta_hprime(mstate)
    doc = {
        "A": mset.A,
        "B": mset.B,
        "hprime": mset.hprime,
        "truncation": list(mset.truncation),
        "delta_hprime": [float(c) for c in delta.components],
        "residuals": {
            "symmetry": symmetry_residual(mstate),
            "traces": report["traces"],
            "orders": report["orders"],
        },
        "kinetic": report["kinetic"],
    }
    if args.format == "csv":
        rows = []
        for block in ("A", "B"):
            tensor: DenseSymTensor = getattr(mset, block)
            for idx, val in tensor.items():
                rows.append({"block": block, "index": "".join(map(str, idx)), "value": val})
        for i, c in enumerate(mset.hprime.components):
            rows.append({"block": "hprime", "index": str(i), "value": c})
        _write_out(_to_csv(rows), args.out)
    else:
        _write_out(_to_json(doc), args.out)
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
        if args.command == "closure":
            return cmd_closure(args)
        if args.command == "verify":
            return cmd_verify(args)
        if args.command == "equilibrium":
            return cmd_equilibrium(args)
        return cmd_moments(args)
    except RankCapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
