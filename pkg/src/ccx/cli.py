"""Batch front end: read a problem file, run a pipeline stage, emit a report.

Every command reads one JSON problem file (schema ccx/1) and writes one JSON
report to stdout or --out.  Reports are canonical (sorted keys, fixed float
formatting), so identical file + flags + seed produce byte-identical output.

Exit codes: 0 success, 1 parse error, 2 validation failure, 3 numerical
certification failure.
"""

from __future__ import annotations

import argparse
import sys

from . import errors as err
from .cpmaps import CPMap, twirl, validate_map
from .extremality import extremality_verdict, split_two_term, unitary_equivalence
from .fixed_points import (
    extend_from_fixed_algebra,
    fixed_point_algebra,
    hull_experiment,
    restrict_to_fixed_algebra,
)
from .groups import validate_action
from .linalg import Tolerances
from .radon_nikodym import dilation_context, interval_sample, rn_forward, rn_inverse, rn_operator
from .serialize import (
    SCHEMA,
    dumps_canonical,
    encode_matrices,
    encode_matrix,
    load_problem,
    parse_matrix,
)
from .stinespring import covariance_defects, covariant_unitaries, minimal_dilation

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_VALIDATION = 2
EXIT_CERTIFICATION = 3

_VALIDATION_ERRORS = (
    err.InvalidActionError,
    err.NotInvariantError,
    err.NotCPError,
    err.NotUnitalError,
    err.DimensionMismatchError,
    err.NotNormalizedError,
    err.NotDominatedError,
    err.UncertifiedInputError,
    err.BadIndexError,
    err.NotSameMapError,
    err.NotMinimalError,
    err.NonHermitianError,
    err.NotPSDError,
)
_CERTIFICATION_ERRORS = (
    err.ResidualTooLargeError,
    err.SingularCompressionError,
    err.OutOfIntervalError,
    err.NotInCommutantError,
    err.SingularError,
)


def _tolerances(problem, args):
    tol = problem.tolerances
    if args.tol is not None:
        tol = Tolerances(
            psd_floor=tol.psd_floor,
            rank_cut=tol.rank_cut,
            eq_tol=float(args.tol),
            herm_tol=tol.herm_tol,
        )
    return tol


def _seed(problem, args):
    return int(args.seed) if args.seed is not None else problem.seed


def _pick_map(problem, name, flag="--map"):
    if name is None:
        if len(problem.maps) == 1:
            return next(iter(problem.maps))
        raise err.ParseError(
            f"{flag} is required when the file defines {len(problem.maps)} maps "
            f"({', '.join(sorted(problem.maps)) or 'none'})"
        )
    if name not in problem.maps:
        raise err.ParseError(f"map {name!r} not defined in the problem file")
    return name


def _map_flags(cp_map, act, tol):
    val = validate_map(cp_map, act, tol)
    return {"cp": val.cp, "unital": val.unital, "invariant": val.invariant}


def _encode_map(cp_map: CPMap):
    return {
        "block_dims": list(cp_map.domain.block_dims),
        "hilbert_dim": cp_map.codomain_dim,
        "choi_blocks": encode_matrices(cp_map.choi_blocks),
        "kraus_ranks": list(cp_map.kraus_ranks),
    }


# -- command handlers ---------------------------------------------------------


def _cmd_validate(problem, args, tol):
    """Exit 2 when the action is invalid or a map is not unital CP; the
    invariance flag is informational (non-invariant maps are legitimate
    inputs, e.g. for twirling)."""
    report = validate_action(problem.action, tol)
    names = [_pick_map(problem, args.map)] if args.map else sorted(problem.maps)
    maps = {}
    ok = report.valid
    for name in names:
        cp_map = problem.maps[name]
        same_domain = problem.map_domains[name].block_dims == problem.algebra.block_dims
        if report.valid and same_domain:
            flags = _map_flags(cp_map, problem.action, tol)
        else:
            flags = _map_flags(cp_map, None, tol)
        maps[name] = flags
        ok = ok and flags["cp"] and flags["unital"]
    result = {
        "action": {"valid": report.valid, "failures": list(report.failures)},
        "maps": maps,
    }
    return result, EXIT_OK if ok else EXIT_VALIDATION


def _cmd_twirl(problem, args, tol):
    name = _pick_map(problem, args.map)
    out = twirl(problem.maps[name], problem.action, tol)
    return {
        "map": name,
        "twirled": _encode_map(out),
        "flags": _map_flags(out, problem.action, tol),
    }, EXIT_OK


def _cmd_dilate(problem, args, tol):
    name = _pick_map(problem, args.map)
    cp_map = problem.maps[name]
    triple = minimal_dilation(cp_map, tol)
    result = {
        "map": name,
        "dilation_dim": triple.dilation_dim,
        "multiplicities": list(triple.multiplicities),
        "isometry": encode_matrix(triple.isometry),
        "minimal": triple.minimal,
    }
    flags = validate_map(cp_map, problem.action, tol)
    if flags.invariant:
        cov = covariant_unitaries(cp_map, triple, problem.action, tol)
        result["covariant_unitaries"] = encode_matrices(cov.unitaries)
        result["covariance_defects"] = covariance_defects(triple, problem.action, cov, tol)
    else:
        result["covariant_unitaries"] = None
    return result, EXIT_OK


def _cmd_commutant(problem, args, tol):
    name = _pick_map(problem, args.map)
    ctx = dilation_context(problem.maps[name], problem.action, tol)
    return {
        "map": name,
        "dilation_dim": ctx.dilation_dim,
        "dimension": ctx.commutant_dim,
        "basis": encode_matrices(ctx.commutant_basis),
    }, EXIT_OK


def _load_t_operator(ctx, args, seed, tol):
    if args.t_file is not None:
        import json

        try:
            with open(args.t_file, encoding="utf-8") as fh:
                raw = json.load(fh)
        except Exception as exc:
            raise err.ParseError(f"cannot read {args.t_file}: {exc}") from exc
        mat = parse_matrix(raw, "t_file", rows=ctx.dilation_dim, cols=ctx.dilation_dim)
        return rn_operator(ctx, mat, tol)
    if args.sweep_index is not None:
        ops = interval_sample(ctx, seed=seed, mode="basis_sweep", tol=tol)
        if not 0 <= args.sweep_index < len(ops):
            raise err.ParseError(
                f"--sweep-index out of range (sweep has {len(ops)} operators)"
            )
        return ops[args.sweep_index]
    raise err.ParseError("rn forward / split need --sweep-index or --t-file")


def _cmd_rn(problem, args, tol):
    name = _pick_map(problem, args.map)
    seed = _seed(problem, args)
    ctx = dilation_context(problem.maps[name], problem.action, tol)
    if args.direction == "forward":
        t_op = _load_t_operator(ctx, args, seed, tol)
        image = rn_forward(ctx, t_op, tol)
        return {
            "map": name,
            "direction": "forward",
            "t_operator": encode_matrix(t_op.operator),
            "compression_invertible": t_op.compression_invertible,
            "image": _encode_map(image),
            "flags": _map_flags(image, problem.action, tol),
        }, EXIT_OK
    psi_name = _pick_map(problem, args.psi, flag="--psi")
    t_op = rn_inverse(ctx, problem.maps[psi_name], tol)
    return {
        "map": name,
        "direction": "inverse",
        "psi": psi_name,
        "t_operator": encode_matrix(t_op.operator),
        "compression_invertible": t_op.compression_invertible,
    }, EXIT_OK


def _cmd_split(problem, args, tol):
    name = _pick_map(problem, args.map)
    seed = _seed(problem, args)
    ctx = dilation_context(problem.maps[name], problem.action, tol)
    t_op = _load_t_operator(ctx, args, seed, tol)
    split = split_two_term(ctx, t_op, args.alpha, tol)
    return {
        "map": name,
        "alpha": args.alpha,
        "t_operator": encode_matrix(t_op.operator),
        "coefficients": encode_matrices(split.coefficients),
        "summands": [_encode_map(m) for m in split.summands],
        "summand_flags": [_map_flags(m, problem.action, tol) for m in split.summands],
        "reconstruction_defect": split.reconstruction_defect,
    }, EXIT_OK


def _cmd_equivalence(problem, args, tol):
    n1 = _pick_map(problem, args.map1, flag="--map1")
    n2 = _pick_map(problem, args.map2, flag="--map2")
    res = unitary_equivalence(
        problem.maps[n1],
        problem.maps[n2],
        tol,
        word_len=args.word_len,
        attempts=args.samples,
        seed=_seed(problem, args),
    )
    return {
        "map1": n1,
        "map2": n2,
        "equivalent": res.equivalent,
        "detail": res.detail,
        "unitary": None if res.unitary is None else encode_matrix(res.unitary),
    }, EXIT_OK


def _cmd_extremality(problem, args, tol):
    name = _pick_map(problem, args.map)
    rep = extremality_verdict(
        problem.maps[name],
        problem.action,
        samples=args.samples,
        seed=_seed(problem, args),
        tol=tol,
        word_len=args.word_len,
    )
    witness = None
    if rep.witness is not None:
        witness = {
            "operator": encode_matrix(rep.witness.operator),
            "alpha": rep.witness.alpha,
            "summand": _encode_map(rep.witness.summand),
            "reason": rep.witness.reason,
            "split_defect": rep.witness.split_defect,
        }
    return {
        "map": name,
        "verdict": rep.verdict,
        "certificates": dict(vars(rep.certificates)),
        "witness": witness,
        "diagnostics": rep.diagnostics,
    }, EXIT_OK


def _cmd_km(problem, args, tol):
    ctx = fixed_point_algebra(problem.action, tol)
    base = {
        "fixed_dim": ctx.fixed_dim,
        "normal_form_block_dims": list(ctx.normal_form.block_dims),
        "multiplicities": list(ctx.multiplicities),
    }
    if args.stage == "fixed":
        base["change_of_basis"] = encode_matrix(ctx.change_of_basis)
        base["fixed_basis"] = encode_matrices(ctx.fixed_basis.basis)
        return base, EXIT_OK
    if args.stage == "restrict":
        name = _pick_map(problem, args.map)
        out = restrict_to_fixed_algebra(problem.maps[name], ctx, tol)
        base["map"] = name
        base["restricted"] = _encode_map(out)
        return base, EXIT_OK
    if args.stage == "extend":
        name = _pick_map(problem, args.map)
        out = extend_from_fixed_algebra(problem.maps[name], ctx, tol)
        base["map"] = name
        base["extended"] = _encode_map(out)
        base["flags"] = _map_flags(out, problem.action, tol)
        return base, EXIT_OK
    # hull
    names = args.maps.split(",") if args.maps else sorted(problem.maps)
    for n in names:
        if n not in problem.maps:
            raise err.ParseError(f"map {n!r} not defined in the problem file")
    rep = hull_experiment(
        [problem.maps[n] for n in names],
        problem.action,
        trials=args.trials,
        seed=_seed(problem, args),
        tol=tol,
    )
    base.update(
        {
            "maps": list(names),
            "trials": rep.trials,
            "membership_rate": rep.membership_rate,
            "memberships": list(rep.memberships),
            "verdict_tally": rep.verdict_tally,
            "holdout_distance": rep.holdout_distance,
            "hypothesis": rep.hypothesis,
            "notes": rep.notes,
        }
    )
    return base, EXIT_OK


_HANDLERS = {
    "validate": _cmd_validate,
    "twirl": _cmd_twirl,
    "dilate": _cmd_dilate,
    "commutant": _cmd_commutant,
    "rn": _cmd_rn,
    "split": _cmd_split,
    "equivalence": _cmd_equivalence,
    "extremality": _cmd_extremality,
    "km": _cmd_km,
}


def _add_common(sp):
    sp.add_argument("file", help="problem file (JSON, schema ccx/1)")
    sp.add_argument("--tol", type=float, default=None, help="override eq_tol")
    sp.add_argument("--seed", type=int, default=None, help="override the file seed")
    sp.add_argument("--samples", type=int, default=24, help="sampling budget")
    sp.add_argument("--word-len", type=int, default=6, dest="word_len")
    sp.add_argument("--out", default=None, help="write the report here instead of stdout")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="ccx",
        description="group-invariant unital CP maps: dilations, interval calculus, extremality",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("validate", help="validate the action and the named maps")
    _add_common(sp)
    sp.add_argument("--map", default=None)

    sp = sub.add_parser("twirl", help="average a map over the group action")
    _add_common(sp)
    sp.add_argument("--map", default=None)

    sp = sub.add_parser("dilate", help="minimal dilation and covariant unitaries")
    _add_common(sp)
    sp.add_argument("--map", default=None)

    sp = sub.add_parser("commutant", help="commutant basis of the dilation generators")
    _add_common(sp)
    sp.add_argument("--map", default=None)

    sp = sub.add_parser("rn", help="order-interval correspondence, either direction")
    sp.add_argument("direction", choices=["forward", "inverse"])
    _add_common(sp)
    sp.add_argument("--map", default=None)
    sp.add_argument("--psi", default=None, help="dominated map name (inverse)")
    sp.add_argument("--sweep-index", type=int, default=None, dest="sweep_index")
    sp.add_argument("--t-file", default=None, dest="t_file")

    sp = sub.add_parser("split", help="two-term proper split along an interval operator")
    _add_common(sp)
    sp.add_argument("--map", default=None)
    sp.add_argument("--sweep-index", type=int, default=None, dest="sweep_index")
    sp.add_argument("--t-file", default=None, dest="t_file")
    sp.add_argument("--alpha", type=float, default=0.5)

    sp = sub.add_parser("equivalence", help="unitary equivalence of two maps")
    _add_common(sp)
    sp.add_argument("--map1", default=None)
    sp.add_argument("--map2", default=None)

    sp = sub.add_parser("extremality", help="full extremality report")
    _add_common(sp)
    sp.add_argument("--map", default=None)

    sp = sub.add_parser("km", help="fixed-point algebra machinery")
    sp.add_argument("stage", choices=["fixed", "restrict", "extend", "hull"])
    _add_common(sp)
    sp.add_argument("--map", default=None)
    sp.add_argument("--maps", default=None, help="comma-separated names (hull)")
    sp.add_argument("--trials", type=int, default=50)

    return ap


def run(argv=None):
    """Parse arguments, run a command, return (report dict, exit code)."""
    args = build_parser().parse_args(argv)
    report = {"schema": SCHEMA, "command": args.command}
    if args.command == "rn":
        report["command"] = f"rn {args.direction}"
    if args.command == "km":
        report["command"] = f"km {args.stage}"
    try:
        problem = load_problem(args.file)
        tol = _tolerances(problem, args)
        report["seed"] = _seed(problem, args)
        result, code = _HANDLERS[args.command](problem, args, tol)
        report["result"] = result
        report["exit_code"] = code
    except err.ParseError as exc:
        report.update({"error": {"kind": "parse", "message": str(exc)}, "exit_code": EXIT_PARSE})
        return report, EXIT_PARSE, args.out
    except _VALIDATION_ERRORS as exc:
        report.update(
            {
                "error": {"kind": type(exc).__name__, "message": str(exc)},
                "exit_code": EXIT_VALIDATION,
            }
        )
        return report, EXIT_VALIDATION, args.out
    except _CERTIFICATION_ERRORS as exc:
        report.update(
            {
                "error": {"kind": type(exc).__name__, "message": str(exc)},
                "exit_code": EXIT_CERTIFICATION,
            }
        )
        return report, EXIT_CERTIFICATION, args.out
    return report, code, args.out


def main(argv=None):
    report, code, out_path = run(argv)
    text = dumps_canonical(report)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
