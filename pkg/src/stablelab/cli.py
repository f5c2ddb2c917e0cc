"""Command-line front end.

Exit codes: 0 success, 1 a check failed (oracle-check, simulate --check),
2 invalid arguments.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

from . import expsuite, lattice, quadrature, theory
from . import rng as _rng
from .engine import Matching, Side, is_stable, propose, ranks
from .errors import CapExceeded, DomainError, OracleRefusal
from .prefgen import Instance, gen_instance, gen_latents, instance_from_latents

log = logging.getLogger("stablelab")

FORMULAS = ("P", "PKL", "PROT", "EMP", "EMPROT")


class UsageError(Exception):
    pass


def _shape_arg(text: str) -> tuple[int, int]:
    try:
        a, b = text.lower().split("x")
        return int(a), int(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"shape {text!r} is not of the form N1xN2")


def _emit(obj: Any, out: str | None) -> None:
    text = obj if isinstance(obj, str) else json.dumps(obj, indent=2)
    if out:
        Path(out).write_text(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _load_instance(args: argparse.Namespace) -> Instance:
    if args.instance:
        try:
            obj = json.loads(Path(args.instance).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read instance file: {exc}")
        return Instance.from_json(obj.get("instance", obj))
    if args.n1 is None or args.n2 is None:
        raise UsageError("give --instance FILE or both --n1 and --n2")
    return gen_instance(args.n1, args.n2, args.seed)


def _config(args: argparse.Namespace) -> dict[str, Any]:
    return {k: v for k, v in vars(args).items() if k not in ("func",)}


def cmd_generate(args: argparse.Namespace) -> int:
    if args.latent:
        inst = instance_from_latents(gen_latents(args.n1, args.n2, args.seed))
    else:
        inst = gen_instance(args.n1, args.n2, args.seed)
    _emit(inst.to_json(), args.out)
    return 0


def cmd_match(args: argparse.Namespace) -> int:
    inst = _load_instance(args)
    M, rp = propose(inst, Side(args.side))
    out = {"config": _config(args), "matching": M.to_json(),
           "Q": rp.Q, "R": rp.R, "proposals": rp.proposals, "stable": is_stable(inst, M)}
    _emit(out, args.out)
    return 0


def cmd_enumerate(args: argparse.Namespace) -> int:
    inst = _load_instance(args)
    ss = lattice.enumerate_all(inst, cap=args.cap)
    out = {"config": _config(args), **ss.to_json(inst)}
    _emit(out, args.out)
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    pred = theory.predict((args.n1, args.n2), a=args.a, b=args.b, threshold=args.threshold)
    _emit(pred.to_json(), args.out)
    return 0


def cmd_integrate(args: argparse.Namespace) -> int:
    f, n1, n2 = args.formula, args.n1, args.n2
    extra: dict[str, Any] = {}
    if f == "P":
        est = quadrature.p_stable_mc(n1, n2, args.samples, args.seed, batches=args.batches)
    elif f == "PROT":
        est = quadrature.p_rotation_mc(n1, n2, args.r, args.samples, args.seed, batches=args.batches)
    elif f == "EMP":
        est = quadrature.empirical_p_stable(n1, n2, args.samples, args.seed)
    elif f == "EMPROT":
        est = quadrature.empirical_p_rotation(n1, n2, args.r, args.samples, args.seed)
    else:
        j = quadrature.p_kl_mc(n1, n2, args.samples, args.seed, batches=args.batches)
        est = j.total
        extra = {"k_offset": n1, "l_offset": n1,
                 "p_kl": j.value.tolist(), "p_kl_std_error": j.std_error.tolist(),
                 "p_k": j.p_k().tolist(), "p_l": j.p_l().tolist()}
    out = est.to_json(formula_id=f)
    out.update(extra)
    out["config"] = _config(args)
    _emit(out, args.out)
    return 0


def _tolerance_overrides(args: argparse.Namespace) -> dict[str, float]:
    out = {}
    for name in ("q_tol", "r_tol", "es_tol"):
        v = getattr(args, name, None)
        if v is not None:
            out[name] = v
    return out


def cmd_simulate(args: argparse.Namespace) -> int:
    rep = expsuite.run_experiment(args.n1, args.n2, args.trials, args.seed, mode=args.mode,
                                  cap=args.cap, workers=args.threads,
                                  tolerances=_tolerance_overrides(args))
    for v in rep.verdicts:
        print(v.line(), file=sys.stderr)
    if args.trial_log:
        expsuite.write_trial_log(rep, args.trial_log)
    if args.csv:
        Path(args.csv).write_text(expsuite.summary_csv([rep]))
    body = rep.to_json()
    body["config"]["cli"] = _config(args)
    _emit(body, args.out)
    return 1 if args.check and not rep.passed else 0


def cmd_sweep(args: argparse.Namespace) -> int:
    reps = expsuite.sweep(args.grid or [], args.trials, args.seed, args.out, mode=args.mode,
                          cap=args.cap, workers=args.threads)
    csv_text = expsuite.summary_csv(reps)
    if args.csv:
        Path(args.csv).write_text(csv_text)
    else:
        sys.stdout.write(csv_text)
    return 0


def cmd_oracle_check(args: argparse.Namespace) -> int:
    shapes = [(n1, n2) for n1 in range(args.min_n1, args.max_n1 + 1)
              for n2 in range(n1, n1 + args.extra_women + 1)]
    mismatches = []
    for i in range(args.instances):
        n1, n2 = shapes[i % len(shapes)]
        seed = _rng.mix(args.seed, i)
        inst = gen_instance(n1, n2, seed)
        fast = lattice.enumerate_all(inst)
        slow = lattice.brute_force_all(inst, bound=args.bound)
        if not lattice.same_set(fast, slow):
            mismatches.append({"n1": n1, "n2": n2, "seed": seed,
                               "enumerated": len(fast), "brute_force": len(slow)})
    out = {"config": _config(args), "instances": args.instances,
           "mismatches": mismatches, "passed": not mismatches}
    _emit(out, args.out)
    return 0 if not mismatches else 1


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    p = argparse.ArgumentParser(prog="stablelab", formatter_class=fmt,
                                description="Stable matchings in unbalanced random markets.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")
    seed_default = _rng.default_seed()

    def common(sp, shape=True, seed=True, out=True):
        if shape:
            sp.add_argument("--n1", type=int, help="number of men")
            sp.add_argument("--n2", type=int, help="number of women (n2 >= n1)")
        if seed:
            sp.add_argument("--seed", type=int, default=seed_default,
                            help=f"64-bit seed (fallback: ${_rng.SEED_ENV})")
        if out:
            sp.add_argument("--out", default=None, help="write output here instead of stdout")

    sp = sub.add_parser("generate", help="draw a random instance", formatter_class=fmt)
    common(sp)
    sp.add_argument("--latent", action="store_true", help="build it from latent uniform matrices")
    sp.set_defaults(func=cmd_generate, needs_shape=True)

    sp = sub.add_parser("match", help="side-optimal stable matching", formatter_class=fmt)
    common(sp)
    sp.add_argument("--instance", default=None, help="instance JSON file (overrides --n1/--n2)")
    sp.add_argument("--side", choices=[s.value for s in Side], default="men", help="proposing side")
    sp.set_defaults(func=cmd_match)

    sp = sub.add_parser("enumerate", help="all stable matchings", formatter_class=fmt)
    common(sp)
    sp.add_argument("--instance", default=None, help="instance JSON file (overrides --n1/--n2)")
    sp.add_argument("--cap", type=int, default=lattice.DEFAULT_CAP, help="stable-set size cap")
    sp.set_defaults(func=cmd_enumerate)

    sp = sub.add_parser("predict", help="theory predictions for a shape", formatter_class=fmt)
    common(sp, seed=False)
    sp.add_argument("--a", type=float, default=theory.DEFAULT_A, help="exponent for the n1^-a width")
    sp.add_argument("--b", type=float, default=theory.DEFAULT_B, help="exponent for the s^-b width")
    sp.add_argument("--threshold", type=float, default=theory.REGIME_THRESHOLD,
                    help="s above which the s^-b width applies")
    sp.set_defaults(func=cmd_predict, needs_shape=True)

    sp = sub.add_parser("integrate", help="Monte Carlo stability probabilities", formatter_class=fmt)
    common(sp)
    sp.add_argument("--formula", choices=FORMULAS, default="P",
                    help="P: stable; PKL: joint (Q,R) law; PROT: rotation exposed; "
                         "EMP/EMPROT: simulated-instance counterparts of P/PROT")
    sp.add_argument("--samples", type=int, default=100_000, help="sample or instance count")
    sp.add_argument("--r", type=int, default=2, help="rotation length for PROT/EMPROT")
    sp.add_argument("--batches", type=int, default=quadrature.DEFAULT_BATCHES,
                    help="batch count for batch-means standard errors")
    sp.set_defaults(func=cmd_integrate, needs_shape=True)

    def experiment_flags(sp):
        sp.add_argument("--trials", type=int, default=100, help="instances per shape")
        sp.add_argument("--mode", choices=[m.value for m in expsuite.Mode], default=None,
                        help=f"default: enumerate below n1={expsuite.ENUMERATE_LIMIT}, extremes above")
        sp.add_argument("--cap", type=int, default=lattice.DEFAULT_CAP, help="stable-set size cap")
        sp.add_argument("--threads", type=int, default=1, help="worker processes")

    sp = sub.add_parser("simulate", help="run one experiment and check it", formatter_class=fmt)
    common(sp)
    experiment_flags(sp)
    sp.add_argument("--q-tol", type=float, default=None, help=f"Q tolerance (default {expsuite.Q_TOL})")
    sp.add_argument("--r-tol", type=float, default=None, help=f"R tolerance (default {expsuite.R_TOL})")
    sp.add_argument("--es-tol", type=float, default=None, help=f"ES ratio tolerance (default {expsuite.ES_TOL})")
    sp.add_argument("--trial-log", default=None, help="write per-trial JSON lines here")
    sp.add_argument("--csv", default=None, help="write the one-row CSV summary here")
    sp.add_argument("--check", action="store_true", help="exit 1 if any gating check fails")
    sp.set_defaults(func=cmd_simulate, needs_shape=True)

    sp = sub.add_parser("sweep", help="experiments over a grid of shapes", formatter_class=fmt)
    common(sp, shape=False, out=False)
    sp.add_argument("--grid", type=_shape_arg, nargs="*", default=[], metavar="N1xN2",
                    help="shapes, e.g. 100x101 100x110")
    sp.add_argument("--out", required=True, help="JSON-lines report file (appended, resumable)")
    sp.add_argument("--csv", default=None, help="write the CSV summary here instead of stdout")
    experiment_flags(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("oracle-check", help="enumeration vs brute force", formatter_class=fmt)
    common(sp, shape=False)
    sp.add_argument("--min-n1", type=int, default=2, help="smallest n1")
    sp.add_argument("--max-n1", type=int, default=5, help="largest n1")
    sp.add_argument("--extra-women", type=int, default=3, help="n2 ranges over n1 .. n1 + this")
    sp.add_argument("--instances", type=int, default=500, help="number of instances")
    sp.add_argument("--bound", type=int, default=lattice.DEFAULT_ORACLE_BOUND,
                    help="largest injection count brute force accepts")
    sp.set_defaults(func=cmd_oracle_check)
    return p


def _validate(args: argparse.Namespace) -> None:
    if getattr(args, "needs_shape", False) and (args.n1 is None or args.n2 is None):
        raise UsageError("--n1 and --n2 are required")
    for name in ("trials", "samples", "instances", "threads", "cap", "batches"):
        v = getattr(args, name, None)
        if v is not None and v < 1:
            raise UsageError(f"--{name} must be positive")
    if args.command == "oracle-check" and not 1 <= args.min_n1 <= args.max_n1:
        raise UsageError("need 1 <= --min-n1 <= --max-n1")
    if getattr(args, "seed", None) is not None:
        _rng.check_seed(args.seed)


def dispatch(argv: Sequence[str] | None = None) -> int:
    try:
        parser = build_parser()
    except DomainError as exc:
        print(f"stablelab: error: {exc}", file=sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _validate(args)
        return args.func(args)
    except (UsageError, DomainError, OracleRefusal, CapExceeded) as exc:
        parser.print_usage(sys.stderr)
        print(f"stablelab {args.command}: error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
