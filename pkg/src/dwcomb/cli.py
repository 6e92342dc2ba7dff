"""Command-line entry point: ``dwcomb <subcommand> ...``.

Exit codes: 0 success, 1 invalid input, 2 I/O failure, 3 solver budget
exhausted without a near-global certificate.
"""

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import renyi
from .dcsolver import SolverConfig, certify, dca_solve, default_M, parse_z0
from .evalharness import evaluate_predictors
from .model import InstanceError, dumps_instance, load_instance
from .synthetic import GaussianBenchConfig, make_gaussian_problem

EXIT_OK, EXIT_INVALID, EXIT_IO, EXIT_BUDGET = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _positive(cast):
    def conv(text):
        v = cast(text)
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive: {text}")
        return v
    return conv


def _m_bound(text):
    if text in ("per-point", "global"):
        return text
    v = float(text)
    if not (v >= 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"must be finite and nonnegative: {text}")
    return v


def _add_solver_flags(p):
    g = p.add_argument_group("solver")
    g.add_argument("--eta", type=_positive(float), default=1e-3)
    g.add_argument("--eta-prime", type=_positive(float), default=1e-4)
    g.add_argument("--m-bound", type=_m_bound, default="per-point",
                   help="loss bound M: a number, 'global' or 'per-point' (default)")
    g.add_argument("--tol-global", type=_positive(float), default=1e-2)
    g.add_argument("--tol-outer", type=_positive(float), default=1e-8)
    g.add_argument("--tol-inner", type=_positive(float), default=1e-10)
    g.add_argument("--max-outer", type=_positive(int), default=200)
    g.add_argument("--max-inner", type=_positive(int), default=2000)
    g.add_argument("--inner-method", choices=("subgradient", "slsqp"), default="subgradient")
    g.add_argument("--restarts", type=int, default=4)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--z0", default="uniform", help="uniform | vertex:k | path to JSON weights")


def _read_weights(choice):
    """Weights from an inline comma list, a JSON file (list or object with z_star)."""
    if choice in ("uniform",) or choice.startswith("vertex:"):
        return choice
    if "," in choice and not choice.endswith(".json"):
        return [float(v) for v in choice.split(",")]
    with open(choice, encoding="utf-8") as fh:
        doc = json.load(fh)
    if isinstance(doc, dict):
        doc = doc.get("z_star", doc.get("z", doc.get("mass")))
    return [float(v) for v in doc]


def _config(args, inst):
    if args.m_bound == "per-point":
        M = None
    elif args.m_bound == "global":
        M = default_M(inst, per_point=False)
    else:
        M = args.m_bound
    if args.restarts < 0:
        raise ValueError("--restarts must be >= 0")
    return SolverConfig(
        eta=args.eta, eta_prime=args.eta_prime, M=M,
        z0=parse_z0(_read_weights(args.z0), inst.p),
        max_outer=args.max_outer, max_inner=args.max_inner,
        inner_tol=args.tol_inner, outer_tol=args.tol_outer,
        global_tol=args.tol_global, inner_method=args.inner_method,
        restarts=args.restarts, seed=args.seed,
    ).resolve(inst)


def _write(text, path):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _dumps(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _cert_dict(cert):
    return {"gamma_value": cert.gamma_value, "is_near_global": cert.is_near_global,
            "lemma1_residual": cert.lemma1_residual, "kkt_residual": cert.kkt_residual}


def _trace_csv(sol):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    p = sol.z_star.size
    w.writerow(["iteration", "gamma"] + [f"z_{k + 1}" for k in range(p)])
    for t, (z, g) in enumerate(sol.trace):
        w.writerow([t, f"{g:.12g}"] + [f"{v:.12g}" for v in z])
    return buf.getvalue()


def cmd_solve(args):
    inst = load_instance(args.instance, args.format)
    cfg = _config(args, inst)
    sol = dca_solve(inst, cfg)
    cert = certify(inst, sol, cfg.eta, cfg.eta_prime, cfg.global_tol)
    out = {
        "domains": list(inst.domain_names),
        "z_star": sol.z_star.tolist(),
        "gamma_star": sol.gamma_star,
        "per_domain_losses": sol.per_domain_losses.tolist(),
        "status": sol.status,
        "eta": cfg.eta,
        "trace": [{"z": z.tolist(), "gamma": g} for z, g in sol.trace],
        "certificate": _cert_dict(cert),
    }
    _write(_dumps(out), args.output)
    if sol.status == "budget_exhausted" and not cert.is_near_global:
        return EXIT_BUDGET
    return EXIT_OK


def cmd_certify(args):
    inst = load_instance(args.instance, args.format)
    z = parse_z0(_read_weights(args.z), inst.p)
    cert = certify(inst, z, args.eta, args.eta_prime, args.tol_global)
    _write(_dumps(_cert_dict(cert)), args.output)
    return EXIT_OK


def cmd_eval(args):
    inst = load_instance(args.instance, args.format)
    with open(args.solution, encoding="utf-8") as fh:
        doc = json.load(fh)
    z = doc["z_star"] if isinstance(doc, dict) else doc
    eta = args.eta if args.eta is not None else (
        doc.get("eta", 1e-3) if isinstance(doc, dict) else 1e-3)
    report = evaluate_predictors(inst, np.asarray(z, dtype=float), eta)
    _write(report.to_csv(), args.output)
    return EXIT_OK


def _bench_config(args):
    return GaussianBenchConfig(n_train=args.n_train, n_support=args.n_support,
                               seed=args.seed, variant=args.variant)


def cmd_synth_gen(args):
    inst = make_gaussian_problem(_bench_config(args))
    _write(dumps_instance(inst, "json") + "\n", args.output)
    return EXIT_OK


def cmd_bench(args):
    inst = make_gaussian_problem(_bench_config(args))
    cfg = _config(args, inst)
    sol = dca_solve(inst, cfg)
    _write(_trace_csv(sol), args.output)
    cert = certify(inst, sol, cfg.eta, cfg.eta_prime, cfg.global_tol)
    print(f"gamma_star={sol.gamma_star:.6g} iterations={len(sol.trace) - 1} "
          f"status={sol.status} near_global={cert.is_near_global}", file=sys.stderr)
    if sol.status == "budget_exhausted" and not cert.is_near_global:
        return EXIT_BUDGET
    return EXIT_OK


def _read_dist(path):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if isinstance(doc, dict):
        doc = doc["mass"]
    return np.asarray(doc, dtype=float)


def cmd_divergence(args):
    P, Q = _read_dist(args.P), _read_dist(args.Q)
    D = renyi.renyi_divergence(P, Q, args.alpha)
    if args.json:
        d = math.inf if math.isinf(D) else math.exp(D)
        _write(_dumps({"alpha": args.alpha, "D_alpha": D, "d_alpha": d}), None)
    else:
        print(f"{D:.6f}")
    return EXIT_OK


def cmd_bound(args):
    eps = args.epsilon
    if args.epsilon_hat_from:
        true, est = (load_instance(p) for p in args.epsilon_hat_from)
        eps = renyi.epsilon_hat(true, est, args.epsilon, args.M, args.alpha)
    elif args.epsilon_T_from:
        inst = load_instance(args.epsilon_T_from[0])
        target = _read_dist_matrix(args.epsilon_T_from[1])
        eps = renyi.epsilon_T(inst, target, args.epsilon, args.M, args.alpha)
    b = renyi.GuaranteeBound.compute(eps + args.delta, args.d_alpha, args.M, args.alpha)
    _write(_dumps({"alpha": b.alpha, "epsilon_term": b.epsilon_term,
                   "d_alpha_value": b.d_alpha_value, "M": b.M,
                   "bound_value": b.bound_value}), args.output)
    return EXIT_OK


def _read_dist_matrix(path):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if isinstance(doc, dict):
        doc = doc["cond"]
    return np.asarray(doc, dtype=float)


def build_parser():
    parser = _Parser(prog="dwcomb", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="find the robust mixture weight z")
    p.add_argument("instance")
    p.add_argument("--format", choices=("json", "csv"))
    p.add_argument("-o", "--output")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("certify", help="certificate for a given z")
    p.add_argument("instance")
    p.add_argument("z", help="uniform | vertex:k | comma list | JSON file")
    p.add_argument("--format", choices=("json", "csv"))
    p.add_argument("--eta", type=_positive(float), default=1e-3)
    p.add_argument("--eta-prime", type=_positive(float), default=1e-4)
    p.add_argument("--tol-global", type=_positive(float), default=1e-2)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("eval", help="MSE report over target mixtures")
    p.add_argument("instance")
    p.add_argument("solution", help="solution JSON from 'solve'")
    p.add_argument("--format", choices=("json", "csv"))
    p.add_argument("--eta", type=_positive(float))
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_eval)

    for name, func, helptext in (
            ("synth-gen", cmd_synth_gen, "write the Gaussian benchmark instance"),
            ("bench-synthetic", cmd_bench, "solve the Gaussian benchmark, emit the trace")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--n-train", type=int, default=200)
        p.add_argument("--n-support", type=int, default=500)
        p.add_argument("--variant", choices=("two_domain", "four_domain"),
                       default="two_domain")
        p.add_argument("-o", "--output")
        if name == "bench-synthetic":
            _add_solver_flags(p)
        else:
            p.add_argument("--seed", type=int, default=0)
        p.set_defaults(func=func)

    p = sub.add_parser("divergence", help="Renyi divergence D_alpha(P || Q)")
    p.add_argument("P")
    p.add_argument("Q")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_divergence)

    p = sub.add_parser("bound", help="adaptation guarantee for a target distribution")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--d-alpha", type=float, default=1.0)
    p.add_argument("--M", type=float, required=True)
    p.add_argument("--alpha", type=float, required=True)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--epsilon-hat-from", nargs=2, metavar=("TRUE", "ESTIMATED"))
    src.add_argument("--epsilon-T-from", nargs=2, metavar=("INSTANCE", "TARGET_COND"))
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_bound)
    return parser


def run(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InstanceError, ValueError, KeyError, TypeError, np.linalg.LinAlgError) as exc:
        print(f"dwcomb: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"dwcomb: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
