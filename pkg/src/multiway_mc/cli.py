"""Benchmark and experiment command line.

Modes:
  solve            estimate <h, x> on one problem and cross-check the
                   closed-form variance
  ratio            fraction of solvable random problems per (rho, m)
  speedup          mean variance ratio vs the 1-way baseline per (rho, m)
  diagnose         contraction diagnostics for one matrix
  divergence-demo  1-way blow-up vs multi-way stabilization

Options can come from a flat key=value config file (--config); command
line flags override it.  Exit codes: 0 ok, 1 validation error, 2 the run
finished but every result diverged.
"""

import argparse
import csv
import sys
import numpy as np

from .sparse import (load_matrix_market, diagonal_precondition, abs_matrix,
                     infinity_norm, spectral_radius, ProblemInstance,
                     MatrixFormatError)
from .transitions import build_until_contractive, initial_distribution_from
from .walk import WalkSpec, estimate_functional, default_max_steps
from .variance import (closed_form_variance, solve_x, divergence_demo,
                       VarianceDiverged)
from .experiments import (run_ratio_experiment, run_speedup_experiment,
                          random_problem, synthesize_H, trial_seed,
                          solvability_by_m)

_DEFAULT_RADII = [0.70, 0.75, 0.80, 0.85, 0.90, 0.95, 0.99]


def parse_config(path):
    """Flat key=value lines; '#' starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, val = stripped.split("=", 1)
            out[key.strip().replace("-", "_")] = val.strip()
    return out


def _int_list(text):
    return [int(tok) for tok in str(text).split(",") if tok.strip()]


def _float_list(text):
    return [float(tok) for tok in str(text).split(",") if tok.strip()]


def build_parser():
    ap = argparse.ArgumentParser(prog="multiway-mc", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--config", help="key=value config file")
    ap.add_argument("--mode", choices=["solve", "ratio", "speedup",
                                       "diagnose", "divergence-demo"])
    ap.add_argument("--matrix", help="Matrix Market file (diagonal "
                    "preconditioning is applied)")
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--density", type=float, default=0.2)
    ap.add_argument("--rho", help="target spectral radius, or comma list "
                    "for experiments")
    ap.add_argument("--m", help="walk order, or comma list for experiments",
                    default="2,3,4,5")
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--walks", type=int, default=100_000)
    ap.add_argument("--epsilon", type=float, default=1e-6)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--phi-max", type=int, default=64)
    ap.add_argument("--out", help="CSV output path")
    ap.add_argument("--small", action="store_true",
                    help="CI preset: n=200, 30 trials")
    return ap


def merge_config(args, argv):
    if args.config:
        cfg = parse_config(args.config)
        parser = build_parser()
        defaults = parser.parse_args([])
        explicit = {a.lstrip("-").split("=")[0].replace("-", "_")
                    for a in argv if a.startswith("--")}
        for key, val in cfg.items():
            if key in explicit or not hasattr(args, key):
                continue
            current = getattr(defaults, key)
            if isinstance(current, bool):
                val = val.lower() in ("1", "true", "yes")
            elif isinstance(current, int):
                val = int(val)
            elif isinstance(current, float):
                val = float(val)
            setattr(args, key, val)
    return args


def _load_problem(args):
    if args.matrix:
        A = load_matrix_market(args.matrix)
        H = diagonal_precondition(A)
        rng = np.random.default_rng(trial_seed(args.seed, 7))
        return ProblemInstance(H, rng.random(H.n_rows), rng.random(H.n_rows))
    rho = float(args.rho) if args.rho else 0.5
    return random_problem(args.n, args.density, rho, args.seed)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def cmd_solve(args):
    problem = _load_problem(args)
    p = initial_distribution_from(problem.h)
    outcome = build_until_contractive(problem.H, phi_max=args.phi_max)
    P = outcome.hypermatrix
    print(f"n = {problem.n}, nnz = {problem.H.nnz}, "
          f"m_used = {outcome.m_used}, |Htilde| = {outcome.h_tilde_norm:.6g}, "
          f"converged = {outcome.converged}")
    spec = WalkSpec(epsilon=args.epsilon,
                    max_steps=default_max_steps(P, args.epsilon),
                    num_walks=args.walks, seed=args.seed)
    report = estimate_functional(problem, P, p, spec)
    print(f"estimate        = {report.estimate:.10g}")
    print(f"sample variance = {report.sample_variance:.6g}")
    print(f"probable error  = {report.probable_error:.6g}")
    print(f"mean walk len   = {report.mean_walk_length:.2f} "
          f"(cap hit {report.cap_hit_fraction:.2%})")
    var = closed_form_variance(problem, P, p)
    if var.converged:
        print(f"closed-form Var = {var.variance:.6g} "
              f"({var.neumann_iterations} cycles)")
    else:
        print("closed-form Var = diverged")
    residual = ""
    if problem.n <= 2000:
        x = solve_x(problem)
        direct = float(problem.h @ x)
        residual = abs(report.estimate - direct)
        print(f"direct <h,x>    = {direct:.10g}  |error| = {residual:.4g}")
    if args.out:
        _write_csv(args.out,
                   ["estimate", "sample_variance", "probable_error",
                    "mean_walk_length", "cap_hit_fraction", "closed_form_var",
                    "h_tilde_norm", "m_used", "direct_error", "seed"],
                   [[report.estimate, report.sample_variance,
                     report.probable_error, report.mean_walk_length,
                     report.cap_hit_fraction,
                     var.variance if var.converged else "diverged",
                     outcome.h_tilde_norm, outcome.m_used, residual,
                     args.seed]])
    return 0 if var.converged else 2


def cmd_ratio(args):
    radii = _float_list(args.rho) if args.rho else _DEFAULT_RADII
    m_list = _int_list(args.m)
    rows = run_ratio_experiment(args.n, args.density, radii, m_list,
                                args.trials, args.seed)
    print(f"{'rho':>6} {'m':>3} {'solvable':>9} {'trials':>7}")
    for r in rows:
        print(f"{r.rho:>6.2f} {r.m:>3d} {r.solvable_fraction:>9.3f} "
              f"{r.trials:>7d}")
    if args.out:
        _write_csv(args.out, ["rho", "m", "solvable_fraction", "trials",
                              "seed"],
                   [[r.rho, r.m, r.solvable_fraction, r.trials, args.seed]
                    for r in rows])
    return 0


def cmd_speedup(args):
    radii = _float_list(args.rho) if args.rho else [0.8, 0.9, 0.95, 0.99]
    m_list = [m for m in _int_list(args.m) if m > 1]
    rows = run_speedup_experiment(args.n, args.density, radii, m_list,
                                  args.trials, args.seed)
    print(f"{'rho':>6} {'m':>3} {'speedup':>9} {'used':>6} {'excl':>6}")
    for r in rows:
        mean = f"{r.mean_speedup:.3f}" if r.trials_used else "(empty)"
        print(f"{r.rho:>6.2f} {r.m:>3d} {mean:>9} {r.trials_used:>6d} "
              f"{r.trials_excluded:>6d}")
    if args.out:
        _write_csv(args.out, ["rho", "m", "mean_speedup", "trials_used",
                              "trials_excluded", "seed"],
                   [[r.rho, r.m,
                     r.mean_speedup if r.trials_used else "",
                     r.trials_used, r.trials_excluded, args.seed]
                    for r in rows])
    return 0 if any(r.trials_used for r in rows) else 2


def cmd_diagnose(args):
    if args.matrix:
        H = diagonal_precondition(load_matrix_market(args.matrix))
    else:
        rho = float(args.rho) if args.rho else 0.9
        H, _ = synthesize_H(args.n, args.density, rho, args.seed)
    rho_abs = spectral_radius(abs_matrix(H))
    print(f"n = {H.n_rows}, nnz = {H.nnz}")
    print(f"rho(|H|)  = {rho_abs:.6f}")
    print(f"||H||_inf = {infinity_norm(H):.6f}")
    eta_max = solvability_by_m(H, args.phi_max)
    norms = eta_max ** 2
    first = next((i + 1 for i, v in enumerate(norms) if v < 1.0), None)
    print(f"{'m':>4} {'|Htilde|':>12}")
    for i, v in enumerate(norms, start=1):
        mark = "  <- first contractive m" if i == first else ""
        print(f"{i:>4d} {v:>12.6g}{mark}")
        if first is not None and i >= first:
            break
    if first is None:
        print(f"verdict: not solvable by this method up to m = {args.phi_max}")
    else:
        print(f"verdict: solvable with m = {first}")
    if args.out:
        _write_csv(args.out, ["m", "h_tilde_norm", "contractive", "seed"],
                   [[i + 1, norms[i], norms[i] < 1.0, args.seed]
                    for i in range(len(norms))])
    return 0 if first is not None else 2


def cmd_divergence_demo(args):
    if args.matrix:
        H = diagonal_precondition(load_matrix_market(args.matrix))
        rng = np.random.default_rng(trial_seed(args.seed, 7))
        problem = ProblemInstance(H, rng.random(H.n_rows), rng.random(H.n_rows))
    else:
        rho = float(args.rho) if args.rho else 0.9
        problem = random_problem(args.n, args.density, rho, args.seed)
    p = initial_distribution_from(problem.h)
    outcome = build_until_contractive(problem.H, phi_max=args.phi_max)
    one = divergence_demo(problem, outcome.hypermatrix.suffix(1), p)
    multi = divergence_demo(problem, outcome.hypermatrix, p)
    print(f"1-way   |Htilde| = {outcome.hypermatrix.suffix(1).h_tilde_norm():.4g}"
          f"  diverging = {one.diverging}")
    print(f"{outcome.m_used}-way   |Htilde| = {outcome.h_tilde_norm:.4g}"
          f"  diverging = {multi.diverging}")
    print(f"{'k':>4} {'1-way term':>14} {'1-way growth':>13} "
          f"{'m-way term':>14} {'m-way growth':>13}")
    for k in range(len(one.term_values)):
        g1 = f"{one.growth_factors[k - 1]:.4f}" if k else ""
        gm = f"{multi.growth_factors[k - 1]:.4f}" if k else ""
        print(f"{k:>4d} {one.term_values[k]:>14.6g} {g1:>13} "
              f"{multi.term_values[k]:>14.6g} {gm:>13}")
    if args.out:
        _write_csv(args.out,
                   ["k", "one_way_term", "one_way_partial_sum",
                    "multi_way_term", "multi_way_partial_sum", "seed"],
                   [[k, one.term_values[k], one.partial_sums[k],
                     multi.term_values[k], multi.partial_sums[k], args.seed]
                    for k in range(len(one.term_values))])
    return 0


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    args = build_parser().parse_args(argv)
    try:
        args = merge_config(args, argv)
        if args.small:
            args.n = 200
            args.trials = 30
        if not args.mode:
            raise ValueError("--mode is required (via flag or config file)")
        handler = {
            "solve": cmd_solve,
            "ratio": cmd_ratio,
            "speedup": cmd_speedup,
            "diagnose": cmd_diagnose,
            "divergence-demo": cmd_divergence_demo,
        }[args.mode]
        return handler(args)
    except (ValueError, OSError, MatrixFormatError, VarianceDiverged) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
