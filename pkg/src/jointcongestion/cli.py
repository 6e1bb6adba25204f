"""Command-line entry point: ``jointcongestion <command> [options]``.

Exit codes: 0 success, 2 not converged or certificate failed (outputs are
still written), 3 infeasible, 4 I/O, parse or validation error.
"""
import argparse
import sys
from pathlib import Path

from .central import CentralConfig, solve_central, wardrop_report
from .dist import DistConfig, run_distributed
from .errors import (
    DimensionTooLarge,
    Infeasible,
    MaxItersExceeded,
    ParseError,
    UnstableRouting,
    ValidationError,
)
from .experiments import (
    compare,
    read_routing,
    write_manifest,
    write_routing,
    write_sim,
    write_utilization_table,
    write_wardrop,
)
from .instances import load_instance, paper_shaped_path
from .model import objective, persource_mean_delay
from .oracle import OracleConfig, brute_force_optimum
from .sim import SimConfig, simulate

EXIT_OK, EXIT_NOT_CONVERGED, EXIT_INFEASIBLE, EXIT_IO = 0, 2, 3, 4


def _central_cfg(args):
    kw = {}
    if args.tol is not None:
        kw["grad_tol"] = args.tol
    if args.max_iters is not None:
        kw["max_iters"] = args.max_iters
    return CentralConfig(**kw)


def _dist_cfg(args):
    kw = {"eta": args.eta, "gamma": args.gamma, "schedule": args.schedule}
    if args.tol is not None:
        kw["rel_tol"] = args.tol
    if args.max_iters is not None:
        kw["max_iters"] = args.max_iters
    return DistConfig(**kw)


def _run_central(inst, args, out):
    cfg = _central_cfg(args)
    code = EXIT_OK
    try:
        x, trace = solve_central(inst, cfg)
    except MaxItersExceeded as e:
        x, trace, code = e.routing, e.trace, EXIT_NOT_CONVERGED
    rep = wardrop_report(inst, x, tol=cfg.grad_tol)
    write_routing(out / "routing_central.csv", x)
    trace.to_csv(out / "trace_central.csv")
    write_wardrop(out / "wardrop_central.csv", inst, x, rep)
    return x, rep, code, cfg


def cmd_solve_central(inst, args, out):
    x, rep, code, cfg = _run_central(inst, args, out)
    summary = (
        f"F_central {objective(inst, x):.9g}\n"
        f"utilization {' '.join(f'{u:.4f}' for u in x.sum(0) / inst.mu_node)}\n"
        f"Wardrop {'pass' if rep.passed else 'FAIL'} (residual {rep.residual():.2e})\n"
    )
    return code, summary, vars(cfg)


def cmd_solve_dist(inst, args, out):
    cfg = _dist_cfg(args)
    res = run_distributed(inst, cfg, strict=False)
    rep = wardrop_report(inst, res.routing, use_threshold=res.use_threshold, tol=args.kkt_tol)
    write_routing(out / "routing_dist.csv", res.routing)
    res.trace.to_csv(out / "trace_dist.csv")
    write_wardrop(out / "wardrop_dist.csv", inst, res.routing, rep)
    summary = (
        f"F_dist {objective(inst, res.routing):.9g}\n"
        f"iterations {res.iters} converged {res.converged}\n"
        f"fixed-point residual {res.fixed_point_residual:.3e}\n"
        f"utilization {' '.join(f'{u:.4f}' for u in res.routing.sum(0) / inst.mu_node)}\n"
        f"prices {' '.join(f'{p:.6g}' for p in res.prices)}\n"
        f"Wardrop {'pass' if rep.passed else 'FAIL'} (residual {rep.residual():.2e})\n"
    )
    return (EXIT_OK if res.converged else EXIT_NOT_CONVERGED), summary, vars(cfg)


def cmd_compare(inst, args, out):
    # --tol and --max-iters steer the distributed run; the benchmark keeps defaults
    ccfg, dcfg = CentralConfig(), _dist_cfg(args)
    rep = compare(inst, ccfg, dcfg, kkt_tol=args.kkt_tol)
    write_routing(out / "routing_central.csv", rep.routing_central)
    write_routing(out / "routing_dist.csv", rep.routing_dist)
    rep.trace_central.to_csv(out / "trace_central.csv")
    rep.dist.trace.to_csv(out / "trace_dist.csv")
    write_wardrop(out / "wardrop_central.csv", inst, rep.routing_central, rep.wardrop_central)
    write_wardrop(out / "wardrop_dist.csv", inst, rep.routing_dist, rep.wardrop_dist)
    write_utilization_table(out / "utilization_table.csv",
                            {"central_flow": rep.util_central, "dist_flow": rep.util_dist})
    code = EXIT_OK if rep.dist.converged else EXIT_NOT_CONVERGED
    return code, rep.summary(), {"central": vars(ccfg), "dist": vars(dcfg)}


def cmd_check_kkt(inst, args, out):
    r = read_routing(args.routing)
    if r.shape != (inst.m, inst.n):
        raise ValidationError(f"routing shape {r.shape} != {(inst.m, inst.n)}")
    tol = 1e-4 if args.tol is None else args.tol
    rep = wardrop_report(inst, r, tol=tol)
    write_wardrop(out / "wardrop.csv", inst, r, rep)
    lines = [f"Wardrop {'pass' if rep.passed else 'FAIL'} at tol {tol:.1e}"]
    for i in range(inst.m):
        lines.append(f"source {i + 1}: alpha {rep.alpha[i]:.9g} spread {rep.spread[i]:.2e} "
                     f"slack {rep.slack[i]:.2e}")
    code = EXIT_OK if rep.passed else EXIT_NOT_CONVERGED
    return code, "\n".join(lines) + "\n", {"routing": str(args.routing), "tol": tol}


def cmd_simulate(inst, args, out):
    if args.routing is not None:
        r = read_routing(args.routing)
        source = str(args.routing)
    else:
        res = run_distributed(inst, _dist_cfg(args), strict=False)
        r, source = res.routing, "distributed fixed point"
    horizon = args.horizon
    if horizon is None:
        # at least 1e5 routed messages per source after a 10% warmup
        horizon = 1.2e5 / inst.lam.min() / 0.9
    cfg = SimConfig(horizon=horizon, seed=args.seed, ewma_weight=args.ewma_weight)
    rep = simulate(inst, r, cfg)
    write_routing(out / "routing_simulated.csv", r)
    write_sim(out, inst, r, rep)
    det_util = r.sum(0) / inst.mu_node
    det_delay = persource_mean_delay(inst, r)
    lines = [f"routing: {source}", f"horizon {horizon:.6g} seed {args.seed}"]
    for j in range(inst.n):
        lines.append(f"node {j + 1}: util sim {rep.node_util_timeavg[j]:.4f} "
                     f"(+-{rep.node_util_stderr[j]:.4f}) det {det_util[j]:.4f}")
    for i in range(inst.m):
        lines.append(f"source {i + 1}: delay sim {rep.persource_mean_delay[i]:.4f} "
                     f"det {det_delay[i]:.4f} messages {rep.messages[i]}")
    return EXIT_OK, "\n".join(lines) + "\n", vars(cfg)


def cmd_oracle(inst, args, out):
    cfg = OracleConfig(grid_points=args.grid_points, refine_rounds=args.refine_rounds)
    x, f = brute_force_optimum(inst, cfg)
    write_routing(out / "routing_oracle.csv", x)
    return EXIT_OK, f"F_oracle {f:.12g}\n", vars(cfg)


COMMANDS = {
    "solve-central": (cmd_solve_central, "centralized system-optimal routing"),
    "solve-dist": (cmd_solve_dist, "distributed pricing iteration"),
    "compare": (cmd_compare, "run both solvers and compare"),
    "check-kkt": (cmd_check_kkt, "Wardrop/KKT certificate for a routing file"),
    "simulate": (cmd_simulate, "stochastic M/M/1 validation"),
    "oracle": (cmd_oracle, "brute-force optimum of a tiny instance"),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="jointcongestion", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--instance", type=Path, default=None,
                       help="instance JSON (default: bundled 5x3)")
        p.add_argument("--out-dir", type=Path, default=Path("out"))
        p.add_argument("--tol", type=float, default=None)
        p.add_argument("--max-iters", type=int, default=None)
        p.add_argument("--eta", type=float, default=0.3)
        p.add_argument("--gamma", type=float, default=0.5)
        p.add_argument("--schedule", choices=("constant", "diminishing"), default="constant")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--horizon", type=float, default=None)
        p.add_argument("--kkt-tol", type=float, default=1e-4)
        if name in ("check-kkt", "simulate"):
            p.add_argument("--routing", type=Path, required=name == "check-kkt")
        if name == "simulate":
            p.add_argument("--ewma-weight", type=float, default=0.05)
        if name == "oracle":
            p.add_argument("--grid-points", type=int, default=1000)
            p.add_argument("--refine-rounds", type=int, default=4)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    func = COMMANDS[args.command][0]
    try:
        inst = load_instance(args.instance or paper_shaped_path())
        out = args.out_dir
        out.mkdir(parents=True, exist_ok=True)
        code, summary, config = func(inst, args, out)
    except Infeasible as e:
        print(f"infeasible: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ParseError, ValidationError, UnstableRouting, DimensionTooLarge, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    (out / "summary.txt").write_text(summary)
    write_manifest(out / "manifest.json", args.command, {
        "instance": str(args.instance or "bundled:paper_shaped_5x3.json"),
        "seed": args.seed,
        "settings": config,
    })
    sys.stdout.write(summary)
    return code


if __name__ == "__main__":
    sys.exit(main())
