"""Command-line surface: parse / switches / analyze / check / simulate / gen / bench.

Exit codes: 0 success (for analyze: certificate accepted; for check: audit
clean), 1 inconclusive analysis or failed audit, 2 usage or input error.
Diagnostics go to standard error; results go to files (written atomically,
temp file then rename) or to standard output.  JSON outputs use canonical
key order and 17-significant-digit floats, so identical inputs and seeds
produce byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys

import numpy as np

from pwqlyap import bench, certify, feas, frontend, jsonio, model, sdp


def _info(message: str) -> None:
    print(message, file=sys.stderr)


def _emit(text: str, output: str | None) -> None:
    """Write result text to the output path atomically, or to stdout."""
    if output is None:
        sys.stdout.write(text)
    else:
        jsonio.write_text(output, text)


def cmd_parse(args) -> int:
    with open(args.file, encoding="utf-8") as handle:
        text = handle.read()
    program = frontend.parse(text)
    system = frontend.to_pwa(program)
    _info(f"parsed {args.file}: d={system.d}, m={system.m}, "
          f"{system.n_cells} cells")
    _emit(jsonio.dumps(model.system_to_json(system)), args.output)
    return 0


def cmd_switches(args) -> int:
    system = model.load_system(args.system)
    n = system.n_cells
    L = [[1] * n for _ in range(n)]
    pruned = []
    undecided = 0
    for i in range(n):
        for j in range(n):
            quad = model.switch_quadratization(system.cells[i], system.laws[i],
                                               system.cells[j])
            status, cert = feas.motzkin_alternative(quad)
            if status == "feasible":
                L[i][j] = 0
                pruned.append({
                    "from": i,
                    "to": j,
                    "p_strict": [float(v) for v in cert.p_strict],
                    "p_weak": [float(v) for v in cert.p_weak],
                    "residual": cert.residual(quad),
                })
            elif status == "unknown":
                undecided += 1
    if undecided:
        _info(f"{undecided} switch LPs undecided; kept as fireable")
    _info(f"{len(pruned)} of {n * n} switches pruned")
    _emit(jsonio.dumps({"L": L, "pruned": pruned}), args.output)
    return 0


def cmd_analyze(args) -> int:
    system = model.load_system(args.system)
    graph = feas.build_switch_graph(system)
    program = sdp.assemble_program(system, graph, eps=args.eps)
    if args.export_sdpa:
        sdp.write_sdpa(program, args.export_sdpa)
        _info(f"wrote SDPA-format problem to {args.export_sdpa}")
    solution = sdp.solve(program)
    if solution.status not in ("optimal", "near-optimal"):
        _info(f"inconclusive: solver status {solution.status}")
        return 1
    outcome = sdp.extract_certificate(solution, program)
    if isinstance(outcome, sdp.RejectionReport):
        _info(f"inconclusive: {outcome}")
        return 1
    _info(f"accepted: alpha={outcome.alpha:.6f} beta={outcome.beta:.6f} "
          f"objective={solution.objective:.6f} "
          f"[{solution.solver}, {solution.solve_seconds:.2f}s]")
    _emit(jsonio.dumps(sdp.certificate_to_json(outcome)), args.output)
    return 0


def cmd_check(args) -> int:
    cert = sdp.load_certificate(args.cert)
    system = model.load_system(args.system)
    if cert.n_cells != system.n_cells:
        raise model.ModelError(
            f"certificate has {cert.n_cells} cells, system has {system.n_cells}")
    if cert.P[0].shape[0] != system.d + system.m:
        raise model.ModelError(
            f"certificate dimension {cert.P[0].shape[0]} does not match "
            f"system dimension {system.d + system.m}")
    report = certify.audit(cert, system, trials=args.trials,
                           steps=args.steps, rng_seed=args.seed)
    _emit(jsonio.dumps(report.to_json()), args.output)
    if report.clean:
        _info(f"audit clean: {report.points} points, 0 violations")
        return 0
    _info(f"audit FAILED: {report.sublevel_violations} sublevel, "
          f"{report.norm_violations} norm violations, "
          f"{report.partition_failures} partition failures "
          f"over {report.points} points")
    return 1


def _contour_samples(cert, system, count: int, rng) -> list:
    """Points on each cell's level surface V_i = alpha, found by shooting
    rays from the quadratic's minimizer.  Cells whose quadratic has no
    interior minimizer below alpha contribute nothing."""
    samples = []
    for i in range(cert.n_cells):
        P, q = cert.P[i], cert.q[i]
        n = P.shape[0]
        try:
            center = np.linalg.solve(P, -q)
        except np.linalg.LinAlgError:
            center = np.zeros(n)
        v0 = float(center @ P @ center + 2.0 * q @ center)
        if not np.isfinite(v0) or v0 >= cert.alpha:
            continue
        for _ in range(count):
            direction = rng.normal(size=n)
            norm = float(np.linalg.norm(direction))
            if norm == 0.0:
                continue
            direction /= norm
            a = float(direction @ P @ direction)
            b = float(direction @ (P @ center + q))
            if a <= 0.0:
                continue
            disc = b * b - a * (v0 - cert.alpha)
            if disc < 0.0:
                continue
            t = (-b + float(np.sqrt(disc))) / a
            z = center + t * direction
            samples.append((i, z, bool(system.cells[i].contains(z))))
    return samples


def cmd_simulate(args) -> int:
    system = model.load_system(args.system)
    x0 = np.asarray(args.x0, dtype=float)
    if x0.shape != (system.d,):
        raise model.ModelError(
            f"--x0 needs {system.d} coordinates, got {x0.shape[0]}")
    cert = sdp.load_certificate(args.cert) if args.cert else None
    rng = np.random.default_rng(args.seed)
    policy = certify.uniform_policy(system, rng)
    traj = certify.simulate(system, x0, policy, args.steps)
    _info(f"simulated {len(traj)} points ({traj.reason})")

    d, m = system.d, system.m
    header = (["kind", "step", "cell"]
              + [f"x{k}" for k in range(d)] + [f"u{k}" for k in range(m)]
              + ["v", "in_cell"])
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)

    def fmt(value: float) -> str:
        return format(float(value) + 0.0, ".17g")

    for k in range(len(traj)):
        cell = int(traj.cells[k])
        z = np.concatenate([traj.states[k], traj.inputs[k]])
        v = fmt(cert.value(cell, z)) if cert is not None else ""
        writer.writerow(["traj", k, cell] + [fmt(c) for c in z] + [v, 1])
    if cert is not None:
        for cell, z, inside in _contour_samples(cert, system,
                                                args.contour_samples, rng):
            writer.writerow(["contour", "", cell] + [fmt(c) for c in z]
                            + [fmt(cert.alpha), int(inside)])
    _emit(buffer.getvalue(), args.plot_data)
    return 0


def cmd_gen(args) -> int:
    params = bench.GenParams(d=args.dim, m=1, cells=args.cells,
                             scale=args.scale, rho=args.rho, seed=args.seed)
    system = bench.generate_system(params)
    _info(f"generated system: d={system.d}, m={system.m}, "
          f"{system.n_cells} cells, seed={args.seed}")
    _emit(jsonio.dumps(model.system_to_json(system)), args.output)
    return 0


def cmd_bench(args) -> int:
    params = bench.GenParams(d=args.dim, m=1, cells=args.cells,
                             scale=args.scale, rho=args.rho, seed=args.seed)
    summary = bench.run_batch(args.n, params, workers=args.workers,
                              timeout=args.timeout)
    _info(f"accepted {summary['accepted']}/{summary['n']} "
          f"(rate {summary['acceptance_rate']:.2f}) "
          f"in {summary['total_seconds']:.1f}s")
    if not summary["all_partitions_ok"]:
        _info("warning: some generated partitions failed validation")
    if not summary["all_rho_ok"]:
        _info("warning: some generated laws failed the spectral radius check")
    if args.report:
        jsonio.write_file(args.report, summary)
        _info(f"wrote report to {args.report}")
    else:
        _emit(jsonio.dumps(summary), None)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pwqlyap",
        description="Piecewise quadratic invariants for piecewise affine "
                    "systems: compile, prune, solve, certify, audit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="compile a loop program to PWA system JSON")
    p.add_argument("file", help="loop program source file")
    p.add_argument("-o", "--output", default=None,
                   help="system JSON path (default: stdout)")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("switches",
                       help="print the fireable-switch matrix and pruning certificates")
    p.add_argument("system", help="system JSON path")
    p.add_argument("-o", "--output", default=None,
                   help="result JSON path (default: stdout)")
    p.set_defaults(func=cmd_switches)

    p = sub.add_parser("analyze",
                       help="solve for a certificate (exit 0 accepted, 1 inconclusive)")
    p.add_argument("system", help="system JSON path")
    p.add_argument("-o", "--output", default=None,
                   help="certificate JSON path (default: stdout)")
    p.add_argument("--eps", type=float, default=sdp.DEFAULT_MARGIN,
                   help="semidefinite margin added to every block "
                        "(default: %(default)s)")
    p.add_argument("--export-sdpa", metavar="FILE", default=None,
                   help="also write the assembled program in sparse SDPA format")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("check",
                       help="Monte-Carlo audit of a certificate (exit 1 on violations)")
    p.add_argument("cert", help="certificate JSON path")
    p.add_argument("system", help="system JSON path")
    p.add_argument("--trials", type=int, default=10000,
                   help="number of audited trajectories (default: %(default)s)")
    p.add_argument("--steps", type=int, default=50,
                   help="steps per trajectory (default: %(default)s)")
    p.add_argument("--seed", type=int, default=0,
                   help="sampling seed (default: %(default)s)")
    p.add_argument("-o", "--output", default=None,
                   help="audit report JSON path (default: stdout)")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("simulate",
                       help="simulate one trajectory and emit plot data as CSV")
    p.add_argument("system", help="system JSON path")
    p.add_argument("--x0", type=float, nargs="+", required=True,
                   help="initial state coordinates")
    p.add_argument("--steps", type=int, default=50,
                   help="maximum steps (default: %(default)s)")
    p.add_argument("--seed", type=int, default=0,
                   help="input sampling seed (default: %(default)s)")
    p.add_argument("--cert", default=None,
                   help="certificate JSON; adds V values and level-set samples")
    p.add_argument("--contour-samples", type=int, default=64,
                   help="level-surface samples per cell (default: %(default)s)")
    p.add_argument("--plot-data", metavar="FILE", default=None,
                   help="CSV output path (default: stdout)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("gen", help="generate one random PWA system")
    p.add_argument("--seed", type=int, default=0,
                   help="generator seed (default: %(default)s)")
    p.add_argument("--cells", type=int, choices=(1, 2, 4), default=4,
                   help="cell count (default: %(default)s)")
    p.add_argument("--dim", type=int, choices=(1, 2, 3, 4), default=2,
                   help="state dimension (default: %(default)s)")
    p.add_argument("--scale", type=float, default=1.0,
                   help="coefficient scale (default: %(default)s)")
    p.add_argument("--rho", type=float, default=0.9,
                   help="target spectral radius (default: %(default)s)")
    p.add_argument("-o", "--output", default=None,
                   help="system JSON path (default: stdout)")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("bench",
                       help="generate and analyze a batch of random systems")
    p.add_argument("--n", type=int, default=50,
                   help="number of systems (default: %(default)s)")
    p.add_argument("--seed", type=int, default=0,
                   help="master seed (default: %(default)s)")
    p.add_argument("--cells", type=int, choices=(1, 2, 4), default=4,
                   help="cell count cap; items draw up to it (default: %(default)s)")
    p.add_argument("--dim", type=int, choices=(1, 2, 3, 4), default=4,
                   help="state dimension cap; items draw up to it "
                        "(default: %(default)s)")
    p.add_argument("--scale", type=float, default=1.0,
                   help="coefficient scale (default: %(default)s)")
    p.add_argument("--rho", type=float, default=0.9,
                   help="target spectral radius (default: %(default)s)")
    p.add_argument("--workers", type=int, default=1,
                   help="concurrent items (default: %(default)s)")
    p.add_argument("--timeout", type=float, default=60.0,
                   help="per-item time budget in seconds (default: %(default)s)")
    p.add_argument("--report", metavar="FILE", default=None,
                   help="summary JSON path (default: stdout)")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, model.PartitionError) as exc:
        print(f"pwqlyap: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
