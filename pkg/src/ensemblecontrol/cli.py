"""Command-line entry point.

Subcommands
-----------
synth      assemble the endpoint operator for a built-in family and emit the
           truncated minimum-norm control plus synthesis reports
simulate   integrate a family under a control CSV and emit final states
dpss       spheroidal sequences and eigenvalues as CSV
qp         amplitude-constrained steering QP for one horizon
demo       pinned scenarios fig2 | fig3 | fig4 | fig5
diagnose   solvability diagnostics for a target profile

Every run writes ``manifest.json`` (config echo, versions, wall time, output
hashes) into the output directory.  Exit codes: 0 ok, 2 configuration
error, 3 numerical failure, 4 tolerance not met.
"""

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import demos, plotting
from .errors import (EnsembleControlError, IntegrationError, NumericalError,
                     ParameterError, ShapeError, ToleranceNotMetError)
from .io import RunManifest, control_to_csv, read_control_csv, write_csv, write_json
from .model import (family_from_config, simulate_ensemble, transition_matrices,
                    uniform_grid)
from .operator import (assemble, picard_diagnostic, singular_system,
                       synthesize_min_norm, target_offset)
from .oscillator import HarmonicSpec
from .qp import build_qp, evaluate_final_distance, solve_box_qp
from .spheroidal import dpss

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_TOLERANCE = 4


def _outdir(args):
    out = args.outdir or os.environ.get("ENSEMBLECTL_OUTDIR") or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    probe = path / ".write_probe"
    try:
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ParameterError(f"output directory {path} is not writable: {exc}")
    return path


def _load_family(args):
    if args.spec_json:
        payload = json.loads(Path(args.spec_json).read_text())
        if payload.get("schema") != 1:
            raise ParameterError("spec JSON must declare \"schema\": 1")
        return family_from_config(payload["family"], payload.get("params"))
    params = json.loads(args.params) if args.params else {}
    return family_from_config(args.family, params)


def _profile(text, n_param, n):
    """Parse a constant state profile given as JSON [[re, im], ...] or
    [x1, x2, ...]; broadcast over parameter nodes."""
    vals = json.loads(text)
    vec = np.empty(n, dtype=complex)
    for i, entry in enumerate(vals):
        if isinstance(entry, (list, tuple)):
            vec[i] = complex(entry[0], entry[1])
        else:
            vec[i] = complex(entry)
    if len(vals) != n:
        raise ParameterError(f"profile needs {n} components, got {len(vals)}")
    return np.tile(vec, (n_param, 1))


def _pipeline(args):
    spec = _load_family(args)
    grid = uniform_grid(spec, args.nt, args.ns)
    transitions = transition_matrices(spec, grid, step_tol=args.step_tol)
    op = assemble(spec, grid, transitions)
    sing = singular_system(op, rank_tol=args.rank_tol)
    x0 = _profile(args.x0, grid.n_param, spec.n)
    xF = _profile(args.xF, grid.n_param, spec.n)
    xi = target_offset(transitions, x0, xF)
    return spec, grid, transitions, op, sing, x0, xF, xi


def cmd_synth(args):
    out = _outdir(args)
    manifest = RunManifest(out, "synth", vars(args) | {"outdir": str(out)},
                           seed=args.seed)
    spec, grid, transitions, op, sing, x0, xF, xi = _pipeline(args)
    report = picard_diagnostic(sing, xi)
    result = synthesize_min_norm(sing, xi, eps=args.eps)
    manifest.add(control_to_csv(out / "control.csv", result.control))
    manifest.add(write_json(out / "singular_system.json", sing.to_dict()))
    manifest.add(write_json(out / "synthesis.json",
                            result.to_dict() | {"picard": report.to_dict()}))
    if not args.no_plot:
        manifest.add(plotting.plot_control(
            out / "control.png", grid.time_nodes,
            result.control.channels[:, 0],
            title=f"minimum-norm control ({spec.name or 'family'})"))
        manifest.add(plotting.plot_picard(out / "diagnostics.png", report,
                                          sing.sigmas))
    manifest.write()
    print(f"N_used={result.N_used} achieved_residual={result.achieved_residual:.6g} "
          f"eps_reached={result.eps_reached}")
    return EXIT_OK if result.eps_reached else EXIT_TOLERANCE


def cmd_simulate(args):
    out = _outdir(args)
    manifest = RunManifest(out, "simulate", vars(args) | {"outdir": str(out)},
                           seed=args.seed)
    spec = _load_family(args)
    t_nodes, channels = read_control_csv(args.control)
    grid = uniform_grid(spec, len(t_nodes), args.ns)
    if not np.allclose(t_nodes, grid.time_nodes, rtol=0, atol=1e-9):
        raise ParameterError("control CSV time grid is not the uniform grid "
                             "of this family")
    x0 = _profile(args.x0, grid.n_param, spec.n)
    traj = simulate_ensemble(spec, grid, x0, channels, step_tol=args.step_tol)
    final = traj.final
    header = ["s"] + [f"x{k}_re" for k in range(spec.n)] + \
             [f"x{k}_im" for k in range(spec.n)]
    cols = [grid.param_nodes] + [final[:, k].real for k in range(spec.n)] + \
           [final[:, k].imag for k in range(spec.n)]
    manifest.add(write_csv(out / "final_state.csv", header, cols))
    if not args.no_plot and spec.n >= 2:
        manifest.add(plotting.plot_final_states(
            out / "final_state.png", grid.param_nodes,
            final[:, 0] + 1j * final[:, 1]))
    manifest.write()
    print(f"max final-state magnitude: {np.abs(final).max():.6g}")
    return EXIT_OK


def cmd_dpss(args):
    out = _outdir(args)
    manifest = RunManifest(out, "dpss", vars(args) | {"outdir": str(out)},
                           seed=args.seed)
    basis = dpss(args.N, args.W, k_max=args.k, method=args.method)
    manifest.add(write_csv(out / "dpss_eigenvalues.csv",
                           ["order", "kappa"],
                           [np.arange(basis.k), basis.kappas]))
    header = ["index"] + [f"v{k}" for k in range(basis.k)]
    cols = [np.arange(basis.N)] + [basis.sequences[k] for k in range(basis.k)]
    manifest.add(write_csv(out / "dpss_sequences.csv", header, cols))
    if not args.no_plot:
        manifest.add(plotting.plot_dpss(out / "dpss.png", basis))
    manifest.write()
    print(f"retained {basis.k} sequences; kappa_0={basis.kappas[0]:.12g}")
    return EXIT_OK


def cmd_qp(args):
    out = _outdir(args)
    manifest = RunManifest(out, "qp", vars(args) | {"outdir": str(out)},
                           seed=args.seed)
    prob = build_qp(args.T, n=args.n, beta=args.beta, bound=args.bound)
    sol = solve_box_qp(prob, tol=args.tol)
    dist = evaluate_final_distance(prob, sol.x)
    om = np.linspace(-prob.beta, prob.beta, 51)
    manifest.add(write_csv(out / "qp_solution.csv", ["t", "u"],
                           [prob.times, sol.x]))
    manifest.add(write_csv(out / "qp_distance.csv", ["omega", "distance"],
                           [om, dist]))
    manifest.add(write_json(out / "qp.json", sol.to_dict()))
    if not args.no_plot:
        manifest.add(plotting.plot_qp(out / "qp.png", prob.times, sol.x, om,
                                      dist, title=f"T={args.T:g}"))
    manifest.write()
    print(f"objective={sol.objective:.9g} kkt={sol.kkt_residual:.3g} "
          f"saturated={sol.saturated_fraction:.0%}")
    return EXIT_OK


def cmd_diagnose(args):
    out = _outdir(args)
    manifest = RunManifest(out, "diagnose", vars(args) | {"outdir": str(out)},
                           seed=args.seed)
    spec, grid, transitions, op, sing, x0, xF, xi = _pipeline(args)
    report = picard_diagnostic(sing, xi, residual_threshold=args.residual_threshold)
    manifest.add(write_json(out / "diagnosis.json",
                            report.to_dict() | {"sigmas": [float(s) for s in
                                                           sing.sigmas]}))
    if not args.no_plot:
        manifest.add(plotting.plot_picard(out / "diagnostics.png", report,
                                          sing.sigmas))
    manifest.write()
    print(f"range_residual={report.range_residual:.6g} "
          f"range_condition_met={report.range_condition_met} "
          f"decay_exponent={report.decay_exponent:.3g}")
    return EXIT_OK


def _emit_steering(out, manifest, demo, label, no_plot):
    t = demo.spec.time_nodes
    alpha = demo.synthesis.alpha.channels[:, 0]
    manifest.add(write_csv(out / f"{label}_control.csv",
                           ["t", "re_alpha", "im_alpha", "abs_alpha"],
                           [t, alpha.real, alpha.imag, np.abs(alpha)]))
    om = demo.spec.omega_nodes
    manifest.add(write_csv(out / f"{label}_final_state.csv",
                           ["omega", "x", "y"],
                           [om, demo.final_states.real, demo.final_states.imag]))
    omega_col, t_col, x_col, y_col = [], [], [], []
    for w, traj in demo.tracked.items():
        omega_col.extend([w] * len(t))
        t_col.extend(t)
        x_col.extend(traj.real)
        y_col.extend(traj.imag)
    manifest.add(write_csv(out / f"{label}_trajectories.csv",
                           ["omega", "t", "x", "y"],
                           [omega_col, t_col, x_col, y_col]))
    if not no_plot:
        manifest.add(plotting.plot_control(
            out / f"{label}_control.png", t, alpha,
            title=f"{label}: minimum-energy control"))
        manifest.add(plotting.plot_final_states(
            out / f"{label}_final_state.png", om, demo.final_states,
            title=f"{label}: final states across the band"))
        manifest.add(plotting.plot_trajectories(
            out / f"{label}_trajectories.png",
            [(f"omega={w:g}", traj) for w, traj in demo.tracked.items()],
            title=f"{label}: tracked member trajectories"))
    print(f"{label}: N_used={demo.synthesis.N_used} "
          f"|alpha(0)|={abs(alpha[0]):.4f} "
          f"max final distance={demo.max_final_distance:.6g}")


def cmd_demo(args):
    out = _outdir(args)
    manifest = RunManifest(out, f"demo {args.which}",
                           vars(args) | {"outdir": str(out)}, seed=args.seed)
    eps = args.eps if args.eps is not None else demos.FIG2_EPS
    if args.which == "fig2":
        _emit_steering(out, manifest, demos.demo_fig2(args.N, eps), "fig2",
                       args.no_plot)
    elif args.which == "fig3":
        _emit_steering(out, manifest, demos.demo_fig3(args.N, eps), "fig3",
                       args.no_plot)
    elif args.which == "fig4":
        case1, case2 = demos.demo_fig4(args.N, eps)
        t = case1.spec.time_nodes
        a1 = case1.synthesis.alpha.channels[:, 0]
        a2 = case2.synthesis.alpha.channels[:, 0]
        manifest.add(write_csv(out / "fig4_amplitudes.csv",
                               ["t", "abs_alpha_case1", "abs_alpha_case2"],
                               [t, np.abs(a1), np.abs(a2)]))
        if not args.no_plot:
            manifest.add(plotting.plot_amplitudes(
                out / "fig4_amplitudes.png", t,
                [("start (1,0)", np.abs(a1)), ("start (1,2)", np.abs(a2))]))
        print(f"fig4: |alpha1(0)|={abs(a1[0]):.4f} |alpha2(0)|={abs(a2[0]):.4f}")
    elif args.which == "fig5":
        demo = demos.demo_fig5(tol=args.tol)
        for T, prob, sol, dist in zip(demo.horizons, demo.problems,
                                      demo.solutions, demo.distances):
            tag = f"fig5_T{T:.5g}".replace(".", "p")
            manifest.add(write_csv(out / f"{tag}_solution.csv", ["t", "u"],
                                   [prob.times, sol.x]))
            manifest.add(write_csv(out / f"{tag}_distance.csv",
                                   ["omega", "distance"],
                                   [demo.omega_nodes, dist]))
            if not args.no_plot:
                manifest.add(plotting.plot_qp(
                    out / f"{tag}.png", prob.times, sol.x,
                    demo.omega_nodes, dist, title=f"T={T:g}"))
            print(f"fig5 T={T:8.4f}: objective={sol.objective:+.6f} "
                  f"saturated={sol.saturated_fraction:.0%} "
                  f"max distance={dist.max():.4f}")
    else:
        raise ParameterError(f"unknown demo '{args.which}'")
    manifest.write()
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(
        prog="ensemblectl",
        description="Open-loop control synthesis for parameterized families "
                    "of linear systems")
    p.add_argument("--outdir", default=None,
                   help="output directory (default: $ENSEMBLECTL_OUTDIR or .)")
    p.add_argument("--seed", type=int, default=0,
                   help="seed recorded in the manifest and used by any "
                        "randomized helper")
    p.add_argument("--no-plot", action="store_true",
                   help="emit delimited data only, skip figure rendering")
    sub = p.add_subparsers(dest="command", required=True)

    def add_family_args(sp):
        sp.add_argument("--family", default="harmonic",
                        help="built-in family name")
        sp.add_argument("--params", default=None,
                        help="JSON dict of family parameters")
        sp.add_argument("--spec-json", default=None,
                        help="path to a JSON family spec (schema 1)")

    sp = sub.add_parser("synth", help="synthesize a minimum-norm control")
    add_family_args(sp)
    sp.add_argument("--nt", type=int, default=201)
    sp.add_argument("--ns", type=int, default=101)
    sp.add_argument("--eps", type=float, default=1e-2)
    sp.add_argument("--rank-tol", type=float, default=1e-12)
    sp.add_argument("--step-tol", type=float, default=1e-9)
    sp.add_argument("--x0", default="[[1,0]]",
                    help="initial profile, JSON per-component [re, im]")
    sp.add_argument("--xF", default="[[0,0]]", help="target profile")
    sp.set_defaults(fn=cmd_synth)

    sp = sub.add_parser("simulate", help="simulate a family under a control CSV")
    add_family_args(sp)
    sp.add_argument("--control", required=True, help="control CSV path")
    sp.add_argument("--ns", type=int, default=101)
    sp.add_argument("--step-tol", type=float, default=1e-9)
    sp.add_argument("--x0", default="[[1,0]]")
    sp.set_defaults(fn=cmd_simulate)

    sp = sub.add_parser("dpss", help="spheroidal sequences and eigenvalues")
    sp.add_argument("--N", type=int, required=True)
    sp.add_argument("--W", type=float, required=True)
    sp.add_argument("--k", type=int, default=None)
    sp.add_argument("--method", choices=("eigh", "gram"), default="eigh")
    sp.set_defaults(fn=cmd_dpss)

    sp = sub.add_parser("qp", help="amplitude-constrained steering QP")
    sp.add_argument("--T", type=float, required=True)
    sp.add_argument("--n", type=int, default=51)
    sp.add_argument("--beta", type=float, default=1.0)
    sp.add_argument("--bound", type=float, default=1.0)
    sp.add_argument("--tol", type=float, default=1e-9)
    sp.set_defaults(fn=cmd_qp)

    sp = sub.add_parser("demo", help="pinned demonstration scenarios")
    sp.add_argument("which", choices=("fig2", "fig3", "fig4", "fig5"))
    sp.add_argument("--N", type=int, default=1001,
                    help="frequency samples for fig2/fig3/fig4")
    sp.add_argument("--eps", type=float, default=None,
                    help="override the pinned truncation accuracy")
    sp.add_argument("--tol", type=float, default=1e-9,
                    help="KKT tolerance for fig5")
    sp.set_defaults(fn=cmd_demo)

    sp = sub.add_parser("diagnose", help="solvability diagnostics for a target")
    add_family_args(sp)
    sp.add_argument("--nt", type=int, default=201)
    sp.add_argument("--ns", type=int, default=101)
    sp.add_argument("--rank-tol", type=float, default=1e-12)
    sp.add_argument("--step-tol", type=float, default=1e-9)
    sp.add_argument("--residual-threshold", type=float, default=1e-3)
    sp.add_argument("--x0", default="[[1,0]]")
    sp.add_argument("--xF", default="[[0,0]]")
    sp.set_defaults(fn=cmd_diagnose)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        return args.fn(args)
    except (ParameterError, ShapeError, json.JSONDecodeError,
            FileNotFoundError, KeyError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ToleranceNotMetError as exc:
        print(f"tolerance not met: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE
    except (NumericalError, IntegrationError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except EnsembleControlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
