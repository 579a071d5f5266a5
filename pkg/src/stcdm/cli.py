"""Command-line surface.

Every subcommand reads and writes the canonical document formats from
docio. The default output directory is the current one, overridable with
--out or the STCDM_OUT environment variable.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import docio
from .codeopt import SolverFailure, optimize_code
from .experiments import (
    Scenario,
    design_report_doc,
    load_scenario,
    paper_scenario,
    relax_result_doc,
    reproduce,
    run_monte_carlo,
    scenario_doc,
    trial_seed,
)
from .fim import IdentifiabilityError, assemble_fim
from .imaging import mf_image
from .model import synthesize
from .relax import EstimatorConfig, make_grids, relax_estimate
from .sequences import make_code, max_autocorrelation_sidelobe

OUT_ENV = "STCDM_OUT"


def _out_dir(args: argparse.Namespace) -> Path:
    out = args.out or os.environ.get(OUT_ENV) or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _scenario(args: argparse.Namespace) -> Scenario:
    scn = load_scenario(args.scenario) if args.scenario else paper_scenario()
    updates: dict = {}
    if getattr(args, "seed", None) is not None:
        updates["master_seed"] = args.seed
    if getattr(args, "trials", None) is not None:
        updates["trials"] = args.trials
    if getattr(args, "snr", None) is not None:
        updates["snr_sweep"] = tuple(float(s) for s in args.snr.split(","))
    if getattr(args, "grids", None) is not None:
        try:
            lt, lw = (int(v) for v in args.grids.lower().split("x"))
        except ValueError as exc:
            raise SystemExit(f"--grids expects LTHETAxLOMEGA, got {args.grids!r}") from exc
        e = scn.estimator
        updates["estimator"] = EstimatorConfig(
            angle_bins=lt,
            doppler_bins=lw,
            tolerance=e.tolerance,
            max_targets=e.max_targets,
            fine_iterations=e.fine_iterations,
            max_sweeps=e.max_sweeps,
        )
    if updates:
        from dataclasses import replace

        scn = replace(scn, **updates)
    return scn


def cmd_codegen(args: argparse.Namespace) -> int:
    scn = _scenario(args)
    code = make_code(
        args.family, scn.array.tx_count, scn.array.pri_count, seed=scn.master_seed
    )
    out = _out_dir(args) / args.name
    docio.dump_json(docio.code_doc(code), out)
    sidelobe = max_autocorrelation_sidelobe(code)
    print(f"{args.family} code {code.tx_count}x{code.pri_count} -> {out}")
    print(f"max periodic autocorrelation sidelobe: {sidelobe:.3e}")
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    scn = _scenario(args)
    code = docio.doc_code(docio.load_json(args.code)) if args.code else scn.resolve_code()
    snap = synthesize(scn.scene, code, scn.array, seed=trial_seed(scn.master_seed, 0, 0))
    out = _out_dir(args) / args.name
    docio.write_snapshot_csv(snap, out)
    print(f"snapshot {snap.rx_count}x{snap.pri_count} -> {out}")
    return 0


def cmd_crb(args: argparse.Namespace) -> int:
    scn = _scenario(args)
    code = docio.doc_code(docio.load_json(args.code)) if args.code else scn.resolve_code()
    fim = assemble_fim(scn.scene, code, scn.array)
    bound = fim.crb()
    out_dir = _out_dir(args)
    doc = {
        "type": "crb_report",
        "parameter_count": fim.size,
        "trace": bound.trace(),
        "diagonal": bound.diagonal(),
        "condition": bound.condition,
    }
    docio.dump_json(doc, out_dir / args.name)
    if args.full_matrix:
        docio.write_matrix_csv(bound.entries, out_dir / args.full_matrix)
    k = scn.scene.size
    d = bound.diagonal()
    i = scn.target_index
    print(f"tr CRB = {bound.trace():.6e}  (condition {bound.condition:.2e})")
    print(
        f"target {i + 1}: RCRB(theta) = {np.sqrt(d[i]):.6e} rad, "
        f"RCRB(omega) = {np.sqrt(d[k + i]):.6e} rad/PRI"
    )
    return 0


def cmd_optimize_code(args: argparse.Namespace) -> int:
    scn = _scenario(args)
    initial = scn.resolve_code() if args.initial is None else docio.doc_code(docio.load_json(args.initial))
    anchor = scn.scene
    if args.anchor:
        anchor = docio.doc_scene(docio.load_json(args.anchor))
    t0 = time.perf_counter()
    code, report = optimize_code(
        anchor, scn.array, initial, solver=args.solver, seed=scn.master_seed,
        verbose=args.verbose,
    )
    elapsed = time.perf_counter() - t0
    out_dir = _out_dir(args)
    docio.dump_json(docio.code_doc(code), out_dir / args.name)
    docio.dump_json(design_report_doc(report), out_dir / args.report)
    print(f"solver {report.solver}: {report.solver_status} in {elapsed:.1f} s", file=sys.stderr)
    print(f"tr CRB initial   = {report.initial_trace:.6e}")
    print(f"relaxed bound    = {report.relaxed_objective:.6e}")
    print(f"tr CRB optimized = {report.final_trace:.6e}")
    if report.rounding_failed:
        print("WARNING: rounding fallback failed; returned the initial code", file=sys.stderr)
    return 0


def cmd_relax(args: argparse.Namespace) -> int:
    scn = _scenario(args)
    code = docio.doc_code(docio.load_json(args.code)) if args.code else scn.resolve_code()
    if args.snapshot:
        snap = docio.read_snapshot_csv(args.snapshot)
    else:
        snap = synthesize(scn.scene, code, scn.array, seed=trial_seed(scn.master_seed, 0, 0))
    t0 = time.perf_counter()
    result = relax_estimate(
        snap, code, scn.array, scn.estimator, fixed_order=args.order
    )
    elapsed = time.perf_counter() - t0
    docio.dump_json(relax_result_doc(result), _out_dir(args) / args.name)
    print(f"RELAX: order {result.selected_order} in {elapsed:.1f} s", file=sys.stderr)
    for i, t in enumerate(result.estimates):
        print(
            f"target {i + 1}: theta = {np.degrees(t.azimuth):8.4f} deg, "
            f"omega = {t.doppler:8.5f}, |b| = {abs(t.amplitude):.4g}"
        )
    return 0


def cmd_image(args: argparse.Namespace) -> int:
    scn = _scenario(args)
    code = docio.doc_code(docio.load_json(args.code)) if args.code else scn.resolve_code()
    if args.snapshot:
        snap = docio.read_snapshot_csv(args.snapshot)
    else:
        snap = synthesize(scn.scene, code, scn.array, seed=trial_seed(scn.master_seed, 0, 0))
    grids = make_grids(scn.array, scn.estimator)
    image = mf_image(snap, code, scn.array, grids)
    out_dir = _out_dir(args)
    docio.write_matrix_csv(image.values, out_dir / args.name)
    docio.dump_json(
        {
            "type": "angle_doppler_image",
            "angle_grid": image.angle_grid,
            "doppler_grid": image.doppler_grid,
            "reference": image.reference,
            "values_csv": args.name,
        },
        out_dir / args.sidecar,
    )
    row, col = image.peak_cell
    print(
        f"image {image.values.shape[0]}x{image.values.shape[1]}; peak at "
        f"theta = {np.degrees(image.angle_grid[row]):.3f} deg, omega = {image.doppler_grid[col]:.4f}"
    )
    return 0


def cmd_mc(args: argparse.Namespace) -> int:
    scn = _scenario(args)
    code = docio.doc_code(docio.load_json(args.code)) if args.code else scn.resolve_code()
    report = run_monte_carlo(scn, code=code, threads=args.threads)
    docio.write_mc_csv([p.row() for p in report.points], _out_dir(args) / args.name)
    print(f"{report.trials} trials/point in {report.wall_clock:.1f} s", file=sys.stderr)
    for w in report.warnings:
        print(f"WARNING: {w}", file=sys.stderr)
    for p in report.points:
        print(
            f"snr {p.snr_db:6.1f} dB: rmse(theta) {p.rmse_theta:.4e} vs rcrb {p.rcrb_theta:.4e}; "
            f"rmse(omega) {p.rmse_omega:.4e} vs rcrb {p.rcrb_omega:.4e}; failures {p.failures}"
        )
    return 0


def cmd_reproduce(args: argparse.Namespace) -> int:
    scn = _scenario(args)
    summary = reproduce(scn, _out_dir(args), solver=args.solver, threads=args.threads)
    angle_db, doppler_db = summary["improvement_db"]
    print(f"anchor model order: {summary['anchor_order']}")
    print(f"RCRB improvement vs initial code: {angle_db:.2f} dB angle, {doppler_db:.2f} dB doppler")
    if summary["rounding_failed"]:
        print("WARNING: code design fell back to the initial code", file=sys.stderr)
    return 0


def cmd_scenario(args: argparse.Namespace) -> int:
    scn = _scenario(args)
    docio.dump_json(scenario_doc(scn), _out_dir(args) / args.name)
    print(f"scenario with {scn.scene.size} targets -> {args.name}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stcdm",
        description="Slow-time code-division MIMO radar: CRB analysis, code design, estimation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, grids: bool = True) -> None:
        p.add_argument("--scenario", help="scenario JSON (default: built-in paper setup)")
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or .)")
        if grids:
            p.add_argument("--grids", help="grid sizes as LTHETAxLOMEGA, e.g. 1024x512")

    p = sub.add_parser("codegen", help="emit a code matrix document")
    common(p, grids=False)
    p.add_argument("--family", default="zadoff_chu", choices=["random", "zadoff_chu", "p_sequence"])
    p.add_argument("--name", default="code.json")
    p.set_defaults(func=cmd_codegen)

    p = sub.add_parser("simulate", help="synthesize a snapshot CSV")
    common(p, grids=False)
    p.add_argument("--code", help="code matrix JSON (default: scenario family)")
    p.add_argument("--name", default="snapshot.csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("crb", help="CRB trace/diagonal report for a scene and code")
    common(p, grids=False)
    p.add_argument("--code", help="code matrix JSON")
    p.add_argument("--name", default="crb.json")
    p.add_argument("--full-matrix", help="also dump the full CRB matrix to this CSV")
    p.set_defaults(func=cmd_crb)

    p = sub.add_parser("optimize-code", help="CRB-minimizing code via the SDP relaxation")
    common(p, grids=False)
    p.add_argument("--anchor", help="anchor scene JSON (default: scenario truth)")
    p.add_argument("--initial", help="initial code JSON (default: scenario family)")
    p.add_argument("--solver", default="auto", choices=["auto", "clarabel", "scs"])
    p.add_argument("--name", default="code_optimized.json")
    p.add_argument("--report", default="design_report.json")
    p.add_argument("--verbose", action="store_true", help="show solver output")
    p.set_defaults(func=cmd_optimize_code)

    p = sub.add_parser("relax", help="RELAX angle-Doppler estimation")
    common(p)
    p.add_argument("--code", help="code matrix JSON")
    p.add_argument("--snapshot", help="snapshot CSV (default: synthesize from scenario)")
    p.add_argument("--order", type=int, help="fixed model order (default: BIC selection)")
    p.add_argument("--name", default="relax.json")
    p.set_defaults(func=cmd_relax)

    p = sub.add_parser("image", help="matched-filter angle-Doppler image")
    common(p)
    p.add_argument("--code", help="code matrix JSON")
    p.add_argument("--snapshot", help="snapshot CSV (default: synthesize from scenario)")
    p.add_argument("--name", default="image.csv")
    p.add_argument("--sidecar", default="image.json")
    p.set_defaults(func=cmd_image)

    p = sub.add_parser("mc", help="Monte-Carlo RMSE vs RCRB sweep")
    common(p)
    p.add_argument("--code", help="code matrix JSON")
    p.add_argument("--trials", type=int, help="trials per sweep point")
    p.add_argument("--snr", help="comma-separated SNR sweep in dB")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--name", default="mc.csv")
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("reproduce", help="full chain: code, snapshot, anchor, design, MC")
    common(p)
    p.add_argument("--trials", type=int, help="trials per sweep point")
    p.add_argument("--snr", help="comma-separated SNR sweep in dB")
    p.add_argument("--solver", default="auto", choices=["auto", "clarabel", "scs"])
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("scenario", help="write the resolved scenario document")
    common(p)
    p.add_argument("--trials", type=int)
    p.add_argument("--snr", help="comma-separated SNR sweep in dB")
    p.add_argument("--name", default="scenario.json")
    p.set_defaults(func=cmd_scenario)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (IdentifiabilityError, SolverFailure, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
