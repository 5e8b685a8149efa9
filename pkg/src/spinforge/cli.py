"""Command-line drivers for chain design and simulation.

Two command families: ``design`` writes chain documents (plus a
convergence trace CSV) and ``simulate`` consumes them to produce report
JSON and sweep CSV files.  All randomness derives from one ``--seed``
through counter-based splitting, so any command re-run with identical
flags produces byte-identical outputs.  Exit codes: 0 success, 1 usage
error, 2 design stall (trace still written), 3 tolerance breach (the
message names the failing stage).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import chainio
from .cloning import (
    BRUTE_FORCE_MAX_M,
    CloningStageError,
    clone_report,
    design_w_chain,
    ghz_helper_chain,
    profile_from_betas,
    symmetric_profile,
)
from .ghz_ising import (
    BRUTE_FORCE_MAX_QUBITS,
    GHZ_TIME,
    ising_from_pst,
    mirror_deviation,
    overlap_estimate,
    perturb_sweep,
)
from .isoflow import FlowConvergenceError, interpolate_gamma, zy_ghz_overlap
from .numerics import SymTridiag
from .pst import standard_couplings, verify_mirror
from .synthesis import FlowStallError, produced_state, wstate_chain

USAGE_ERROR, STALL, BREACH = 1, 2, 3


class _Parser(argparse.ArgumentParser):
    """Argument parser that reports usage problems with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="spinforge")
    top = parser.add_subparsers(dest="family", required=True)

    design = top.add_parser("design", help="write chain documents")
    dsub = design.add_subparsers(dest="command", required=True)

    pst = dsub.add_parser("pst", help="mirror-transfer couplings")
    pst.add_argument("--n", type=int, required=True)
    pst.add_argument("--tol", type=float, default=1e-9)

    gamma = dsub.add_parser("gamma", help="deformed-family interpolation")
    gamma.add_argument("--n", type=int, required=True)
    gamma.add_argument("--from", dest="gamma_from", type=float, required=True)
    gamma.add_argument("--to", dest="gamma_to", type=float, required=True)
    gamma.add_argument("--mode", choices=("direct", "unitary"),
                       default="unitary")
    gamma.add_argument("--step", type=float, default=1e-3)
    gamma.add_argument("--max-steps", type=int, default=None)

    wstate = dsub.add_parser("wstate", help="uniform odd-site revival chain")
    wstate.add_argument("--n", type=int, required=True)
    wstate.add_argument("--source", type=int, default=None)
    wstate.add_argument("--target", choices=("odd-uniform",),
                        default="odd-uniform")
    wstate.add_argument("--t0", default="auto")
    wstate.add_argument("--tol", type=float, default=1e-6)
    wstate.add_argument("--budget", type=int, default=100_000)

    simulate = top.add_parser("simulate", help="run chains and write reports")
    ssub = simulate.add_subparsers(dest="command", required=True)

    ghz = ssub.add_parser("ghz", help="evaluate a chain's GHZ overlap")
    ghz.add_argument("--chain", required=True)
    ghz.add_argument("--check", action="store_true",
                     help="also verify the mirror transfer condition")
    ghz.add_argument("--tol", type=float, default=1e-9)

    sweep = ssub.add_parser("sweep", help="disorder sweep of the GHZ overlap")
    sweep.add_argument("--n", type=int, required=True)
    sweep.add_argument("--x", required=True,
                       help="perturbation percents, 'from:to:step' or one value")
    sweep.add_argument("--samples", type=int, required=True)
    sweep.add_argument("--threads", type=int, default=None)

    clone = ssub.add_parser("clone", help="design and score a cloning pipeline")
    clone.add_argument("--n-clones", dest="n_clones", type=int, required=True)
    clone.add_argument("--profile", default="symmetric",
                       help="'symmetric' or comma-separated weights")
    clone.add_argument("--method", choices=("compressed", "brute_force"),
                       default="compressed")
    clone.add_argument("--offset", type=int, default=None)
    clone.add_argument("--stage-tol", dest="stage_tol", type=float,
                       default=1e-6)

    for sub in (pst, gamma, wstate, ghz, sweep, clone):
        sub.add_argument("--seed", type=int, default=0)
        sub.add_argument("--out", default=None)
    for sub in (pst, gamma, wstate):
        sub.add_argument("--trace", default=None)
    return parser


def _default_out(args) -> str:
    if args.family == "design":
        kind = {"pst": "pst", "gamma": "zy", "wstate": "xx"}[args.command]
        return f"{kind}{args.n}.json"
    return {"ghz": "ghz_report.json", "sweep": "sweep.csv",
            "clone": "clone_report.json"}[args.command]


def _trace_path(args, out: str) -> Path:
    if args.trace is not None:
        return Path(args.trace)
    return Path(out).with_suffix("").with_suffix(".trace.csv")


def _provenance(argv, args, tolerances: dict) -> dict:
    command = "spinforge " + " ".join(argv)
    return chainio.make_provenance(command, seed=args.seed,
                                   tolerances=tolerances)


def _write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# design commands


def _design_pst(args, argv) -> int:
    chain = standard_couplings(args.n)
    residual = verify_mirror(chain)
    out = args.out or _default_out(args)
    _trace_path(args, out).write_text(f"check,residual\nmirror,{residual!r}\n")
    if residual > args.tol:
        print(f"mirror check: residual {residual:.3e} exceeds {args.tol:.1e}",
              file=sys.stderr)
        return STALL
    doc = chainio.document_from_pst(
        chain, _provenance(argv, args, {"mirror": args.tol}))
    chainio.write_document(doc, out)
    return 0


def _design_gamma(args, argv) -> int:
    out = args.out or _default_out(args)
    try:
        x, trace = interpolate_gamma(args.n, args.gamma_from, args.gamma_to,
                                     mode=args.mode, step=args.step,
                                     max_steps=args.max_steps)
    except FlowConvergenceError as err:
        _trace_path(args, out).write_text(err.trace.to_csv())
        print(f"gamma flow: {err}", file=sys.stderr)
        return STALL
    _trace_path(args, out).write_text(trace.to_csv())
    doc = chainio.document_from_gamma(
        x, _provenance(argv, args, {"structure": 1e-9}))
    chainio.write_document(doc, out)
    return 0


def _design_wstate(args, argv) -> int:
    centre = (args.n + 1) // 2
    if args.source is not None and args.source != centre:
        print(f"spinforge design wstate: error: the uniform revival is driven "
              f"from the centre site {centre}", file=sys.stderr)
        return USAGE_ERROR
    out = args.out or _default_out(args)
    try:
        design = wstate_chain(args.n, tol=args.tol, budget=args.budget)
    except FlowStallError as err:
        _trace_path(args, out).write_text(err.state.to_csv())
        print(f"wstate flow: {err}", file=sys.stderr)
        return STALL
    _trace_path(args, out).write_text(design.flow.to_csv())
    if args.t0 != "auto":
        t0 = float(args.t0)
        target = np.zeros(args.n)
        target[0::2] = 1.0 / np.sqrt((args.n + 1) // 2)
        miss = np.abs(produced_state(design.couplings, design.source, t0)
                      - target).max()
        if miss > args.tol:
            print(f"revival time check: deviation {miss:.3e} at t0={t0} "
                  f"exceeds {args.tol:.1e}", file=sys.stderr)
            return STALL
    chain = SymTridiag(np.zeros(args.n), design.couplings)
    doc = chainio.document_from_xx(
        chain, _provenance(argv, args, {"revival": args.tol}))
    chainio.write_document(doc, out)
    return 0


# ---------------------------------------------------------------------------
# simulate commands


def _simulate_ghz(args, argv) -> int:
    doc = chainio.read_document(args.chain)
    payload = {"provenance": _provenance(argv, args, {"mirror": args.tol})}
    if doc.kind in ("pst", "ising"):
        chain = (chainio.ising_chain(doc) if doc.kind == "ising"
                 else ising_from_pst(chainio.pst_chain(doc)))
        report = overlap_estimate(chain)
        payload.update({"n": chain.n, "overlap": report.overlap,
                        "method": report.method, "time": report.time})
        if args.check:
            deviation = mirror_deviation(chain)
            payload["mirror_deviation"] = deviation
            if deviation > args.tol:
                _write_json(args.out or _default_out(args), payload)
                print(f"mirror check: deviation {deviation:.3e} exceeds "
                      f"{args.tol:.1e}", file=sys.stderr)
                return BREACH
    elif doc.kind == "zy":
        if args.check:
            print("spinforge simulate ghz: error: --check applies to pst and "
                  "ising documents", file=sys.stderr)
            return USAGE_ERROR
        if doc.n > BRUTE_FORCE_MAX_QUBITS:
            print(f"spinforge simulate ghz: error: zy documents are evaluated "
                  f"densely and need n <= {BRUTE_FORCE_MAX_QUBITS}",
                  file=sys.stderr)
            return USAGE_ERROR
        overlap = zy_ghz_overlap(chainio.gamma_matrix(doc))
        payload.update({"n": doc.n, "overlap": overlap,
                        "method": "brute_force", "time": GHZ_TIME})
    else:
        print(f"spinforge simulate ghz: error: unsupported document kind "
              f"{doc.kind}", file=sys.stderr)
        return USAGE_ERROR
    _write_json(args.out or _default_out(args), payload)
    return 0


def _parse_percent_range(text: str) -> list:
    parts = text.split(":")
    if len(parts) == 1:
        return [float(parts[0])]
    if len(parts) != 3:
        raise ValueError("expected 'from:to:step' or a single value")
    lo, hi, step = (float(p) for p in parts)
    if step <= 0 or hi < lo:
        raise ValueError("need step > 0 and to >= from")
    count = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return [lo + step * i for i in range(count)]


def _simulate_sweep(args, argv) -> int:
    xs = _parse_percent_range(args.x)
    lines = ["x_percent,mean,stddev,samples"]
    for x in xs:
        point = perturb_sweep(args.n, x, args.samples, args.seed,
                              threads=args.threads)
        lines.append(f"{point.x_percent!r},{point.mean!r},"
                     f"{point.stddev!r},{args.samples}")
    out = Path(args.out or _default_out(args))
    out.write_text("\n".join(lines) + "\n")
    return 0


def _parse_profile(text: str, n_clones: int):
    if text == "symmetric":
        return symmetric_profile(n_clones)
    weights = [float(part) for part in text.split(",")]
    if len(weights) != n_clones:
        raise ValueError(f"profile lists {len(weights)} weights for "
                         f"{n_clones} clones")
    return profile_from_betas(weights)


def _simulate_clone(args, argv) -> int:
    profile = _parse_profile(args.profile, args.n_clones)
    if args.method == "brute_force" and profile.m > BRUTE_FORCE_MAX_M:
        print(f"spinforge simulate clone: error: brute_force needs a register "
              f"of at most {BRUTE_FORCE_MAX_M} qubits", file=sys.stderr)
        return USAGE_ERROR
    try:
        w, w_time = design_w_chain(profile, k=args.offset, tol=args.stage_tol)
    except RuntimeError as err:
        print(f"spread-chain design: {err}", file=sys.stderr)
        return STALL
    try:
        report = clone_report(ghz_helper_chain(profile.m), w, profile,
                              k=args.offset, w_time=w_time,
                              method=args.method, stage_tol=args.stage_tol)
    except CloningStageError as err:
        print(f"{err.stage}: {err}", file=sys.stderr)
        return BREACH
    payload = json.loads(report.to_json())
    payload["spread"] = report.spread
    payload["provenance"] = _provenance(argv, args,
                                        {"stage": args.stage_tol})
    _write_json(args.out or _default_out(args), payload)
    return 0


_HANDLERS = {
    ("design", "pst"): _design_pst,
    ("design", "gamma"): _design_gamma,
    ("design", "wstate"): _design_wstate,
    ("simulate", "ghz"): _simulate_ghz,
    ("simulate", "sweep"): _simulate_sweep,
    ("simulate", "clone"): _simulate_clone,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return int(err.code or 0)
    handler = _HANDLERS[(args.family, args.command)]
    try:
        return handler(args, argv)
    except (ValueError, OSError) as err:
        print(f"spinforge {args.family} {args.command}: error: {err}",
              file=sys.stderr)
        return USAGE_ERROR
