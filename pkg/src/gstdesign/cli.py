"""Command-line front end: design, certify, simulate, wallclock, fiducials, germs, fpr.

Every randomized subcommand requires an explicit ``--seed`` and is
deterministic end to end (rerunning writes byte-identical files).  Exit
codes: 0 on success, 2 for usage errors (argparse), 3 for unreadable or
invalid input files, 4 when a fiducial pool is not informationally
complete, 5 when a germ candidate pool is not amplificationally complete.
``--threads`` (default from ``GSTDESIGN_THREADS``) is forwarded to the
Fisher-information reductions.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import builtins as bi
from . import design as dz
from . import fisher as fz
from . import fpr as fprz
from . import germs as gz
from . import noise as nz
from . import wallclock as wz
from .fiducials import (
    PoolNotInformationallyComplete,
    fiducial_candidate_pool,
    fiducial_score,
    per_qubit_pattern_pool,
    select_fiducials,
)
from .model import Circuit, GateSet, GateSetError

EXIT_OK = 0
EXIT_BAD_INPUT = 3
EXIT_POOL_NOT_IC = 4
EXIT_POOL_NOT_AC = 5


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_BAD_INPUT):
        super().__init__(message)
        self.code = code


def _load_gateset(spec: str) -> GateSet:
    if spec in bi.BUILTIN_GATESETS:
        return bi.builtin_gateset(spec)
    try:
        gs = GateSet.load(spec)
        gs.validate()
        return gs
    except FileNotFoundError:
        raise CliError(f"gate set file not found: {spec}") from None
    except (GateSetError, KeyError, ValueError, json.JSONDecodeError) as exc:
        raise CliError(f"invalid gate set file {spec}: {exc}") from None


def _load_device(spec: str) -> wz.DeviceParams:
    if spec in bi.BUILTIN_DEVICES:
        return wz.DeviceParams.from_json_dict(bi.builtin_device_doc(spec))
    try:
        return wz.DeviceParams.load(spec)
    except FileNotFoundError:
        raise CliError(f"device file not found: {spec}") from None
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise CliError(f"invalid device file {spec}: {exc}") from None


def _load_circuit_list(path: str, what: str) -> list[Circuit]:
    try:
        with open(path) as f:
            doc = json.load(f)
    except FileNotFoundError:
        raise CliError(f"{what} file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise CliError(f"invalid {what} file {path}: {exc}") from None
    if isinstance(doc, dict):
        doc = doc.get("circuits", doc.get("germs", doc.get("fiducials")))
    if not isinstance(doc, list):
        raise CliError(f"invalid {what} file {path}: expected a list of label arrays")
    return [Circuit(tuple(labels)) for labels in doc]


def _default_fiducials(args, gs: GateSet, kind: str) -> list[Circuit]:
    attr = "prep_fiducials" if kind == "prep" else "meas_fiducials"
    path = getattr(args, attr, None)
    if path:
        return _load_circuit_list(path, f"{kind} fiducials")
    if args.gateset in bi.BUILTIN_GATESETS:
        return bi.builtin_fiducials(args.gateset, kind)
    # no list given: run greedy selection over the default candidate pool
    try:
        return select_fiducials(gs, fiducial_candidate_pool(gs.labels, 3), kind)
    except PoolNotInformationallyComplete as exc:
        raise CliError(str(exc), EXIT_POOL_NOT_IC) from None


def _germ_set(args, gs: GateSet) -> list[Circuit]:
    if getattr(args, "germ_file", None):
        return _load_circuit_list(args.germ_file, "germ")
    mode = args.germs
    if mode == "bare":
        return gz.bare_germs(gs)
    models = [gs]
    if mode == "robust":
        models += nz.perturbed_models(gs, args.robust_models, args.perturb_sigma, args.seed + 7919)
    pool = gz.germ_candidate_pool(gs.labels, args.germ_depth)
    try:
        result = gz.select_germs(models, pool, score_fn=args.germ_score)
    except gz.GermSelectionError as exc:
        raise CliError(str(exc), EXIT_POOL_NOT_AC) from None
    return result.germs


def _write_json(path: str, doc) -> None:
    with open(path, "w") as f:
        json.dump(doc, f, indent=1, sort_keys=True)
        f.write("\n")


def cmd_design(args) -> int:
    gs = _load_gateset(args.gateset)
    preps = _default_fiducials(args, gs, "prep")
    meass = _default_fiducials(args, gs, "meas")
    germs = _germ_set(args, gs)
    schedule = dz.default_schedule(args.lmax)

    if args.fpr == "full":
        policy = dz.FprPolicy(mode="full")
    elif args.fpr == "random":
        policy = dz.FprPolicy(mode="random", gamma=args.gamma, seed=args.seed, rounding=args.rounding)
    else:
        result = fprz.per_germ_fpr(
            gs, preps, meass, germs, eps_lambda=args.eps, search_seed=args.seed
        )
        policy = result.to_policy()

    design = dz.build_design(
        preps, meass, germs, schedule, policy, gateset_labels=gs.labels, gateset_ref=args.gateset
    )
    design.save(args.out)
    if args.circuit_text:
        with open(args.circuit_text, "w") as f:
            f.write(design.circuit_text())
    print(f"design written to {args.out}")
    print(f"germs ({len(germs)}): {[str(g) for g in germs]}")
    print("cumulative circuit counts:")
    for depth, count in dz.count_by_depth(design).items():
        print(f"  L={depth:6d}  {count}")
    return EXIT_OK


def cmd_certify(args) -> int:
    gs = _load_gateset(args.gateset)
    try:
        design = dz.ExperimentDesign.load(args.design)
    except FileNotFoundError:
        raise CliError(f"design file not found: {args.design}") from None
    gs_eval = fz.default_eval_model(gs, seed=args.perturb_seed, sigma=args.perturb_sigma)

    report = fz.certify_design(
        gs_eval, design, target=gs, shots=args.shots, threads=args.threads
    )
    if args.kind == "cumulative":
        series = fz.cumulative_series(
            gs_eval, design, args.shots, args.threads, fz.certification_clip_floor(args.shots)
        )
        classes = ["growing" if s >= 0.8 else "plateaued" for s in report.slopes]
    elif args.kind == "incremental":
        series = fz.incremental_series(
            gs_eval, design, args.shots, args.threads, fz.certification_clip_floor(args.shots)
        )
        classes = None
    else:
        base = fz.incremental_series(
            gs_eval, design, args.shots, args.threads, fz.certification_clip_floor(args.shots)
        )
        series = fz.projected_series(base, gs_eval, args.op)
        classes = None
    if args.csv:
        fz.series_to_csv(series, args.csv, classes)
    if args.report:
        fz.report_to_json(report, args.report)
    verdict = "well-constructed" if report.well_constructed else "not-amplificationally-complete"
    print(f"growing: {report.growing}  plateaued: {report.plateaued} (SPAM budget {report.spam_budget})")
    print(f"insensitive directions at deepest layer: {len(report.insensitive)}")
    print(f"verdict: {verdict}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    gs = _load_gateset(args.gateset)
    try:
        design = dz.ExperimentDesign.load(args.design)
    except FileNotFoundError:
        raise CliError(f"design file not found: {args.design}") from None
    spec = nz.NoiseSpec(
        kind=args.noise, sigma=args.sigma, eta=args.eta, seed=args.seed
    )
    noisy = nz.sample_noisy_gateset(gs, spec)
    dataset = nz.simulate_dataset(noisy, design.circuits, args.shots, args.seed)
    dataset.save(args.out)
    print(f"dataset with {len(dataset.circuits)} circuits x {args.shots} shots written to {args.out}")
    return EXIT_OK


def cmd_wallclock(args) -> int:
    devices = list(bi.BUILTIN_DEVICES) if args.device == "all" else [args.device]
    columns = []
    if args.design:
        for path in args.design:
            try:
                design = dz.ExperimentDesign.load(path)
            except FileNotFoundError:
                raise CliError(f"design file not found: {path}") from None
            gs = _load_gateset(args.gateset) if args.gateset else None
            two_q = gs.two_qubit_labels if gs else frozenset()
            columns.append((path, design, two_q))
    for count in args.circuits or []:
        columns.append((f"{count} circuits", int(count), None))
    if not columns:
        raise CliError("need at least one --design or --circuits")

    reports = {}
    for dev_name in devices:
        dev = _load_device(dev_name)
        row = []
        for label, payload, two_q in columns:
            if isinstance(payload, dz.ExperimentDesign):
                rep = wz.estimate(payload, args.shots, dev, two_qubit_labels=two_q)
            else:
                rep = wz.estimate(
                    payload, args.shots, dev,
                    mean_depth=args.mean_depth, two_qubit_fraction=args.two_qubit_fraction,
                )
            row.append(rep)
        reports[dev_name] = row

    def fmt(seconds: float) -> str:
        if seconds < 120:
            return f"{seconds:.3g} s"
        if seconds < 7200:
            return f"{seconds / 60:.2g} min"
        return f"{seconds / 3600:.2g} hr"

    header = ["device"]
    for label, *_ in columns:
        header += [f"{label} time", "speedup"]
    print("  ".join(header))
    for dev_name, row in reports.items():
        cells = [dev_name]
        base = row[0]["total"]
        for rep in row:
            speed = base / rep["total"] if rep["total"] > 0 else float("inf")
            cells += [fmt(rep["total"]), f"{speed:.1f}x"]
        print("  ".join(cells))
    if args.report:
        _write_json(args.report, {d: rows for d, rows in reports.items()})
    return EXIT_OK


def cmd_fiducials(args) -> int:
    gs = _load_gateset(args.gateset)
    if gs.num_qubits == 2 and args.pool == "per-qubit":
        labels = list(gs.gates)
        pool = per_qubit_pattern_pool(tuple(labels[0:2]), tuple(labels[2:4]))
    else:
        pool = fiducial_candidate_pool(gs.labels, args.max_depth)
    try:
        chosen = select_fiducials(gs, pool, args.kind, rel_improvement=args.rel_improvement)
    except PoolNotInformationallyComplete as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_POOL_NOT_IC
    score = fiducial_score(gs, chosen, args.kind)
    _write_json(args.out, [list(c.labels) for c in chosen])
    print(f"{len(chosen)} {args.kind} fiducials written to {args.out}")
    print(f"rank {score.rank} (required {score.required_rank}); smallest kept eigenvalue {score.score:.6g}")
    print("spectrum:", [round(float(x), 6) for x in sorted(score.spectrum, reverse=True)])
    return EXIT_OK


def cmd_germs(args) -> int:
    gs = _load_gateset(args.gateset)
    if args.germs == "bare":
        germs = gz.bare_germs(gs)
        _write_json(args.out, [list(g.labels) for g in germs])
        print(f"{len(germs)} bare germs written to {args.out}")
        return EXIT_OK
    models = [gs]
    if args.germs == "robust":
        models += nz.perturbed_models(gs, args.robust_models, args.perturb_sigma, args.seed + 7919)
    pool = gz.germ_candidate_pool(gs.labels, args.germ_depth)
    try:
        result = gz.select_germs(models, pool, score_fn=args.germ_score)
    except gz.GermSelectionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_POOL_NOT_AC
    _write_json(args.out, [list(g.labels) for g in result.germs])
    print(f"{len(result.germs)} germs written to {args.out}")
    print(f"per-model ranks: {result.ranks} (targets {result.targets})")
    for step in result.trajectory:
        print(f"  + {step['added']:<24} ranks {step['ranks']} worst score {step['worst_score']:.4g}")
    return EXIT_OK


def cmd_fpr(args) -> int:
    gs = _load_gateset(args.gateset)
    preps = _default_fiducials(args, gs, "prep")
    meass = _default_fiducials(args, gs, "meas")
    germs = _load_circuit_list(args.germ_file, "germ")
    if args.mode == "per-germ":
        result = fprz.per_germ_fpr(gs, preps, meass, germs, eps_lambda=args.eps, search_seed=args.seed)
        doc = {
            "mode": "per-germ",
            "eps_lambda": args.eps,
            "pairs_by_germ": {str(k): [list(p) for p in v] for k, v in result.pairs_by_germ.items()},
            "achieved_ratio": {str(k): v for k, v in result.achieved_ratio.items()},
            "baseline_rank": {str(k): v for k, v in result.baseline_rank.items()},
            "fallback_germs": sorted(result.fell_back_to_full),
        }
        _write_json(args.out, doc)
        print(f"per-germ FPR for {len(germs)} germs written to {args.out}")
        for k in sorted(result.pairs_by_germ):
            print(
                f"  germ {k}: kept {len(result.pairs_by_germ[k])} pairs,"
                f" ratio {result.achieved_ratio[k]:.4f}"
            )
    else:
        sched = dz.default_schedule(args.lmax)
        pairs = fprz.random_fpr(preps, meass, germs, sched, args.gamma, args.seed, args.rounding)
        doc = {
            "mode": "random",
            "gamma": args.gamma,
            "seed": args.seed,
            "pairs": {f"{k}@{depth}": [list(p) for p in v] for (k, depth), v in sorted(pairs.items())},
        }
        _write_json(args.out, doc)
        print(f"random FPR pair sets for {len(pairs)} plaquettes written to {args.out}")
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser, seed_required: bool = True) -> None:
    p.add_argument("--gateset", required=True, help="builtin name (xyi, xycphase) or JSON path")
    p.add_argument("--threads", type=int, default=fz.default_threads(), help="worker threads")
    p.add_argument("--seed", type=int, required=seed_required, help="master RNG seed")


def _add_germ_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--germs", choices=["robust", "standard", "bare"], default="standard")
    p.add_argument("--germ-file", help="JSON list of germ label arrays (skips selection)")
    p.add_argument("--germ-depth", type=int, default=6, help="candidate germ pool depth bound")
    p.add_argument("--germ-score", choices=["sum", "min"], default="sum")
    p.add_argument("--robust-models", type=int, default=5, help="perturbed models for robust mode")
    p.add_argument("--perturb-sigma", type=float, default=1e-3)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gstdesign", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", help="select circuits and write a design file")
    _add_common(p)
    _add_germ_options(p)
    p.add_argument("--prep-fiducials", help="JSON list of label arrays")
    p.add_argument("--meas-fiducials", help="JSON list of label arrays")
    p.add_argument("--fpr", choices=["full", "per-germ", "random"], default="full")
    p.add_argument("--eps", type=float, default=1.0 / 30.0, help="per-germ FPR eigenvalue ratio")
    p.add_argument("--gamma", type=float, default=0.125, help="random FPR keep fraction")
    p.add_argument("--rounding", choices=["floor", "ceil"], default="floor")
    p.add_argument("--Lmax", dest="lmax", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--circuit-text", help="also write newline-delimited circuit list")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("certify", help="Fisher-information certification of a design")
    _add_common(p, seed_required=False)
    p.add_argument("--design", required=True)
    p.add_argument("--shots", type=int, default=fz.DEFAULT_SHOTS)
    p.add_argument("--perturb-seed", type=int, default=97)
    p.add_argument("--perturb-sigma", type=float, default=1e-3)
    p.add_argument("--kind", choices=["cumulative", "incremental", "projected"], default="cumulative")
    p.add_argument("--op", help="operation label for --kind projected")
    p.add_argument("--csv", help="write spectra CSV here")
    p.add_argument("--report", help="write JSON report here")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("simulate", help="sample a noisy model and a multinomial dataset")
    _add_common(p)
    p.add_argument("--design", required=True)
    p.add_argument("--noise", choices=["coherent-only", "coherent-depol"], default="coherent-depol")
    p.add_argument("--sigma", type=float, default=0.01)
    p.add_argument("--eta", type=float, default=0.001)
    p.add_argument("--shots", type=int, default=fz.DEFAULT_SHOTS)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("wallclock", help="estimate run time on a device")
    p.add_argument("--gateset", help="used to mark two-qubit labels of designs")
    p.add_argument("--device", required=True, help="builtin name, JSON path, or 'all'")
    p.add_argument("--design", action="append", help="design file (repeatable)")
    p.add_argument("--circuits", action="append", type=int, help="bare circuit count (repeatable)")
    p.add_argument("--shots", type=int, default=100)
    p.add_argument("--mean-depth", type=float, default=0.0, help="approximate-mode depth assumption")
    p.add_argument("--two-qubit-fraction", type=float, default=0.0)
    p.add_argument("--report", help="write JSON report here")
    p.set_defaults(func=cmd_wallclock)

    p = sub.add_parser("fiducials", help="greedy informationally-complete fiducial selection")
    _add_common(p, seed_required=False)
    p.add_argument("--kind", choices=["prep", "meas"], required=True)
    p.add_argument("--max-depth", type=int, default=3)
    p.add_argument("--pool", choices=["sequences", "per-qubit"], default="sequences")
    p.add_argument("--rel-improvement", type=float, default=1e-9)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fiducials)

    p = sub.add_parser("germs", help="greedy amplificationally-complete germ selection")
    _add_common(p)
    _add_germ_options(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_germs)

    p = sub.add_parser("fpr", help="fiducial pair reduction for an existing germ list")
    _add_common(p)
    p.add_argument("--germ-file", dest="germ_file", required=True)
    p.add_argument("--prep-fiducials")
    p.add_argument("--meas-fiducials")
    p.add_argument("--mode", choices=["per-germ", "random"], default="per-germ")
    p.add_argument("--eps", type=float, default=1.0 / 30.0)
    p.add_argument("--gamma", type=float, default=0.125)
    p.add_argument("--rounding", choices=["floor", "ceil"], default="floor")
    p.add_argument("--Lmax", dest="lmax", type=int, default=1024)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fpr)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "certify" and args.kind == "projected" and not args.op:
        print("error: --kind projected requires --op", file=sys.stderr)
        return 2
    np.seterr(over="raise")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
