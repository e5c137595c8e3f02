"""Command-line front end: validate, simulate, classify, estimate, scenario.

Exit codes: 0 success, 1 domain failure (invalid model, failed scenario),
2 usage or parse failure.  All artifacts embed a run manifest and are
byte-identical across reruns with the same manifest, for any --threads.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from ._version import __version__
from .classify import CriterionConfig, classify
from .engine import (
    NoCompleteCycle,
    RngPolicy,
    exp_integral,
    simulate_additive,
    simulate_chain,
)
from .levy import PreconditionFailed
from .model import HUB, NonErgodicError, long_term_mean, validate
from .modelio import ModelFileError, load_model
from .reports import (
    RunManifest,
    render_histogram,
    render_ladder_traces,
    render_trajectories,
    write_json_report,
    write_path_csv,
    write_values_csv,
)
from .scenarios import SCENARIO_IDS, UnknownScenario, build_scenario, run_scenario

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2

# horizon heuristic: exp(-kappa T / 2) < 1e-6
_DAMPING_FACTOR = 2.0 * math.log(1e6)


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get("MAPEXP_OUT", "mapexp_out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _resolve_threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    return os.cpu_count() or 1


def _load_config(args, default: CriterionConfig | None = None) -> CriterionConfig:
    cfg = default or CriterionConfig()
    overrides: dict = {}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            doc = json.load(fh)
        for key in ("n_paths", "horizon", "mesh", "anchors", "n_anchor_petals",
                    "min_cycles", "min_exceed", "deg_tol", "seed", "threads",
                    "ladder", "start"):
            if key in doc and doc[key] is not None:
                overrides[key] = (tuple(doc[key]) if key in ("anchors", "ladder")
                                  else doc[key])
    if getattr(args, "paths", None) is not None:
        overrides["n_paths"] = args.paths
    if getattr(args, "horizon", None) is not None:
        overrides["horizon"] = args.horizon
    if getattr(args, "mesh", None) is not None:
        overrides["mesh"] = args.mesh
    if args.seed is not None:
        overrides["seed"] = args.seed
    overrides["threads"] = _resolve_threads(args)
    return replace(cfg, **overrides)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_validate(args) -> int:
    spec = load_model(args.spec)
    rep = validate(spec)
    doc = {"ok": rep.ok, "errors": rep.errors, "warnings": rep.warnings}
    print(json.dumps(doc, indent=2, sort_keys=True))
    return EXIT_OK if rep.ok else EXIT_DOMAIN


def _classify_figures(spec, cfg: CriterionConfig, report, manifest,
                      out: Path, stem: str = "") -> None:
    """Trajectory fan and cutoff traces next to the delimited evidence."""
    base = (cfg.start_state(spec) + 8) * 1_000_003  # same streams as classify
    bundle = []
    for k in range(min(8, cfg.n_paths)):
        rng = RngPolicy(cfg.seed).rng_for(base + k)
        chain = simulate_chain(spec, cfg.horizon, rng, start=cfg.start_state(spec))
        path = simulate_additive(spec, chain, cfg.mesh, rng)
        bundle.append((path, exp_integral(path)))
    render_trajectories(bundle, manifest, out / f"{stem}trajectories.svg",
                        title=f"verdict: {report.verdict}")
    render_ladder_traces(report.as_json(), manifest, out / f"{stem}ladders.svg",
                         title=f"verdict: {report.verdict}")


def _write_evidence_csv(report, manifest, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# manifest: {manifest.compact()}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["criterion", "state", "verdict", "value"])
        for rec in report.evidence:
            res = rec.get("result")
            if isinstance(res, dict):
                verdict = res.get("verdict", "")
                value = res.get("value", "")
            else:
                verdict, value = res, ""
            w.writerow([rec.get("criterion", ""), rec.get("state", ""),
                        verdict, value])


def cmd_classify(args) -> int:
    spec = load_model(args.spec)
    validate(spec).raise_if_failed()
    cfg = _load_config(args)
    report = classify(spec, cfg)
    out = _out_dir(args)
    manifest = RunManifest.for_run("classify", spec=spec, config=cfg.as_json(),
                                   seed=cfg.seed)
    write_json_report(report.as_json(), manifest, out / "classify.json")
    _write_evidence_csv(report, manifest, out / "evidence.csv")
    _classify_figures(spec, cfg, report, manifest, out)
    print(f"verdict: {report.verdict}")
    print(f"report: {out / 'classify.json'}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec = load_model(args.spec)
    validate(spec).raise_if_failed()
    seed = args.seed if args.seed is not None else 20260814
    n = args.paths
    keep = n if args.keep_paths is None else min(args.keep_paths, n)
    start = args.start
    if start is None:
        start = 0 if spec.finite_state else HUB
    out = _out_dir(args)
    manifest = RunManifest.for_run(
        "simulate", spec=spec, seed=seed,
        config={"horizon": args.horizon, "paths": n, "mesh": args.mesh,
                "keep_paths": keep, "start": start})
    base = (start + 8) * 1_000_003
    terminals, xi_ends, n_sat, kept_files, bundle = [], [], 0, [], []
    for k in range(n):
        rng = RngPolicy(seed).rng_for(base + k)
        chain = simulate_chain(spec, args.horizon, rng, start=start)
        path = simulate_additive(spec, chain, args.mesh, rng, mesh_everywhere=True)
        trace = exp_integral(path)
        terminals.append(float(trace.values[-1]))
        xi_ends.append(float(path.xi[-1]))
        n_sat += int(path.saturated)
        if k < keep:
            name = f"path_{k:04d}.csv"
            write_path_csv(path, trace, manifest, out / name)
            kept_files.append(name)
            if len(bundle) < 12:
                bundle.append((path, trace))
    terminals = np.array(terminals)
    xi_ends = np.array(xi_ends)
    finite = terminals[np.isfinite(terminals)]
    summary = {
        "n_paths": n, "horizon": args.horizon, "mesh": args.mesh,
        "start": start, "kept": kept_files, "saturated_paths": n_sat,
        "terminal": {
            "median": float(np.median(finite)) if finite.size else None,
            "mean": float(np.mean(finite)) if finite.size else None,
            "min": float(np.min(finite)) if finite.size else None,
            "max": float(np.max(finite)) if finite.size else None,
            "n_nonfinite": int(terminals.size - finite.size),
        },
        "xi_end_over_t": {
            "median": float(np.median(xi_ends)) / args.horizon,
            "min": float(np.min(xi_ends)) / args.horizon,
            "max": float(np.max(xi_ends)) / args.horizon,
        },
    }
    write_json_report(summary, manifest, out / "summary.json")
    if bundle:
        render_trajectories(bundle, manifest, out / "trajectories.svg")
    print(f"summary: {out / 'summary.json'}")
    return EXIT_OK


def cmd_estimate(args) -> int:
    spec = load_model(args.spec)
    validate(spec).raise_if_failed()
    seed = args.seed if args.seed is not None else 20260814
    threads = _resolve_threads(args)
    out = _out_dir(args)

    # horizon: user-supplied, or damped-tail heuristic when kappa allows it
    ltm = long_term_mean(spec, "xi")
    kappa = ltm.value
    warnings: list[str] = []
    heuristic = None
    if kappa.is_finite and kappa.value > 0:
        heuristic = max(_DAMPING_FACTOR / kappa.value, 50.0)
    if args.horizon is not None:
        horizon = args.horizon
        if heuristic is not None and horizon < heuristic:
            warnings.append(
                f"horizon {horizon:g} is below the damping heuristic {heuristic:g}")
    elif heuristic is not None:
        horizon = heuristic
    else:
        horizon = 2000.0
        warnings.append(
            "long-term xi mean is not finite-positive; using default horizon 2000")

    # gate on a reduced classification: the refusal decision rests on the
    # analytic criteria plus pooled excursion evidence, not probe precision
    cls_cfg = CriterionConfig(n_paths=100, horizon=500.0,
                              mesh=max(args.mesh, 0.02), ladder=(62.5, 125.0, 250.0),
                              seed=seed, threads=threads)
    report = classify(spec, cls_cfg)
    manifest = RunManifest.for_run(
        "estimate", spec=spec, seed=seed,
        config={"horizon": horizon, "paths": args.paths, "mesh": args.mesh,
                "bins": args.bins, "classify": cls_cfg.as_json()})

    doc: dict = {"verdict": report.verdict, "kappa": kappa.as_json(),
                 "horizon": horizon, "heuristic_horizon": heuristic,
                 "warnings": warnings, "classify_report": report.as_json()}
    if report.verdict == "DivergesInProbability":
        doc["refused"] = True
        warnings.append("the functional diverges in probability; "
                        "no estimate table was produced")
        write_json_report(doc, manifest, out / "estimate.json")
        _write_evidence_csv(report, manifest, out / "evidence.csv")
        render_ladder_traces(report.as_json(), manifest, out / "ladders.svg",
                             title=f"verdict: {report.verdict}")
        print("refused: verdict DivergesInProbability (diagnostics written)")
        print(f"report: {out / 'estimate.json'}")
        return EXIT_OK
    doc["refused"] = False

    start = cls_cfg.start_state(spec)
    base = (start + 8) * 1_000_003
    vals = np.empty(args.paths)
    n_sat = 0
    for k in range(args.paths):
        rng = RngPolicy(seed).rng_for(base + k)
        chain = simulate_chain(spec, horizon, rng, start=start)
        path = simulate_additive(spec, chain, args.mesh, rng)
        vals[k] = float(exp_integral(path).values[-1])
        n_sat += int(path.saturated)
    finite = vals[np.isfinite(vals)]
    qs = (0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99)
    quants = {f"q{int(q * 100):02d}": float(np.quantile(finite, q))
              for q in qs} if finite.size else {}
    counts, edges = (np.histogram(finite, bins=args.bins)
                     if finite.size else (np.array([]), np.array([])))
    doc.update({
        "n_paths": args.paths, "n_nonfinite": int(vals.size - finite.size),
        "saturated_paths": n_sat,
        "mean": float(np.mean(finite)) if finite.size else None,
        "se_mean": (float(np.std(finite, ddof=1) / math.sqrt(finite.size))
                    if finite.size > 1 else None),
        "variance": float(np.var(finite, ddof=1)) if finite.size > 1 else None,
        "quantiles": quants,
        "histogram": {"edges": edges.tolist(), "counts": counts.tolist()},
    })
    write_json_report(doc, manifest, out / "estimate.json")
    if args.format == "csv":
        write_values_csv({"bin_lo": edges[:-1], "bin_hi": edges[1:],
                          "count": counts.astype(float)},
                         manifest, out / "histogram.csv")
        write_values_csv({"e_terminal": np.sort(vals)}, manifest,
                         out / "terminals.csv")

    render_histogram(counts, edges, manifest, out / "estimate_hist.svg",
                     title=f"terminal distribution, horizon {horizon:g}")
    print(f"estimate: {out / 'estimate.json'}")
    return EXIT_OK


def cmd_scenario(args) -> int:
    if args.action == "list":
        rows = []
        for sid in SCENARIO_IDS:
            scn = build_scenario(sid)
            rows.append({"id": sid, "expected_verdict": scn.expected_verdict,
                         "notes": scn.notes})
        if args.format == "json":
            print(json.dumps(rows, indent=2))
        else:
            for r in rows:
                print(f"{r['id']:18s} {r['expected_verdict']:28s} {r['notes']}")
        return EXIT_OK

    sid = args.id
    if sid not in SCENARIO_IDS:
        raise UnknownScenario(sid)
    scn = build_scenario(sid)
    cfg = _load_config(args, default=scn.config)
    result = run_scenario(sid, cfg)
    out = _out_dir(args)
    manifest = RunManifest.for_run(f"scenario run {sid}", spec=scn.spec,
                                   config=cfg.as_json(), seed=cfg.seed)
    write_json_report(result.as_json(), manifest, out / f"scenario_{sid}.json")
    _write_evidence_csv(result.report, manifest, out / f"scenario_{sid}_evidence.csv")
    _classify_figures(scn.spec, cfg, result.report, manifest, out,
                      stem=f"scenario_{sid}_")
    status = "pass" if result.passed else "FAIL"
    print(f"{sid}: {status} (verdict {result.verdict}, "
          f"expected {result.expected_verdict})")
    for c in result.checks:
        print(f"  [{'ok' if c.passed else 'FAIL'}] {c.name}")
    print(f"result: {out / f'scenario_{sid}.json'}")
    return EXIT_OK if result.passed else EXIT_DOMAIN


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed")
    common.add_argument("--threads", type=int, default=None,
                        help="worker pool size (default: machine parallelism)")
    common.add_argument("--out", default=None,
                        help="output directory (default: $MAPEXP_OUT or ./mapexp_out)")
    common.add_argument("--format", choices=("json", "csv"), default="json",
                        help="tabular artifact format")

    ap = argparse.ArgumentParser(prog="mapexp",
                                 description="exponential functionals of "
                                             "Markov-modulated additive pairs")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common],
                       help="check a model file and print the report")
    p.add_argument("spec")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("simulate", parents=[common],
                       help="simulate paths and write CSVs plus a summary")
    p.add_argument("spec")
    p.add_argument("--horizon", type=float, default=100.0)
    p.add_argument("--paths", type=int, default=1)
    p.add_argument("--mesh", type=float, default=0.01)
    p.add_argument("--keep-paths", type=int, default=None,
                   help="write only the first N path CSVs")
    p.add_argument("--start", type=int, default=None)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("classify", parents=[common],
                       help="run the convergence cascade and write the report")
    p.add_argument("spec")
    p.add_argument("--config", default=None, help="criterion config JSON file")
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--paths", type=int, default=None)
    p.add_argument("--mesh", type=float, default=None)
    p.set_defaults(fn=cmd_classify)

    p = sub.add_parser("estimate", parents=[common],
                       help="estimate the terminal distribution")
    p.add_argument("spec")
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--paths", type=int, default=2000)
    p.add_argument("--mesh", type=float, default=0.01)
    p.add_argument("--bins", type=int, default=64)
    p.set_defaults(fn=cmd_estimate)

    p = sub.add_parser("scenario", parents=[common],
                       help="list or run the built-in scenarios")
    p.add_argument("action", choices=("list", "run"))
    p.add_argument("id", nargs="?", default=None)
    p.add_argument("--config", default=None, help="criterion config JSON file")
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--paths", type=int, default=None)
    p.add_argument("--mesh", type=float, default=None)
    p.set_defaults(fn=cmd_scenario)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.command == "scenario" and args.action == "run" and not args.id:
        ap.error("scenario run needs an id")
    try:
        return args.fn(args)
    except (ModelFileError, UnknownScenario, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, NonErgodicError, NoCompleteCycle, PreconditionFailed,
            OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
