"""Command-line entry point: ``robustree <subcommand> ...``.

Exit status is 0 on success, 2 for usage or configuration problems and 3
when an internal consistency check fails.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import campaign as cp
from . import estimator, scaling, surfaces
from .dataset import load_dataset
from .errors import ConsistencyError, InvalidInputError
from .noise import load_noise
from .scalarize import Scalarizer
from .trees import TREE_KINDS, Forest, TreeParams, fit

EXIT_OK, EXIT_CONFIG, EXIT_CONSISTENCY = 0, 2, 3


def _json_arg(text: str | None) -> dict:
    """Inline JSON or a path to a JSON file."""
    if not text:
        return {}
    path = Path(text)
    try:
        if path.suffix == ".json" or path.exists():
            if not path.exists():
                raise InvalidInputError(f"config file not found: {path}")
            return json.loads(path.read_text())
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"cannot parse {text!r}: {exc}") from None


def _tree_params(args) -> TreeParams:
    d = {"kind": args.trees} if args.trees in TREE_KINDS else _json_arg(args.trees)
    d.setdefault("rng_seed", args.seed)
    try:
        return TreeParams.from_dict(d)
    except TypeError as exc:
        raise InvalidInputError(f"bad tree parameters: {exc}") from None


def _out_dir(args) -> Path:
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InvalidInputError(f"cannot create output directory {out}: {exc}") from None
    return out


def _write_estimates(path: Path, names, rows, est, extra_cols=(), extra=None) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(names) + list(extra_cols) + ["expectation", "output_std", "expectation_std"])
        for i, row in enumerate(rows):
            w.writerow(list(row) + (list(extra[i]) if extra is not None else [])
                       + [repr(float(est.expectation[i])), repr(float(est.output_std[i])),
                          repr(float(est.expectation_std[i]))])


# -- subcommands -----------------------------------------------------------------

def cmd_reweight(args) -> int:
    ds = load_dataset(args.dataset, args.schema)
    noise = load_noise(args.noise, ds.names)
    forest = fit(ds, _tree_params(args))
    rw = estimator.reweight(ds, forest, noise, threads=args.threads)
    out = _out_dir(args)
    best = np.zeros(len(ds), dtype=int)
    best[rw.best_index] = 1
    extra = [(repr(float(f)), b) for f, b in zip(ds.y, best)]
    _write_estimates(out / "reweighted.csv", ds.names, ds.decode(), rw.estimates,
                     (ds.target_name, "best"), extra)
    report = {"rows": len(ds), "best_row": rw.best_index, "worst_row": rw.worst_index,
              "best": dict(zip(ds.names, ds.decode()[rw.best_index])),
              "best_expectation": float(rw.estimates.expectation[rw.best_index])}
    (out / "reweight_summary.json").write_text(json.dumps(report, indent=2, default=str))
    print(json.dumps(report, default=str))
    return EXIT_OK


def cmd_surrogate(args) -> int:
    out = _out_dir(args)
    if args.forest:
        forest = Forest.load(args.forest)
    else:
        ds = load_dataset(args.dataset, args.schema)
        forest = fit(ds, _tree_params(args))
        forest.save(out / "forest.json")
    names = [c.name for c in forest.columns]
    if args.queries:
        noise = load_noise(args.noise, names)
        est = estimator.estimate_csv(forest, args.queries, noise, out / "estimates.csv",
                                     threads=args.threads)
        print(json.dumps({"queries": len(est), "out": str(out / "estimates.csv")}))
    else:
        print(json.dumps({"trees": forest.n_trees, "out": str(out / "forest.json")}))
    return EXIT_OK


def _labels(text: str) -> list[str]:
    labels = [s.strip() for s in text.split(",") if s.strip()]
    for lab in labels:
        if lab not in surfaces.LABELS:
            raise InvalidInputError(f"unknown benchmark label {lab!r}")
    return labels


def cmd_benchmark(args) -> int:
    cfg = _json_arg(args.config)
    labels = _labels(cfg.get("labels") and ",".join(cfg["labels"]) or args.labels)
    planners = cfg.get("planners") or args.planners.split(",")
    modes = cfg.get("modes") or args.modes.split(",")
    repeats = int(cfg.get("repeats", args.repeats))
    budget = cfg.get("budget", args.budget)
    for m in modes:
        if m not in cp.MODES:
            raise InvalidInputError(f"unknown mode {m!r}")
    if repeats < 1:
        raise InvalidInputError("repeats must be positive")
    params = TreeParams.from_dict(cfg["trees"]) if "trees" in cfg else _tree_params(args)
    out = _out_dir(args)
    summary = []
    with (out / "regrets.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["label", "planner", "mode", "repeat", "seed", "regret_on", "regret_off",
                    "normalized_on", "normalized_off"])
        for lab in labels:
            spec = surfaces.benchmark_spec(lab)
            truth = surfaces.ground_truth(spec, density=args.density, cache_dir=args.cache)
            for kind in planners:
                planner = cp.PlannerConfig(kind)
                for mode in modes:
                    res = cp.benchmark(spec, truth, planner, mode, repeats, params, args.seed, budget)
                    on, off = res.normalized()
                    for r in range(repeats):
                        w.writerow([lab, kind, mode, r, res.seeds[r], repr(res.regret_on[r]),
                                    repr(res.regret_off[r]), repr(float(on[r])), repr(float(off[r]))])
                    summary.append(res.summary())
    (out / "benchmark_summary.json").write_text(json.dumps(summary, indent=2))
    for s in summary:
        line = f"{s['label']} {s['planner']} {s['mode']}"
        if "improvement_probability" in s:
            line += f" p={s['improvement_probability']:.3f} significant={s['significant']}"
        else:
            line += f" regret_on={s['regret_on'][0]:.4g} regret_off={s['regret_off'][0]:.4g}"
        print(line)
    return EXIT_OK


def cmd_campaign(args) -> int:
    cfg = _json_arg(args.config)
    label = cfg.get("label", args.label)
    if label not in surfaces.LABELS:
        raise InvalidInputError(f"unknown benchmark label {label!r}")
    spec = surfaces.benchmark_spec(label, int(cfg.get("extra_dims", 0)))
    planner = cp.PlannerConfig.from_dict(cfg["planner"]) if "planner" in cfg \
        else cp.PlannerConfig(args.planner)
    params = TreeParams.from_dict(cfg["trees"]) if "trees" in cfg else _tree_params(args)
    scal = Scalarizer.from_dict(cfg["scalarizer"]) if cfg.get("scalarizer") else None
    robust = bool(cfg.get("robust", not args.raw_merits))
    mode = cfg.get("mode", args.mode)
    seed = int(cfg.get("seed", args.seed))
    rec = cp.run(spec, planner, mode, robust, params, seed, cfg.get("budget", args.budget), scal)
    truth = surfaces.ground_truth(spec, density=args.density, cache_dir=args.cache)
    regret = cp.cumulative_regret(rec, truth, robust, spec, params)
    out = _out_dir(args)
    rec.save(out / "campaign.csv", {"regret": regret})
    print(json.dumps({"regret": regret, "final_incumbent": rec.requested[rec.incumbents[-1]].tolist()}))
    return EXIT_OK


def cmd_scaling(args) -> int:
    out = _out_dir(args)
    variables = args.variables.split(",")
    for v in variables:
        if v not in scaling.SWEEP:
            raise InvalidInputError(f"unknown sweep variable {v!r}")
    rows = scaling.sweep(variables, repeats=args.repeats, seed=args.seed, threads=args.threads)
    if not args.skip_reference:
        rows.append(scaling.reference(seed=args.seed, threads=args.threads))
    scaling.write_csv(rows, out / "scaling.csv")
    print(json.dumps({"slopes": scaling.slopes(rows), "out": str(out / "scaling.csv")}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="robustree", description="Robust merits from tree surrogates.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, repeats_default=1):
        sp.add_argument("--trees", help="tree parameters: inline JSON, JSON file, or a kind name")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--repeats", type=int, default=repeats_default)
        sp.add_argument("--out", default="out")
        sp.add_argument("--threads", type=int, default=1)

    r = sub.add_parser("reweight", help="robust merits of every dataset row")
    r.add_argument("--dataset", required=True)
    r.add_argument("--schema", required=True)
    r.add_argument("--noise", required=True)
    common(r)
    r.set_defaults(func=cmd_reweight)

    s = sub.add_parser("surrogate", help="fit and save a forest; optionally score query points")
    s.add_argument("--dataset")
    s.add_argument("--schema")
    s.add_argument("--forest", help="load a saved forest instead of fitting")
    s.add_argument("--queries", help="CSV of query points")
    s.add_argument("--noise")
    common(s)
    s.set_defaults(func=cmd_surrogate)

    b = sub.add_parser("benchmark", help="regret with and without robust merits")
    b.add_argument("--config", help="benchmark config JSON")
    b.add_argument("--labels", default=",".join(surfaces.LABELS))
    b.add_argument("--planners", default="grid,random")
    b.add_argument("--modes", default="noiseless")
    b.add_argument("--budget", type=int)
    b.add_argument("--density", type=int, default=200)
    b.add_argument("--cache", help="ground-truth cache directory")
    common(b, repeats_default=50)
    b.set_defaults(func=cmd_benchmark)

    c = sub.add_parser("campaign", help="run one optimization campaign")
    c.add_argument("--config", help="campaign config JSON")
    c.add_argument("--label", default="S1")
    c.add_argument("--planner", default="grid", choices=cp.PLANNER_KINDS)
    c.add_argument("--mode", default="noiseless", choices=cp.MODES)
    c.add_argument("--raw-merits", action="store_true", help="steer by raw observations")
    c.add_argument("--budget", type=int)
    c.add_argument("--density", type=int, default=200)
    c.add_argument("--cache")
    common(c)
    c.set_defaults(func=cmd_campaign)

    sc = sub.add_parser("scaling", help="estimator wall time over S, T, M, D")
    sc.add_argument("--variables", default="S,T,M,D")
    sc.add_argument("--skip-reference", action="store_true")
    common(sc, repeats_default=3)
    sc.set_defaults(func=cmd_scaling)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "surrogate":
        if not args.forest and not (args.dataset and args.schema):
            parser.error("surrogate needs --dataset and --schema, or --forest")
        if args.queries and not args.noise:
            parser.error("--queries needs --noise")
    try:
        return args.func(args)
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConsistencyError as exc:
        print(f"internal consistency failure: {exc}", file=sys.stderr)
        return EXIT_CONSISTENCY


if __name__ == "__main__":
    sys.exit(main())
