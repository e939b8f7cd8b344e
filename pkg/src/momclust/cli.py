"""Command-line interface: simulate, fit, select-k, eval, compare.

Exit codes: 0 success, 1 numerical/degeneracy failure, 2 usage or validation
error.  Every randomized command logs its effective seed; with a fixed seed
all written files are byte-deterministic regardless of --threads.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time

import numpy as np

from . import baselines, dataio, evalmetrics, matvar, mom, ordinal, simulate, trunc


def _add_fit_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--init", choices=["kmeanspp", "random"], default="kmeanspp")
    p.add_argument("--restarts", type=int, default=5,
                   help="restarts for random init (default 5)")
    p.add_argument("--seed", type=int, default=None,
                   help="master seed; a random one is drawn and logged if omitted")
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--gibbs-burn-in", type=int, default=100)
    p.add_argument("--gibbs-thinning", type=int, default=2)
    p.add_argument("--gibbs-samples", type=int, default=100,
                   help="retained post-thinning Gibbs draws")
    p.add_argument("--prob-points", type=int, default=4096)
    p.add_argument("--threads", type=int, default=1)


def _fit_config(args, k: int) -> mom.FitConfig:
    seed = args.seed
    if seed is None:
        seed = int(np.random.SeedSequence().entropy % (2**63))
        print(f"note: no --seed given, using {seed}", file=sys.stderr)
    return mom.FitConfig(
        k=k, tol=args.tol, max_iter=args.max_iter, init=args.init,
        n_restarts=args.restarts,
        gibbs=trunc.GibbsConfig(burn_in=args.gibbs_burn_in,
                                thinning=args.gibbs_thinning,
                                n_samples=args.gibbs_samples),
        prob_points=args.prob_points, seed=seed, threads=args.threads,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="momclust",
        description="Model-based clustering of longitudinal ordinal data.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a synthetic dataset")
    p.add_argument("--scenario", type=int, choices=[1, 2, 3],
                   help="preset: noise fraction 0 / 0.1 / 0.2")
    p.add_argument("--noise-fraction", type=float, default=None)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit the mixture to a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--levels", default=None, help="sidecar levels file")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--out", required=True, help="output directory")
    _add_fit_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("select-k", help="BIC sweep over a range of K")
    p.add_argument("--data", required=True)
    p.add_argument("--levels", default=None)
    p.add_argument("--k-min", type=int, required=True)
    p.add_argument("--k-max", type=int, required=True)
    p.add_argument("--out", required=True, help="output CSV path")
    _add_fit_flags(p)
    p.set_defaults(func=cmd_select_k)

    p = sub.add_parser("eval", help="partition and parameter-recovery metrics")
    p.add_argument("--labels", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--model", default=None)
    p.add_argument("--true-model", default=None)
    p.add_argument("--out", default=None, help="metrics JSON path (default stdout)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="run MOM and baselines on the same data")
    p.add_argument("--data", required=True)
    p.add_argument("--levels", default=None)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--methods", default="mom,mmn,gmm")
    p.add_argument("--truth", default=None)
    p.add_argument("--true-model", default=None)
    p.add_argument("--out", required=True, help="output CSV path")
    _add_fit_flags(p)
    p.set_defaults(func=cmd_compare)

    return parser


def cmd_simulate(args) -> int:
    if (args.scenario is None) == (args.noise_fraction is None):
        raise UsageError("give exactly one of --scenario or --noise-fraction")
    noise = {1: 0.0, 2: 0.1, 3: 0.2}[args.scenario] \
        if args.scenario is not None else args.noise_fraction
    s = simulate.benchmark_scenario(args.n, noise, args.seed)
    sd = simulate.generate(s)
    os.makedirs(args.out, exist_ok=True)
    dataio.write_dataset_long(os.path.join(args.out, "dataset.csv"), sd.dataset)
    dataio.write_truth(os.path.join(args.out, "truth.csv"),
                       sd.true_labels, sd.noise_mask)
    dataio.write_scenario(os.path.join(args.out, "scenario.json"), s)
    print(json.dumps({"n": s.n, "noise_fraction": s.noise_fraction,
                      "n_noisy": int(sd.noise_mask.sum()), "seed": s.seed,
                      "out": args.out}, sort_keys=True))
    return 0


def _load_dataset(args) -> ordinal.OrdinalDataset:
    ds = dataio.read_dataset(args.data, levels_path=args.levels)
    violations = ordinal.validate(ds)
    if violations:
        raise UsageError("invalid dataset:\n  " + "\n  ".join(violations[:20]))
    return ds


def cmd_fit(args) -> int:
    ds = _load_dataset(args)
    cfg = _fit_config(args, args.k)
    res = mom.fit(ds, cfg)
    os.makedirs(args.out, exist_ok=True)
    metadata = {
        "seed": int(res.seed),
        "n_iter": int(res.n_iter),
        "converged": bool(res.converged),
        "loglik_trace": [float(v) for v in res.loglik_trace],
        "bic": float(res.bic),
    }
    dataio.write_model(os.path.join(args.out, "model.json"), res.model, metadata)
    dataio.write_labels(os.path.join(args.out, "labels.csv"), res.labels)
    dataio.write_tau(os.path.join(args.out, "tau.csv"), res.tau)
    print(json.dumps({"loglik": float(res.loglik_trace[-1]),
                      "bic": float(res.bic), "n_iter": int(res.n_iter),
                      "converged": bool(res.converged),
                      "seed": int(res.seed)}, sort_keys=True))
    return 0


def cmd_select_k(args) -> int:
    if args.k_min > args.k_max:
        raise UsageError("--k-min must not exceed --k-max")
    ds = _load_dataset(args)
    cfg = _fit_config(args, args.k_min)
    table, _ = mom.select_k(ds, args.k_min, args.k_max, cfg)
    best = table.best_k
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "n_params", "loglik", "bic", "converged", "best"])
        for row in table.rows:
            writer.writerow([row.k, row.n_params,
                             repr(float(row.loglik)), repr(float(row.bic)),
                             int(row.converged), int(row.k == best)])
    print(json.dumps({"best_k": best, "seed": cfg.seed}, sort_keys=True))
    return 0


def cmd_eval(args) -> int:
    est_labels = dataio.read_labels(args.labels)
    true_labels, noise_mask = dataio.read_truth(args.truth)
    if est_labels.size != true_labels.size:
        raise UsageError("labels and truth files have different lengths")
    metrics = {"ari_all": evalmetrics.ari(est_labels, true_labels)}
    if noise_mask.any():
        clean = ~noise_mask
        metrics["ari_non_noisy"] = evalmetrics.ari(est_labels[clean],
                                                   true_labels[clean])
    if (args.model is None) != (args.true_model is None):
        raise UsageError("--model and --true-model must be given together")
    if args.model is not None:
        est_model, _ = dataio.read_model(args.model)
        true_model, _ = dataio.read_model(args.true_model)
        perm = evalmetrics.align_clusters(est_labels, true_labels, true_model.k)
        report = evalmetrics.mape(true_model, est_model, perm)
        metrics.update({
            "mape_mean": report.mape_mean,
            "mape_phi_diag": report.mape_phi_diag,
            "mape_sigma_diag": report.mape_sigma_diag,
            "mape_excluded_zero": report.n_excluded_zero,
        })
    text = json.dumps(metrics, sort_keys=True, indent=1)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


def cmd_compare(args) -> int:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    known = {"mom", "mmn", "gmm"}
    unknown = [m for m in methods if m not in known]
    if unknown or not methods:
        raise UsageError(f"unknown methods: {unknown or 'none given'}")
    ds = _load_dataset(args)
    cfg = _fit_config(args, args.k)
    true_labels = noise_mask = true_model = None
    if args.truth:
        true_labels, noise_mask = dataio.read_truth(args.truth)
    if args.true_model:
        true_model, _ = dataio.read_model(args.true_model)

    rows = []
    timings = {}
    for method in methods:
        t0 = time.perf_counter()
        if method == "mom":
            res = mom.fit(ds, cfg)
            labels, trace = res.labels, res.loglik_trace
            model = res.model
        elif method == "mmn":
            res = baselines.mmn_fit(ds, cfg)
            labels, trace = res.labels, res.loglik_trace
            model = res.model
        else:
            x = ds.data.transpose(0, 2, 1).reshape(ds.n_units, -1).astype(float)
            res = baselines.gmm_fit(x, args.k, cfg)
            labels, trace = res.labels, res.loglik_trace
            model = None
        timings[method] = time.perf_counter() - t0
        row = {"method": method, "k": args.k,
               "loglik": float(trace[-1]), "n_iter": int(res.n_iter),
               "converged": int(res.converged)}
        if true_labels is not None:
            row["ari_all"] = evalmetrics.ari(labels, true_labels)
            if noise_mask is not None and noise_mask.any():
                clean = ~noise_mask
                row["ari_non_noisy"] = evalmetrics.ari(labels[clean],
                                                       true_labels[clean])
        if true_model is not None and model is not None \
                and true_labels is not None and args.k == true_model.k:
            perm = evalmetrics.align_clusters(labels, true_labels, true_model.k)
            report = evalmetrics.mape(true_model, model, perm)
            row["mape_mean"] = report.mape_mean
            row["mape_phi_diag"] = report.mape_phi_diag
            row["mape_sigma_diag"] = report.mape_sigma_diag
        rows.append(row)

    fields = ["method", "k", "loglik", "n_iter", "converged",
              "ari_all", "ari_non_noisy",
              "mape_mean", "mape_phi_diag", "mape_sigma_diag"]
    used = [f for f in fields if any(f in r for r in rows)]
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(used)
        for r in rows:
            writer.writerow([_fmt(r.get(f)) for f in used])
    # wall-clock is inherently non-deterministic; keep it out of the CSV
    print(json.dumps({"seed": cfg.seed,
                      "runtime_s": {m: round(v, 3) for m, v in timings.items()}},
                     sort_keys=True), file=sys.stderr)
    return 0


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


class UsageError(Exception):
    pass


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, dataio.FormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (mom.DegenerateClusterError, mom.UnderflowError,
            matvar.NotSPDError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
