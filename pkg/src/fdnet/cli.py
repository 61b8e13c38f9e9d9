"""Command-line front end.

Subcommands:

* ``gen``      generate a synthetic dataset directory
* ``train``    train one network on one dataset
* ``matrix``   run a sweep (case x blocks x filters x optimizer x seed)
* ``params``   print the parameter count of a configuration
* ``euler``    evaluate the forward Euler baseline on a dataset
* ``plotdata`` flatten a sweep's metrics into one long-format CSV

Exit codes: 0 success, 2 configuration error, 3 numerical abort during
training.  When ``--out`` is omitted, destinations default under the
``FDNET_OUT_ROOT`` environment variable.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import multiprocessing
import os
import sys

from fdnet.data import (
    CASES,
    CaseSpec,
    dataset_fingerprint,
    generate,
    load_dataset,
    save_dataset,
)
from fdnet.harness import (
    RunConfig,
    default_taus,
    euler_config_for,
    euler_eval,
    run_experiment,
)
from fdnet.model import NetConfig, param_count

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

OUT_ROOT_VAR = "FDNET_OUT_ROOT"

INDEX_COLUMNS = (
    "case",
    "optimizer",
    "blocks",
    "filters",
    "seed",
    "run_dir",
    "status",
    "message",
)

PLOTDATA_COLUMNS = (
    "case",
    "optimizer",
    "blocks",
    "filters",
    "seed",
    "iteration",
    "oracle_calls",
    "minibatch_mse",
    "test_mse_1",
    "test_mse_multi",
    "test_mse_full",
)

# sweep defaults; block depths follow the per-case study ranges
DEFAULT_BLOCKS = {
    "stable": (1, 2, 3, 4),
    "noisy": (1, 2, 3, 4),
    "forcing": (1, 2, 3, 4),
    "unstable": (1, 2, 3, 4, 6, 8, 10),
}
DEFAULT_FILTERS = (2, 4, 8, 16)
DEFAULT_OPTIMIZERS = ("tr", "adam@1e-3", "adam@1e-4")
DEFAULT_SEEDS = tuple(range(10))
DEFAULT_NOISE_GAMMA = 1e-4


class ConfigError(ValueError):
    pass


def _resolve_out(explicit: str | None, *parts: str) -> str:
    if explicit:
        return explicit
    root = os.environ.get(OUT_ROOT_VAR)
    if not root:
        raise ConfigError(
            f"no --out given and {OUT_ROOT_VAR} is not set; pass --out DIR"
        )
    return os.path.join(root, *parts)


def _parse_optimizer(token: str) -> tuple[str, float | None]:
    """'tr' -> ('tr', None); 'adam@1e-3' -> ('adam', 0.001); bare 'adam' uses 1e-3."""
    if token == "tr":
        return ("tr", None)
    if token == "adam":
        return ("adam", 1e-3)
    if token.startswith("adam@"):
        try:
            return ("adam", float(token.split("@", 1)[1]))
        except ValueError:
            raise ConfigError(f"bad learning rate in optimizer token {token!r}")
    raise ConfigError(f"unknown optimizer {token!r} (expected tr or adam[@lr])")


def _optimizer_label(method: str, lr: float | None) -> str:
    return "tr" if method == "tr" else f"adam@{lr:g}"


# -- gen -----------------------------------------------------------------------


def cmd_gen(args) -> int:
    kw = {}
    if args.n_ics is not None:
        kw["n_ics"] = args.n_ics
    if args.n_train is not None:
        kw["n_train"] = args.n_train
    if args.horizon is not None:
        kw["horizon"] = args.horizon
    if args.noise_gamma is not None:
        kw["noise_gamma"] = args.noise_gamma
    spec = CaseSpec(case=args.case, seed=args.seed, **kw)
    out = _resolve_out(args.out, "datasets", f"{args.case}-s{args.seed}")
    if os.path.isdir(out) and os.listdir(out) and not args.force:
        raise ConfigError(f"output directory {out} is not empty (use --force)")
    ts = generate(spec)
    save_dataset(ts, out)
    print(
        f"wrote {out}: case={spec.case} ics={spec.n_ics} "
        f"times={ts.times.size} fingerprint={dataset_fingerprint(ts)}"
    )
    return EXIT_OK


# -- train ---------------------------------------------------------------------


def cmd_train(args) -> int:
    ts = load_dataset(args.data)
    if args.forcing and ts.spec.case != "forcing":
        raise ConfigError(
            f"--forcing requested but dataset case is {ts.spec.case!r}; "
            "the source term is only available on forcing data"
        )
    method, lr = _parse_optimizer(args.opt)
    if args.lr is not None:
        if method != "adam":
            raise ConfigError("--lr only applies to the adam optimizer")
        lr = args.lr
    out = _resolve_out(
        args.out,
        "runs",
        f"{ts.spec.case}-{_optimizer_label(method, lr)}"
        f"-k{args.blocks}-f{args.filters}-s{args.seed}",
    )
    cfg = RunConfig(
        n_filters=args.filters,
        n_blocks=args.blocks,
        optimizer=method,
        seed=args.seed,
        lr=lr if lr is not None else 1e-3,
        budget=args.budget,
        batch_size=args.batch_size,
        eval_every=args.eval_every,
        out_dir=out,
    )
    outcome = run_experiment(cfg, ts)
    s = outcome.summary
    print(
        f"run {out}: iters={s['iterations_run']} "
        f"minibatch={s['final_minibatch_mse']} "
        f"test_full(min)={s['min_test_mse']['full']} aborted={s['aborted']}"
    )
    return EXIT_NUMERIC if s["aborted"] else EXIT_OK


# -- params --------------------------------------------------------------------


def cmd_params(args) -> int:
    cfg = NetConfig(
        n_filters=args.filters,
        n_blocks=1,
        with_forcing=args.forcing,
        grid_points=args.grid_points,
        n_basis=args.n_basis,
    )
    print(param_count(cfg))
    return EXIT_OK


# -- euler ---------------------------------------------------------------------


def cmd_euler(args) -> int:
    ts = load_dataset(args.data)
    ec = euler_config_for(ts)
    results = euler_eval(ts)
    for r in results:
        print(f"tau={r.tau_prime} mse={r.mse}")
    print(f"delta={ec.delta:.6g} stable={ec.stable}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        payload = {
            "case": ts.spec.case,
            "delta": ec.delta,
            "stable": ec.stable,
            "results": [
                {
                    "tau_prime": r.tau_prime,
                    "mse": r.mse if math.isfinite(r.mse) else "inf",
                }
                for r in results
            ],
        }
        path = os.path.join(args.out, "euler.json")
        with open(path + ".tmp", "w") as fh:
            json.dump(payload, fh, indent=1)
            fh.write("\n")
        os.replace(path + ".tmp", path)
        print(f"wrote {path}")
    return EXIT_OK


# -- matrix --------------------------------------------------------------------


def _parse_matrix_config(path: str) -> dict:
    """Flat key = value lines; values are whitespace- or comma-separated lists."""
    if not os.path.exists(path):
        raise ConfigError(f"matrix config {path} not found")
    out: dict[str, list[str]] = {}
    for lineno, raw in enumerate(open(path), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value, got {raw.rstrip()!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        tokens = value.replace(",", " ").split()
        if not tokens:
            raise ConfigError(f"{path}:{lineno}: no value for key {key!r}")
        if key in out:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        out[key] = tokens
    return out


_MATRIX_KEYS = {
    "cases", "blocks", "filters", "optimizers", "seeds", "budget",
    "batch_size", "eval_every", "data_seed", "n_ics", "n_train", "horizon",
    "noise_gamma",
}


def _ints(tokens: list[str], key: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in tokens)
    except ValueError:
        raise ConfigError(f"matrix key {key!r} expects integers, got {tokens}")


def _scalar_int(cfg: dict, key: str, default: int | None) -> int | None:
    if key not in cfg:
        return default
    vals = _ints(cfg[key], key)
    if len(vals) != 1:
        raise ConfigError(f"matrix key {key!r} expects a single value")
    return vals[0]


def _matrix_cells(cfg: dict) -> list[dict]:
    unknown = set(cfg) - _MATRIX_KEYS - {k for k in cfg if k.startswith("data.")}
    if unknown:
        raise ConfigError(f"unknown matrix keys: {sorted(unknown)}")
    cases = cfg.get("cases", list(CASES))
    for c in cases:
        if c not in CASES:
            raise ConfigError(f"unknown case {c!r} in matrix config")
    filters = _ints(cfg["filters"], "filters") if "filters" in cfg else DEFAULT_FILTERS
    seeds = _ints(cfg["seeds"], "seeds") if "seeds" in cfg else DEFAULT_SEEDS
    optimizers = [
        _parse_optimizer(t) for t in cfg.get("optimizers", DEFAULT_OPTIMIZERS)
    ]
    blocks_override = _ints(cfg["blocks"], "blocks") if "blocks" in cfg else None
    cells = []
    for case in cases:
        for k in blocks_override or DEFAULT_BLOCKS[case]:
            for f in filters:
                for method, lr in optimizers:
                    for seed in seeds:
                        cells.append(
                            {
                                "case": case,
                                "blocks": int(k),
                                "filters": int(f),
                                "method": method,
                                "lr": lr,
                                "seed": int(seed),
                            }
                        )
    return cells


def _matrix_dataset_dirs(cfg: dict, cases: list[str], out_root: str) -> dict[str, str]:
    """Per-case dataset directory: explicit data.<case> key or generated."""
    dirs: dict[str, str] = {}
    data_seed = _scalar_int(cfg, "data_seed", 0)
    for case in cases:
        key = f"data.{case}"
        if key in cfg:
            if len(cfg[key]) != 1:
                raise ConfigError(f"matrix key {key!r} expects a single path")
            path = cfg[key][0]
            if not os.path.isdir(path):
                raise ConfigError(f"dataset directory {path} for {key} not found")
            dirs[case] = path
            continue
        kw = {}
        for field, name in (
            ("n_ics", "n_ics"), ("n_train", "n_train"), ("horizon", "horizon"),
        ):
            v = _scalar_int(cfg, name, None)
            if v is not None:
                kw[field] = v
        if case == "noisy":
            gamma = DEFAULT_NOISE_GAMMA
            if "noise_gamma" in cfg:
                if len(cfg["noise_gamma"]) != 1:
                    raise ConfigError("matrix key 'noise_gamma' expects a single value")
                gamma = float(cfg["noise_gamma"][0])
            kw["noise_gamma"] = gamma
        spec = CaseSpec(case=case, seed=data_seed, **kw)
        path = os.path.join(out_root, "datasets", case)
        if not os.path.isdir(path) or not os.listdir(path):
            save_dataset(generate(spec), path)
        dirs[case] = path
    return dirs


def _run_cell(job: dict) -> dict:
    """Worker: one training run; never raises (status goes in the row)."""
    cell = job["cell"]
    row = {
        "case": cell["case"],
        "optimizer": _optimizer_label(cell["method"], cell["lr"]),
        "blocks": cell["blocks"],
        "filters": cell["filters"],
        "seed": cell["seed"],
        "run_dir": job["run_dir"],
        "status": "ok",
        "message": "",
    }
    try:
        ts = load_dataset(job["data_dir"])
        cfg = RunConfig(
            n_filters=cell["filters"],
            n_blocks=cell["blocks"],
            optimizer=cell["method"],
            seed=cell["seed"],
            lr=cell["lr"] if cell["lr"] is not None else 1e-3,
            budget=job["budget"],
            batch_size=job["batch_size"],
            eval_every=job["eval_every"],
            out_dir=job["run_dir"],
        )
        outcome = run_experiment(cfg, ts)
        if outcome.summary["aborted"]:
            row["status"] = "aborted"
            row["message"] = outcome.summary["abort_message"] or ""
    except Exception as exc:  # tolerate per-run failure, record it
        row["status"] = "failed"
        row["message"] = str(exc)
    return row


def cmd_matrix(args) -> int:
    if args.jobs < 1:
        raise ConfigError("--jobs must be at least 1")
    cfg = _parse_matrix_config(args.config)
    out_root = _resolve_out(args.out, "matrix")
    cells = _matrix_cells(cfg)
    cases = sorted({c["case"] for c in cells}, key=list(CASES).index)
    data_dirs = _matrix_dataset_dirs(cfg, cases, out_root)
    budget = _scalar_int(cfg, "budget", None)
    batch_size = _scalar_int(cfg, "batch_size", 64)
    eval_every = _scalar_int(cfg, "eval_every", None)
    jobs = []
    for cell in cells:
        name = (
            f"{cell['case']}-{_optimizer_label(cell['method'], cell['lr'])}"
            f"-k{cell['blocks']}-f{cell['filters']}-s{cell['seed']}"
        )
        jobs.append(
            {
                "cell": cell,
                "data_dir": data_dirs[cell["case"]],
                "run_dir": os.path.join(out_root, "runs", name),
                "budget": budget,
                "batch_size": batch_size,
                "eval_every": eval_every,
            }
        )
    if args.jobs > 1:
        with multiprocessing.Pool(args.jobs) as pool:
            rows = pool.map(_run_cell, jobs)
    else:
        rows = [_run_cell(j) for j in jobs]
    os.makedirs(out_root, exist_ok=True)
    index_path = os.path.join(out_root, "index.csv")
    with open(index_path + ".tmp", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=INDEX_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    os.replace(index_path + ".tmp", index_path)
    n_bad = sum(1 for r in rows if r["status"] != "ok")
    print(f"wrote {index_path}: {len(rows)} runs, {n_bad} not ok")
    return EXIT_OK


# -- plotdata ------------------------------------------------------------------


def cmd_plotdata(args) -> int:
    if not os.path.exists(args.runs):
        raise ConfigError(f"run index {args.runs} not found")
    with open(args.runs, newline="") as fh:
        index_rows = list(csv.DictReader(fh))
    out_rows = []
    missing = []
    for row in index_rows:
        metrics_path = os.path.join(row["run_dir"], "metrics.csv")
        if not os.path.exists(metrics_path):
            missing.append(row["run_dir"])
            continue
        with open(metrics_path, newline="") as fh:
            for m in csv.DictReader(fh):
                calls = int(m["grad_calls"]) + int(m["hvp_calls"])
                out_rows.append(
                    {
                        "case": row["case"],
                        "optimizer": row["optimizer"],
                        "blocks": row["blocks"],
                        "filters": row["filters"],
                        "seed": row["seed"],
                        "iteration": m["iteration"],
                        "oracle_calls": calls,
                        "minibatch_mse": m["minibatch_mse"],
                        "test_mse_1": m["test_mse_1"],
                        "test_mse_multi": m["test_mse_multi"],
                        "test_mse_full": m["test_mse_full"],
                    }
                )
    with open(args.out + ".tmp", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=PLOTDATA_COLUMNS)
        writer.writeheader()
        writer.writerows(out_rows)
    os.replace(args.out + ".tmp", args.out)
    for run_dir in missing:
        print(f"missing metrics for {run_dir}", file=sys.stderr)
    print(f"wrote {args.out}: {len(out_rows)} rows from {len(index_rows) - len(missing)} runs")
    return EXIT_OK


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fdnet",
        description="Learn heat-equation dynamics with a finite-difference network.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a dataset directory")
    p.add_argument("--case", required=True, choices=CASES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise-gamma", type=float, default=None)
    p.add_argument("--n-ics", type=int, default=None)
    p.add_argument("--n-train", type=int, default=None)
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train one network on one dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--filters", type=int, required=True)
    p.add_argument("--blocks", type=int, default=1)
    p.add_argument("--opt", default="tr")
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--eval-every", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--forcing", action="store_true",
                   help="require the source-term head (must match the dataset)")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("params", help="print a configuration's parameter count")
    p.add_argument("--filters", type=int, required=True)
    p.add_argument("--forcing", action="store_true")
    p.add_argument("--grid-points", type=int, default=32)
    p.add_argument("--n-basis", type=int, default=10)
    p.set_defaults(func=cmd_params)

    p = sub.add_parser("euler", help="evaluate the Euler baseline on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_euler)

    p = sub.add_parser("matrix", help="run a sweep from a key=value config file")
    p.add_argument("--config", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_matrix)

    p = sub.add_parser("plotdata", help="flatten sweep metrics into one CSV")
    p.add_argument("--runs", required=True, help="index.csv from a matrix run")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plotdata)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
