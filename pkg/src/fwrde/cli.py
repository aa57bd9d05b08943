"""Command-line surface.

Verbs: ``fit-noise``, ``attribute``, ``evaluate``, ``bench-solvers``,
``render``.  Options may come from a JSON config file (``--config``) with
individual flags taking precedence.  Exit codes: 0 success, 2 input or
configuration error, 3 numeric failure (partial trace written when one is
available).  ``FWRDE_THREADS`` caps the per-map fan-out of ``evaluate``.
"""

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .attribution import RelevanceMap, mr_rde, ord_rde, rc_rde, sensitivity_map
from .classifier import (
    DistortionObjective,
    fit_gaussian,
    load_network,
    load_noise_model,
    save_noise_model,
)
from .evaluation import aggregate, map_to_curve, write_curve_csv
from .exceptions import InputError, NumericError
from .pgm import read_pgm, write_pgm
from .solvers import SFWConfig, SolverConfig

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3

METHODS = ("rc", "mr", "ord", "sensitivity")

CONFIG_KEYS = (
    "model", "image", "noise", "out", "method", "rate", "rates", "solver",
    "preset", "seed", "max_iter", "gap_tol", "num_samples", "width", "height",
    "solvers", "data", "map",
)


def _load_config_file(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read config file {path}: {exc}")
    if not isinstance(doc, dict):
        raise InputError("config file must hold a JSON object")
    unknown = set(doc) - set(CONFIG_KEYS)
    if unknown:
        raise InputError(f"unknown config keys: {sorted(unknown)}")
    return doc


def _merge_config(args):
    """Config file values overridden by any flag given on the command line."""
    merged = {}
    if getattr(args, "config", None):
        merged.update(_load_config_file(args.config))
    for key in CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def _parse_int_list(value, name):
    if value is None:
        return None
    if isinstance(value, (list, tuple)):
        return [int(v) for v in value]
    try:
        return [int(part) for part in str(value).split(",") if part.strip()]
    except ValueError:
        raise InputError(f"{name} must be a comma-separated list of integers")


def _parse_str_list(value, name):
    if value is None:
        return None
    if isinstance(value, (list, tuple)):
        return [str(v) for v in value]
    parts = [part.strip() for part in str(value).split(",") if part.strip()]
    if not parts:
        raise InputError(f"{name} must name at least one entry")
    return parts


def _require(cfg, key):
    if cfg.get(key) is None:
        raise InputError(f"missing required option --{key.replace('_', '-')}")
    return cfg[key]


def _load_image(path, expected_dim):
    path = str(path)
    if path.endswith(".pgm"):
        values, _, _ = read_pgm(path)
    else:
        try:
            values = np.loadtxt(path, delimiter=",", ndmin=2).reshape(-1)
        except (OSError, ValueError) as exc:
            raise InputError(f"cannot read image file {path}: {exc}")
    if values.size != expected_dim:
        raise InputError(
            f"image has {values.size} features but the model expects {expected_dim}"
        )
    return values.astype(np.float64)


def _solver_config(cfg):
    return SolverConfig(
        max_iterations=int(cfg.get("max_iter", 2000)),
        dual_gap_tolerance=float(cfg.get("gap_tol", 1e-7)),
    )


def _out_dir(cfg):
    out = Path(_require(cfg, "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_problem(cfg):
    net = load_network(_require(cfg, "model"))
    noise = load_noise_model(_require(cfg, "noise"))
    image = _load_image(_require(cfg, "image"), net.input_dim)
    if noise.n != net.input_dim:
        raise InputError("noise model dimension does not match the model")
    return net, noise, image


def _heatmap_dims(cfg, n):
    width = cfg.get("width")
    height = cfg.get("height")
    if (width is None) != (height is None):
        raise InputError("width and height must be given together")
    if width is None:
        return n, 1
    width, height = int(width), int(height)
    if width * height != n:
        raise InputError(f"width*height = {width * height} does not match n = {n}")
    return width, height


def cmd_fit_noise(cfg):
    data_path = _require(cfg, "data")
    out_path = _require(cfg, "out")
    try:
        data = np.loadtxt(data_path, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read data file {data_path}: {exc}")
    model = fit_gaussian(data)
    save_noise_model(model, out_path)
    print(f"wrote noise model for {model.n} features to {out_path}")
    return EXIT_OK


def cmd_attribute(cfg):
    method = _require(cfg, "method")
    if method not in METHODS:
        raise InputError(f"unknown method {method!r}; expected one of {METHODS}")
    net, noise, image = _load_problem(cfg)
    out = _out_dir(cfg)
    seed = int(cfg.get("seed", 0))
    solver = cfg.get("solver") or ("sfw" if method == "ord" else "fw")
    solver_config = _solver_config(cfg)

    if method == "sensitivity":
        result = sensitivity_map(net, image)
        traces = {}
    else:
        objective = DistortionObjective(net, image, noise)
        if method == "rc":
            k = int(_require(cfg, "rate"))
            result, trace = rc_rde(objective, k, solver=solver, config=solver_config, seed=seed)
            traces = {"trace.csv": trace}
        elif method == "mr":
            rates = _parse_int_list(_require(cfg, "rates"), "rates")
            result, rate_traces = mr_rde(objective, rates, solver=solver,
                                         config=solver_config, seed=seed)
            traces = {
                f"trace_k{k}.csv": trace for k, trace in zip(result.rates, rate_traces)
            }
        else:  # ord
            sfw_config = None
            if solver == "sfw":
                sfw_config = SFWConfig.from_preset(cfg.get("preset", "A"), rng_seed=seed)
            ordering = ord_rde(objective, solver=solver, config=solver_config,
                               sfw_config=sfw_config, seed=seed)
            ordering.save(out / "map.json")
            ordering.trace.to_csv(out / "trace.csv")
            width, height = _heatmap_dims(cfg, net.input_dim)
            write_pgm(out / "heatmap.pgm", ordering.multirate_scores, width, height)
            print(f"wrote ordering attribution to {out}")
            return EXIT_OK

    result.save(out / "map.json")
    for name, trace in traces.items():
        trace.to_csv(out / name)
    width, height = _heatmap_dims(cfg, net.input_dim)
    write_pgm(out / "heatmap.pgm", result.scores, width, height)
    print(f"wrote {method} attribution to {out}")
    return EXIT_OK


def _thread_cap(n_tasks):
    env = os.environ.get("FWRDE_THREADS")
    if env:
        try:
            cap = int(env)
        except ValueError:
            raise InputError(f"FWRDE_THREADS must be an integer, got {env!r}")
        if cap < 1:
            raise InputError("FWRDE_THREADS must be >= 1")
    else:
        cap = os.cpu_count() or 1
    return max(1, min(cap, n_tasks))


def cmd_evaluate(cfg, map_files):
    if not map_files:
        raise InputError("evaluate needs at least one relevance map file")
    net, noise, image = _load_problem(cfg)
    out = _out_dir(cfg)
    seed = int(cfg.get("seed", 0))
    num_samples = int(cfg.get("num_samples", 512))
    maps = []
    for path in map_files:
        relevance = RelevanceMap.load(path)
        if relevance.n != net.input_dim:
            raise InputError(
                f"map {path} has {relevance.n} features but the model expects {net.input_dim}"
            )
        maps.append(relevance)

    def run(relevance):
        return map_to_curve(net, image, relevance, noise, num_samples, seed)

    workers = _thread_cap(len(maps))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            curves = list(pool.map(run, maps))
    else:
        curves = [run(m) for m in maps]

    for index, (path, curve) in enumerate(zip(map_files, curves)):
        name = f"curve_{index:02d}_{Path(path).stem}.csv"
        write_curve_csv(str(out / name), curve)
    mean_curve, std_curve = aggregate(curves)
    write_curve_csv(str(out / "aggregate.csv"), mean_curve, std_curve)
    print(f"wrote {len(curves)} curve file(s) and aggregate.csv to {out}")
    return EXIT_OK


def cmd_bench_solvers(cfg):
    solvers = _parse_str_list(_require(cfg, "solvers"), "solvers")
    for name in solvers:
        if name not in ("fw", "afw", "lcg", "lafw"):
            raise InputError(f"unknown solver {name!r} in --solvers")
    rates = _parse_int_list(cfg.get("rates") or cfg.get("rate"), "rates")
    if not rates:
        raise InputError("bench-solvers needs --rate or --rates")
    net, noise, image = _load_problem(cfg)
    out = _out_dir(cfg)
    seed = int(cfg.get("seed", 0))
    solver_config = _solver_config(cfg)
    objective = DistortionObjective(net, image, noise)

    rows = []
    for rate in rates:
        for name in solvers:
            start = time.perf_counter()
            _, trace = rc_rde(objective, rate, solver=name, config=solver_config, seed=seed)
            elapsed_ms = (time.perf_counter() - start) * 1000.0
            trace.to_csv(out / f"trace_{name}_k{rate}.csv")
            rows.append(
                (name, rate, len(trace), trace.final_objective, trace.final_gap, elapsed_ms)
            )
    with open(out / "summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["solver", "rate", "iterations", "final_objective", "final_gap", "wall_time_ms"])
        for name, rate, iters, objective_value, gap, ms in rows:
            writer.writerow([name, rate, iters, repr(objective_value), repr(gap), f"{ms:.3f}"])
    print(f"wrote {len(rows)} benchmark rows to {out / 'summary.csv'}")
    return EXIT_OK


def cmd_render(cfg):
    map_path = _require(cfg, "map")
    out_path = _require(cfg, "out")
    relevance = RelevanceMap.load(map_path)
    width, height = _heatmap_dims(cfg, relevance.n)
    write_pgm(out_path, relevance.scores, width, height)
    print(f"wrote {width}x{height} heatmap to {out_path}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fwrde",
        description="Projection-free rate-distortion relevance attribution.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--model", help="network JSON file")
        p.add_argument("--image", help="input sample (CSV row or PGM)")
        p.add_argument("--noise", help="noise model JSON file")
        p.add_argument("--seed", type=int, help="RNG seed (default 0)")
        p.add_argument("--max-iter", dest="max_iter", type=int, help="iteration cap (default 2000)")
        p.add_argument("--gap-tol", dest="gap_tol", type=float, help="dual gap tolerance (default 1e-7)")
        p.add_argument("--out", help="output directory (or file for fit-noise/render)")

    p = sub.add_parser("fit-noise", help="fit a Gaussian noise model from CSV data")
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--data", help="CSV data file, one sample per row")
    p.add_argument("--out", help="output noise model JSON path")

    p = sub.add_parser("attribute", help="compute a relevance map")
    add_common(p)
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--rate", type=int, help="rate k for method=rc")
    p.add_argument("--rates", help="comma-separated rates for method=mr")
    p.add_argument("--solver", choices=("fw", "afw", "lcg", "lafw", "sfw"))
    p.add_argument("--preset", choices=SFWConfig.PRESETS, help="SFW preset (method=ord)")
    p.add_argument("--width", type=int, help="heatmap width for image-shaped inputs")
    p.add_argument("--height", type=int, help="heatmap height for image-shaped inputs")

    p = sub.add_parser("evaluate", help="relevance-ordering test for one or more maps")
    add_common(p)
    p.add_argument("--num-samples", dest="num_samples", type=int,
                   help="noise samples per test (default 512)")
    p.add_argument("maps", nargs="*", help="relevance map JSON files")

    p = sub.add_parser("bench-solvers", help="compare solvers on one attribution problem")
    add_common(p)
    p.add_argument("--solvers", help="comma-separated deterministic solver names")
    p.add_argument("--rate", type=int, help="single rate to benchmark")
    p.add_argument("--rates", help="comma-separated rates to benchmark")

    p = sub.add_parser("render", help="render a relevance map JSON as a PGM heatmap")
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--map", help="relevance map JSON file")
    p.add_argument("--out", help="output PGM path")
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _merge_config(args)
        if args.command == "fit-noise":
            return cmd_fit_noise(cfg)
        if args.command == "attribute":
            return cmd_attribute(cfg)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, list(args.maps))
        if args.command == "bench-solvers":
            return cmd_bench_solvers(cfg)
        if args.command == "render":
            return cmd_render(cfg)
        raise InputError(f"unknown command {args.command!r}")
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        out = cfg.get("out") if isinstance(cfg, dict) else None
        if exc.trace is not None and out:
            try:
                out_dir = Path(out)
                out_dir.mkdir(parents=True, exist_ok=True)
                exc.trace.to_csv(out_dir / "partial_trace.csv")
                print(f"partial trace written to {out_dir / 'partial_trace.csv'}", file=sys.stderr)
            except OSError:
                pass
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
