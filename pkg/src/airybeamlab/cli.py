"""Command-line front door: simulate, generate data, sweep, infer, evaluate.

Subcommands::

    abl field    --config s.json --theta T --r R --c C --out stem
    abl caustic  --config s.json --theta T --r R --c C --out caustic.csv
    abl dataset  gen|split|audit ...
    abl sweep    --method airy-bs|focus-bs|airy-hier|airy-dl|focus-dl ...
    abl infer    --weights w.ampw --records d.abtd --index I
    abl eval     --metric ... --results results.csv --out table.csv

Report paths write a rendered PNG next to every CSV (``--no-plot``
disables this). ``--jobs`` (default from the ABL_JOBS environment
variable) sets FFT worker threads; results are identical for any value.
"""

import argparse
import json
import logging
import math
import os
import sys

import numpy as np
import pandas as pd

from . import dataset as ds
from . import metrics, plots, search
from .codebooks import (BeamParams, CodebookSpec, build_codebook, load_codebook_spec,
                        make_codeword, spec_from_dict)
from .errors import BeamLabError
from .field import propagate, write_field
from .inference import forward, load_weights, topk
from .scenario import build_grid, load_scenario, scenario_from_dict
from .trajectory import caustic_curve, paraxial_trajectory, write_caustic_csv

logger = logging.getLogger("abl")

METHODS = ("airy-bs", "focus-bs", "airy-hier", "airy-dl", "focus-dl")


def _parse_pair(text):
    x, y = (float(v) for v in text.split(","))
    return x, y


def _parse_topk(text):
    return tuple(int(v) for v in text.split(","))


def _jobs(args):
    if args.jobs is not None:
        return args.jobs
    env = os.environ.get("ABL_JOBS")
    return int(env) if env else None


def _load_config(args):
    config = load_scenario(args.config)
    logger.info("scenario hash %s, seed %s", config.hash()[:16], getattr(args, "seed", None))
    return config


def _codebook_for(args, config, focusing=False):
    spec = load_codebook_spec(args.codebook)
    if focusing:
        spec = CodebookSpec(**{**spec.to_json_dict(), "l3": 1})
    return spec, build_codebook(spec, config.n_antennas, config.wavenumber, config.spacing)


def _write_results(rows, path, append):
    df = pd.DataFrame(rows)
    mode = "a" if append and os.path.exists(path) else "w"
    df.to_csv(path, index=False, float_format="%.10g", lineterminator="\n",
              mode=mode, header=mode == "w")


def cmd_field(args):
    config = _load_config(args)
    grid = build_grid(config)
    params = BeamParams(args.theta, args.r, args.c)
    cw = make_codeword(params, config.n_antennas, config.wavenumber, config.spacing)
    field = propagate(cw, config, grid, keep="all", dtype=np.complex64, workers=_jobs(args))
    stem, _ = os.path.splitext(args.out)
    write_field(stem + ".bin", field, grid)
    logger.info("field dump written to %s.bin (%d x %d)", stem, grid.n_cols, grid.n_rows)
    if args.slice_x is not None:
        col = int(grid.col_of(args.slice_x))
        sl = field[col]
        df = pd.DataFrame({"y": grid.y_values(), "re": sl.real, "im": sl.imag})
        metrics.write_table(df, stem + "_slice.csv")
    if not args.no_plot:
        plots.render_field(field, grid, stem + ".png", config)
    return 0


def cmd_caustic(args):
    config = _load_config(args)
    params = BeamParams(args.theta, args.r, args.c)
    points = caustic_curve(params, config.wavenumber, config.aperture / 2.0,
                           args.samples or 4 * config.n_antennas)
    write_caustic_csv(points, args.out)
    if not args.no_plot:
        xs = np.array(sorted(p.x_c for p in points if p.valid))
        par = (xs, paraxial_trajectory(xs, params, config.wavenumber)) if params.c and len(xs) else None
        plots.render_caustic(points, os.path.splitext(args.out)[0] + ".png", paraxial=par)
    return 0


def cmd_dataset_gen(args):
    config = _load_config(args)
    grid = build_grid(config)
    spec, codebook = _codebook_for(args, config)
    sampling = ds.ReceiverSampling(
        x_range=_parse_pair(args.x_range), y_range=_parse_pair(args.y_range),
        mode=args.mode, nx=args.nx, ny=args.ny, count=args.count, seed=args.seed,
        noise_std=args.noise_std)
    records, manifest, _ = ds.generate_dataset(config, codebook, spec, grid, sampling,
                                               workers=_jobs(args))
    ds.write_records(args.out, records, manifest)
    logger.info("wrote %d records to %s", len(records), args.out)
    return 0


def cmd_dataset_split(args):
    records, manifest = ds.read_records(args.infile)
    train, val, test = ds.split_dataset(len(records), args.seed)
    with open(args.out, "w") as f:
        json.dump({"seed": args.seed, "train": train.tolist(),
                   "val": val.tolist(), "test": test.tolist()}, f)
    logger.info("split %d records into %d/%d/%d", len(records), len(train), len(val), len(test))
    return 0


def cmd_dataset_audit(args):
    records, manifest = ds.read_records(args.infile)
    config = scenario_from_dict(manifest.scenario)
    grid = build_grid(config)
    spec = spec_from_dict(manifest.codebook)
    codebook = build_codebook(spec, config.n_antennas, config.wavenumber, config.spacing)
    n = ds.audit_records(records, manifest, codebook, config, grid,
                         fraction=args.fraction, seed=args.seed, workers=_jobs(args))
    logger.info("audit passed on %d of %d records", n, len(records))
    return 0


def _result_row(res, receiver, ratio, tags):
    row = {"method": res.method, "x_r": receiver[0], "y_r": receiver[1],
           "blockage_ratio": ratio, "l1": res.l1, "l2": res.l2, "l3": res.l3,
           "theta": res.params.theta, "r": res.params.r, "c": res.params.c,
           "gain": res.gain, "overhead": res.overhead}
    row.update(tags)
    return row


def _sweep_one(args, config, grid, codebook, weights, receiver):
    from .scenario import blockage_ratio
    jobs = _jobs(args)
    method = args.method
    # big sweeps at one receiver go through the reciprocity path
    path = "adjoint" if len(codebook) >= 1024 else "forward"
    if method in ("airy-bs", "focus-bs"):
        res = search.exhaustive_sweep(codebook, config, grid, receiver, method=method,
                                      keep_trace=args.trace is not None, workers=jobs,
                                      path=path)
    elif method == "airy-hier":
        res = search.hierarchical_search(codebook, config, grid, receiver, workers=jobs,
                                         path=path)
    else:
        pattern = search.dft_sweep(config, grid, receiver, workers=jobs)
        res = search.dl_beam_training(pattern, weights, codebook, config, grid, receiver,
                                      k=_parse_topk(args.topk), method=method, workers=jobs)
    ratio = blockage_ratio(config, receiver)
    return res, ratio


def cmd_sweep(args):
    config = _load_config(args)
    grid = build_grid(config)
    _, codebook = _codebook_for(args, config,
                                focusing=args.method in ("focus-bs", "focus-dl"))
    weights = load_weights(args.weights) if args.method.endswith("-dl") else None
    tags = dict(kv.split("=", 1) for kv in args.tag) if args.tag else {}
    tags = {k: float(v) for k, v in tags.items()}
    receivers = [_parse_pair(args.receiver)] if args.receiver else None
    if receivers is None:
        records, _ = ds.read_records(args.records)
        receivers = [(r.x_r, r.y_r) for r in records]
    rows = []
    traces = []
    for receiver in receivers:
        res, ratio = _sweep_one(args, config, grid, codebook, weights, receiver)
        rows.append(_result_row(res, receiver, ratio, tags))
        if args.trace is not None and res.trace is not None:
            traces.append(res.trace)
        print(f"{res.method}: best (l1, l2, l3) = ({res.l1}, {res.l2}, {res.l3}) "
              f"params (theta = {res.params.theta:.4f}, r = {res.params.r:.4f}, "
              f"c = {res.params.c:.4f}) gain = {res.gain:.6g} overhead = {res.overhead}")
    if args.out:
        _write_results(rows, args.out, args.append)
    if args.trace is not None and traces:
        np.savez_compressed(args.trace, traces=np.array(traces))
    return 0


def cmd_infer(args):
    weights = load_weights(args.weights)
    records, _ = ds.read_records(args.records)
    if not 0 <= args.index < len(records):
        raise BeamLabError(f"record index {args.index} out of range")
    rec = records[args.index]
    probs = forward(rec.pattern, weights)
    k = _parse_topk(args.topk)
    for i, p in enumerate(probs):
        best = topk(p, min(k[i] if i < len(k) else 3, len(p)))
        pairs = ", ".join(f"{j}:{p[j]:.4f}" for j in best)
        print(f"task {i}: top candidates {pairs}")
    print(f"stored labels: {rec.labels}, stored gain: {rec.gain:.6g}")
    return 0


def cmd_eval(args):
    df = pd.read_csv(args.results) if args.results else None
    config = load_scenario(args.config) if args.config else None
    traces = np.load(args.traces)["traces"] if args.traces else None
    table = metrics.evaluate(df, args.metric, config=config, traces=traces)
    metrics.write_table(table, args.out)
    if not args.no_plot:
        png = os.path.splitext(args.out)[0] + ".png"
        if args.metric in ("blockage-bins", "horizontal-bins", "vertical-bins"):
            plots.render_bins(table, png, xlabel=args.metric.replace("-bins", " bin (upper edge)"))
        elif args.metric == "cdf":
            plots.render_cdf(table, png)
        elif args.metric == "overhead-curve":
            plots.render_overhead(table, png)
        elif args.metric == "height-sweep":
            plots.render_height_sweep(table, png)
        elif args.metric == "position-heatmap":
            plots.render_heatmap(table, png)
    logger.info("metric table written to %s", args.out)
    return 0


def build_parser():
    top = argparse.ArgumentParser(prog="abl", description=__doc__.split("\n")[0])
    top.add_argument("--jobs", type=int, default=None, help="FFT worker threads (env ABL_JOBS)")
    sub = top.add_subparsers(dest="command", required=True)

    def common(p, config=True, seed=True):
        if config:
            p.add_argument("--config", required=True, help="scenario JSON")
        if seed:
            p.add_argument("--seed", type=int, default=0)
        p.add_argument("--no-plot", action="store_true", help="skip PNG rendering")

    p = sub.add_parser("field", help="propagate one codeword and dump the field")
    common(p)
    p.add_argument("--theta", type=float, default=0.0)
    p.add_argument("--r", type=float, default=math.inf)
    p.add_argument("--c", type=float, default=0.0)
    p.add_argument("--slice-x", type=float, default=None, help="also dump one column as CSV")
    p.add_argument("--out", required=True, help="output stem (.bin/.png appended)")
    p.set_defaults(func=cmd_field)

    p = sub.add_parser("caustic", help="emit the analytic trajectory as CSV")
    common(p)
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_caustic)

    pd_ = sub.add_parser("dataset", help="generate, split, or audit record files")
    dsub = pd_.add_subparsers(dest="dataset_command", required=True)

    p = dsub.add_parser("gen")
    common(p)
    p.add_argument("--codebook", required=True, help="codebook spec JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--x-range", required=True, help="receiver x range, e.g. 0.5,4")
    p.add_argument("--y-range", required=True, help="receiver y range, e.g. -2,2")
    p.add_argument("--mode", choices=("lattice", "random"), default="lattice")
    p.add_argument("--nx", type=int, default=20)
    p.add_argument("--ny", type=int, default=20)
    p.add_argument("--count", type=int, default=0)
    p.add_argument("--noise-std", type=float, default=0.0)
    p.set_defaults(func=cmd_dataset_gen)

    p = dsub.add_parser("split")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_dataset_split)

    p = dsub.add_parser("audit")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--fraction", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_dataset_audit)

    p = sub.add_parser("sweep", help="run one search strategy")
    common(p)
    p.add_argument("--method", choices=METHODS, required=True)
    p.add_argument("--codebook", required=True)
    p.add_argument("--receiver", default=None, help="single receiver 'x,y'")
    p.add_argument("--records", default=None, help="evaluate at every receiver of a dataset")
    p.add_argument("--weights", default=None, help="weights file for learned methods")
    p.add_argument("--topk", default="3,3,5")
    p.add_argument("--out", default=None, help="append results CSV")
    p.add_argument("--append", action="store_true")
    p.add_argument("--tag", action="append", default=None, help="extra column key=value")
    p.add_argument("--trace", default=None, help="save per-codeword gain traces (npz)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("infer", help="forward one stored pattern through a network")
    p.add_argument("--weights", required=True)
    p.add_argument("--records", required=True)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--topk", default="3,3,5")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="aggregate results into a metric table")
    p.add_argument("--metric", choices=metrics.METRICS, required=True)
    p.add_argument("--results", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--traces", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_eval)
    return top


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "sweep":
        if (args.receiver is None) == (args.records is None):
            parser.error("sweep needs exactly one of --receiver or --records")
        if args.method.endswith("-dl") and not args.weights:
            parser.error(f"method {args.method} needs --weights")
    if args.command == "eval" and args.metric != "overhead-curve" and not args.results:
        parser.error(f"metric {args.metric} needs --results")
    if args.command == "eval" and args.metric == "overhead-curve" and not args.traces:
        parser.error("metric overhead-curve needs --traces")
    try:
        return args.func(args)
    except BeamLabError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
