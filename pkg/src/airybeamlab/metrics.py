"""Aggregation of per-receiver results into figure-analogue tables.

All metrics consume a long-form table with one row per (receiver,
method) pair and produce deterministic CSV-ready frames. Distance and
ratio metrics use fixed-width bins labeled by their right edge: value v
falls into the bin whose upper bound is the smallest edge >= v (v = 0
joins the first bin). Empty bins are kept with count 0.
"""

import numpy as np
import pandas as pd

from .errors import ConfigMismatchError, ParameterError

BIN_WIDTH = 0.05

METRICS = ("blockage-bins", "horizontal-bins", "vertical-bins", "cdf",
           "height-sweep", "overhead-curve", "position-heatmap")


def _require(df, cols, metric):
    missing = [c for c in cols if c not in df.columns]
    if missing:
        raise ConfigMismatchError(f"metric {metric!r} needs columns {missing}")


def bin_by(df: pd.DataFrame, key: str, width=BIN_WIDTH, domain=None) -> pd.DataFrame:
    """Mean gain per method per right-edge-labeled bin of ``key``.

    ``domain`` (lo, hi) fixes the emitted bin range; otherwise it spans
    the data. Bins without samples appear with count 0.
    """
    _require(df, [key, "method", "gain"], "binning")
    v = df[key].to_numpy(dtype=float)
    if len(v) == 0:
        return pd.DataFrame(columns=["method", "bin_upper", "count", "mean_gain"])
    lo, hi = domain if domain is not None else (0.0, float(v.max()))
    n_bins = max(1, int(np.ceil(round((hi - lo) / width, 9))))
    idx = np.ceil(np.round((v - lo) / width, 9)).astype(int)
    idx = np.maximum(idx, 1)
    out = []
    for method, sub in df.assign(_bin=idx).groupby("method", sort=True):
        grouped = sub.groupby("_bin")["gain"]
        means = grouped.mean()
        counts = grouped.size()
        for b in range(1, n_bins + 1):
            out.append({"method": method, "bin_upper": round(lo + b * width, 9),
                        "count": int(counts.get(b, 0)),
                        "mean_gain": float(means.get(b, np.nan))})
    return pd.DataFrame(out, columns=["method", "bin_upper", "count", "mean_gain"])


def cdf_table(df: pd.DataFrame) -> pd.DataFrame:
    """Empirical CDF of raw gains per method."""
    _require(df, ["method", "gain"], "cdf")
    out = []
    for method, sub in df.groupby("method", sort=True):
        g = np.sort(sub["gain"].to_numpy(dtype=float))
        cdf = np.arange(1, len(g) + 1) / len(g)
        out.extend({"method": method, "gain": float(gv), "cdf": float(cv)}
                   for gv, cv in zip(g, cdf))
    return pd.DataFrame(out, columns=["method", "gain", "cdf"])


def overhead_curve(traces: np.ndarray, n_values=None, method="airy-bs") -> pd.DataFrame:
    """Mean best-gain-so-far after n tested codewords, in flat sweep order.

    ``traces`` has shape (P receivers, K codewords) holding per-codeword
    gains in evaluation order; the curve is monotone by construction.
    """
    traces = np.atleast_2d(np.asarray(traces, dtype=float))
    k = traces.shape[1]
    if n_values is None:
        n_values = np.unique(np.geomspace(1, k, 64).astype(int))
    running = np.maximum.accumulate(traces, axis=1)
    rows = [{"method": method, "n": int(n), "mean_gain": float(running[:, n - 1].mean())}
            for n in n_values if 1 <= n <= k]
    return pd.DataFrame(rows, columns=["method", "n", "mean_gain"])


def height_sweep_table(df: pd.DataFrame) -> pd.DataFrame:
    """Mean gain per method per obstacle height."""
    _require(df, ["height", "method", "gain"], "height-sweep")
    g = (df.groupby(["method", "height"], sort=True)["gain"]
           .agg(["mean", "size"]).reset_index())
    return g.rename(columns={"mean": "mean_gain", "size": "count"})[
        ["method", "height", "count", "mean_gain"]]


def position_heatmap_table(df: pd.DataFrame) -> pd.DataFrame:
    """Mean gain per method per obstacle center position (cx, cy)."""
    _require(df, ["cx", "cy", "method", "gain"], "position-heatmap")
    g = (df.groupby(["method", "cx", "cy"], sort=True)["gain"]
           .agg(["mean", "size"]).reset_index())
    return g.rename(columns={"mean": "mean_gain", "size": "count"})[
        ["method", "cx", "cy", "count", "mean_gain"]]


def evaluate(df: pd.DataFrame, metric: str, config=None, traces=None) -> pd.DataFrame:
    """Dispatch a metric name to its table builder.

    Distance metrics need the scenario config for the obstacle geometry
    and only consider occluded receivers (blockage ratio > 0).
    """
    if metric not in METRICS:
        raise ParameterError(f"unknown metric {metric!r}; choose from {METRICS}")
    if metric == "blockage-bins":
        _require(df, ["blockage_ratio"], metric)
        return bin_by(df, "blockage_ratio", domain=(0.0, 1.0))
    if metric == "horizontal-bins":
        _require(df, ["x_r", "blockage_ratio"], metric)
        if config is None or not config.obstacles:
            raise ConfigMismatchError("horizontal-bins needs a config with an obstacle")
        edge = config.obstacles[0].x_range[1]
        sub = df[df["blockage_ratio"] > 0].copy()
        sub["h_dist"] = sub["x_r"] - edge
        return bin_by(sub, "h_dist")
    if metric == "vertical-bins":
        _require(df, ["y_r", "blockage_ratio"], metric)
        if config is None or not config.obstacles:
            raise ConfigMismatchError("vertical-bins needs a config with an obstacle")
        cy = config.obstacles[0].cy
        sub = df[df["blockage_ratio"] > 0].copy()
        sub["v_dist"] = (sub["y_r"] - cy).abs()
        return bin_by(sub, "v_dist")
    if metric == "cdf":
        return cdf_table(df)
    if metric == "height-sweep":
        return height_sweep_table(df)
    if metric == "position-heatmap":
        return position_heatmap_table(df)
    if traces is None:
        raise ConfigMismatchError("overhead-curve needs per-codeword gain traces")
    return overhead_curve(traces)


def write_table(df: pd.DataFrame, path):
    """Deterministic CSV emission (fixed float format, LF line endings)."""
    df.to_csv(path, index=False, float_format="%.10g", lineterminator="\n")
