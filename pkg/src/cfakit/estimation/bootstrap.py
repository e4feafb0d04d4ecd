"""Nonparametric bootstrap intervals with nuisances refit per resample."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .core import EmptyCellError, Estimator, EstimatorConfig, MeasureEstimate, _event_label, check_estimable
from .plugin import _Tables, plugin_discrete_many


def _replicate_values(dataset, sfm, specs, config, weights, tables=None):
    if config.method == "PluginDiscrete":
        return [e.value for e in plugin_discrete_many(dataset, sfm, specs, weights,
                                                      check=False, tables=tables)]
    eng = Estimator(dataset, sfm, config, weights)
    return [eng.estimate(s, check=False)[0] for s in specs]


def resample_weights(n, seed, b):
    """Multinomial resampling counts for replicate ``b`` (independent of threading)."""
    ss = np.random.SeedSequence([int(seed), 0xB0075, int(b)])
    idx = np.random.default_rng(ss).integers(0, n, n)
    return np.bincount(idx, minlength=n).astype(float)


def bootstrap_replicates(dataset, sfm, specs, config):
    """Array of shape (B, len(specs)) of replicate estimates."""
    n = len(dataset)
    tables = _Tables(dataset, sfm) if config.method == "PluginDiscrete" else None

    def one(b):
        try:
            return _replicate_values(dataset, sfm, specs, config,
                                     resample_weights(n, config.seed, b), tables)
        except EmptyCellError:
            return [np.nan] * len(specs)

    if config.threads > 1:
        with ThreadPoolExecutor(config.threads) as pool:
            rows = list(pool.map(one, range(config.bootstrap)))
    else:
        rows = [one(b) for b in range(config.bootstrap)]
    return np.asarray(rows, dtype=float).reshape(config.bootstrap, len(specs))


def bootstrap_many(dataset, sfm, specs, config=None):
    """Point estimates plus percentile intervals for several measures.

    The interval is widened if needed so that it always contains the point
    estimate.
    """
    config = config or EstimatorConfig()
    for s in specs:
        check_estimable(sfm, s)
    warn = []
    if config.method == "PluginDiscrete":
        point = _replicate_values(dataset, sfm, specs, config, None)
    else:
        eng = Estimator(dataset, sfm, config)
        point = [eng.estimate(s, check=False)[0] for s in specs]
        warn = list(eng.warnings)
    reps = bootstrap_replicates(dataset, sfm, specs, config)
    B = config.bootstrap
    if B == 1:
        warn.append("bootstrap B=1: interval is degenerate at the point estimate")
    elif B < 50:
        warn.append(f"bootstrap B={B} < 50: interval is unreliable")
    failed = int(np.isnan(reps[:, 0]).sum()) if len(specs) else 0
    if failed:
        warn.append(f"{failed} of {B} resamples hit an empty cell and were dropped")
    lo_q, hi_q = 0.5 - config.ci_level / 2, 0.5 + config.ci_level / 2
    out = []
    for j, s in enumerate(specs):
        v = float(point[j])
        col = reps[:, j]
        col = col[~np.isnan(col)]
        if len(col) < 2:
            se, lo, hi = 0.0, v, v
        else:
            se = float(col.std(ddof=1))
            lo, hi = (float(q) for q in np.quantile(col, [lo_q, hi_q]))
            lo, hi = min(lo, v), max(hi, v)
        out.append(MeasureEstimate(s.kind, v, se, lo, hi, config.method, len(dataset),
                                   float(s.x0), float(s.x1), _event_label(s), tuple(warn)))
    return out


def bootstrap_ci(dataset, sfm, spec, config=None):
    """Percentile bootstrap interval for one measure."""
    return bootstrap_many(dataset, sfm, [spec], config)[0]
