"""Sequential conditional quantile transport (Causal IF pre-processing).

Variables are moved one at a time in the order Z, W, Y. For each variable
``V``, rows of the ``x0`` group are mapped by

    V -> Q_target(F_source(V | x0, cell(pa)) | cell(tau(pa)))

where ``tau(pa)`` are the parents' already-transported values. Outside the
business necessity set the target law is the ``x1`` group's; inside it the
target is the ``x0`` group's own law, so only the parents' shift propagates.
``x1`` rows are never changed.

Continuous variables with parents are optionally residualized first: a
linear regression on the parents is fitted separately in the source and
target groups, residuals are quantile-matched within cells, and the target
regression is evaluated at ``tau(pa)``. This keeps the transport defined
when the groups' parent supports do not overlap.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..estimation.nuisance import design, fit_regression
from ..kernels import ecdf_lookup


class TransportError(ValueError):
    pass


@dataclass(frozen=True)
class CausalIFConfig:
    n_bins: int = 10
    max_levels: int = 20
    max_cells: int = 1000
    jitter: bool = False
    residualize: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_bins < 1 or self.max_levels < 1 or self.max_cells < 1:
            raise ValueError("n_bins, max_levels and max_cells must be positive")


@dataclass
class VariableMap:
    """Transport of one variable.

    ``source_tables`` and ``target_tables`` map a cell key to the sorted
    values (residuals when ``residualized``) inside that cell; a source row
    at quantile ``u`` of its source cell is sent to quantile ``u`` of its
    target cell.
    """

    variable: str
    mode: str
    parents: tuple
    discrete: bool
    residualized: bool
    cell_mode: str
    source_tables: dict
    target_tables: dict
    fallback_rows: int = 0
    target_coef: np.ndarray | None = None
    source_coef: np.ndarray | None = None

    def cell_map(self, src_key, tgt_key, grid):
        """Evaluate the monotone map from one source cell to one target cell."""
        s = self.source_tables[src_key]
        t = self.target_tables[tgt_key]
        grid = np.asarray(grid, dtype=float)
        pos = np.searchsorted(s, grid, side="right")
        u = np.clip((pos - 0.5) / len(s), 0.5 / len(s), 1 - 0.5 / len(s))
        offsets = np.array([0, len(t)])
        return ecdf_lookup(u, np.zeros(len(u), dtype=np.int64), offsets, t, not self.discrete)


@dataclass
class TransportMap:
    order: tuple
    maps: dict = field(default_factory=dict)

    @property
    def fallback_rows(self):
        return sum(m.fallback_rows for m in self.maps.values())

    def summary(self):
        return {v: {"mode": m.mode, "parents": list(m.parents), "discrete": m.discrete,
                    "residualized": m.residualized, "cell_mode": m.cell_mode,
                    "source_cells": len(m.source_tables), "target_cells": len(m.target_tables),
                    "fallback_rows": m.fallback_rows}
                for v, m in self.maps.items()}


def _is_discrete(col, max_levels):
    u = np.unique(col)
    return len(u) <= max_levels and bool(np.all(np.mod(u, 1) == 0))


class _Cells:
    """Shared cell function over parent values."""

    def __init__(self, parents_orig, cfg, index_fit=None):
        self.cfg = cfg
        self.specs = []
        sizes = []
        for col in parents_orig.T:
            if _is_discrete(col, cfg.max_levels):
                levels = np.unique(col)
                self.specs.append(("levels", levels))
                sizes.append(len(levels))
            else:
                edges = np.unique(np.quantile(col, np.linspace(0, 1, cfg.n_bins + 1)[1:-1]))
                self.specs.append(("bins", edges))
                sizes.append(len(edges) + 1)
        self.mode = "parents"
        if int(np.prod(sizes, dtype=float)) > cfg.max_cells:
            # too many joint cells: condition on a binned linear index instead
            self.mode = "index"
            self.index_fit = index_fit
            idx = index_fit(parents_orig)
            self.specs = [("bins", np.unique(np.quantile(
                idx, np.linspace(0, 1, cfg.n_bins + 1)[1:-1])))]

    def codes(self, parents):
        if self.mode == "index":
            parents = self.index_fit(parents).reshape(-1, 1)
        out = np.zeros(parents.shape, dtype=np.int64)
        for j, (kind, arr) in enumerate(self.specs):
            col = parents[:, j]
            if kind == "levels":
                k = np.clip(np.searchsorted(arr, col), 0, len(arr) - 1)
                left = np.clip(k - 1, 0, len(arr) - 1)
                use_left = np.abs(col - arr[left]) < np.abs(col - arr[k])
                out[:, j] = np.where(use_left, left, k)
            else:
                out[:, j] = np.searchsorted(arr, col, side="right")
        return out


def _source_quantiles(vals, cells, tiebreak):
    """Mid-rank quantile of each value within its cell."""
    n = len(vals)
    if n == 0:
        return np.empty(0)
    ids = _row_ids(cells)
    order = np.lexsort((tiebreak, vals, ids))
    sorted_ids = ids[order]
    starts = np.flatnonzero(np.r_[True, sorted_ids[1:] != sorted_ids[:-1]])
    counts = np.diff(np.r_[starts, n])
    grp = np.repeat(np.arange(len(starts)), counts)
    pos = np.arange(n) - starts[grp]
    u = np.empty(n)
    u[order] = (pos + 0.5) / counts[grp]
    return u


def _row_ids(codes):
    if codes.shape[1] == 0:
        return np.zeros(codes.shape[0], dtype=np.int64)
    _, inv = np.unique(codes, axis=0, return_inverse=True)
    return inv.ravel().astype(np.int64)


def _tables(vals, codes):
    out = {}
    if len(vals) == 0:
        return out
    keys, inv = np.unique(codes, axis=0, return_inverse=True)
    inv = inv.ravel()
    for i, key in enumerate(keys):
        out[tuple(int(k) for k in key)] = np.sort(vals[inv == i])
    return out


def transport_variable(name, v_orig, parents_orig, parents_cur, src, tgt, cfg, rng,
                       mode="cross"):
    """Transport ``v_orig[src]``; returns (new values for src rows, VariableMap)."""
    discrete = _is_discrete(v_orig, cfg.max_levels)
    n = len(v_orig)
    k = parents_orig.shape[1]
    resid = cfg.residualize and not discrete and k > 0
    loc_src = np.zeros(len(src))
    loc_out = np.zeros(len(src))
    vs, vt = v_orig[src], v_orig[tgt]
    beta_s = beta_t = None
    if resid or k > 0:
        F_all = design(n, parents_orig)
        beta_t = fit_regression(F_all[tgt], v_orig[tgt])
        beta_s = fit_regression(F_all[src], v_orig[src])
    if resid:
        loc_src = F_all[src] @ beta_s
        loc_out = design(len(src), parents_cur[src]) @ beta_t
        vs = vs - loc_src
        vt = vt - F_all[tgt] @ beta_t

    def index_fit(p):
        return design(len(p), p) @ beta_t

    cells = _Cells(parents_orig[np.r_[src, tgt]], cfg, index_fit if k else None)
    src_codes = cells.codes(parents_orig[src]) if k else np.zeros((len(src), 0), np.int64)
    tgt_codes = cells.codes(parents_orig[tgt]) if k else np.zeros((len(tgt), 0), np.int64)
    qry_codes = cells.codes(parents_cur[src]) if k else np.zeros((len(src), 0), np.int64)
    tiebreak = rng.random(len(src)) if cfg.jitter else np.arange(len(src), dtype=float)
    u = _source_quantiles(vs, src_codes, tiebreak)

    tgt_tables = _tables(vt, tgt_codes)
    if not tgt_tables:
        raise TransportError(f"no target rows to transport {name} onto")
    keys = list(tgt_tables)
    key_arr = np.array(keys, dtype=np.int64).reshape(len(keys), -1)
    offsets = np.zeros(len(keys) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum([len(tgt_tables[kk]) for kk in keys])
    flat = np.concatenate([tgt_tables[kk] for kk in keys])
    lookup = {kk: i for i, kk in enumerate(keys)}
    q_keys, q_inv = np.unique(qry_codes, axis=0, return_inverse=True)
    q_inv = q_inv.ravel()
    cell_of_key = np.empty(len(q_keys), dtype=np.int64)
    fallback = 0
    for i, qk in enumerate(q_keys):
        t = tuple(int(x) for x in qk)
        if t in lookup:
            cell_of_key[i] = lookup[t]
        else:
            dist = np.abs(key_arr - qk).sum(axis=1)
            cell_of_key[i] = int(np.argmin(dist))
            fallback += int(np.sum(q_inv == i))
    out = ecdf_lookup(u, cell_of_key[q_inv], offsets, flat, not discrete) + loc_out
    vmap = VariableMap(name, mode, (), discrete, resid, cells.mode if k else "none",
                       _tables(vs, src_codes), tgt_tables, fallback, beta_t, beta_s)
    return out, vmap


def causal_if(dataset, sfm, bn=(), config=None, x0=0.0, x1=1.0):
    """Transport the ``x0`` group's Z, W and Y onto the ``x1`` group.

    Parameters
    ----------
    dataset : Dataset
    sfm : SfmProjection
    bn : iterable of {"Z", "W"}
        Business necessity set: these groups keep the ``x0`` law.
    config : CausalIFConfig

    Returns
    -------
    (Dataset, TransportMap)
    """
    from ..cookbook import parse_bn

    bn = parse_bn(bn)
    cfg = config or CausalIFConfig()
    X = dataset.column(sfm.x)
    src = np.flatnonzero(X == x0)
    tgt1 = np.flatnonzero(X == x1)
    if len(src) == 0 or len(tgt1) == 0:
        raise TransportError("both attribute groups must be non-empty")
    rng = np.random.default_rng(cfg.seed)
    order = (*sfm.z, *sfm.w, sfm.y)
    orig = {v: dataset.column(v).copy() for v in order}
    cur = {v: orig[v].copy() for v in order}
    tmap = TransportMap(order)
    for i, v in enumerate(order):
        parents = order[:i]
        group = sfm.group_of(v)
        within = group in bn
        tgt = src if within else tgt1
        p_orig = np.column_stack([orig[p] for p in parents]) if parents else np.empty((len(X), 0))
        p_cur = np.column_stack([cur[p] for p in parents]) if parents else np.empty((len(X), 0))
        new, vmap = transport_variable(v, orig[v], p_orig, p_cur, src, tgt, cfg, rng,
                                       "within" if within else "cross")
        vmap.parents = parents
        cur[v][src] = new
        tmap.maps[v] = vmap
    out = dataset
    for v in order:
        out = out.with_column(v, cur[v])
    return out, tmap
