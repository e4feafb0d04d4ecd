"""Hypothesis-test battery for disparate treatment and disparate impact.

The battery tests the x-specific symmetric direct and indirect effects and
the x-specific spurious effect. Effects routed through the business
necessity set are not tested. When a population-level test is not
rejected, per-cell z-specific follow-ups are run.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import spearmanr

from .diagram import IDENTIFIABLE, measure_status
from .estimation import EstimatorConfig, bootstrap_many
from .oracle import Eq, Event, MeasureSpec

REJECTED = "rejected"
NOT_REJECTED = "not-rejected"
SKIPPED_BN = "skipped-BN"
SKIPPED_NONID = "skipped-nonID"
MIN_FOLLOWUP_CELL = 200


class CookbookError(ValueError):
    pass


def parse_bn(spec):
    """Business necessity set from ``""``, ``"Z"``, ``"W"``, ``"ZW"`` or ``"Z,W"``."""
    if spec is None:
        return frozenset()
    if isinstance(spec, str):
        items = {c for c in spec.upper() if c not in ", "}
    else:
        items = {str(s).upper() for s in spec}
    if not items <= {"Z", "W"}:
        raise CookbookError(f"business necessity set must be a subset of {{Z, W}}, got {spec!r}")
    return frozenset(items)


@dataclass
class Hypothesis:
    name: str
    spec: MeasureSpec
    decision: str
    estimate: object = None
    note: str = ""

    def to_record(self):
        rec = {"hypothesis": self.name, "kind": self.spec.kind,
               "x0": float(self.spec.x0), "x1": float(self.spec.x1),
               "event": self.spec.event.describe() if self.spec.event else "default",
               "decision": self.decision, "note": self.note}
        rec["estimate"] = self.estimate.to_record() if self.estimate is not None else None
        return rec


@dataclass
class CookbookReport:
    hypotheses: list
    followups: list
    bn: frozenset
    alpha: float
    flags: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def entry(self, name):
        for h in self.hypotheses:
            if h.name == name:
                return h
        raise KeyError(name)

    def to_record(self):
        return {
            "bn": sorted(self.bn), "alpha": self.alpha,
            "hypotheses": [h.to_record() for h in self.hypotheses],
            "followups": [h.to_record() for h in self.followups],
            "flags": dict(self.flags), "notes": list(self.notes),
        }

    def summary(self):
        lines = [f"business necessity set: {{{', '.join(sorted(self.bn))}}}",
                 f"decision rule: {1 - self.alpha:.0%} bootstrap CI excludes 0"]
        for h in self.hypotheses + self.followups:
            if h.estimate is not None:
                e = h.estimate
                lines.append(f"{h.name:<28s} {e.value:+.4f}  CI [{e.ci_lo:+.4f}, {e.ci_hi:+.4f}]"
                             f"  {h.decision}")
            else:
                lines.append(f"{h.name:<28s} {h.decision}: {h.note}")
        lines.append("disparate treatment: " + ("evidence found" if self.flags.get(
            "disparate_treatment") else "no evidence"))
        lines.append("disparate impact: " + ("evidence found" if self.flags.get(
            "disparate_impact") else "no evidence"))
        lines += [f"note: {n}" for n in self.notes]
        return "\n".join(lines) + "\n"


def _decide(est):
    return REJECTED if est.excludes_zero() else NOT_REJECTED


def _status(sfm, spec):
    ev = spec.event.variables if spec.event is not None else ()
    return measure_status(sfm, spec.kind, ev)


def _discrete_z_cells(dataset, sfm, max_levels=20):
    """``[(Event, count)]`` over observed joint Z values, or None if Z is continuous."""
    if not sfm.z:
        return None
    Z = dataset.matrix(list(sfm.z))
    for j in range(Z.shape[1]):
        u = np.unique(Z[:, j])
        if len(u) > max_levels or np.any(np.mod(u, 1) != 0):
            return None
    vals, counts = np.unique(Z, axis=0, return_counts=True)
    out = []
    for row, cnt in zip(vals, counts):
        out.append((Event(tuple(Eq(z, float(v)) for z, v in zip(sfm.z, row))), int(cnt)))
    return out


def run_cookbook(dataset, sfm, bn=(), config=None, alpha=0.05, bonferroni=False,
                 z_cells=None, x0=0.0, x1=1.0):
    """Run the battery and return a ``CookbookReport``.

    Parameters
    ----------
    dataset : Dataset
    sfm : SfmProjection
    bn : str or iterable
        Business necessity set, a subset of {"Z", "W"}.
    config : EstimatorConfig
        Estimator and bootstrap settings; ``ci_level`` is overridden by
        ``1 - alpha``.
    bonferroni : bool
        Divide ``alpha`` by the number of z follow-ups in that battery.
    z_cells : list of Event, optional
        Cells for follow-ups when Z is continuous.
    """
    bn = parse_bn(bn)
    config = (config or EstimatorConfig()).with_(ci_level=1 - alpha)
    hyps = [
        Hypothesis("x-DE^sym(y|x0)", MeasureSpec("xDEsym", x0, x1), ""),
        Hypothesis("x-IE^sym(y|x0)", MeasureSpec("xIEsym", x0, x1), ""),
        Hypothesis("x-SE_{x1,x0}(y)", MeasureSpec("xSE", x1, x0), ""),
    ]
    in_bn = {"x-IE^sym(y|x0)": "W", "x-SE_{x1,x0}(y)": "Z"}
    to_test = []
    for h in hyps:
        group = in_bn.get(h.name)
        if group is not None and group in bn:
            h.decision = SKIPPED_BN
            h.note = f"{group} is in the business necessity set"
            continue
        st, why = _status(sfm, h.spec)
        if st != IDENTIFIABLE:
            h.decision = SKIPPED_NONID
            h.note = f"{st}: " + ", ".join(why)
            continue
        to_test.append(h)
    if to_test:
        ests = bootstrap_many(dataset, sfm, [h.spec for h in to_test], config)
        for h, e in zip(to_test, ests):
            h.estimate = e
            h.decision = _decide(e)

    notes, followups = [], []
    de_h, ie_h = hyps[0], hyps[1]
    battery = []
    if de_h.decision == NOT_REJECTED:
        battery.append(("DE", "zDE"))
    if ie_h.decision == NOT_REJECTED:
        battery.append(("IE", "zIE"))
    if battery:
        cells = None
        if z_cells is not None:
            cells = [(ev, None) for ev in z_cells]
        else:
            found = _discrete_z_cells(dataset, sfm)
            if found is None and sfm.z:
                notes.append("z-specific follow-ups skipped: Z is continuous and no cells given")
            elif found is not None:
                cells = [(ev, c) for ev, c in found if c >= MIN_FOLLOWUP_CELL]
                dropped = len(found) - len(cells)
                if dropped:
                    notes.append(f"{dropped} z cells below {MIN_FOLLOWUP_CELL} rows not tested")
        if cells:
            for label, kind in battery:
                specs = [MeasureSpec(kind, x0, x1, event=ev) for ev, _ in cells]
                m = len(specs)
                a = alpha / m if bonferroni else alpha
                cfg = config.with_(ci_level=1 - a)
                runnable = []
                for s in specs:
                    st, why = _status(sfm, s)
                    if st != IDENTIFIABLE:
                        followups.append(Hypothesis(f"z-{label}[{s.event.describe()}]", s,
                                                    SKIPPED_NONID, None, ", ".join(why)))
                    else:
                        runnable.append(s)
                if runnable:
                    for s, e in zip(runnable, bootstrap_many(dataset, sfm, runnable, cfg)):
                        followups.append(Hypothesis(f"z-{label}[{s.event.describe()}]", s,
                                                    _decide(e), e))
                notes.append(
                    f"z-{label} follow-up battery runs {m} tests at level "
                    f"{a:.4g}" + (" (Bonferroni)" if bonferroni else " with no multiplicity correction"))

    def rejected(h):
        return h.decision == REJECTED

    treat = rejected(de_h) or any(rejected(f) for f in followups if f.spec.kind == "zDE")
    impact = (rejected(ie_h) or rejected(hyps[2])
              or any(rejected(f) for f in followups if f.spec.kind == "zIE"))
    flags = {"disparate_treatment": bool(treat), "disparate_impact": bool(impact)}
    return CookbookReport(hyps, followups, bn, alpha, flags, notes)


@dataclass
class TrackingSeries:
    """Per-time-point estimates of the three cookbook measures."""

    times: list
    series: dict

    def to_record(self):
        return {"times": list(self.times),
                "series": {k: [e.to_record() for e in v] for k, v in self.series.items()}}

    def plot_rows(self):
        """``(measure, t, value, stderr)`` rows for plotting."""
        rows = []
        for k, v in self.series.items():
            for t, e in zip(self.times, v):
                rows.append((k, t, e.value, e.stderr))
        return rows

    def trend(self, measure="xDEsym"):
        """Spearman correlation of a measure's point estimates with time."""
        vals = [e.value for e in self.series[measure]]
        if len(set(vals)) < 2:
            return 0.0
        return float(spearmanr(self.times, vals)[0])


def track_over_time(datasets, sfm, config=None, times=None, x0=0.0, x1=1.0):
    """Estimate (x-DE^sym, x-IE^sym, x-SE) for each dataset in an ordered sequence."""
    datasets = list(datasets)
    if len(datasets) < 2:
        raise CookbookError("tracking needs at least two datasets")
    cols = datasets[0].columns
    for i, d in enumerate(datasets[1:], start=1):
        if d.columns != cols:
            raise CookbookError(f"dataset {i} has columns {list(d.columns)}, expected {list(cols)}")
    times = list(range(len(datasets))) if times is None else list(times)
    if len(times) != len(datasets):
        raise CookbookError("times and datasets differ in length")
    specs = [MeasureSpec("xDEsym", x0, x1), MeasureSpec("xIEsym", x0, x1),
             MeasureSpec("xSE", x1, x0)]
    series = {s.kind: [] for s in specs}
    for d in datasets:
        for s, e in zip(specs, bootstrap_many(d, sfm, specs, config)):
            series[s.kind].append(e)
    return TrackingSeries(times, series)
