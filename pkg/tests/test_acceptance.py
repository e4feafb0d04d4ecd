"""Acceptance checks, one test group per criterion.

Every check records a PASS/FAIL line that is printed in the terminal
summary. Checks against published values that the scenario equations do
not reproduce run as strict xfail next to the enforced oracle-locked check.
"""
import time
import warnings

import numpy as np
import pytest
from scipy import stats

from cfakit.cookbook import REJECTED, run_cookbook, track_over_time
from cfakit.estimation import (
    EstimatorConfig,
    estimate_measure,
    estimate_measures,
    plugin_discrete,
)
from cfakit.dataset import Dataset
from cfakit.diagram import SfmProjection
from cfakit.fairpred import (
    CausalIFConfig,
    audit_predictor,
    causal_if,
    fpt_experiment,
    inproc_fair_fit,
    tv_only_fit,
)
from cfakit.oracle import MeasureSpec, World, event, verify_map_relations
from cfakit.scm import SCENARIOS, builtin_scenario, sample_observational

import oracles
from conftest import sfm_of

pytestmark = pytest.mark.slow


# ------------------------------------------------------------------ 1
def test_c1_berkeley_ground_truth(record):
    t0 = time.perf_counter()
    m = builtin_scenario("berkeley", alpha=0.0, beta=0.7, lam=0.2)
    w = World(m, 10**6, seed=1)
    tv = w.measure(MeasureSpec("TV")).value
    joint = w.measure(MeasureSpec("JointCtf")).value
    dt = time.perf_counter() - t0
    ok_tv = record("1", "TV = 0.140 +- 0.005", abs(tv - 0.140) <= 0.005, f"{tv:.4f}")
    ok_j = record("1", "P(y_x1, y_x0) = 0.450 +- 0.005", abs(joint - 0.450) <= 0.005,
                  f"{joint:.4f}")
    ok_t = record("1", "runtime < 30 s", dt < 30, f"{dt:.1f} s")
    assert ok_tv and ok_j and ok_t


# ------------------------------------------------------------------ 2
def test_c2_nde_cancellation(record):
    m = builtin_scenario("ndefail")
    w = World(m, 10**6, seed=2)
    nde = w.measure(MeasureSpec("NDE")).value
    zde = w.measure(MeasureSpec("zDE", event=event(Z=0))).value
    xde = w.measure(MeasureSpec("xDE", event=event(X=0))).value
    oks = [
        record("2", "NDE in [-0.01, 0.01]", abs(nde) <= 0.01, f"{nde:.4f}"),
        record("2", "zDE(Z=0) = 0.200 +- 0.01", abs(zde - 0.2) <= 0.01, f"{zde:.4f}"),
        record("2", "xDE(y|x0) = 0.036 +- 0.005", abs(xde - 0.036) <= 0.005, f"{xde:.4f}"),
    ]
    assert all(oks)


# ------------------------------------------------------------------ 3
def _hiring4_triple():
    m = builtin_scenario("hiring4")
    w = World(m, 10**6, seed=3)
    xde = w.measure(MeasureSpec("xDE", event=event(X=0))).value
    xie = w.measure(MeasureSpec("xIE", 1.0, 0.0, event(X=0))).value
    xse = w.measure(MeasureSpec("xSE", 1.0, 0.0)).value
    tv = w.measure(MeasureSpec("TV")).value
    return xde, xie, xse, tv


@pytest.fixture(scope="module")
def hiring4_triple():
    return _hiring4_triple()


def test_c3_hiring4_decomposition_oracle_locked(record, hiring4_triple):
    xde, xie, xse, tv = hiring4_triple
    ref = oracles.FROZEN
    target = (0.0, ref["hiring4_xie_x1x0_given_x0"], ref["hiring4_xse_x1x0"])
    got = (xde, xie, xse)
    ok = all(abs(g - t) <= 0.01 for g, t in zip(got, target))
    record("3", "(xDE, xIE, xSE) = (0, -0.1504, +0.1504) +- 0.01 [quadrature]", ok,
           f"({xde:+.4f}, {xie:+.4f}, {xse:+.4f})")
    ok_tv = record("3", "TV ~ 0 (+- 0.01)", abs(tv) <= 0.01, f"{tv:+.4f}")
    # tv = de - ie - se must hold for the triple itself
    ok_id = record("3", "tv = de - ie - se", abs(tv - (xde - xie - xse)) < 5e-3,
                   f"residual {tv - (xde - xie - xse):+.2e}")
    assert ok and ok_tv and ok_id


@pytest.mark.xfail(strict=True, reason="published triple has flipped signs; see decisions ledger")
def test_c3_hiring4_decomposition_published(record, hiring4_triple):
    xde, xie, xse, _ = hiring4_triple
    target = (0.0, 0.14, -0.14)
    ok = all(abs(g - t) <= 0.01 for g, t in zip((xde, xie, xse), target))
    record("3", "(xDE, xIE, xSE) = (0.00, 0.14, -0.14) +- 0.01 [published]", ok,
           f"({xde:+.4f}, {xie:+.4f}, {xse:+.4f})")
    assert ok


# ------------------------------------------------------------------ 4
def test_c4_nonid_nie(record):
    vals = {}
    for sid, ref in (("nonid_m1", 0.28), ("nonid_m2", 0.04)):
        nie = World(builtin_scenario(sid), 10**6, seed=4).measure(MeasureSpec("NIE")).value
        vals[sid] = nie
        record("4", f"NIE on {sid} = {ref} +- 0.01", abs(nie - ref) <= 0.01, f"{nie:.4f}")
    assert abs(vals["nonid_m1"] - 0.28) <= 0.01 and abs(vals["nonid_m2"] - 0.04) <= 0.01


def _cell_counts(sid, seed):
    d = sample_observational(builtin_scenario(sid), 10**5, seed)
    code = (d.column("X") * 4 + d.column("W") * 2 + d.column("Y")).astype(int)
    return np.bincount(code, minlength=8)


@pytest.mark.xfail(strict=True, reason="the printed pair differs in P(y|x,w); see decisions ledger")
def test_c4_nonid_observational_equivalence(record):
    table = np.vstack([_cell_counts("nonid_m1", 41), _cell_counts("nonid_m2", 42)])
    p = stats.chi2_contingency(table)[1]
    ok = record("4", "observational laws indistinguishable (chi-square p > 0.01)", p > 0.01,
                f"p = {p:.3g}")
    assert ok


# ------------------------------------------------------------------ 5
def test_c5_decomposition_identities(record):
    worst, worst_sid, worst_adm = 0.0, "", []
    for sid in SCENARIOS:
        rep = verify_map_relations(builtin_scenario(sid), n=10**5, seed=5)
        if rep.max_residual > worst:
            worst, worst_sid = rep.max_residual, sid
        if not rep.admissible:
            worst_adm.append(sid)
    ok = record("5", f"max shared-sample residual < 1e-3 over {len(SCENARIOS)} scenarios",
                worst < 1e-3, f"{worst:.2e} ({worst_sid})")
    ok_adm = record("5", "admissibility checks", not worst_adm,
                    ", ".join(worst_adm) or "all admissible")
    assert ok and ok_adm


# ------------------------------------------------------------------ 6
C6_KINDS = ("TE", "NDE", "NIE", "xDE", "xIE", "xSE")


@pytest.mark.parametrize("sid", ["berkeley", "ndefail"])
def test_c6_dml_fidelity(record, sid):
    m = builtin_scenario(sid)
    specs = [MeasureSpec(k) for k in C6_KINDS]
    data = sample_observational(m, 10**5, 6)
    ests = estimate_measures(data, sfm_of(m), specs, EstimatorConfig(method="DML", seed=6))
    w = World(m, 10**6, seed=60)
    errs = {s.kind: abs(e.value - w.measure(s).value) for s, e in zip(specs, ests)}
    worst = max(errs, key=errs.get)
    ok = record("6", f"DML within 0.02 of oracle on {sid}", errs[worst] <= 0.02,
                f"worst {worst} {errs[worst]:.4f}")
    assert ok


def _brute_force(rows):
    """Direct frequency-table formulas for an (X, W, Y) dataset."""
    rows = [tuple(r) for r in rows]
    n = len(rows)

    def p(pred):
        return sum(1 for r in rows if pred(r)) / n

    def py(x, w):
        return p(lambda r: r == (x, w, 1)) / p(lambda r: r[:2] == (x, w))

    def pw(w, x):
        return p(lambda r: r[:2] == (x, w)) / p(lambda r: r[0] == x)

    def ey(x, xw):
        return sum(py(x, w) * pw(w, xw) for w in (0, 1))

    # without Z every counterfactual reduces to the mediation formula
    te = ey(1, 1) - ey(0, 0)
    return {
        "TV": p(lambda r: r[0] == 1 and r[2] == 1) / p(lambda r: r[0] == 1)
        - p(lambda r: r[0] == 0 and r[2] == 1) / p(lambda r: r[0] == 0),
        "TE": te,
        "NDE": ey(1, 0) - ey(0, 0),
        "NIE": ey(0, 1) - ey(0, 0),
        "xDE": ey(1, 0) - ey(0, 0),
        "xIE": ey(0, 1) - ey(0, 0),
        "xSE": 0.0,
    }


def test_c6_plugin_matches_brute_force(record):
    counts = {(0, 0, 0): 7, (0, 0, 1): 3, (0, 1, 0): 2, (0, 1, 1): 5,
              (1, 0, 0): 4, (1, 0, 1): 6, (1, 1, 0): 1, (1, 1, 1): 9}
    rows = [k for k, c in counts.items() for _ in range(c)]
    data = Dataset(("X", "W", "Y"), rows)
    sfm = SfmProjection("X", "Y", (), ("W",))
    ref = _brute_force(rows)
    errs = {k: abs(plugin_discrete(data, sfm, MeasureSpec(k)).value - ref[k])
            for k in ("TV", "TE", "NDE", "NIE", "xDE", "xIE", "xSE")}
    worst = max(errs.values())
    ok = record("6", "plug-in equals brute-force tables on 8 cells (1e-12)", worst <= 1e-12,
                f"max diff {worst:.1e}")
    assert ok


# ------------------------------------------------------------------ 7
def test_c7_cookbook_size(record):
    m = builtin_scenario("null")
    sfm = sfm_of(m)
    cfg = EstimatorConfig(method="PluginDiscrete", bootstrap=200)
    reps = 200
    rej = np.zeros(3)
    for r in range(reps):
        d = sample_observational(m, 2000, 1000 + r)
        rep = run_cookbook(d, sfm, "", cfg.with_(seed=r), alpha=0.05)
        rej += [h.decision == REJECTED for h in rep.hypotheses]
    rate = rej / reps
    ok = record("7", "null rejection rate <= 0.10 for each hypothesis", np.all(rate <= 0.10),
                np.array2string(rate, precision=3))
    assert ok


def test_c7_cookbook_power(record):
    m = builtin_scenario("null", de=0.1)
    sfm = sfm_of(m)
    cfg = EstimatorConfig(method="PluginDiscrete", bootstrap=200)
    reps = 50
    hits = 0
    for r in range(reps):
        d = sample_observational(m, 10**4, 5000 + r)
        rep = run_cookbook(d, sfm, "", cfg.with_(seed=r), alpha=0.05)
        hits += rep.hypotheses[0].decision == REJECTED
    ok = record("7", "DE rejects in >= 90% with direct effect 0.1, n = 1e4", hits / reps >= 0.9,
                f"{hits}/{reps}")
    assert ok


# ------------------------------------------------------------------ 8
def test_c8_fair_prediction_theorem(record):
    t0 = time.perf_counter()
    eps = (0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0)
    curve = fpt_experiment(5, 5, 500, 10**5, eps, seed=8, threads=4)
    dt = time.perf_counter() - t0
    p01 = curve.probability[0]
    ok_p = record("8", "P(0.01-compliant) < 0.25", p01 < 0.25, f"{p01:.3f} over 500 SCMs")
    mono = bool(np.all(np.diff(curve.probability) >= 0))
    ok_m = record("8", "compliance curve nondecreasing in eps", mono,
                  " ".join(f"{p:.2f}" for p in curve.probability))
    ok_t = record("8", "runtime < 15 min", dt < 900, f"{dt:.0f} s")
    assert ok_p and ok_m and ok_t


# ------------------------------------------------------------------ 9
def test_c9_inprocessing(record):
    cfg = EstimatorConfig(method="DR")
    worst, violated = 0.0, 0
    seeds = range(20)
    for s in seeds:
        m = builtin_scenario("random_linear", seed=s)
        sfm = sfm_of(m)
        d = sample_observational(m, 10**5, 900 + s)
        fair = audit_predictor(d, inproc_fair_fit(d, sfm), sfm, cfg)
        naive = audit_predictor(d, tv_only_fit(d, sfm), sfm, cfg)
        worst = max(worst, *(abs(getattr(fair, k).value) for k in ("de_sym", "ie_sym", "se")))
        violated += max(abs(getattr(naive, k).value) for k in ("de_sym", "ie_sym", "se")) > 0.02
    ok_f = record("9", "in-processing: audited |x-DE^sym|, |x-IE^sym|, |x-SE| < 0.02",
                  worst < 0.02, f"worst {worst:.4f} over 20 seeds")
    ok_n = record("9", "TV-only fit violates on >= 75% of seeds", violated >= 15,
                  f"{violated}/20")
    assert ok_f and ok_n


# ------------------------------------------------------------------ 10
def test_c10_otfails(record):
    m = builtin_scenario("otfails")
    sfm = sfm_of(m)
    d = sample_observational(m, 10**5, 10)
    td, tmap = causal_if(d, sfm, "", CausalIFConfig(seed=10))
    nie = estimate_measure(td, sfm, MeasureSpec("NIE"), EstimatorConfig(method="DR")).value
    ok_n = record("10", "OtFails: |NIE| of transformed Y < 0.02", abs(nie) < 0.02,
                  f"{nie:+.4f}")
    ref, _, _ = oracles.otfails_joint_ot_nie()
    ok_r = record("10", "joint-OT reference transport reproduces NIE = -1/8",
                  abs(ref + 0.125) < 1e-9, f"{ref:+.6f}")
    assert ok_n and ok_r


@pytest.fixture(scope="module")
def hiring4_transported():
    m = builtin_scenario("hiring4")
    sfm = sfm_of(m)
    d = sample_observational(m, 10**5, 11)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        td, tmap = causal_if(d, sfm, "Z", CausalIFConfig(jitter=True, seed=11))
        return audit_predictor(td, sfm.y, sfm, EstimatorConfig(method="DR")), tmap


def test_c10_hiring4_bn_z(record, hiring4_transported):
    rep, tmap = hiring4_transported
    ie = rep.ie_sym.value
    se = rep.se.value
    ok_ie = record("10", "HiringIV, BN={Z}: |x-IE^sym| < 0.02", abs(ie) < 0.02, f"{ie:+.4f}")
    ref = oracles.FROZEN["hiring4_xse_x1x0"]
    ok_se = record("10", "HiringIV, BN={Z}: x-SE kept at +0.1504 +- 0.02 [quadrature]",
                   abs(se - ref) <= 0.02, f"{se:+.4f} (fallback rows {tmap.fallback_rows})")
    assert ok_ie and ok_se


@pytest.mark.xfail(strict=True, reason="published x-SE sign is flipped; see decisions ledger")
def test_c10_hiring4_published_xse(record, hiring4_transported):
    se = hiring4_transported[0].se.value
    ok = record("10", "HiringIV, BN={Z}: x-SE = -0.14 +- 0.02 [published]",
                abs(se + 0.14) <= 0.02, f"{se:+.4f}")
    assert ok


# ------------------------------------------------------------------ 11
def test_c11_temporal_tracking(record):
    sfm = sfm_of(builtin_scenario("college_temporal", t=0))
    cfg = EstimatorConfig(method="PluginDiscrete", bootstrap=1)
    trends = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for seed in range(5):
            ds = [sample_observational(builtin_scenario("college_temporal", t=t), 10**4,
                                       seed * 100 + t) for t in range(10)]
            trends.append(track_over_time(ds, sfm, cfg).trend("xDEsym"))
    ok = record("11", "DE estimate decreases with t (Spearman < 0 for 5 seeds)",
                all(t < 0 for t in trends), " ".join(f"{t:+.2f}" for t in trends))
    assert ok
