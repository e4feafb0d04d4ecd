import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfakit.estimation import EstimatorConfig, NotIdentifiableError
from cfakit.diagram import SfmProjection
from cfakit.fairpred import (
    CausalIFConfig,
    FairFitWarning,
    LinearPredictor,
    audit_predictor,
    causal_if,
    closed_form_projection,
    estimate_constraint_vectors,
    fpt_experiment,
    inproc_fair_fit,
    kkt_solve,
    moments,
    ols_fit,
    training_mse,
    tv_only_fit,
)
from cfakit.fairpred.linear import feature_matrix
from cfakit.oracle import MeasureSpec
from cfakit.estimation import estimate_measure
from cfakit.scm import builtin_scenario, sample_observational

from conftest import sfm_of


@pytest.fixture(scope="module")
def linear_case():
    m = builtin_scenario("random_linear", n_z=2, n_w=2, seed=3)
    return sample_observational(m, 50_000, 1), sfm_of(m)


# ------------------------------------------------------------ linear algebra
@st.composite
def quadratic_problems(draw):
    k = draw(st.integers(2, 6))
    seed = draw(st.integers(0, 2**31))
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(3 * k, k))
    S = A.T @ A / (3 * k) + 0.1 * np.eye(k)
    b = rng.normal(size=k)
    c = rng.normal(size=k)
    return S, b, c


@given(quadratic_problems())
@settings(max_examples=100, deadline=None)
def test_kkt_matches_closed_form(problem):
    S, b, c = problem
    a_kkt = kkt_solve(S, b, c[None, :])
    a_cf = closed_form_projection(S, b, c)
    np.testing.assert_allclose(a_kkt, a_cf, atol=1e-8)
    assert abs(c @ a_kkt) < 1e-8


@given(quadratic_problems(), st.integers(1, 3))
@settings(max_examples=100, deadline=None)
def test_constrained_loss_not_below_unconstrained(problem, m):
    S, b, _ = problem
    k = len(b)
    C = np.random.default_rng(k * 7 + m).normal(size=(min(m, k - 1), k))

    def loss(a):
        return a @ S @ a - 2 * a @ b

    free = kkt_solve(S, b, np.empty((0, k)))
    constrained = kkt_solve(S, b, C)
    assert loss(free) <= loss(constrained) + 1e-10
    np.testing.assert_allclose(C @ constrained, 0, atol=1e-8)


def test_collinear_constraints_warn():
    S, b = np.eye(3), np.ones(3)
    c = np.array([1.0, 0.0, 0.0])
    with pytest.warns(FairFitWarning):
        a = kkt_solve(S, b, np.vstack([c, 2 * c]))
    assert abs(a[0]) < 1e-6


# ---------------------------------------------------------- constraint vectors
@pytest.mark.parametrize("given_", ["x0", "x1"])
def test_constraint_vectors_sum_to_tv(linear_case, given_):
    data, sfm = linear_case
    cv = estimate_constraint_vectors(data, sfm, given=given_)
    np.testing.assert_allclose(cv.c1 + cv.c2 + cv.c3, cv.c, atol=1e-10)
    pred = ols_fit(data, sfm)
    tv, de, ie, se = cv.effects(pred.coef)
    yhat = pred.predict(data)
    X = data.column(sfm.x)
    assert tv == pytest.approx(yhat[X == 1].mean() - yhat[X == 0].mean(), abs=1e-10)
    assert tv == pytest.approx(de + ie + se, abs=1e-10)


def test_constraint_vectors_match_estimated_effects(linear_case):
    """Two routes to the predictor's effects: c-vectors and the DR estimator."""
    data, sfm = linear_case
    pred = ols_fit(data, sfm)
    cv = estimate_constraint_vectors(data, sfm, given="x0")
    _, de, ie, se = cv.effects(pred.coef)
    rep = audit_predictor(data, pred, sfm, EstimatorConfig(method="DR"))
    assert rep.de_sym.value == pytest.approx(de, abs=0.01)
    assert rep.ie_sym.value == pytest.approx(ie, abs=0.01)
    assert -rep.se.value == pytest.approx(se, abs=0.01)


def test_constraint_vectors_refuse_nonidentifiable(linear_case):
    data, sfm = linear_case
    bad = SfmProjection(sfm.x, sfm.y, sfm.z, sfm.w, {"WY"})
    with pytest.raises(NotIdentifiableError):
        estimate_constraint_vectors(data, bad)
    with pytest.raises(ValueError):
        estimate_constraint_vectors(data, sfm, given="x2")


# ---------------------------------------------------------------- fits
def test_tv_only_fit_zeroes_tv_only(linear_case):
    data, sfm = linear_case
    pred = tv_only_fit(data, sfm)
    cv = estimate_constraint_vectors(data, sfm)
    tv, de, ie, se = cv.effects(pred.coef)
    assert abs(tv) < 1e-8
    assert max(abs(de), abs(ie), abs(se)) > 0.02


def test_inproc_fit_zeroes_requested_effects(linear_case):
    data, sfm = linear_case
    cv = estimate_constraint_vectors(data, sfm, given="x0")
    for effects in (("DE",), ("DE", "IE"), ("DE", "IE", "SE")):
        pred = inproc_fair_fit(data, sfm, effects, vectors=cv)
        vals = dict(zip(("TV", "DE", "IE", "SE"), cv.effects(pred.coef)))
        for e in effects:
            assert abs(vals[e]) < 1e-8
    full = inproc_fair_fit(data, sfm)
    assert abs(cv.effects(full.coef)[0]) < 1e-8
    with pytest.raises(ValueError):
        inproc_fair_fit(data, sfm, ("XX",))


def test_mse_ordering(linear_case):
    data, sfm = linear_case
    free = training_mse(ols_fit(data, sfm), data, sfm)
    tv = training_mse(tv_only_fit(data, sfm), data, sfm)
    full = training_mse(inproc_fair_fit(data, sfm), data, sfm)
    assert free <= tv + 1e-12 and free <= full + 1e-12


def test_zero_constraint_vector_is_dropped_with_note():
    m = builtin_scenario("berkeley")
    data, sfm = sample_observational(m, 20_000, 2), sfm_of(m)
    pred = inproc_fair_fit(data, sfm)
    assert any("SE constraint vector is zero" in n for n in pred.notes)


def test_predictor_record_round_trip(linear_case):
    data, sfm = linear_case
    pred = inproc_fair_fit(data, sfm)
    back = LinearPredictor.from_record(pred.to_record())
    np.testing.assert_array_equal(back.predict(data), pred.predict(data))
    assert back.names[-1] == "intercept"
    S, b = moments(data, sfm)
    V = feature_matrix(data, sfm)
    np.testing.assert_allclose(S, V.T @ V / len(V))


# ---------------------------------------------------------------- audit / FPT
def test_audit_accepts_column_and_array(linear_case):
    data, sfm = linear_case
    pred = ols_fit(data, sfm)
    cfg = EstimatorConfig(method="DR")
    a = audit_predictor(data, pred, sfm, cfg)
    b = audit_predictor(data, pred.predict(data), sfm, cfg)
    c = audit_predictor(data.with_column("yhat", pred.predict(data)), "yhat", sfm, cfg)
    assert a.tv.value == b.tv.value == c.tv.value
    assert abs(a.residual) < 1e-8
    rec = a.to_record()
    assert {"tv", "de", "ie", "se", "de_sym", "ie_sym", "combination"} <= set(rec)


def test_fpt_small_run():
    curve = fpt_experiment(2, 2, 6, 5000, eps=(0.01, 1.0, 100.0), seed=1)
    assert curve.effects.shape == (6, 3)
    assert np.all(np.diff(curve.probability) >= 0)
    assert curve.probability[-1] == 1.0
    for v in curve.per_effect.values():
        assert np.all(v >= curve.probability - 1e-12)
    rec = curve.to_record()
    assert rec["n_scms"] == 6 and len(rec["probability"]) == 3
    threaded = fpt_experiment(2, 2, 6, 5000, eps=(0.01, 1.0, 100.0), seed=1, threads=3)
    np.testing.assert_array_equal(threaded.effects, curve.effects)
    with pytest.raises(ValueError):
        fpt_experiment(n_scms=0)


# ------------------------------------------------------------------ transport
@pytest.fixture(scope="module")
def otfails_case():
    m = builtin_scenario("otfails")
    return sample_observational(m, 40_000, 3), sfm_of(m)


def test_transport_leaves_x1_rows(otfails_case):
    data, sfm = otfails_case
    out, tmap = causal_if(data, sfm)
    X = data.column("X")
    np.testing.assert_array_equal(out.values[X == 1], data.values[X == 1])
    assert tmap.order == ("W", "Y")
    assert set(tmap.summary()) == {"W", "Y"}


def test_transport_removes_mediated_effect(otfails_case):
    data, sfm = otfails_case
    before = estimate_measure(data, sfm, MeasureSpec("NIE"), EstimatorConfig(method="DR")).value
    out, _ = causal_if(data, sfm)
    after = estimate_measure(out, sfm, MeasureSpec("NIE"), EstimatorConfig(method="DR")).value
    assert abs(after) < 0.02
    # the x0 group's outcome law matches the x1 group's after transport
    X = out.column("X")
    y = out.column("Y")
    assert y[X == 0].mean() == pytest.approx(y[X == 1].mean(), abs=0.01)
    assert abs(before) >= abs(after)


def test_business_necessity_keeps_own_law():
    m = builtin_scenario("hiring4")
    data, sfm = sample_observational(m, 30_000, 4), sfm_of(m)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        out, tmap = causal_if(data, sfm, "Z", CausalIFConfig(jitter=True))
    X = data.column("X")
    # Z is in BN: its x0 values stay put
    np.testing.assert_allclose(out.column("Z")[X == 0], data.column("Z")[X == 0], atol=1e-12)
    assert tmap.maps["Z"].mode == "within"
    assert tmap.maps["W"].mode == "cross"
    assert tmap.maps["W"].residualized


@given(st.integers(0, 10_000))
@settings(max_examples=15, deadline=None)
def test_cell_maps_are_monotone(seed):
    m = builtin_scenario("hiring4")
    data, sfm = sample_observational(m, 4000, seed), sfm_of(m)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        _, tmap = causal_if(data, sfm, "", CausalIFConfig(n_bins=3, seed=seed))
    for vmap in tmap.maps.values():
        for key in list(vmap.source_tables)[:3]:
            tkey = key if key in vmap.target_tables else next(iter(vmap.target_tables))
            s = vmap.source_tables[key]
            grid = np.linspace(s.min(), s.max(), 50)
            vals = vmap.cell_map(key, tkey, grid)
            assert np.all(np.diff(vals) >= -1e-12)


def test_transport_errors():
    m = builtin_scenario("berkeley")
    data, sfm = sample_observational(m, 1000, 1), sfm_of(m)
    ones = data.with_column("X", np.ones(len(data)))
    from cfakit.fairpred import TransportError

    with pytest.raises(TransportError):
        causal_if(ones, sfm)
    with pytest.raises(ValueError):
        CausalIFConfig(n_bins=0)
