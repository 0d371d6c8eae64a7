import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from degenlab.errors import InvalidOperatorParams
from degenlab.geometry import make_domain
from degenlab.operators import (Condition, Family, UpwindGradient, Verdict, check_f3, check_f4,
                                drift_field, eval_operator, evaluate, f6_constants, f6_report,
                                lemma_f5_constants, make_operator)
from degenlab.operators.families import drift_magnitude

ISAACS_TABLE = [[{"sigma": 1.0, "drift": [0.5, 0.0]}, {"sigma": 0.5, "drift": [0.0, -0.5]}],
                [{"sigma": 0.7, "drift": [-0.3, 0.2]}, {"sigma": 0.9, "drift": [0.0, 0.0]}]]


def all_specs(mu=2.0):
    return [
        make_operator("deg_laplace", mu=mu),
        make_operator("deg_drift", mu=mu, tau=1.0),
        make_operator("deg_drift", mu=mu, tau=0.5, extension="even_cubic", drift_scale=0.3),
        make_operator("isaacs", mu=mu, controls=ISAACS_TABLE),
        make_operator("pucci", mu=mu, lam=1.0, Lam=2.0),
        make_operator("pucci", mu=mu, lam=0.5, Lam=3.0, extremal="min"),
        make_operator("first_order_hj", mu=mu, m=2.0),
        make_operator("first_order_hj", mu=mu, m=0.5),
    ]


def test_make_operator_examples():
    spec = make_operator("deg_laplace", mu=2)
    assert spec.family is Family.DEG_LAPLACE and spec.mu == 2.0
    drift = make_operator(Family.DEG_DRIFT, mu=2, tau=1)
    assert drift.tau <= drift.mu - 1
    with pytest.raises(InvalidOperatorParams):
        make_operator("pucci", mu=2, lam=2, Lam=1)


@pytest.mark.parametrize("family,params", [
    ("deg_laplace", dict(mu=-1)),
    ("deg_laplace", dict()),
    ("deg_laplace", dict(mu=2, m=2)),
    ("first_order_hj", dict(mu=1, m=0)),
    ("deg_drift", dict(mu=2, tau=-1)),
    ("deg_drift", dict(mu=2, extension="quintic")),
    ("pucci", dict(mu=2, lam=0, Lam=1)),
    ("pucci", dict(mu=2, extremal="mid")),
    ("isaacs", dict(mu=2)),
    ("isaacs", dict(mu=2, controls=[])),
    ("isaacs", dict(mu=2, controls=[[]])),
    ("isaacs", dict(mu=2, controls=[[{"drift": [1.0]}]])),
    ("heat", dict(mu=2)),
    ("deg_laplace", dict(mu=float("inf"))),
    ("deg_laplace", dict(mu=True)),
])
def test_make_operator_rejects(family, params):
    with pytest.raises(InvalidOperatorParams):
        make_operator(family, **params)


def test_eval_examples():
    lap = make_operator("deg_laplace", mu=2)
    assert eval_operator(lap, [0.5], 0.5, [0.0], [4.0]) == pytest.approx(-1.0, abs=1e-15)
    hj = make_operator("first_order_hj", mu=1, m=2)
    assert eval_operator(hj, [0.5], 0.5, [-1.0], [0.0]) == pytest.approx(0.5, abs=1e-15)


@pytest.mark.parametrize("spec", all_specs(), ids=lambda s: s.family.value)
def test_zero_at_origin(spec):
    x = np.array([[0.3, 0.2]])
    assert evaluate(spec, x, np.array([0.4]), np.zeros((1, 2)), np.zeros((1, 2)))[0] == 0.0


@pytest.mark.parametrize("spec", all_specs(1.5), ids=lambda s: s.family.value)
def test_ellipticity(spec):
    rng = np.random.default_rng(1)
    N = 500
    x = rng.uniform(-0.7, 0.7, (N, 2))
    d = 1 - np.linalg.norm(x, axis=1)
    p = rng.normal(size=(N, 2))
    X = rng.normal(size=(N, 2))
    Y = X + rng.uniform(0, 2, size=(N, 2))
    assert np.all(evaluate(spec, x, d, p, X) >= evaluate(spec, x, d, p, Y) - 1e-12)


@pytest.mark.parametrize("spec", all_specs(1.5), ids=lambda s: s.family.value)
def test_degenerate_coefficient_bound(spec):
    rng = np.random.default_rng(2)
    N = 500
    x = rng.uniform(-0.7, 0.7, (N, 2))
    d = 1 - np.linalg.norm(x, axis=1)
    p = rng.normal(size=(N, 2))
    X = rng.normal(size=(N, 2))
    absX = np.abs(X).sum(axis=1)
    absp = np.linalg.norm(p, axis=1)
    val = np.abs(evaluate(spec, x, d, p, X))
    if spec.family is Family.FIRST_ORDER_HJ:
        bound = d ** spec.mu * absp ** spec.m
    else:
        bmax = np.max(np.linalg.norm(drift_field(spec, x, d), axis=1)) if spec.family is Family.DEG_DRIFT \
            else (1.0 if spec.family is Family.ISAACS else 0.0)
        bound = d ** spec.mu * (spec.diffusion_scale * absX + math.sqrt(2) * bmax * absp)
    assert np.all(val <= bound * (1 + 1e-12) + 1e-14)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=7, max_size=7), st.floats(0.01, 1), st.floats(0, 3))
def test_isaacs_single_entry_is_laplace(vals, d, mu):
    isaacs = make_operator("isaacs", mu=mu, controls=[[{"sigma": 1.0, "drift": [0.0, 0.0]}]])
    lap = make_operator("deg_laplace", mu=mu)
    x, p, X = vals[0:2], vals[2:4], vals[4:6]
    a = eval_operator(isaacs, x, d, p, X)
    b = eval_operator(lap, x, d, p, X)
    assert a == pytest.approx(b, abs=1e-14 * max(1.0, abs(b)))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=2, max_size=2), st.floats(0.01, 1),
       st.floats(0.1, 2), st.floats(0, 2))
def test_pucci_sandwich(X, d, lam, spread):
    Lam = lam + spread
    lap = eval_operator(make_operator("deg_laplace", mu=2), [0, 0], d, [0, 0], X)
    lo, hi = sorted((lam * lap, Lam * lap))
    upper = eval_operator(make_operator("pucci", mu=2, lam=lam, Lam=Lam, extremal="min"), [0, 0], d, [0, 0], X)
    lower = eval_operator(make_operator("pucci", mu=2, lam=lam, Lam=Lam, extremal="max"), [0, 0], d, [0, 0], X)
    tol = 1e-12 * (1 + abs(lap))
    # F uses -M: the maximal operator gives the smallest value
    assert lower <= lo + tol and hi <= upper + tol
    if all(v >= 0 for v in X) or all(v <= 0 for v in X):
        for val in (lower, upper):
            assert lo - tol <= val <= hi + tol


def test_pucci_unit_is_laplace():
    rng = np.random.default_rng(3)
    lap = make_operator("deg_laplace", mu=2)
    for extremal in ("max", "min"):
        pucci = make_operator("pucci", mu=2, lam=1, Lam=1, extremal=extremal)
        for _ in range(100):
            X = rng.normal(size=2)
            d = rng.uniform(0.01, 1)
            assert eval_operator(pucci, [0, 0], d, [0, 0], X) == pytest.approx(
                eval_operator(lap, [0, 0], d, [0, 0], X), abs=1e-14)


def test_upwind_gradient_transport_picks_arms():
    g = UpwindGradient(np.array([[1.0]]), np.array([[3.0]]))
    assert g.transport(np.array([[2.0]]))[0] == 6.0
    assert g.transport(np.array([[-2.0]]))[0] == -2.0


@pytest.mark.parametrize("ext", ["odd_cubic", "even_cubic"])
def test_drift_extension_is_c1(ext):
    spec = make_operator("deg_drift", mu=2, tau=1, extension=ext)
    r0 = 0.75
    eps = 1e-7
    r = np.array([r0 - eps, r0 + eps])
    g = drift_magnitude(spec, r, 1 - r)
    assert g[0] == pytest.approx(g[1], rel=1e-5)
    gp_in = (drift_magnitude(spec, np.array([r0 - eps]), np.array([1 - r0 + eps]))
             - drift_magnitude(spec, np.array([r0 - 2 * eps]), np.array([1 - r0 + 2 * eps]))) / eps
    gp_out = (drift_magnitude(spec, np.array([r0 + 2 * eps]), np.array([1 - r0 - 2 * eps]))
              - drift_magnitude(spec, np.array([r0 + eps]), np.array([1 - r0 - eps]))) / eps
    assert gp_in[0] == pytest.approx(gp_out[0], rel=1e-3)
    # bounded inside, equal to d^-tau outside
    inner = drift_magnitude(spec, np.linspace(0, r0, 50), 1 - np.linspace(0, r0, 50))
    assert np.all(np.isfinite(inner)) and np.max(np.abs(inner)) < 10
    assert drift_magnitude(spec, np.array([0.9]), np.array([0.1]))[0] == pytest.approx(10.0)


# --- condition checks --------------------------------------------------------

UNIT = make_domain("interval", a=0, b=2)
DELTAS = [2.0 ** -k for k in range(1, 11)]


def _column(report, gamma):
    return [v for g, _, v in report.table if g == gamma]


def test_f3_laplace_mu2_supports():
    rep = check_f3(make_operator("deg_laplace", mu=2), UNIT, [1.0], DELTAS)
    assert rep.condition is Condition.F3
    assert rep.verdict is Verdict.SUPPORTS
    # analytic column d^mu |X| <= delta^(mu-2) omega = delta
    np.testing.assert_allclose(_column(rep, 1.0), DELTAS, rtol=1e-12)
    assert rep.columns == ("gamma", "delta", "sup_value")
    assert "cannot certify" in rep.note


def test_f3_laplace_mu1_refutes():
    rep = check_f3(make_operator("deg_laplace", mu=1), UNIT, [0.5], DELTAS)
    assert rep.verdict is Verdict.REFUTES
    assert rep.witnesses and all(row[0] == 0.5 for row in rep.witnesses)
    np.testing.assert_allclose(_column(rep, 0.5), np.array(DELTAS) ** -0.5, rtol=1e-12)


def test_f3_drift_supports():
    disk = make_domain("disk", R=1)
    rep = check_f3(make_operator("deg_drift", mu=2, tau=1), disk, [1.0], [2.0 ** -k for k in range(3, 10)])
    assert rep.verdict is Verdict.SUPPORTS
    col = _column(rep, 1.0)
    deltas = [2.0 ** -k for k in range(3, 10)]
    # second-order part dim * delta, first-order part at most delta * drift_scale
    assert all(v <= 3 * (1 + 1e-12) * dl for v, dl in zip(col, deltas))


@pytest.mark.parametrize("mu", [0.5, 1.0, 1.5])
def test_f3_growth_factor_below_threshold(mu):
    gamma = (2 - mu) / 2
    rep = check_f3(make_operator("deg_laplace", mu=mu), UNIT, [gamma], DELTAS)
    col = _column(rep, gamma)
    ratios = [b / a for a, b in zip(col, col[1:])]
    assert min(ratios) >= 2 ** (2 - mu - gamma) * (1 - 1e-9)


@pytest.mark.parametrize("mu", [2.0, 2.5, 3.0])
def test_f3_nonincreasing_above_threshold(mu):
    rep = check_f3(make_operator("deg_laplace", mu=mu), UNIT, [0.25, 0.5, 1.0], DELTAS)
    for g in (0.25, 0.5, 1.0):
        col = _column(rep, g)
        assert all(b <= a for a, b in zip(col, col[1:]))


def test_f3_csv():
    rep = check_f3(make_operator("deg_laplace", mu=2), UNIT, [1.0], DELTAS[:3])
    lines = rep.to_csv().splitlines()
    assert lines[0] == "gamma,delta,sup_value"
    assert len(lines) == 4
    assert lines[1].split(",")[1] == "0.5"


def test_refutes_requires_witness():
    from degenlab.operators import ConditionReport
    with pytest.raises(ValueError):
        ConditionReport(Condition.F3, [], Verdict.REFUTES)


def test_f4_laplace():
    radii = [2.0 ** -k for k in range(1, 10)]
    rep = check_f4(make_operator("deg_laplace", mu=2), UNIT, 128, radii)
    assert rep.verdict is Verdict.SUPPORTS
    assert all(v <= r * (1 + 1e-12) for r, v in rep.table)


def test_f4_hj():
    radii = [2.0 ** -k for k in range(1, 10)]
    rep = check_f4(make_operator("first_order_hj", mu=1, m=2), UNIT, 128, radii)
    assert rep.verdict is Verdict.SUPPORTS
    assert all(v <= r * r * (1 + 1e-12) for r, v in rep.table)


@pytest.mark.parametrize("spec", all_specs(), ids=lambda s: s.family.value)
def test_f4_zero_radius(spec):
    rep = check_f4(spec, make_domain("disk", R=1), 100, [0.5, 0.0])
    assert rep.table[-1][1] == 0.0


def test_f4_needs_samples():
    with pytest.raises(ValueError):
        check_f4(make_operator("deg_laplace", mu=2), UNIT, 10, [1.0])


def test_lemma_constants_laplace_example():
    rep = lemma_f5_constants(1.0, 1.0, 0.0, 0.0, 1.0, 1.0)
    c = rep.constants
    assert c["L1"] == 1.0
    assert c["L"] == 6.0
    # first admissible candidate: alpha = 0.25, beta = 0.5
    assert c["alpha"] == 0.25 and c["beta"] == 0.5
    assert rep.verdict is Verdict.SUPPORTS
    # the hand example alpha = 0.4 is admissible as well
    beta = 0.4 * (1 + c["L1"]) * c["L1"] * c["L2"]
    assert beta == pytest.approx(0.8) and beta <= 0.9


def test_lemma_constants_zero_coefficients():
    rep = lemma_f5_constants(0.0, 0.0, 0.0, 0.0, 1.0, 1.0)
    assert rep.constants["L1"] == 0.0
    assert rep.constants["beta"] == 0.0
    assert rep.constants["alpha"] == 0.5


def test_lemma_constants_drift_example():
    # psi = d^mu b with mu = tau + 1: |psi| = d ** (mu - tau) near the boundary, Lipschitz 1
    rep = lemma_f5_constants(1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
    assert rep.constants["beta"] < 1


def test_lemma_large_inputs():
    rep = lemma_f5_constants(50.0, 1.0, 1.0, 1.0, 20.0, 2.0)
    assert rep.constants["beta"] <= 0.9


def test_lemma_rejects_negative():
    with pytest.raises(ValueError):
        lemma_f5_constants(-1.0, 0, 0, 0, 1, 1)


@pytest.mark.parametrize("args,expected", [((1, 1, 1), (2, 6)), ((0, 5, 3), (0, 0)), ((2, 1, 1), (6, 20))])
def test_f6_constants(args, expected):
    assert f6_constants(*args) == pytest.approx(expected)


def test_f6_report():
    rep = f6_report(1.0, 1.0, 1.0)
    assert rep.condition is Condition.F6_CONSTANTS
    assert rep.constants["b_F"] == 2.0 and rep.constants["ell"] == 6.0
