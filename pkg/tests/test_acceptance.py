"""Acceptance criteria, one test group per criterion.

Each test carries an ``acceptance`` marker; the conftest prints one PASS/FAIL
line per criterion at the end of the run.
"""

import io
import json
import math
import time

import numpy as np
import pytest
from scipy import special

from mmrkit.bdd import (
    PolicyInput,
    Unit,
    assess,
    identification_width,
    identified_effect,
    self_anchors,
    tight_bounds,
    with_scalars,
)
from mmrkit.cli import run
from mmrkit.core import (
    SQRT_HALF_PI,
    MixedThreshold,
    Model,
    PiecewiseLinear,
    Regime,
    Threshold,
    evaluate_rule,
    expected_treatment,
    kstar,
    kstar_gap_function,
    log_relative_gap,
    mmr_rule,
    randomization_gap,
    regime,
    worst_regret,
)
from mmrkit.game import GameConfig, rule_distance, solve

# (delta, mu_hat, V, k for C = 0.005, 0.01, 0.015, printed action row)
TABLE = [
    (8, -6338.6, 1241210, (973.7, 1947.4, 2921.1), (0.0, 0.0, 0.0)),
    (32, -6356.7, 1243899, (3603.7, 7207.5, 10811.2), (0.0, 0.0590, 0.2060)),
    (38, -6358.8, 1243966, (4079.0, 8158.1, 12237.1), (0.0, 0.1102, 0.2402)),
]
BENEFIT = 59744.0
THRESHOLD_VALUE = 0.1699712074799037


def cli_json(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run([*argv, "--json"], stdout=out, stderr=err)
    assert code == 0, err.getvalue()
    return json.loads(out.getvalue())


# ---------------------------------------------------------------------------


@pytest.mark.acceptance("1", "published decision table via `decide` within 0.0005, under 1 s")
def test_table_decisions():
    start = time.perf_counter()
    cells = []
    for _, mu, V, ks, printed in TABLE:
        for k, expect in zip(ks, printed):
            rec = cli_json("decide", "--k", repr(k), "--sigma", repr(math.sqrt(V)),
                           "--mu-hat", repr(mu))
            cells.append((rec["outputs"]["action"], expect))
    elapsed = time.perf_counter() - start
    assert len(cells) == 9
    for got, expect in cells:
        assert abs(got - expect) <= 5e-4, (got, expect)
    assert elapsed < 1.0


@pytest.mark.acceptance("2", "regime boundary over 10^4 random models, under 1 s")
def test_regime_boundary():
    rng = np.random.default_rng(20240602)
    start = time.perf_counter()
    sigma = np.exp(rng.uniform(-8, 8, 10_000))
    # half the draws sit within a few ulps of the boundary
    ratio = np.where(rng.random(10_000) < 0.5, rng.uniform(0, 3, 10_000),
                     SQRT_HALF_PI * (1 + rng.integers(-4, 5, 10_000) * 2.0 ** -52))
    ks = ratio * sigma
    for k, s in zip(ks, sigma):
        m = Model(k, s)
        direct = m.k <= m.sigma * math.sqrt(math.pi / 2)
        assert (regime(m) is Regime.THRESHOLD_OPTIMAL) == direct
        if direct:
            assert mmr_rule(m) == Threshold(0.0)
        else:
            assert isinstance(mmr_rule(m), PiecewiseLinear)
    assert time.perf_counter() - start < 1.0


@pytest.mark.acceptance("3", "k* root residual, bracketing and sigma/k ladder, under 5 s")
def test_kstar_random_models():
    rng = np.random.default_rng(7)
    start = time.perf_counter()
    for _ in range(1000):
        sigma = float(np.exp(rng.uniform(-6, 6)))
        ratio = float(np.exp(rng.uniform(np.log(SQRT_HALF_PI * (1 + 1e-9)), np.log(30))))
        m = Model(ratio * sigma, sigma)
        ks = kstar(m)
        assert abs(kstar_gap_function(ks, m)) <= 1e-10 * max(1.0, m.k)
        assert 0 < ks <= m.k
        # k - k*, evaluated without cancellation, is strictly positive
        assert randomization_gap(m) > 0 and math.isfinite(log_relative_gap(m))
        if ks < m.k:
            assert m.k - ks == pytest.approx(randomization_gap(m), rel=1e-6, abs=1e-13 * m.k)  # root tolerance
    assert time.perf_counter() - start < 5.0


@pytest.mark.acceptance("3", "k* root residual, bracketing and sigma/k ladder, under 5 s")
def test_kstar_ladder():
    for k in (1.0, 37.5, 7207.5):
        logs = [log_relative_gap(Model(k, f * k)) for f in (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6)]
        assert all(b < a for a, b in zip(logs, logs[1:]))
        assert logs[-1] < -1e11  # (k - k*)/k is essentially 0 at sigma = 1e-6 k
        gaps = [randomization_gap(Model(k, f * k)) / k for f in (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6)]
        assert all(b <= a for a, b in zip(gaps, gaps[1:]))


def _random_competitor(rng, model):
    n = int(rng.integers(1, 13))
    half = model.k + 3 * model.sigma
    t = np.unique(rng.uniform(-half, half, n))
    return MixedThreshold(tuple(t), tuple(rng.dirichlet(np.ones(t.size))))


@pytest.mark.acceptance("4", "MMR rule beats 100 random competitors at 20 models, under 2 min")
def test_optimality_necessity():
    rng = np.random.default_rng(11)
    start = time.perf_counter()
    sigmas = np.exp(rng.uniform(-3, 3, 20))
    ratios = np.concatenate([rng.uniform(0, SQRT_HALF_PI, 8), [SQRT_HALF_PI], rng.uniform(1.3, 8, 11)])
    for sigma, ratio in zip(sigmas, ratios):
        m = Model(ratio * sigma, sigma)
        best = worst_regret(mmr_rule(m), m)
        for _ in range(100):
            assert best <= worst_regret(_random_competitor(rng, m), m) + 1e-6 * sigma
        if regime(m) is Regime.RANDOMIZED_OPTIMAL:
            assert worst_regret(Threshold(0.0), m) - best > 1e-4 * sigma
    assert time.perf_counter() - start < 120.0


@pytest.mark.acceptance("5", "game solver: k=0 sandwich and k=3 rule recovery, under 2 min")
def test_game_sandwich():
    start = time.perf_counter()
    cfg = GameConfig(Model(0, 1), tuple(np.linspace(-5, 5, 401)), iterations=2000)
    sol = solve(cfg)
    assert sol.iterations_run <= 5000
    assert sol.lower_bound <= THRESHOLD_VALUE <= sol.upper_bound
    assert sol.gap <= 0.01
    assert time.perf_counter() - start < 120.0


@pytest.mark.acceptance("5", "game solver: k=0 sandwich and k=3 rule recovery, under 2 min")
def test_game_rule_recovery():
    start = time.perf_counter()
    m = Model(3, 1)
    cfg = GameConfig.uniform(m, 401, span_sigmas=5.0, iterations=5000, learning_rate=0.5)
    sol = solve(cfg)
    grid = np.linspace(-(m.k + 4), m.k + 4, 801)
    dist = rule_distance(sol.rule, mmr_rule(m), grid)
    assert time.perf_counter() - start < 120.0
    assert dist <= 0.05, f"sup distance to the linear rule is {dist:.4f}"


@pytest.mark.acceptance("6", "width linear in C (published ratios) and nesting to 1e-9, under 1 s")
def test_linearity_table():
    start = time.perf_counter()
    for delta, _, V, ks, _ in TABLE:
        mean_x1 = ks[1] / (BENEFIT * 0.01)
        assert mean_x1 < delta
        units = (Unit(mean_x1 * 0.5, 0.0, 1.0, 0.0), Unit(mean_x1 * 1.5, 1.0, 1.0, 0.0))
        inp = PolicyInput(units, float(delta), 12234.0, BENEFIT, 0.01, float(V))
        for C, printed in zip((0.005, 0.01, 0.015), ks):
            k = identification_width(with_scalars(inp, C=C))
            assert abs(k - printed) <= 0.1, (delta, C, k, printed)
        base = identification_width(inp)
        for s in (0.5, 1.5, 3.0):
            assert identification_width(with_scalars(inp, C=0.01 * s)) == pytest.approx(s * base, rel=1e-12)
    assert time.perf_counter() - start < 1.0


@pytest.mark.acceptance("6", "width linear in C (published ratios) and nesting to 1e-9, under 1 s")
def test_nesting():
    rng = np.random.default_rng(5)
    start = time.perf_counter()
    for _ in range(20):
        levels = rng.uniform(0, 10, 5)
        effect = dict(zip(levels, rng.uniform(-0.3, 0.3, 5)))
        units = []
        for _ in range(40):
            x2 = float(rng.choice(levels))
            units.append(Unit(float(rng.uniform(0, 4)), x2, float(rng.uniform(0.2, 2)), float(effect[x2])))
        inp = PolicyInput(tuple(units), 4.0, float(rng.normal()), float(rng.uniform(1, 5)),
                          float(rng.uniform(0, 0.05)), 1.0)
        mu, k = identified_effect(inp), identification_width(inp)
        lo, hi = tight_bounds(inp, self_anchors(inp), own_projection=True)
        assert abs(lo - (mu - k)) <= 1e-9 and abs(hi - (mu + k)) <= 1e-9
    assert time.perf_counter() - start < 1.0


@pytest.mark.acceptance("7", "closed-form E[d] vs 10^6-draw Monte Carlo, >= 48/50 within 4 SE")
def test_monte_carlo():
    rng = np.random.default_rng(99)
    start = time.perf_counter()
    hits = 0
    for _ in range(50):
        lo = float(rng.uniform(-3, 2))
        rule = PiecewiseLinear(lo, lo + float(rng.uniform(0.05, 4)))
        mu, sigma = float(rng.uniform(-4, 4)), float(np.exp(rng.uniform(-1.5, 1)))
        d = evaluate_rule(rule, rng.normal(mu, sigma, 1_000_000))
        se = d.std(ddof=1) / math.sqrt(d.size)
        if abs(d.mean() - expected_treatment(rule, mu, sigma)) <= 4 * max(se, 1e-12):
            hits += 1
    assert hits >= 48, hits
    assert time.perf_counter() - start < 60.0


@pytest.mark.acceptance("8", "symmetry and equivariance at 1e-9, under 5 s")
def test_symmetry_equivariance():
    rng = np.random.default_rng(8)
    start = time.perf_counter()
    for _ in range(200):
        sigma = float(np.exp(rng.uniform(-3, 3)))
        m = Model(float(rng.uniform(0, 6)) * sigma, sigma)
        rule = mmr_rule(m)
        x = rng.uniform(-(m.k + 4 * sigma), m.k + 4 * sigma, 50)
        assert np.max(np.abs(evaluate_rule(rule, -x) - (1 - evaluate_rule(rule, x)))) <= 1e-9
        a = float(np.exp(rng.uniform(-5, 5)))
        scaled = Model(a * m.k, a * sigma)
        if regime(m) is Regime.RANDOMIZED_OPTIMAL:
            assert regime(scaled) is Regime.RANDOMIZED_OPTIMAL
            assert kstar(scaled) == pytest.approx(a * kstar(m), rel=1e-9)
        assert np.max(np.abs(evaluate_rule(mmr_rule(scaled), a * x) - evaluate_rule(rule, x))) <= 1e-9

    for _ in range(50):
        units = tuple(Unit(float(rng.uniform(0, 3)), float(rng.uniform(0, 5)), float(rng.uniform(0.1, 2)),
                           float(rng.uniform(-0.4, 0.4))) for _ in range(15))
        inp = PolicyInput(units, 3.0, float(rng.normal()), float(rng.uniform(0.5, 20)),
                          float(rng.uniform(0, 0.2)), float(rng.uniform(0.1, 5)))
        base = assess(inp)
        s = float(np.exp(rng.uniform(-6, 6)))
        sc = assess(with_scalars(inp, c=inp.c * s, b=inp.b * s, V=inp.V * s * s))
        assert sc.mu_hat == pytest.approx(s * base.mu_hat, rel=1e-9, abs=1e-9 * s)
        assert sc.k == pytest.approx(s * base.k, rel=1e-9)
        assert sc.sigma == pytest.approx(s * base.sigma, rel=1e-9)
        assert abs(sc.action - base.action) <= 1e-9
        assert sc.regime is base.regime
    assert time.perf_counter() - start < 5.0
