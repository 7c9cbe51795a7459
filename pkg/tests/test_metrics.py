from __future__ import annotations

import math
from decimal import Decimal
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gaspeak.econometrics import FitResult, ModelSpec, fit_model
from gaspeak.errors import ConfigurationError, MetricError
from gaspeak.congestion import annotate_panel
from gaspeak.metrics import (
    FirmScorecard,
    PeakWindow,
    PermutationConfig,
    avoidance_ratio,
    fee_savings,
    low_cost_hours,
    pss,
    pss_statistic,
    residual_floor,
    scorecard,
    weekday_weekend,
)
from helpers import synthetic_panel


def hours_for(n_peak, n_off):
    return [12] * n_peak + [2] * n_off


def test_pss_benchmark_and_sign():
    assert PeakWindow().benchmark == Fraction(2, 3)
    s_off, score = pss(list(range(24)))
    assert s_off == pytest.approx(2 / 3) and score == pytest.approx(0.0, abs=1e-15)
    assert pss([3] * 10)[1] == pytest.approx(1 / 3)
    assert pss([12] * 10)[1] == pytest.approx(-2 / 3)


def test_pss_empty_firm():
    with pytest.raises(MetricError):
        pss([])


def test_vectorised_statistic_matches_scalar():
    rng = np.random.default_rng(2)
    m = rng.integers(0, 24, (20, 37))
    stat = pss_statistic()(m)
    assert np.allclose(stat, [pss(row)[1] for row in m])


def test_custom_window():
    w = PeakWindow(frozenset({0, 1}))
    assert w.benchmark == Fraction(22, 24)
    with pytest.raises(ConfigurationError):
        PeakWindow(frozenset())
    with pytest.raises(ConfigurationError):
        PeakWindow(frozenset(range(24)))


def test_avoidance_ratio():
    assert avoidance_ratio([1, 1, 5, 5], [1, 5, 5, 5], {1}) == pytest.approx(2.0)
    with pytest.raises(MetricError):
        avoidance_ratio([1], [5, 5], {1})


def test_fee_savings_definition():
    hours = [12, 12, 2, 2]
    fees = [1.0, 3.0, 0.5, 0.5]
    assert fee_savings(hours, fees) == pytest.approx((2.0 - 0.5) / 2.0)
    assert fee_savings([2, 3], [1.0, 1.0]) is None


def test_residual_floor_hand_example():
    r = residual_floor([0, 0, 5, 5, 5], [Decimal("1"), Decimal("3"), Decimal("1"), Decimal("1"), Decimal("1")])
    assert r.cheapest_hour == 5 and r.mean_at_cheapest == 1
    assert (r.c_actual, r.c_cf, r.floor_usd) == (7, 5, 2)
    assert r.floor_pct == pytest.approx(2 / 7)


def test_residual_floor_tie_goes_to_lowest_hour():
    assert residual_floor([9, 4], [1.0, 1.0]).cheapest_hour == 4


def test_zero_cost_floor_pct_is_none():
    assert residual_floor([1, 2], [0, 0]).floor_pct is None


@given(st.lists(st.tuples(st.integers(0, 23), st.decimals(0, 1000, places=6)), min_size=1, max_size=80))
def test_floor_never_negative(rows):
    r = residual_floor([h for h, _ in rows], [f for _, f in rows])
    assert r.floor_usd >= 0
    assert r.floor_pct is None or 0 <= r.floor_pct <= 1


def test_weekday_weekend_omits_when_one_side_empty():
    w = weekday_weekend([0, 1, 2], [1.0, 2.0, 3.0], [0.1, 0.2, 0.3])
    assert w.omitted == "no weekend transactions" and w.premium is None


def test_weekday_weekend_premium_and_gap():
    w = weekday_weekend([0, 0, 5, 6], [2.0, 4.0, 1.0, 2.0], [0.5, 0.7, 0.2, 0.4])
    assert w.premium == pytest.approx((3.0 - 1.5) / 1.5)
    assert w.delta_phi == pytest.approx(0.3)
    assert w.welch_gas.t > 0


@pytest.fixture(scope="module")
def scored():
    synth = synthetic_panel(n_per_firm=400)
    panel = synth.panel
    pooled = fit_model(panel, ModelSpec())
    firm_fit = fit_model(panel, ModelSpec(include_fullness=True), firm_id="firm-0")
    return panel, pooled, firm_fit


def test_scorecard_fields(scored):
    panel, pooled, firm_fit = scored
    card = scorecard(panel, "firm-0", pooled, firm_fit, PermutationConfig(300, 4))
    hours = panel.columns("firm-0")["hour"]
    assert card.n_total == 400 == card.n_peak + card.n_off
    assert card.pss == pytest.approx(pss(hours)[1])
    assert 0 < card.pss_pvalue <= 1
    assert card.floor_usd >= 0 and card.fullness_at_cheapest > 0
    assert card.pass_through == firm_fit.coef["phi_br"]
    assert FirmScorecard.from_dict(card.to_dict()) == card


def test_scorecard_without_firm_fit_records_reason(scored):
    panel, pooled, _ = scored
    card = scorecard(panel, "firm-1", pooled, None, PermutationConfig(50, 1))
    assert card.pass_through is None and "pass_through" in card.not_computable


def test_low_cost_hours_reads_negative_premia(scored):
    _, pooled, _ = scored
    low = low_cost_hours(pooled)
    assert all(pooled.hour_coef(h) < 0 for h in low)
    assert 23 not in low
