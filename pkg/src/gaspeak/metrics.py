"""Firm-level peak-shaving scorecards."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from decimal import Decimal
from fractions import Fraction
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .econometrics import (
    HOURS,
    FitResult,
    WelchResult,
    permutation_null,
    welch_t,
)
from .errors import ConfigurationError, EstimationError, MetricError
from .ingest import WEEKEND, Panel

DEFAULT_PEAK_HOURS = frozenset(range(11, 19))


@dataclass(frozen=True)
class PeakWindow:
    hours: frozenset[int] = DEFAULT_PEAK_HOURS

    def __post_init__(self) -> None:
        hours = frozenset(int(h) for h in self.hours)
        if not hours or len(hours) >= HOURS or not hours <= set(range(HOURS)):
            raise ConfigurationError("peak window must be a nonempty strict subset of 0..23")
        object.__setattr__(self, "hours", hours)

    @property
    def off_hours(self) -> frozenset[int]:
        return frozenset(range(HOURS)) - self.hours

    @property
    def benchmark(self) -> Fraction:
        """Off-peak share under uniform scheduling (16/24 for the default window)."""
        return Fraction(len(self.off_hours), HOURS)

    def mask(self, hours: np.ndarray) -> np.ndarray:
        return np.isin(hours, sorted(self.hours))


def pss(hours: Sequence[int], window: PeakWindow = PeakWindow()) -> tuple[float, float]:
    """(s_off, PSS) for one firm's submission hours."""
    hours = np.asarray(hours, dtype=np.int64)
    if hours.size == 0:
        raise MetricError("PSS undefined for a firm with no transactions")
    s_off = Fraction(int((~window.mask(hours)).sum()), hours.size)
    return float(s_off), float(s_off - window.benchmark)


def pss_statistic(window: PeakWindow = PeakWindow()):
    """Vectorised PSS over rows of an (r, n) hour array, for permutation_null."""
    peak = np.zeros(HOURS, dtype=bool)
    peak[sorted(window.hours)] = True
    bench = float(window.benchmark)

    def stat(hour_matrix: np.ndarray) -> np.ndarray:
        return 1.0 - peak[hour_matrix].mean(axis=1) - bench

    return stat


def low_cost_hours(fit: FitResult) -> frozenset[int]:
    """Hours with a negative estimated premium in the pooled fit."""
    out = set()
    for h in range(HOURS):
        beta = fit.hour_coef(h)
        if beta is not None and not math.isnan(beta) and beta < 0:
            out.add(h)
    return frozenset(out)


def avoidance_ratio(
    firm_hours: Sequence[int], pooled_hours: Sequence[int], low_cost: Iterable[int]
) -> float:
    low = sorted(set(low_cost))
    firm_hours = np.asarray(firm_hours)
    pooled_hours = np.asarray(pooled_hours)
    if firm_hours.size == 0 or pooled_hours.size == 0:
        raise MetricError("avoidance ratio needs firm and pooled transactions")
    pooled_share = Fraction(int(np.isin(pooled_hours, low).sum()), pooled_hours.size)
    if pooled_share == 0:
        raise MetricError("pooled share of low-cost hours is zero")
    firm_share = Fraction(int(np.isin(firm_hours, low).sum()), firm_hours.size)
    return float(firm_share / pooled_share)


def fee_savings(hours: Sequence[int], fees: Sequence, window: PeakWindow = PeakWindow()) -> float | None:
    """(mean_peak - mean_off) / mean_peak, or None when either side is empty."""
    hours = np.asarray(hours)
    fees = np.asarray([float(f) for f in fees])
    peak = window.mask(hours)
    if not peak.any() or peak.all():
        return None
    mean_peak = fees[peak].mean()
    if mean_peak == 0:
        return None
    return float((mean_peak - fees[~peak].mean()) / mean_peak)


@dataclass(frozen=True)
class FloorResult:
    cheapest_hour: int
    mean_at_cheapest: float
    c_actual: float
    c_cf: float
    floor_usd: float
    floor_pct: float | None


def _exact(value) -> Fraction:
    return Fraction(value) if isinstance(value, (int, Decimal, Fraction)) else Fraction(float(value))


def residual_floor(hours: Sequence[int], fees: Sequence) -> FloorResult:
    """Residual cost floor against scheduling everything in the cheapest observed hour.

    Totals convention: c_cf = N * mean fee at h*, floor = c_actual - c_cf.
    Sums are exact rationals, so floor >= 0 holds without rounding slack.
    Ties for h* go to the lowest hour; hours with no transactions are skipped.
    """
    hours = [int(h) for h in hours]
    if not hours:
        raise MetricError("residual floor needs at least one transaction")
    totals: dict[int, Fraction] = {}
    counts: dict[int, int] = {}
    for h, fee in zip(hours, fees, strict=True):
        totals[h] = totals.get(h, Fraction(0)) + _exact(fee)
        counts[h] = counts.get(h, 0) + 1
    means = {h: totals[h] / counts[h] for h in totals}
    h_star = min(means, key=lambda h: (means[h], h))
    c_actual = sum(totals.values(), Fraction(0))
    c_cf = len(hours) * means[h_star]
    floor = c_actual - c_cf
    pct = None if c_actual == 0 else float(floor / c_actual)
    return FloorResult(h_star, float(means[h_star]), float(c_actual), float(c_cf), float(floor), pct)


@dataclass(frozen=True)
class WeekdayWeekend:
    n_weekday: int
    n_weekend: int
    mean_gas_weekday: float | None = None
    mean_gas_weekend: float | None = None
    premium: float | None = None
    welch_gas: WelchResult | None = None
    mean_phi_weekday: float | None = None
    mean_phi_weekend: float | None = None
    delta_phi: float | None = None
    welch_phi: WelchResult | None = None
    omitted: str | None = None


def weekday_weekend(weekdays: Sequence[int], fees: Sequence, fullness: Sequence[float]) -> WeekdayWeekend:
    """Weekday (Mon-Fri UTC) versus weekend fee premium and fullness gap with Welch tests."""
    wd = np.asarray(weekdays)
    fees = np.asarray([float(f) for f in fees])
    phi = np.asarray(fullness, dtype=float)
    weekend = np.isin(wd, sorted(WEEKEND))
    n_wke, n_mf = int(weekend.sum()), int((~weekend).sum())
    if n_wke == 0 or n_mf == 0:
        side = "weekend" if n_wke == 0 else "weekday"
        return WeekdayWeekend(n_mf, n_wke, omitted=f"no {side} transactions")

    gas_mf, gas_wke = fees[~weekend].mean(), fees[weekend].mean()
    phi_mf, phi_wke = phi[~weekend].mean(), phi[weekend].mean()
    premium = None if gas_wke == 0 else float((gas_mf - gas_wke) / gas_wke)
    omitted = None
    welch_gas = welch_phi = None
    try:
        welch_gas = welch_t(fees[~weekend], fees[weekend])
        welch_phi = welch_t(phi[~weekend], phi[weekend])
    except EstimationError as exc:
        omitted = f"Welch test not computable: {exc}"
    return WeekdayWeekend(
        n_mf, n_wke, float(gas_mf), float(gas_wke), premium, welch_gas,
        float(phi_mf), float(phi_wke), float(phi_mf - phi_wke), welch_phi, omitted,
    )


@dataclass
class FirmScorecard:
    firm_id: str
    industry: str
    n_total: int
    n_peak: int | None = None
    n_off: int | None = None
    s_off: float | None = None
    pss: float | None = None
    pss_pvalue: float | None = None
    pss_p95: float | None = None
    avoidance_ratio: float | None = None
    fee_savings: float | None = None
    cheapest_hour: int | None = None
    mean_gas_cheapest: float | None = None
    c_actual: float | None = None
    c_cf: float | None = None
    floor_usd: float | None = None
    floor_pct: float | None = None
    fullness_at_cheapest: float | None = None
    pass_through: float | None = None
    pass_through_p: float | None = None
    mean_fee_usd: float | None = None
    regime: str | None = None
    regime_borderline: bool | None = None
    not_computable: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> FirmScorecard:
        return cls(**doc)


@dataclass(frozen=True)
class PermutationConfig:
    replications: int = 10_000
    seed: int = 0


def scorecard(
    panel: Panel,
    firm_id: str,
    pooled_fit: FitResult,
    firm_fit: FitResult | None,
    permutation: PermutationConfig = PermutationConfig(),
    window: PeakWindow = PeakWindow(),
    pooled_hours: Sequence[int] | None = None,
) -> FirmScorecard:
    """Assemble every metric for one firm; failures land in ``not_computable``."""
    firm = panel.firm(firm_id)
    cols = panel.columns(firm_id)
    hours, fees, phi = cols["hour"], [r.fee_usd for r in panel.records_for(firm_id)], cols["phi_br"]
    card = FirmScorecard(firm_id, firm.industry, int(hours.size))
    if hours.size == 0:
        card.not_computable["all"] = "firm has no valid transactions"
        return card

    card.n_peak = int(window.mask(hours).sum())
    card.n_off = card.n_total - card.n_peak
    card.s_off, card.pss = pss(hours, window)
    card.mean_fee_usd = float(np.mean([float(f) for f in fees]))
    null = permutation_null(
        hours, pss_statistic(window), permutation.replications, permutation.seed, "pss"
    )
    card.pss_pvalue, card.pss_p95 = null.p_value, null.p95

    if pooled_hours is None:
        pooled_hours = panel.columns()["hour"]
    try:
        card.avoidance_ratio = avoidance_ratio(hours, pooled_hours, low_cost_hours(pooled_fit))
    except MetricError as exc:
        card.not_computable["avoidance_ratio"] = str(exc)

    card.fee_savings = fee_savings(hours, fees, window)
    if card.fee_savings is None:
        card.not_computable["fee_savings"] = "no transactions on one side of the peak window"

    fl = residual_floor(hours, fees)
    card.cheapest_hour, card.mean_gas_cheapest = fl.cheapest_hour, fl.mean_at_cheapest
    card.c_actual, card.c_cf, card.floor_usd, card.floor_pct = fl.c_actual, fl.c_cf, fl.floor_usd, fl.floor_pct
    if fl.floor_pct is None:
        card.not_computable["floor_pct"] = "zero actual cost"
    at_star = phi[hours == fl.cheapest_hour]
    if np.isnan(at_star).any():
        card.not_computable["fullness_at_cheapest"] = "panel blocks lack a fullness proxy"
    else:
        card.fullness_at_cheapest = float(at_star.mean())

    term = firm_fit.spec.congestion if firm_fit is not None else "phi_br"
    if firm_fit is None or term not in firm_fit.coef:
        card.not_computable["pass_through"] = "no firm-level fullness fit"
    else:
        card.pass_through = firm_fit.coef[term]
        p = firm_fit.p.get(term)
        card.pass_through_p = None if p is None or math.isnan(p) else p
    return card
