"""Regime classification and submission-hour recommendations from a fitted fee curve."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping

from .econometrics import HOURS, FitResult, hour_term
from .errors import ConfigurationError
from .metrics import PeakWindow

log = logging.getLogger(__name__)

SIGNIFICANCE_T = 1.96
BORDERLINE_BAND = 0.1


class Regime(str, Enum):
    I = "I"
    II = "II"
    III = "III"
    IV = "IV"


class Action(str, Enum):
    SCHEDULE_OFF_PEAK = "SCHEDULE_OFF_PEAK"
    MONITOR_AND_BATCH = "MONITOR_AND_BATCH"
    PROVISION_BUDGET = "PROVISION_BUDGET"
    ACCEPT_MARKET = "ACCEPT_MARKET"


ACTIONS = {
    Regime.I: Action.SCHEDULE_OFF_PEAK,
    Regime.II: Action.MONITOR_AND_BATCH,
    Regime.III: Action.PROVISION_BUDGET,
    Regime.IV: Action.ACCEPT_MARKET,
}


@dataclass(frozen=True)
class TxProfile:
    """One transaction (or a homogeneous batch) to schedule.

    ``gas_estimate`` is measured in the same unit as the gas threshold;
    the default threshold is the panel-mean fee in USD.
    """

    gas_estimate: float
    deferrable: bool
    kappa: float = 0.0
    deadline_window: int | None = None
    monthly_volume: int | None = None

    def __post_init__(self) -> None:
        if self.kappa < 0:
            raise ConfigurationError("kappa must be non-negative")
        if self.deadline_window is not None and not 1 <= self.deadline_window:
            raise ConfigurationError("deadline_window must be at least one hour")
        if self.monthly_volume is not None and self.monthly_volume < 0:
            raise ConfigurationError("monthly_volume must be non-negative")


@dataclass(frozen=True)
class ForwardCurve:
    expected: dict[int, float | None]
    t: dict[int, float | None]
    source_fit: str
    peak_premium: float | None
    peak_hour: int | None
    baseline: float
    baseline_hour: int
    peak_hours: frozenset[int]

    def estimable(self, h: int) -> bool:
        return self.expected.get(h) is not None

    def premium(self, h: int) -> float | None:
        value = self.expected.get(h)
        return None if value is None else value - self.baseline

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["hour", "expected_fee_usd", "premium_usd", "t", "estimable", "peak"])
        for h in range(HOURS):
            value, t = self.expected[h], self.t[h]
            writer.writerow([
                h,
                "" if value is None else f"{value:.6f}",
                "" if value is None else f"{value - self.baseline:.6f}",
                "" if t is None else f"{t:.3f}",
                int(value is not None),
                int(h in self.peak_hours),
            ])
        return out.getvalue()


def forward_curve(fit: FitResult, window: PeakWindow = PeakWindow()) -> ForwardCurve:
    """Expected fee per hour: intercept plus that hour's premium."""
    if "const" not in fit.coef or not any(hour_term(h) in fit.coef for h in range(HOURS)):
        raise ConfigurationError("fit lacks an intercept or hour terms; cannot build a forward curve")
    alpha = fit.coef["const"]
    base = fit.spec.baseline_hour
    expected: dict[int, float | None] = {}
    tstats: dict[int, float | None] = {}
    for h in range(HOURS):
        if h == base:
            expected[h], tstats[h] = alpha, 0.0
            continue
        beta = fit.coef.get(hour_term(h))
        if beta is None or math.isnan(beta):
            expected[h] = tstats[h] = None
        else:
            expected[h] = alpha + beta
            t = fit.t.get(hour_term(h))
            tstats[h] = None if t is None or math.isnan(t) else t
    in_window = [(expected[h] - alpha, h) for h in sorted(window.hours) if expected[h] is not None]
    peak_premium, peak_hour = max(in_window, key=lambda p: (p[0], -p[1])) if in_window else (None, None)
    return ForwardCurve(expected, tstats, fit.fit_id, peak_premium, peak_hour, alpha, base, window.hours)


def classify_regime(gas: float, deferrable: bool, gas_threshold: float) -> tuple[Regime, bool]:
    """Scheduling-matrix cell for a transaction, plus a borderline flag.

    High intensity is strictly above the threshold; borderline means within
    10% of it on either side.
    """
    if gas_threshold <= 0:
        raise ConfigurationError("gas_threshold must be positive")
    high = gas > gas_threshold
    borderline = abs(gas - gas_threshold) / gas_threshold < BORDERLINE_BAND
    if deferrable:
        return (Regime.I if high else Regime.II), borderline
    return (Regime.III if high else Regime.IV), borderline


def defer_decision(fee_delta: float, kappa: float) -> bool:
    """Defer iff the fee saving strictly exceeds the cost of waiting."""
    return fee_delta > kappa


@dataclass
class RegimeRecommendation:
    regime: Regime
    borderline: bool
    action: Action
    recommended_hours: tuple[int, ...] = ()
    expected_saving_per_tx: float = 0.0
    aggregate_saving: float | None = None
    provisioning_surcharge: float = 0.0
    provisioning_budget: float | None = None
    submit_hour: int | None = None
    fee_delta: float = 0.0
    defer: bool = False
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "regime": self.regime.value,
            "borderline": self.borderline,
            "action": self.action.value,
            "recommended_hours": list(self.recommended_hours),
            "expected_saving_per_tx": self.expected_saving_per_tx,
            "aggregate_saving": self.aggregate_saving,
            "provisioning_surcharge": self.provisioning_surcharge,
            "provisioning_budget": self.provisioning_budget,
            "submit_hour": self.submit_hour,
            "fee_delta": self.fee_delta,
            "defer": self.defer,
            "warnings": list(self.warnings),
        }

    def to_text(self) -> str:
        rows = [
            ("regime", self.regime.value + (" (borderline)" if self.borderline else "")),
            ("action", self.action.value),
            ("decision", "defer" if self.defer else "submit now"),
            ("recommended hours (UTC)", ", ".join(map(str, self.recommended_hours)) or "-"),
            ("fee delta per tx (USD)", f"{self.fee_delta:.4f}"),
            ("expected saving per tx (USD)", f"{self.expected_saving_per_tx:.4f}"),
        ]
        if self.aggregate_saving is not None:
            rows.append(("aggregate saving (USD)", f"{self.aggregate_saving:.2f}"))
        if self.regime is Regime.III:
            rows.append(("provisioning surcharge per peak tx (USD)", f"{self.provisioning_surcharge:.4f}"))
            if self.provisioning_budget is not None:
                rows.append(("provisioning budget (USD)", f"{self.provisioning_budget:.2f}"))
        width = max(len(k) for k, _ in rows)
        lines = [f"{k:<{width}}  {v}" for k, v in rows]
        lines += [f"warning: {w}" for w in self.warnings]
        return "\n".join(lines) + "\n"


def qualifying_hours(curve: ForwardCurve, allowed=None, significance: float = SIGNIFICANCE_T) -> list[int]:
    """Hours whose premium is insignificant (|t| < cutoff) or negative, cheapest first."""
    allowed = range(HOURS) if allowed is None else allowed
    out = []
    for h in allowed:
        if not curve.estimable(h):
            continue
        t = curve.t[h]
        if h == curve.baseline_hour or curve.premium(h) < 0 or (t is not None and abs(t) < significance):
            out.append(h)
    return sorted(out, key=lambda h: (curve.expected[h], h))


def recommend(
    profile: TxProfile,
    curve: ForwardCurve,
    gas_threshold: float,
    now_hour: int | None = None,
    significance: float = SIGNIFICANCE_T,
) -> RegimeRecommendation:
    """Turn a transaction profile and forward curve into a scheduling decision.

    ``now_hour`` is the hour the transaction would otherwise go out; it
    defaults to the curve's peak hour. The fee delta is the curve gap
    between ``now_hour`` and the cheapest qualifying hour inside the
    deadline window.
    """
    regime, borderline = classify_regime(profile.gas_estimate, profile.deferrable, gas_threshold)
    rec = RegimeRecommendation(regime, borderline, ACTIONS[regime])

    if regime is Regime.IV:
        return rec
    if regime is Regime.III:
        rec.provisioning_surcharge = curve.peak_premium or 0.0
        if profile.monthly_volume is not None:
            rec.provisioning_budget = rec.provisioning_surcharge * profile.monthly_volume
        return rec

    if now_hour is None:
        now_hour = curve.peak_hour if curve.peak_hour is not None else curve.baseline_hour
    if profile.deadline_window is not None:
        allowed = [(now_hour + j) % HOURS for j in range(min(profile.deadline_window, HOURS))]
    else:
        allowed = list(range(HOURS))
    hours = qualifying_hours(curve, allowed, significance)
    if not hours:
        candidates = [h for h in allowed if curve.estimable(h)]
        if not candidates:
            raise ConfigurationError("no estimable hour inside the deadline window")
        hours = [min(candidates, key=lambda h: (curve.expected[h], h))]
        msg = f"no insignificant or negative-premium hour available; falling back to hour {hours[0]}"
        log.warning(msg)
        rec.warnings.append(msg)
    rec.recommended_hours = tuple(hours)

    now_fee = curve.expected.get(now_hour)
    if now_fee is None:
        rec.warnings.append(f"hour {now_hour} is inestimable; fee delta taken as zero")
        now_fee = curve.expected[hours[0]]
    rec.fee_delta = max(0.0, now_fee - curve.expected[hours[0]])
    rec.defer = defer_decision(rec.fee_delta, profile.kappa)
    rec.submit_hour = hours[0] if rec.defer else now_hour
    rec.expected_saving_per_tx = rec.fee_delta if rec.defer else 0.0
    if regime is Regime.II and profile.monthly_volume is not None:
        rec.aggregate_saving = rec.expected_saving_per_tx * profile.monthly_volume
    return rec


def recommendation_from_dict(doc: Mapping[str, Any]) -> RegimeRecommendation:
    return RegimeRecommendation(
        regime=Regime(doc["regime"]),
        borderline=doc["borderline"],
        action=Action(doc["action"]),
        recommended_hours=tuple(doc["recommended_hours"]),
        expected_saving_per_tx=doc["expected_saving_per_tx"],
        aggregate_saving=doc["aggregate_saving"],
        provisioning_surcharge=doc["provisioning_surcharge"],
        provisioning_budget=doc["provisioning_budget"],
        submit_hour=doc["submit_hour"],
        fee_delta=doc["fee_delta"],
        defer=doc["defer"],
        warnings=list(doc["warnings"]),
    )
