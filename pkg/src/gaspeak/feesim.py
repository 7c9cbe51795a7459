"""Discrete-block EIP-1559 fee market with transactional and speculative demand.

Fee arithmetic is integer wei throughout. Transactional demand arrives as a
Poisson stream with a diurnal rate and a generous max fee (low elasticity).
Speculative demand arrives in compound-Poisson bursts whose members carry a
lognormal willingness to pay, capped at ``wtp_cutoff`` (high elasticity).
Each block admits eligible transactions (max fee >= base fee) in descending
priority-fee order, taking the longest prefix that fits the gas limit.
Transactions that are not admitted are dropped; there is no mempool carry-over.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import asdict, dataclass, field, replace
from decimal import Decimal
from enum import Enum
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .congestion import fullness_proxy, reward_ceiling, split_exact
from .errors import ConfigurationError
from .ingest import USD_QUANTUM, WEI_PER_ETH, BlockStat, Firm, Panel, TxRecord, build_panel
from .metrics import PeakWindow

GWEI = 10**9
HOURS = 24
DEFAULT_GAS_TARGET = 15_000_000
DEFAULT_START_TS = 1_767_571_200  # 2026-01-05 00:00:00 UTC, a Monday
DEFAULT_FIRST_BLOCK = 24_000_000


@dataclass
class FeeMarketState:
    block_index: int = 0
    base_fee: int = 10 * GWEI
    gas_target: int = DEFAULT_GAS_TARGET
    gas_limit: int | None = None
    last_gas_used: int = 0

    def __post_init__(self) -> None:
        if self.gas_limit is None:
            self.gas_limit = 2 * self.gas_target
        if self.base_fee <= 0:
            raise ConfigurationError("base fee must be positive")
        if not 0 <= self.last_gas_used <= self.gas_limit:
            raise ConfigurationError("gas used must lie within [0, gas_limit]")


def base_fee_update(state: FeeMarketState) -> int:
    """Next base fee: B + B * (used - target) / (8 * target).

    The adjustment term is computed as an exact integer product and then
    divided with truncation toward zero, so each step moves the fee by at
    most B/8 in either direction. The result is floored at 1 wei.
    """
    b, target = state.base_fee, state.gas_target
    num = b * (state.last_gas_used - target)
    den = 8 * target
    step = num // den if num >= 0 else -((-num) // den)
    return max(1, b + step)


@dataclass(frozen=True)
class SimTx:
    cls: str
    gas: int
    priority_fee: int
    max_fee: int
    submit_hour: int = 0
    deadline_hours: int | None = None

    def __post_init__(self) -> None:
        if self.cls not in ("T", "S"):
            raise ConfigurationError(f"demand class must be 'T' or 'S', got {self.cls!r}")
        if self.gas <= 0:
            raise ConfigurationError("gas must be positive")
        if not self.max_fee >= self.priority_fee >= 0:
            raise ConfigurationError("need max_fee >= priority_fee >= 0")


def tx_cost(tx: SimTx, base_fee: int) -> int | None:
    """Total cost g * (B + min(tip, M - B)) in wei; None if the tx cannot be included."""
    if tx.max_fee < base_fee:
        return None
    return tx.gas * (base_fee + min(tx.priority_fee, tx.max_fee - base_fee))


def _hourly(values: Sequence[float], name: str) -> tuple[float, ...]:
    values = tuple(float(v) for v in values)
    if len(values) != HOURS:
        raise ConfigurationError(f"{name} needs 24 hourly values, got {len(values)}")
    if any(v < 0 for v in values):
        raise ConfigurationError(f"{name} must be non-negative")
    return values


@dataclass(frozen=True)
class DemandParams:
    """Per-block demand by hour of day (UTC)."""

    transactional_rate: tuple[float, ...] = (40.0,) * HOURS
    transactional_gas: int = 120_000
    transactional_priority_fee: int = 1 * GWEI
    transactional_max_fee: int = 500 * GWEI
    burst_rate: tuple[float, ...] = (5.0,) * HOURS
    burst_size: float = 10.0
    speculative_gas: int = 300_000
    speculative_priority_median: int = 3 * GWEI
    speculative_priority_sigma: float = 0.5
    wtp_median: int = 30 * GWEI
    wtp_sigma: float = 0.5
    wtp_cutoff: int = 200 * GWEI
    initial_base_fee: int = 20 * GWEI
    gas_target: int = DEFAULT_GAS_TARGET
    deterministic: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "transactional_rate", _hourly(self.transactional_rate, "transactional_rate"))
        object.__setattr__(self, "burst_rate", _hourly(self.burst_rate, "burst_rate"))
        if self.burst_size < 1:
            raise ConfigurationError("burst_size must be at least 1")
        for name in ("transactional_gas", "speculative_gas", "initial_base_fee", "gas_target"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.transactional_max_fee < self.transactional_priority_fee:
            raise ConfigurationError("transactional max fee below its priority fee")

    @classmethod
    def diurnal(
        cls,
        burst_window: Sequence[int] = tuple(range(11, 19)),
        off_burst_rate: float = 5.0,
        peak_burst_rate: float = 10.0,
        **kwargs: Any,
    ) -> DemandParams:
        """Speculative bursts intensify inside ``burst_window``."""
        window = set(burst_window)
        rates = tuple(peak_burst_rate if h in window else off_burst_rate for h in range(HOURS))
        return cls(burst_rate=rates, **kwargs)

    @classmethod
    def zero(cls, **kwargs: Any) -> DemandParams:
        return cls(transactional_rate=(0.0,) * HOURS, burst_rate=(0.0,) * HOURS, **kwargs)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["transactional_rate"] = list(self.transactional_rate)
        d["burst_rate"] = list(self.burst_rate)
        return d

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> DemandParams:
        doc = dict(doc)
        window = doc.pop("burst_window", None)
        if window is not None:
            return cls.diurnal(burst_window=window, **doc)
        unknown = set(doc) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ConfigurationError(f"unknown demand parameters: {sorted(unknown)}")
        return cls(**doc)


@dataclass
class Trajectory:
    hour_index: np.ndarray
    hour_of_day: np.ndarray
    base_fee: np.ndarray
    gas_used: np.ndarray
    gas_T: np.ndarray
    gas_S: np.ndarray
    reward: np.ndarray
    gas_limit: int
    gas_target: int
    blocks_per_hour: int
    seed: int
    params: DemandParams
    tx_log: dict[str, np.ndarray] | None = None
    start_ts: int = DEFAULT_START_TS

    @property
    def n_blocks(self) -> int:
        return len(self.base_fee)

    @property
    def phi(self) -> np.ndarray:
        return self.gas_used / self.gas_limit

    @property
    def phi_T(self) -> np.ndarray:
        return self.gas_T / self.gas_limit

    @property
    def phi_S(self) -> np.ndarray:
        return self.gas_S / self.gas_limit

    def hourly_mean_base_fee(self) -> np.ndarray:
        """Mean base fee by UTC hour of day; NaN for hours the run never reached."""
        sums = np.bincount(self.hour_of_day, weights=self.base_fee.astype(float), minlength=HOURS)
        counts = np.bincount(self.hour_of_day, minlength=HOURS)
        with np.errstate(invalid="ignore", divide="ignore"):
            return sums / counts

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["block", "hour", "base_fee", "gas_used", "phi", "phi_S"])
        for b in range(self.n_blocks):
            writer.writerow([
                b,
                int(self.hour_of_day[b]),
                int(self.base_fee[b]),
                int(self.gas_used[b]),
                f"{self.gas_used[b] / self.gas_limit:.9f}",
                f"{self.gas_S[b] / self.gas_limit:.9f}",
            ])
        return out.getvalue()

    def summary(self) -> list[dict[str, Any]]:
        means = self.hourly_mean_base_fee()
        phi = np.bincount(self.hour_of_day, weights=self.phi, minlength=HOURS)
        counts = np.bincount(self.hour_of_day, minlength=HOURS)
        return [
            {
                "hour": h,
                "blocks": int(counts[h]),
                "mean_base_fee_gwei": None if counts[h] == 0 else round(float(means[h]) / GWEI, 6),
                "mean_phi": None if counts[h] == 0 else round(float(phi[h] / counts[h]), 6),
            }
            for h in range(HOURS)
        ]


def admit(
    gas: np.ndarray, priority: np.ndarray, max_fee: np.ndarray, base_fee: int, gas_limit: int
) -> np.ndarray:
    """Indices of admitted transactions, in inclusion order.

    Eligible transactions (max fee >= base fee) are ordered by priority fee,
    highest first, with arrival order breaking ties; the admitted set is the
    longest prefix whose cumulative gas fits the limit.
    """
    eligible = np.flatnonzero(max_fee >= base_fee)
    if eligible.size == 0:
        return eligible
    order = eligible[np.argsort(-priority[eligible], kind="stable")]
    cum = np.cumsum(gas[order])
    return order[: int(np.searchsorted(cum, gas_limit, side="right"))]


def _draw_hour(rng: np.random.Generator, params: DemandParams, h: int, n_blocks: int):
    """Arrival counts and per-tx attributes for ``n_blocks`` blocks of hour-of-day ``h``."""
    if params.deterministic:
        n_t = np.full(n_blocks, int(round(params.transactional_rate[h])))
        n_s = np.full(n_blocks, int(round(params.burst_rate[h] * params.burst_size)))
        tot_t, tot_s = int(n_t.sum()), int(n_s.sum())
        t_gas = np.full(tot_t, params.transactional_gas, dtype=np.int64)
        s_gas = np.full(tot_s, params.speculative_gas, dtype=np.int64)
        s_prio = np.full(tot_s, params.speculative_priority_median, dtype=np.int64)
        s_max = np.full(tot_s, min(params.wtp_median, params.wtp_cutoff), dtype=np.int64)
    else:
        n_t = rng.poisson(params.transactional_rate[h], n_blocks)
        bursts = rng.poisson(params.burst_rate[h], n_blocks)
        sizes = 1 + rng.poisson(params.burst_size - 1, int(bursts.sum()))
        n_s = np.bincount(np.repeat(np.arange(n_blocks), bursts), weights=sizes, minlength=n_blocks).astype(np.int64)
        tot_t, tot_s = int(n_t.sum()), int(n_s.sum())
        t_gas = np.maximum(21_000, np.rint(rng.gamma(2.0, params.transactional_gas / 2.0, tot_t))).astype(np.int64)
        s_gas = np.maximum(21_000, np.rint(rng.gamma(2.0, params.speculative_gas / 2.0, tot_s))).astype(np.int64)
        s_prio = np.rint(
            params.speculative_priority_median * rng.lognormal(0.0, params.speculative_priority_sigma, tot_s)
        ).astype(np.int64)
        s_max = np.minimum(
            np.rint(params.wtp_median * rng.lognormal(0.0, params.wtp_sigma, tot_s)), params.wtp_cutoff
        ).astype(np.int64)
        s_prio = np.minimum(s_prio, s_max)
    t_prio = np.full(tot_t, params.transactional_priority_fee, dtype=np.int64)
    t_max = np.full(tot_t, params.transactional_max_fee, dtype=np.int64)
    return n_t, n_s, (t_gas, t_prio, t_max), (s_gas, s_prio, s_max)


def simulate(
    params: DemandParams,
    hours: int,
    blocks_per_hour: int = 300,
    seed: int = 0,
    record_txs: bool = False,
    start_ts: int = DEFAULT_START_TS,
) -> Trajectory:
    """Run the fee market for ``hours`` hours, fully determined by ``seed``."""
    if hours < 1:
        raise ConfigurationError("hours must be at least 1")
    if blocks_per_hour < 1:
        raise ConfigurationError("blocks_per_hour must be at least 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    n = hours * blocks_per_hour
    start_hour = (start_ts % 86_400) // 3_600
    state = FeeMarketState(base_fee=params.initial_base_fee, gas_target=params.gas_target)
    limit = state.gas_limit

    hour_index = np.repeat(np.arange(hours), blocks_per_hour)
    hour_of_day = (hour_index + start_hour) % HOURS
    base_fee = np.empty(n, dtype=np.int64)
    gas_used = np.zeros(n, dtype=np.int64)
    gas_t = np.zeros(n, dtype=np.int64)
    gas_s = np.zeros(n, dtype=np.int64)
    reward = np.zeros(n, dtype=np.int64)
    log: dict[str, list[np.ndarray]] = {k: [] for k in ("block", "cls", "gas", "priority_fee", "max_fee", "cost")}

    b = 0
    for hi in range(hours):
        h = int(hour_of_day[b])
        n_t, n_s, t_attr, s_attr = _draw_hour(rng, params, h, blocks_per_hour)
        off_t = np.concatenate([[0], np.cumsum(n_t)])
        off_s = np.concatenate([[0], np.cumsum(n_s)])
        for j in range(blocks_per_hour):
            t_sl = slice(off_t[j], off_t[j + 1])
            s_sl = slice(off_s[j], off_s[j + 1])
            gas = np.concatenate([t_attr[0][t_sl], s_attr[0][s_sl]])
            prio = np.concatenate([t_attr[1][t_sl], s_attr[1][s_sl]])
            mfee = np.concatenate([t_attr[2][t_sl], s_attr[2][s_sl]])
            n_tx_t = off_t[j + 1] - off_t[j]
            fee = state.base_fee
            base_fee[b] = fee
            idx = admit(gas, prio, mfee, fee, limit)
            if idx.size:
                g = gas[idx]
                tip = np.minimum(prio[idx], mfee[idx] - fee)
                is_s = idx >= n_tx_t
                gas_used[b] = int(g.sum())
                gas_s[b] = int(g[is_s].sum())
                gas_t[b] = gas_used[b] - gas_s[b]
                reward[b] = int((g * tip).sum())
                if record_txs:
                    log["block"].append(np.full(idx.size, b))
                    log["cls"].append(np.where(is_s, "S", "T"))
                    log["gas"].append(g)
                    log["priority_fee"].append(prio[idx])
                    log["max_fee"].append(mfee[idx])
                    log["cost"].append(g * (fee + tip))
            state.last_gas_used = int(gas_used[b])
            state.base_fee = base_fee_update(state)
            state.block_index += 1
            b += 1

    tx_log = None
    if record_txs:
        tx_log = {k: (np.concatenate(v) if v else np.array([], dtype=np.int64)) for k, v in log.items()}
    return Trajectory(
        hour_index, hour_of_day, base_fee, gas_used, gas_t, gas_s, reward,
        limit, state.gas_target, blocks_per_hour, seed, params, tx_log, start_ts,
    )


# --------------------------------------------------------------------------- policies


class Policy(str, Enum):
    UNIFORM = "UNIFORM"
    PEAK_SHAVE = "PEAK_SHAVE"
    CHEAPEST_HOUR = "CHEAPEST_HOUR"


@dataclass
class PolicyResult:
    policy: Policy
    hours: frozenset[int]
    blocks: np.ndarray
    costs: np.ndarray
    n_excluded: int

    @property
    def total_cost(self) -> int:
        return int(sum(int(c) for c in self.costs))

    @property
    def mean_cost(self) -> float:
        return self.total_cost / len(self.costs) if len(self.costs) else float("nan")


def cheapest_hour(trajectory: Trajectory) -> int:
    means = trajectory.hourly_mean_base_fee()
    observed = [h for h in range(HOURS) if not np.isnan(means[h])]
    return min(observed, key=lambda h: (means[h], h))


def evaluate_policy(
    trajectory: Trajectory,
    policy: Policy | str,
    workload: Sequence[SimTx],
    window: PeakWindow = PeakWindow(),
) -> PolicyResult:
    """Cost the workload under a submission policy on a realised trajectory.

    UNIFORM may use any hour, PEAK_SHAVE only hours outside ``window`` and
    CHEAPEST_HOUR only the hour with the lowest realised mean base fee.
    Transactions with a deadline are further limited to
    ``submit_hour .. submit_hour + deadline_hours - 1``. Each group of
    transactions sharing an allowed-hour set is spread evenly over the
    blocks of those hours.
    """
    policy = Policy(policy)
    if policy is Policy.UNIFORM:
        hours = frozenset(range(HOURS))
    elif policy is Policy.PEAK_SHAVE:
        hours = window.off_hours
    else:
        hours = frozenset({cheapest_hour(trajectory)})
    if not hours:
        raise ConfigurationError(f"policy {policy.value} has an empty submission window")
    present = set(np.unique(trajectory.hour_of_day).tolist())
    if not hours <= present and policy is not Policy.CHEAPEST_HOUR:
        missing = sorted(hours - present)
        raise ConfigurationError(f"trajectory does not cover hours {missing}")

    groups: dict[frozenset[int], list[int]] = {}
    for k, tx in enumerate(workload):
        allowed = hours
        if tx.deadline_hours is not None:
            allowed = hours & {(tx.submit_hour + j) % HOURS for j in range(tx.deadline_hours)}
        if not allowed:
            raise ConfigurationError(
                f"transaction {k}: deadline window from hour {tx.submit_hour} "
                f"has no overlap with the {policy.value} window"
            )
        groups.setdefault(frozenset(allowed), []).append(k)

    blocks = np.empty(len(workload), dtype=np.int64)
    for allowed, members in groups.items():
        candidates = np.flatnonzero(np.isin(trajectory.hour_of_day, sorted(allowed)))
        m, count = len(candidates), len(members)
        pos = ((2 * np.arange(count) + 1) * m) // (2 * count)
        blocks[members] = candidates[pos]

    costs = []
    excluded = 0
    for tx, b in zip(workload, blocks):
        cost = tx_cost(tx, int(trajectory.base_fee[b]))
        if cost is None:
            excluded += 1
        else:
            costs.append(cost)
    return PolicyResult(policy, hours, blocks, np.array(costs, dtype=object), excluded)


def default_workload(n: int = 2_400, gas: int = 21_000, priority_fee: int = 1 * GWEI) -> list[SimTx]:
    """Deferrable transfers with an ample fee cap, one per evenly spaced submit hour."""
    return [SimTx("T", gas, priority_fee, 10_000 * GWEI, submit_hour=k % HOURS) for k in range(n)]


# --------------------------------------------------------------------------- synthetic panel


@dataclass(frozen=True)
class FirmSpec:
    firm_id: str
    n_tx: int
    industry: str = "synthetic"
    hour_weights: tuple[float, ...] = (1.0,) * HOURS
    gas: int = 21_000
    deferrable: bool = True
    kappa: Decimal = Decimal(0)
    address: str | None = None

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> FirmSpec:
        doc = dict(doc)
        if "hour_weights" in doc:
            doc["hour_weights"] = tuple(doc["hour_weights"])
        if "kappa" in doc:
            doc["kappa"] = Decimal(str(doc["kappa"]))
        return cls(**doc)


@dataclass
class SyntheticPanel:
    panel: Panel
    truth: dict[str, Any] = field(default_factory=dict)


def default_premium(amount: float = 0.05, window: Sequence[int] = tuple(range(11, 19))) -> tuple[float, ...]:
    return tuple(amount if h in set(window) else 0.0 for h in range(HOURS))


def export_synthetic_panel(
    trajectory: Trajectory,
    firms: Sequence[FirmSpec],
    seed: int = 0,
    hour_premium: Sequence[float] = default_premium(),
    pass_through: float = 0.12,
    baseline_usd: float = 0.15,
    noise_shape: float = 2.0,
    noise_scale: float = 0.03,
    usd_per_eth: Decimal = Decimal("3000"),
    baseline_hour: int = 23,
    first_block: int = DEFAULT_FIRST_BLOCK,
) -> SyntheticPanel:
    """Sample firm transactions from the trajectory into an ingest-schema Panel.

    Each fee in USD is ``baseline_usd + hour_premium[h] + pass_through * phi_br
    + noise``, where phi_br is the block's reward-based fullness proxy and the
    noise is a centred gamma draw (skewed, mean zero). The true hour effects
    for the fit with the proxy are the premia; without the proxy they also
    absorb ``pass_through`` times the hourly difference in mean proxy over the
    trajectory. Both are returned in ``truth``.
    """
    if trajectory.n_blocks == 0:
        raise ConfigurationError("trajectory is empty")
    premium = np.asarray(_hourly_any(hour_premium), dtype=float)
    rng = np.random.Generator(np.random.PCG64(seed))
    by_hour = [np.flatnonzero(trajectory.hour_of_day == h) for h in range(HOURS)]
    rate = Decimal(usd_per_eth)

    chosen: list[tuple[FirmSpec, np.ndarray, np.ndarray]] = []
    for spec in firms:
        w = np.asarray(spec.hour_weights, dtype=float)
        w = np.where([len(b) > 0 for b in by_hour], w, 0.0)
        if w.sum() <= 0:
            raise ConfigurationError(f"firm {spec.firm_id}: no trajectory hours with positive weight")
        hours = rng.choice(HOURS, size=spec.n_tx, p=w / w.sum())
        picks = np.array([by_hour[h][rng.integers(len(by_hour[h]))] for h in hours], dtype=np.int64)
        chosen.append((spec, hours, picks))

    used = sorted({int(b) for _, _, picks in chosen for b in picks})
    ceiling = reward_ceiling([int(trajectory.reward[b]) for b in used])
    phi_all = np.array([float(fullness_proxy(int(r), ceiling)) for r in trajectory.reward])

    tx_batches: dict[str, list[TxRecord]] = {}
    firm_rows = []
    for spec, hours, picks in chosen:
        address = spec.address or "0x" + hashlib.sha256(spec.firm_id.encode()).hexdigest()[:40]
        noise = rng.gamma(noise_shape, noise_scale, spec.n_tx) - noise_shape * noise_scale
        fee_usd = baseline_usd + premium[hours] + pass_through * phi_all[picks] + noise
        if (fee_usd <= 0).any():
            raise ConfigurationError("synthetic fees must stay positive; raise baseline_usd")
        records = []
        bph = trajectory.blocks_per_hour
        for i, (b, usd) in enumerate(zip(picks.tolist(), fee_usd.tolist())):
            fee_wei = int(round(usd / float(rate) * WEI_PER_ETH))
            gas_price = max(1, round(fee_wei / spec.gas))
            fee_wei = spec.gas * gas_price
            fee_eth = Decimal(fee_wei) / WEI_PER_ETH
            ts = (
                trajectory.start_ts
                + int(trajectory.hour_index[b]) * 3_600
                + (b % bph) * 3_600 // bph
            )
            records.append(
                TxRecord(
                    tx_hash="0x" + hashlib.sha256(f"{seed}:{spec.firm_id}:{i}".encode()).hexdigest(),
                    block_number=first_block + b,
                    timestamp_utc=ts,
                    from_addr=address,
                    to_addr="0x" + hashlib.sha256(f"to:{spec.firm_id}:{i % 7}".encode()).hexdigest()[:40],
                    gas_used=spec.gas,
                    gas_price=gas_price,
                    fee_eth=fee_eth,
                    fee_usd=(fee_eth * rate).quantize(USD_QUANTUM),
                    usd_per_eth=rate,
                    input_data="0x" if spec.gas == 21_000 else "0xa9059cbb",
                )
            )
        tx_batches[spec.firm_id] = records
        firm_rows.append(Firm(spec.firm_id, spec.industry, address, spec.deferrable, spec.kappa))

    block_rows = [(first_block + b, int(trajectory.reward[b])) for b in used]
    panel = build_panel(firm_rows, tx_batches, block_rows)
    blocks = {}
    for number, block in panel.blocks.items():
        b = number - first_block
        proxy = fullness_proxy(block.reward, ceiling)
        g_t, g_s = int(trajectory.gas_T[b]), int(trajectory.gas_S[b])
        if g_t + g_s == 0:
            shares = (Decimal(0), Decimal(0), proxy)
        else:
            shares = split_exact(proxy, [g_t, g_s, 0])
        blocks[number] = replace(block, fullness_proxy=proxy, share_T=shares[0], share_S=shares[1], share_U=shares[2])
    panel = panel.with_blocks(blocks)

    mean_phi = np.array([phi_all[idx].mean() if len(idx) else np.nan for idx in by_hour])
    premia = {h: float(premium[h] - premium[baseline_hour]) for h in range(HOURS) if h != baseline_hour}
    model1 = {
        h: premia[h] + pass_through * float(mean_phi[h] - mean_phi[baseline_hour]) for h in premia
    }
    truth = {
        "baseline_hour": baseline_hour,
        "intercept": baseline_usd + float(premium[baseline_hour]),
        "hour_premia": premia,
        "pass_through": pass_through,
        "model1_hour_effects": model1,
        "reward_ceiling": ceiling.ceiling,
    }
    return SyntheticPanel(panel, truth)


def _hourly_any(values: Sequence[float]) -> tuple[float, ...]:
    values = tuple(float(v) for v in values)
    if len(values) != HOURS:
        raise ConfigurationError(f"need 24 hourly values, got {len(values)}")
    return values


def load_scenario(path: str | Path) -> dict[str, Any]:
    """Scenario JSON: {"demand": {...}, "hours": int, "blocks_per_hour": int, "firms": [...]}."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read scenario {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigurationError("scenario must be a JSON object")
    return doc
