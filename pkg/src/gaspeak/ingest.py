"""Parsing and normalisation of explorer transaction exports into a Panel.

Monetary values stay exact at this layer: wei are Python ints, ETH amounts
are ``Decimal`` and USD amounts are ``Decimal`` quantised to 6 dp. Fractions
such as the fullness proxy are ``Decimal`` quantised to 9 dp so that share
sums can be checked for exact equality.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from decimal import Decimal, InvalidOperation
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence, TextIO

import numpy as np

from .errors import ConfigurationError, DataError

log = logging.getLogger(__name__)

PANEL_SCHEMA = 1
WEI_PER_ETH = 10**18
USD_QUANTUM = Decimal("0.000001")
FRACTION_QUANTUM = Decimal("0.000000001")
FIXED_TRANSFER_GAS = 21_000
WEEKEND = frozenset({5, 6})

# Etherscan "txlist" field names plus the fee/price columns of the CSV export.
DEFAULT_COLUMN_MAP: dict[str, Any] = {
    "tx_hash": "hash",
    "block_number": "blockNumber",
    "timestamp_utc": "timeStamp",
    "from_addr": "from",
    "to_addr": {"column": "to", "optional": True},
    "contract_addr": {"column": "contractAddress", "optional": True},
    "gas_used": {"column": "gasUsed", "optional": True},
    "gas_price": {"column": "gasPrice", "optional": True},
    "fee_eth": {"column": "TxnFee(ETH)", "optional": True},
    "fee_usd": {"column": "TxnFee(USD)", "optional": True},
    "usd_per_eth": {"column": "Historical $Price/Eth", "optional": True},
    "is_error": {"column": "isError", "optional": True},
    "input_data": {"column": "input", "optional": True},
    "value_wei": {"column": "value", "optional": True},
}
DEFAULT_BLOCK_COLUMNS: dict[str, Any] = {"block_number": "blockNumber", "reward": "blockReward"}

_REQUIRED_FIELDS = ("tx_hash", "block_number", "timestamp_utc", "from_addr")


class TxType(str, Enum):
    ETH_TRANSFER = "ETH_TRANSFER"
    CALL = "CALL"
    DEPLOY = "DEPLOY"

    @property
    def fixed_gas(self) -> int | None:
        """Gas a plain value transfer always consumes; None for variable-gas types."""
        return FIXED_TRANSFER_GAS if self is TxType.ETH_TRANSFER else None


@dataclass(frozen=True)
class TxRecord:
    tx_hash: str
    block_number: int
    timestamp_utc: int
    from_addr: str
    to_addr: str | None = None
    contract_addr: str | None = None
    gas_used: int | None = None
    gas_price: int | None = None
    fee_eth: Decimal | None = None
    fee_usd: Decimal | None = None
    usd_per_eth: Decimal | None = None
    is_error: bool = False
    input_data: str = "0x"
    value_wei: int | None = None
    firm_id: str | None = None
    tx_type: TxType | None = None

    @property
    def hour_utc(self) -> int:
        return (self.timestamp_utc % 86_400) // 3_600

    @property
    def weekday(self) -> int:
        # 1970-01-01 was a Thursday (3 with Monday = 0).
        return (self.timestamp_utc // 86_400 + 3) % 7

    @property
    def is_weekend(self) -> bool:
        return self.weekday in WEEKEND

    @property
    def week(self) -> int:
        """Monday-anchored week index since the epoch."""
        return (self.timestamp_utc // 86_400 + 3) // 7

    @property
    def fee_wei(self) -> int | None:
        if self.gas_used is not None and self.gas_price is not None:
            return self.gas_used * self.gas_price
        if self.fee_eth is not None:
            return int(self.fee_eth * WEI_PER_ETH)
        return None


@dataclass(frozen=True)
class BlockStat:
    block_number: int
    reward: int
    fullness_proxy: Decimal | None = None
    share_T: Decimal | None = None
    share_S: Decimal | None = None
    share_U: Decimal | None = None


@dataclass(frozen=True)
class Firm:
    firm_id: str
    industry: str = ""
    address: str = ""
    deferrability_default: bool = True
    kappa: Decimal = Decimal(0)


@dataclass(frozen=True)
class Reject:
    row: int
    reason: str
    raw: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class ParseResult:
    records: list[TxRecord]
    rejects: list[Reject]


@dataclass(frozen=True)
class Panel:
    """Joined firm x transaction x block dataset; treat as immutable."""

    firms: tuple[Firm, ...]
    records: tuple[TxRecord, ...]
    blocks: Mapping[int, BlockStat]
    sample_window: tuple[int, int]
    exclusions: Mapping[str, Mapping[str, int]] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.records)

    def firm(self, firm_id: str) -> Firm:
        for f in self.firms:
            if f.firm_id == firm_id:
                return f
        raise KeyError(firm_id)

    def firm_counts(self) -> dict[str, int]:
        counts = Counter(r.firm_id for r in self.records)
        return {f.firm_id: counts.get(f.firm_id, 0) for f in self.firms}

    def records_for(self, firm_id: str) -> list[TxRecord]:
        return [r for r in self.records if r.firm_id == firm_id]

    def with_blocks(self, blocks: Mapping[int, BlockStat]) -> Panel:
        return replace(self, blocks=dict(blocks))

    def columns(self, firm_id: str | None = None) -> dict[str, np.ndarray]:
        """Float/int numpy views of the fields estimation needs, in panel order."""
        recs = self.records if firm_id is None else self.records_for(firm_id)
        firm_index = {f.firm_id: i for i, f in enumerate(self.firms)}

        def block_attr(r: TxRecord, name: str) -> float:
            value = getattr(self.blocks[r.block_number], name)
            return float("nan") if value is None else float(value)

        return {
            "hour": np.array([r.hour_utc for r in recs], dtype=np.int64),
            "weekday": np.array([r.weekday for r in recs], dtype=np.int64),
            "week": np.array([r.week for r in recs], dtype=np.int64),
            "firm": np.array([firm_index[r.firm_id] for r in recs], dtype=np.int64),
            "fee_usd": np.array([float(r.fee_usd) for r in recs], dtype=float),
            "phi_br": np.array([block_attr(r, "fullness_proxy") for r in recs], dtype=float),
            "phi_s": np.array([block_attr(r, "share_S") for r in recs], dtype=float),
        }


# --------------------------------------------------------------------------- parsing


def _column_config(value: Any) -> tuple[str | None, bool]:
    if value is None:
        return None, True
    if isinstance(value, str):
        return value, False
    if isinstance(value, Mapping) and "column" in value:
        return value["column"], bool(value.get("optional", False))
    raise ConfigurationError(f"invalid column config: {value!r}")


def _parse_int(text: str) -> int:
    text = text.strip()
    if text.lower().startswith("0x"):
        return int(text, 16)
    text = text.replace(",", "")
    try:
        return int(text)
    except ValueError:
        value = Decimal(text)
    if not value.is_finite() or value != value.to_integral_value():
        raise ValueError(f"not an integer: {text!r}")
    return int(value)


def _parse_decimal(text: str) -> Decimal:
    value = Decimal(text.strip().replace(",", "").lstrip("$"))
    if not value.is_finite():
        raise InvalidOperation(text)
    return value


def _parse_timestamp(text: str) -> int:
    text = text.strip()
    if text.lstrip("-").isdigit():
        return int(text)
    dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "error"):
        return True
    if t in ("0", "false", "no", ""):
        return False
    raise ValueError(f"not a boolean flag: {text!r}")


def _normalise_input(text: str) -> str:
    t = text.strip().lower()
    if t in ("", "0x", "0x0", "-"):
        return "0x"
    return t if t.startswith("0x") else "0x" + t


def _fee_consistency(rec: TxRecord) -> str | None:
    fee_wei = None
    if rec.gas_used is not None and rec.gas_price is not None:
        fee_wei = rec.gas_used * rec.gas_price
        if rec.fee_eth is not None:
            stated = rec.fee_eth * WEI_PER_ETH
            if abs(stated - fee_wei) > Decimal("1e-6") * max(abs(stated), Decimal(fee_wei)):
                return "fee_eth inconsistent with gas_used * gas_price"
    if rec.fee_eth is not None and rec.fee_usd is not None and rec.usd_per_eth is not None:
        implied = rec.fee_eth * rec.usd_per_eth
        # Half a 6-dp unit of slack absorbs the quantisation of tiny fees.
        if abs(rec.fee_usd - implied) > Decimal("1e-4") * abs(implied) + Decimal("5e-7"):
            return "fee_usd inconsistent with fee_eth * usd_per_eth"
    return None


def parse_transactions(
    source: str | TextIO | Iterable[str],
    column_map: Mapping[str, Any] | None = None,
    delimiter: str = ",",
) -> ParseResult:
    """Parse delimited transaction rows into TxRecords.

    Rows that fail type coercion or the fee identities are collected in
    ``rejects`` with their 0-based data-row index; nothing is dropped silently.
    Missing fee fields are derived where possible: ``fee_eth`` from
    gas_used * gas_price, ``fee_usd`` from fee_eth * usd_per_eth.
    """
    cmap = dict(DEFAULT_COLUMN_MAP if column_map is None else column_map)
    for name in _REQUIRED_FIELDS:
        if _column_config(cmap.get(name))[0] is None:
            raise ConfigurationError(f"column map lacks required field {name!r}")

    if isinstance(source, str):
        source = io.StringIO(source)
    reader = csv.DictReader(source, delimiter=delimiter)
    header = reader.fieldnames or []
    if not header:
        raise ConfigurationError("transaction file has no header row")

    resolved: dict[str, str] = {}
    for name, cfg in cmap.items():
        column, optional = _column_config(cfg)
        if column is None:
            continue
        if column not in header:
            if optional:
                continue
            raise ConfigurationError(f"mapped column {column!r} (field {name}) not in header")
        resolved[name] = column

    records: list[TxRecord] = []
    rejects: list[Reject] = []
    for idx, row in enumerate(reader):
        try:
            rec = _build_record(row, resolved)
        except (ValueError, InvalidOperation, TypeError, ArithmeticError) as exc:
            rejects.append(Reject(idx, f"unparseable value: {exc}", dict(row)))
            continue
        problem = _fee_consistency(rec)
        if problem:
            rejects.append(Reject(idx, problem, dict(row)))
            continue
        records.append(rec)
    if rejects:
        log.info("parse_transactions: %d rows rejected", len(rejects))
    return ParseResult(records, rejects)


def _build_record(row: Mapping[str, str | None], resolved: Mapping[str, str]) -> TxRecord:
    def cell(name: str) -> str | None:
        column = resolved.get(name)
        if column is None:
            return None
        value = row.get(column)
        if value is None or value.strip() == "":
            return None
        return value.strip()

    tx_hash = cell("tx_hash")
    from_addr = cell("from_addr")
    block_text = cell("block_number")
    ts_text = cell("timestamp_utc")
    if tx_hash is None or from_addr is None or block_text is None or ts_text is None:
        raise ValueError("missing hash, from, block number or timestamp")

    def opt(name: str, conv):
        text = cell(name)
        return None if text is None else conv(text)

    gas_used = opt("gas_used", _parse_int)
    gas_price = opt("gas_price", _parse_int)
    fee_eth = opt("fee_eth", _parse_decimal)
    fee_usd = opt("fee_usd", _parse_decimal)
    usd_per_eth = opt("usd_per_eth", _parse_decimal)
    if fee_eth is None and gas_used is not None and gas_price is not None:
        fee_eth = Decimal(gas_used * gas_price) / WEI_PER_ETH
    if fee_usd is None and fee_eth is not None and usd_per_eth is not None:
        fee_usd = fee_eth * usd_per_eth
    if fee_usd is not None:
        fee_usd = fee_usd.quantize(USD_QUANTUM)
    for name, value in (("gas_used", gas_used), ("gas_price", gas_price)):
        if value is not None and value < 0:
            raise ValueError(f"negative {name}")

    return TxRecord(
        tx_hash=tx_hash,
        block_number=_parse_int(block_text),
        timestamp_utc=_parse_timestamp(ts_text),
        from_addr=from_addr.lower(),
        to_addr=opt("to_addr", str.lower),
        contract_addr=opt("contract_addr", str.lower),
        gas_used=gas_used,
        gas_price=gas_price,
        fee_eth=fee_eth,
        fee_usd=fee_usd,
        usd_per_eth=usd_per_eth,
        is_error=opt("is_error", _parse_bool) or False,
        input_data=_normalise_input(cell("input_data") or ""),
        value_wei=opt("value_wei", _parse_int),
    )


def read_transactions(path: str | Path, column_map=None, delimiter: str = ",") -> ParseResult:
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_transactions(fh, column_map, delimiter)


def parse_blocks(
    source: str | TextIO | Iterable[str],
    column_map: Mapping[str, Any] | None = None,
    delimiter: str = ",",
    reward_unit: str = "wei",
) -> tuple[list[tuple[int, int]], list[Reject]]:
    """Parse (block number, validator reward in wei) rows."""
    cmap = dict(DEFAULT_BLOCK_COLUMNS if column_map is None else column_map)
    if reward_unit not in ("wei", "eth"):
        raise ConfigurationError(f"reward_unit must be 'wei' or 'eth', got {reward_unit!r}")
    if isinstance(source, str):
        source = io.StringIO(source)
    reader = csv.DictReader(source, delimiter=delimiter)
    header = reader.fieldnames or []
    cols = {}
    for name in ("block_number", "reward"):
        column = _column_config(cmap.get(name))[0]
        if column is None or column not in header:
            raise ConfigurationError(f"blocks file lacks mapped column {column!r} (field {name})")
        cols[name] = column
    rows: list[tuple[int, int]] = []
    rejects: list[Reject] = []
    for idx, row in enumerate(reader):
        try:
            number = _parse_int(row[cols["block_number"]])
            text = row[cols["reward"]]
            reward = (
                int(_parse_decimal(text) * WEI_PER_ETH) if reward_unit == "eth" else _parse_int(text)
            )
        except (ValueError, InvalidOperation, TypeError, AttributeError) as exc:
            rejects.append(Reject(idx, f"unparseable value: {exc}", dict(row)))
            continue
        if reward < 0:
            rejects.append(Reject(idx, "negative reward", dict(row)))
            continue
        rows.append((number, reward))
    return rows, rejects


def read_blocks(path: str | Path, column_map=None, delimiter: str = ",", reward_unit: str = "wei"):
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_blocks(fh, column_map, delimiter, reward_unit)


# --------------------------------------------------------------------------- filtering


def filter_valid(
    records: Sequence[TxRecord], blocks: Mapping[int, Any] | None = None
) -> tuple[list[TxRecord], Counter]:
    """Drop failed transactions and records missing a required analysis field.

    Returns the surviving records (order preserved) and a Counter of removal
    reasons. ``blocks`` maps block number to reward (or BlockStat); when given,
    records whose block has no reward are removed as "missing R_b".
    """
    kept: list[TxRecord] = []
    removed: Counter = Counter()
    for rec in records:
        if rec.is_error:
            removed["is_error"] += 1
        elif rec.timestamp_utc is None:
            removed["missing hour"] += 1
        elif rec.fee_eth is None:
            removed["missing fee_eth"] += 1
        elif rec.fee_usd is None:
            removed["missing fee_usd"] += 1
        elif blocks is not None and rec.block_number not in blocks:
            removed["missing R_b"] += 1
        else:
            kept.append(rec)
    return kept, removed


def classify_tx_type(record: TxRecord) -> TxType:
    if not record.to_addr:
        return TxType.DEPLOY
    if record.input_data in ("", "0x"):
        return TxType.ETH_TRANSFER
    return TxType.CALL


# --------------------------------------------------------------------------- panel


def build_panel(
    firms: Sequence[Firm],
    tx_batches: Mapping[str, Sequence[TxRecord]],
    block_rows: Iterable[tuple[int, int]] | Mapping[int, int],
    sample_window: tuple[int, int] | None = None,
) -> Panel:
    """Join per-firm transaction batches with block rewards.

    Only blocks referenced by a surviving record are kept. Fullness and
    demand shares are left empty; ``congestion.annotate_panel`` fills them.
    """
    ids = [f.firm_id for f in firms]
    dupes = sorted(k for k, v in Counter(ids).items() if v > 1)
    if dupes:
        raise ConfigurationError(f"duplicate firm_id: {', '.join(dupes)}")
    unknown = sorted(set(tx_batches) - set(ids))
    if unknown:
        raise ConfigurationError(f"transaction batch for unknown firm: {', '.join(unknown)}")

    rewards: dict[int, int] = {}
    items = block_rows.items() if isinstance(block_rows, Mapping) else block_rows
    for number, reward in items:
        number, reward = int(number), int(reward)
        if reward < 0:
            raise DataError(f"block {number}: negative reward")
        prior = rewards.setdefault(number, reward)
        if prior != reward:
            raise DataError(f"block {number}: conflicting rewards {prior} and {reward}")

    records: list[TxRecord] = []
    exclusions: dict[str, dict[str, int]] = {}
    for firm in firms:
        kept, removed = filter_valid(tx_batches.get(firm.firm_id, ()), rewards)
        exclusions[firm.firm_id] = dict(sorted(removed.items()))
        records.extend(
            replace(r, firm_id=firm.firm_id, tx_type=classify_tx_type(r)) for r in kept
        )

    used = sorted({r.block_number for r in records})
    blocks = {b: BlockStat(b, rewards[b]) for b in used}
    if sample_window is None:
        ts = [r.timestamp_utc for r in records]
        sample_window = (min(ts), max(ts)) if ts else (0, 0)
    return Panel(tuple(firms), tuple(records), blocks, tuple(sample_window), exclusions)


# --------------------------------------------------------------------------- persistence


def _dec(value: Decimal | None) -> str | None:
    return None if value is None else str(value)


def _undec(value: str | None) -> Decimal | None:
    return None if value is None else Decimal(value)


def panel_to_dict(panel: Panel) -> dict[str, Any]:
    return {
        "panel_schema": PANEL_SCHEMA,
        "sample_window": list(panel.sample_window),
        "firms": [
            {
                "firm_id": f.firm_id,
                "industry": f.industry,
                "address": f.address,
                "deferrability_default": f.deferrability_default,
                "kappa": str(f.kappa),
            }
            for f in panel.firms
        ],
        "blocks": [
            {
                "block_number": b.block_number,
                "reward": str(b.reward),
                "fullness_proxy": _dec(b.fullness_proxy),
                "share_T": _dec(b.share_T),
                "share_S": _dec(b.share_S),
                "share_U": _dec(b.share_U),
            }
            for b in sorted(panel.blocks.values(), key=lambda b: b.block_number)
        ],
        "records": [
            {
                "tx_hash": r.tx_hash,
                "block_number": r.block_number,
                "timestamp_utc": r.timestamp_utc,
                "from_addr": r.from_addr,
                "to_addr": r.to_addr,
                "contract_addr": r.contract_addr,
                "gas_used": r.gas_used,
                "gas_price": None if r.gas_price is None else str(r.gas_price),
                "fee_eth": _dec(r.fee_eth),
                "fee_usd": _dec(r.fee_usd),
                "usd_per_eth": _dec(r.usd_per_eth),
                "is_error": r.is_error,
                "input_data": r.input_data,
                "value_wei": None if r.value_wei is None else str(r.value_wei),
                "firm_id": r.firm_id,
                "tx_type": None if r.tx_type is None else r.tx_type.value,
            }
            for r in panel.records
        ],
        "exclusions": {k: dict(v) for k, v in panel.exclusions.items()},
    }


def panel_from_dict(doc: Mapping[str, Any]) -> Panel:
    if doc.get("panel_schema") != PANEL_SCHEMA:
        raise DataError(f"unsupported panel_schema {doc.get('panel_schema')!r}")
    firms = tuple(
        Firm(f["firm_id"], f["industry"], f["address"], f["deferrability_default"], Decimal(f["kappa"]))
        for f in doc["firms"]
    )
    blocks = {
        b["block_number"]: BlockStat(
            b["block_number"],
            int(b["reward"]),
            _undec(b["fullness_proxy"]),
            _undec(b["share_T"]),
            _undec(b["share_S"]),
            _undec(b["share_U"]),
        )
        for b in doc["blocks"]
    }
    records = tuple(
        TxRecord(
            tx_hash=r["tx_hash"],
            block_number=r["block_number"],
            timestamp_utc=r["timestamp_utc"],
            from_addr=r["from_addr"],
            to_addr=r["to_addr"],
            contract_addr=r["contract_addr"],
            gas_used=r["gas_used"],
            gas_price=None if r["gas_price"] is None else int(r["gas_price"]),
            fee_eth=_undec(r["fee_eth"]),
            fee_usd=_undec(r["fee_usd"]),
            usd_per_eth=_undec(r["usd_per_eth"]),
            is_error=r["is_error"],
            input_data=r["input_data"],
            value_wei=None if r["value_wei"] is None else int(r["value_wei"]),
            firm_id=r["firm_id"],
            tx_type=None if r["tx_type"] is None else TxType(r["tx_type"]),
        )
        for r in doc["records"]
    )
    missing = {r.block_number for r in records} - set(blocks)
    if missing:
        raise DataError(f"records reference {len(missing)} block(s) absent from the panel")
    return Panel(firms, records, blocks, tuple(doc["sample_window"]), doc.get("exclusions", {}))


def save_panel(panel: Panel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(panel_to_dict(panel), sort_keys=True) + "\n", encoding="utf-8")


def load_panel(path: str | Path) -> Panel:
    return panel_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
