"""Block-reward fullness proxy and transactional/speculative demand shares.

All fractions are 9-dp ``Decimal`` values computed from exact integer
arithmetic, so ``share_T + share_S + share_U == fullness_proxy`` holds
exactly for every block.
"""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import dataclass, replace
from decimal import Decimal
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import DataError, EstimationError
from .ingest import BlockStat, Panel, TxRecord

NANO = 10**9
TAGS = ("T", "S", "U")


@dataclass(frozen=True)
class RewardCeiling:
    ceiling: int
    sample_size: int


@dataclass(frozen=True)
class AddressTag:
    address: str
    tag: str
    above_threshold_share: Fraction
    n_observed: int


def nearest_rank(values: Sequence, pct: Fraction | float) -> object:
    """Nearest-rank percentile: element ceil(pct * n) - 1 of the ascending sort."""
    if not values:
        raise EstimationError("percentile of an empty sample")
    pct = Fraction(pct).limit_denominator(10**6)
    n = len(values)
    rank = -((-pct.numerator * n) // pct.denominator)  # ceil(pct * n)
    return sorted(values)[max(rank, 1) - 1]


def reward_ceiling(rewards: Sequence[int]) -> RewardCeiling:
    if len(rewards) == 0:
        raise EstimationError("reward ceiling needs at least one block reward")
    ceiling = int(nearest_rank([int(r) for r in rewards], Fraction(95, 100)))
    if ceiling <= 0:
        raise EstimationError("95th-percentile block reward is zero; fullness proxy undefined")
    return RewardCeiling(ceiling, len(rewards))


def _nano_to_decimal(nano: int) -> Decimal:
    return Decimal(nano).scaleb(-9)


def _round_half_even(num: int, den: int) -> int:
    q, r = divmod(num, den)
    if 2 * r > den or (2 * r == den and q % 2 == 1):
        q += 1
    return q


def fullness_proxy(reward: int, ceiling: RewardCeiling | int) -> Decimal:
    """clip(reward / ceiling, 0, 1) rounded half-even to 9 dp."""
    c = ceiling.ceiling if isinstance(ceiling, RewardCeiling) else int(ceiling)
    if c <= 0:
        raise EstimationError("ceiling must be positive")
    if reward < 0:
        raise DataError(f"negative block reward {reward}")
    if reward >= c:
        return _nano_to_decimal(NANO)
    return _nano_to_decimal(_round_half_even(reward * NANO, c))


def tag_addresses(
    panel: Panel,
    tip_pct: float = 0.75,
    consistency: float = 0.5,
    min_obs: int = 5,
    overrides: Mapping[str, str] | None = None,
) -> list[AddressTag]:
    """Tag each sending address as speculative (S), transactional (T) or unclassified (U).

    The per-block threshold is the nearest-rank ``tip_pct`` percentile of the
    per-gas price over the block's observed records; legacy records carry no
    separate tip and within-block ranking is unaffected by the common base fee.
    """
    by_block: dict[int, list[int]] = defaultdict(list)
    for r in panel.records:
        if r.gas_price is not None:
            by_block[r.block_number].append(r.gas_price)
    thresholds = {b: nearest_rank(prices, tip_pct) for b, prices in by_block.items()}

    n_obs: dict[str, int] = defaultdict(int)
    n_above: dict[str, int] = defaultdict(int)
    for r in panel.records:
        if r.gas_price is None:
            continue
        n_obs[r.from_addr] += 1
        if r.gas_price > thresholds[r.block_number]:
            n_above[r.from_addr] += 1

    cut = Fraction(consistency).limit_denominator(10**6)
    pinned = {a.lower(): t for a, t in (overrides or {}).items()}
    addresses = sorted(set(n_obs) | {r.from_addr for r in panel.records} | set(pinned))
    tags = []
    for addr in addresses:
        n = n_obs.get(addr, 0)
        share = Fraction(n_above.get(addr, 0), n) if n else Fraction(0)
        if addr in pinned:
            tag = pinned[addr]
            if tag not in TAGS:
                raise DataError(f"override tag for {addr} must be one of {TAGS}, got {tag!r}")
        elif n < min_obs:
            tag = "U"
        else:
            tag = "S" if share >= cut else "T"
        tags.append(AddressTag(addr, tag, share, n))
    return tags


def decompose_fullness(
    block: BlockStat,
    records_in_block: Iterable[TxRecord],
    tags: Mapping[str, str | AddressTag],
) -> tuple[Decimal, Decimal, Decimal]:
    """Split the block's fullness proxy across T/S/U by observed gas.

    Shares use largest-remainder rounding on 9-dp units (ties resolved in
    T, S, U order) so that they sum exactly to the proxy.
    """
    if block.fullness_proxy is None:
        raise EstimationError(f"block {block.block_number} has no fullness proxy")
    gas = dict.fromkeys(TAGS, 0)
    for r in records_in_block:
        tag = tags.get(r.from_addr, "U")
        tag = tag.tag if isinstance(tag, AddressTag) else tag
        gas[tag] += r.gas_used or 0
    if sum(gas.values()) == 0:
        return Decimal(0), Decimal(0), block.fullness_proxy
    return split_exact(block.fullness_proxy, [gas[t] for t in TAGS])  # type: ignore[return-value]


def split_exact(total: Decimal, weights: Sequence[int]) -> tuple[Decimal, ...]:
    """Split a 9-dp total proportionally to integer weights, summing exactly to it.

    Largest-remainder rounding on 9-dp units; ties go to the earlier weight.
    """
    total_nano = int(total.scaleb(9))
    weight = sum(weights)
    if weight <= 0:
        raise EstimationError("split_exact needs a positive total weight")
    parts = []
    remainders = []
    for i, w in enumerate(weights):
        q, r = divmod(total_nano * w, weight)
        parts.append(q)
        remainders.append((-r, i))
    for _, i in sorted(remainders)[: total_nano - sum(parts)]:
        parts[i] += 1
    return tuple(_nano_to_decimal(p) for p in parts)


def annotate_panel(
    panel: Panel,
    ceiling: RewardCeiling | None = None,
    tags: Sequence[AddressTag] | None = None,
    **tag_kwargs,
) -> tuple[Panel, RewardCeiling, list[AddressTag]]:
    """Fill fullness proxy and demand shares on every block of the panel.

    The ceiling is pooled over all panel blocks unless one is supplied.
    """
    if ceiling is None:
        ceiling = reward_ceiling([b.reward for b in panel.blocks.values()])
    if tags is None:
        tags = tag_addresses(panel, **tag_kwargs)
    tag_map = {t.address: t.tag for t in tags}

    by_block: dict[int, list[TxRecord]] = defaultdict(list)
    for r in panel.records:
        by_block[r.block_number].append(r)

    blocks = {}
    for number, block in panel.blocks.items():
        filled = replace(block, fullness_proxy=fullness_proxy(block.reward, ceiling))
        share_t, share_s, share_u = decompose_fullness(filled, by_block.get(number, ()), tag_map)
        blocks[number] = replace(filled, share_T=share_t, share_S=share_s, share_U=share_u)
    return panel.with_blocks(blocks), ceiling, list(tags)


def tags_to_csv(tags: Iterable[AddressTag]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["address", "tag", "share", "n"])
    for t in tags:
        writer.writerow([t.address, t.tag, f"{float(t.above_threshold_share):.6f}", t.n_observed])
    return out.getvalue()


def read_tag_overrides(path: str | Path) -> dict[str, str]:
    """Operator-pinned tags: a delimited file with at least ``address`` and ``tag`` columns."""
    with open(path, newline="", encoding="utf-8") as fh:
        return {row["address"].lower(): row["tag"].strip().upper() for row in csv.DictReader(fh)}
