"""Shared fixture builders: synthetic panels and explorer-style CSV exports."""

from __future__ import annotations

import csv
import json
from decimal import Decimal
from pathlib import Path

from gaspeak.feesim import DemandParams, FirmSpec, export_synthetic_panel, simulate
from gaspeak.ingest import Panel

TX_HEADER = [
    "hash", "blockNumber", "timeStamp", "from", "to", "contractAddress", "gasUsed", "gasPrice",
    "TxnFee(ETH)", "TxnFee(USD)", "Historical $Price/Eth", "isError", "input", "value",
]


def small_trajectory(hours: int = 168, blocks_per_hour: int = 60, seed: int = 7):
    return simulate(DemandParams.diurnal(), hours, blocks_per_hour, seed=seed)


def synthetic_panel(n_per_firm: int = 600, firms: int = 3, seed: int = 11, **kwargs):
    traj = small_trajectory()
    specs = [
        FirmSpec(f"firm-{k}", n_per_firm, industry=f"industry {k}", deferrable=k % 2 == 0)
        for k in range(firms)
    ]
    return export_synthetic_panel(traj, specs, seed=seed, **kwargs)


def write_exports(panel: Panel, directory: Path, extra_rows: dict[str, list[list[str]]] | None = None) -> Path:
    """Write per-firm transaction CSVs, a blocks CSV and a project config; return the config path."""
    directory.mkdir(parents=True, exist_ok=True)
    firms = []
    for firm in panel.firms:
        path = directory / f"{firm.firm_id}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(TX_HEADER)
            for r in panel.records_for(firm.firm_id):
                w.writerow([
                    r.tx_hash, r.block_number, r.timestamp_utc, r.from_addr, r.to_addr or "",
                    r.contract_addr or "", r.gas_used, r.gas_price, r.fee_eth, r.fee_usd,
                    r.usd_per_eth, int(r.is_error), r.input_data, r.value_wei or 0,
                ])
            for row in (extra_rows or {}).get(firm.firm_id, []):
                w.writerow(row)
        firms.append({
            "id": firm.firm_id, "industry": firm.industry, "address": firm.address,
            "tx_file": path.name, "deferrable": firm.deferrability_default, "kappa": str(firm.kappa),
        })
    blocks = directory / "blocks.csv"
    with open(blocks, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["blockNumber", "blockReward"])
        for number in sorted(panel.blocks):
            w.writerow([number, panel.blocks[number].reward])
    config = directory / "project.json"
    config.write_text(json.dumps({
        "firms": firms,
        "blocks_file": "blocks.csv",
        "root_seed": 20260331,
        "permutation": {"replications": 500},
    }, indent=2))
    return config


def usd(text: str) -> Decimal:
    return Decimal(text)
