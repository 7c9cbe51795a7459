"""``gaspeak`` command line: ingest, fit, score, recommend, simulate, report.

Exit codes: 0 success, 1 an analysis result is not computable, 2 a
configuration or data error. Outputs created by a failing command are removed.

Seeds: every random stage draws from ``derive_seed(root_seed, stage, ...)``;
the permutation null for firm ``f`` uses ``derive_seed(seed, "pss", f)``
where ``seed`` is the config's permutation seed (default: the root seed).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import warnings
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

from . import __version__
from .congestion import annotate_panel, read_tag_overrides, tags_to_csv
from .econometrics import EstimationWarning, FitResult, ModelSpec, derive_seed, fit_model
from .errors import ConfigurationError, DataError, EstimationError, GaspeakError, MetricError
from .feesim import DemandParams, FirmSpec, export_synthetic_panel, simulate
from .ingest import Firm, Panel, build_panel, load_panel, panel_to_dict, read_blocks, read_transactions
from .metrics import FirmScorecard, PeakWindow, PermutationConfig, scorecard, weekday_weekend
from .scheduler import TxProfile, classify_regime, forward_curve, recommend
from .tables import (
    coefficient_table,
    coefficients_csv,
    counts_table,
    floors_table,
    scorecard_table,
    weekday_weekend_table,
    write_csv,
)

log = logging.getLogger("gaspeak")

OUTPUT_ENV = "GASPEAK_OUTPUT_DIR"
DEFAULT_ROOT_SEED = 20260331
BUNDLE_FILES = (
    "coefficients_pooled.txt",
    "coefficients_firms.txt",
    "scorecards.txt",
    "floors.txt",
    "weekday_weekend.txt",
    "forward_curve.csv",
)


class UsageError(ConfigurationError):
    """Invalid flag value or combination."""


# --------------------------------------------------------------------------- config


@dataclass(frozen=True)
class FirmConfig:
    firm_id: str
    industry: str
    address: str
    tx_file: Path
    deferrable: bool = True
    kappa: Decimal = Decimal(0)


@dataclass(frozen=True)
class ProjectConfig:
    firms: tuple[FirmConfig, ...]
    blocks_file: Path
    peak_window: PeakWindow = PeakWindow()
    replications: int = 10_000
    permutation_seed: int = DEFAULT_ROOT_SEED
    root_seed: int = DEFAULT_ROOT_SEED
    gas_threshold: str | float = "panel_mean"
    output_dir: Path | None = None
    column_map: Mapping[str, Any] | None = None
    block_columns: Mapping[str, Any] | None = None
    delimiter: str = ","
    reward_unit: str = "wei"
    tag_overrides: Path | None = None

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any], base: Path = Path(".")) -> ProjectConfig:
        def path(value: Any, what: str) -> Path:
            if not isinstance(value, str) or not value:
                raise ConfigurationError(f"config: {what} must be a nonempty path string")
            p = Path(value)
            return p if p.is_absolute() else base / p

        try:
            firms = tuple(
                FirmConfig(
                    firm_id=str(f["id"]),
                    industry=str(f.get("industry", "")),
                    address=str(f.get("address", "")).lower(),
                    tx_file=path(f.get("tx_file"), f"firm {f['id']} tx_file"),
                    deferrable=bool(f.get("deferrable", True)),
                    kappa=Decimal(str(f.get("kappa", 0))),
                )
                for f in doc["firms"]
            )
            blocks = path(doc.get("blocks_file"), "blocks_file")
        except (KeyError, TypeError) as exc:
            raise ConfigurationError(f"config: missing or malformed field {exc}") from exc
        except InvalidOperation as exc:
            raise ConfigurationError("config: kappa must be a decimal number") from exc
        if not firms:
            raise ConfigurationError("config: at least one firm is required")
        files = [f.tx_file for f in firms] + [blocks]
        if len({p.resolve() for p in files}) != len(files):
            raise ConfigurationError("config: input paths must be distinct")

        perm = doc.get("permutation", {})
        root = int(doc.get("root_seed", DEFAULT_ROOT_SEED))
        replications = int(perm.get("replications", 10_000))
        if replications < 1:
            raise ConfigurationError("config: permutation replications must be at least 1")
        threshold = doc.get("gas_threshold", "panel_mean")
        if threshold != "panel_mean" and not isinstance(threshold, (int, float)):
            raise ConfigurationError("config: gas_threshold must be 'panel_mean' or a number")
        window = PeakWindow(frozenset(doc["peak_window"])) if "peak_window" in doc else PeakWindow()
        return cls(
            firms=firms,
            blocks_file=blocks,
            peak_window=window,
            replications=replications,
            permutation_seed=int(perm.get("seed", root)),
            root_seed=root,
            gas_threshold=threshold,
            output_dir=path(doc["output_dir"], "output_dir") if doc.get("output_dir") else None,
            column_map=doc.get("column_map"),
            block_columns=doc.get("block_columns"),
            delimiter=doc.get("delimiter", ","),
            reward_unit=doc.get("reward_unit", "wei"),
            tag_overrides=path(doc["tag_overrides"], "tag_overrides") if doc.get("tag_overrides") else None,
        )


def load_config(path: str | Path) -> ProjectConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigurationError(f"config {path} must be a JSON object")
    return ProjectConfig.from_dict(doc, base=path.parent)


# --------------------------------------------------------------------------- output handling


class Outputs:
    """Tracks files written by one command so a failure can remove them."""

    def __init__(self, directory: Path) -> None:
        self.directory = directory
        self.written: list[Path] = []
        self._created_dir = not directory.exists()

    def path(self, name: str) -> Path:
        return self.directory / name

    def write(self, name: str, text: str) -> Path:
        self.directory.mkdir(parents=True, exist_ok=True)
        target = self.path(name)
        target.write_text(text, encoding="utf-8")
        self.written.append(target)
        return target

    def write_json(self, name: str, doc: Any) -> Path:
        return self.write(name, dumps(doc))

    def rollback(self) -> None:
        for p in self.written:
            p.unlink(missing_ok=True)
        if self._created_dir and self.directory.exists() and not any(self.directory.iterdir()):
            self.directory.rmdir()


def dumps(doc: Any) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def read_json(path: str | Path, what: str) -> Any:
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigurationError(f"{what} not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{what} {path} is not valid JSON: {exc}") from exc


def resolve_output_dir(flag: str | None, config: ProjectConfig | None = None) -> Path:
    if flag:
        return Path(flag)
    if os.environ.get(OUTPUT_ENV):
        return Path(os.environ[OUTPUT_ENV])
    if config is not None and config.output_dir is not None:
        return config.output_dir
    return Path(".")


def _load_panel(path: str | Path) -> Panel:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"panel file not found: {path}")
    try:
        return load_panel(path)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise DataError(f"panel file {path} is malformed: {exc}") from exc


def _load_fit(path: str | Path) -> FitResult:
    doc = read_json(path, "fit file")
    try:
        return FitResult.from_dict(doc)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"fit file {path} is malformed: {exc}") from exc


def _load_firm_fits(path: str | Path) -> tuple[dict[str, FitResult | None], dict[str, str]]:
    doc = read_json(path, "firm fits file")
    try:
        fits = {k: (None if v is None else FitResult.from_dict(v)) for k, v in doc["fits"].items()}
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"firm fits file {path} is malformed: {exc}") from exc
    return fits, dict(doc.get("errors", {}))


def _load_scorecards(path: str | Path) -> list[FirmScorecard]:
    doc = read_json(path, "scorecards file")
    try:
        return [FirmScorecard.from_dict(c) for c in doc["scorecards"]]
    except (KeyError, TypeError) as exc:
        raise DataError(f"scorecards file {path} is malformed: {exc}") from exc


# --------------------------------------------------------------------------- commands


def cmd_ingest(args: argparse.Namespace, out: Outputs, config: ProjectConfig) -> int:
    if not config.blocks_file.exists():
        raise ConfigurationError(f"blocks file not found: {config.blocks_file}")
    block_rows, block_rejects = read_blocks(
        config.blocks_file, config.block_columns, config.delimiter, config.reward_unit
    )
    firms, batches, reject_rows = [], {}, []
    for fc in config.firms:
        if not fc.tx_file.exists():
            raise ConfigurationError(f"transactions file not found: {fc.tx_file}")
        parsed = read_transactions(fc.tx_file, config.column_map, config.delimiter)
        firms.append(Firm(fc.firm_id, fc.industry, fc.address, fc.deferrable, fc.kappa))
        batches[fc.firm_id] = parsed.records
        reject_rows += [[fc.tx_file.name, r.row, r.reason] for r in parsed.rejects]
    reject_rows += [[config.blocks_file.name, r.row, r.reason] for r in block_rejects]

    panel = build_panel(firms, batches, block_rows)
    if panel.n == 0:
        raise DataError("no valid transactions survived filtering")
    overrides = read_tag_overrides(config.tag_overrides) if config.tag_overrides else None
    panel, ceiling, tags = annotate_panel(panel, overrides=overrides)
    log.info("ingest: %d records, %d blocks, %d rejects", panel.n, len(panel.blocks), len(reject_rows))

    out.write_json("panel.json", panel_to_dict(panel))
    out.write("rejects.csv", write_csv(["source", "row", "reason"], reject_rows))
    out.write("address_tags.csv", tags_to_csv(tags))
    sys.stdout.write(counts_table(panel))
    sys.stdout.write(f"reward ceiling (95th pct, wei): {ceiling.ceiling} over {ceiling.sample_size} blocks\n")
    sys.stdout.write(f"rejected rows: {len(reject_rows)}\n")
    return 0


def _spec_from_args(args: argparse.Namespace) -> ModelSpec:
    fe = frozenset() if args.fixed_effects == "none" else frozenset(args.fixed_effects.split(","))
    return ModelSpec(
        include_fullness=args.model == "fullness",
        congestion=args.congestion,
        baseline_hour=args.baseline_hour,
        fixed_effects=fe,
    )


def cmd_fit(args: argparse.Namespace, out: Outputs, config: ProjectConfig | None) -> int:
    panel = _load_panel(args.panel)
    if panel.n == 0:
        raise EstimationError("panel has no transactions")
    spec = _spec_from_args(args)
    pooled = fit_model(panel, spec)
    name = args.name or ("fit_pooled" if spec == ModelSpec() else f"fit_pooled_{args.model}")
    out.write_json(f"{name}.json", pooled.to_dict())
    table = coefficient_table([pooled], title="Hour-of-day fee regression, pooled")
    out.write(f"{name}.txt", table)
    out.write(f"{name}.csv", coefficients_csv([pooled]))
    sys.stdout.write(table)

    if args.per_firm:
        firm_spec = ModelSpec(
            include_fullness=True, congestion=args.congestion, baseline_hour=args.baseline_hour
        )
        fits, errors = {}, {}
        for firm in panel.firms:
            try:
                fits[firm.firm_id] = fit_model(panel, firm_spec, firm_id=firm.firm_id)
            except EstimationError as exc:
                fits[firm.firm_id] = None
                errors[firm.firm_id] = str(exc)
        doc = {
            "fits": {k: (None if v is None else v.to_dict()) for k, v in fits.items()},
            "errors": errors,
        }
        out.write_json("fits_firms.json", doc)
        ok = [f for f in fits.values() if f is not None]
        if ok:
            out.write("fits_firms.txt", coefficient_table(ok, title="Hour-of-day fee regression, by firm"))
        for firm_id, why in sorted(errors.items()):
            sys.stdout.write(f"{firm_id}: not estimable: {why}\n")
    return 0


def gas_threshold(config: ProjectConfig | None, pooled: FitResult) -> float:
    if config is not None and config.gas_threshold != "panel_mean":
        return float(config.gas_threshold)
    return pooled.y_mean


def build_scorecards(
    panel: Panel,
    pooled: FitResult,
    firm_fits: Mapping[str, FitResult | None],
    replications: int,
    perm_seed: int,
    window: PeakWindow,
    threshold: float,
) -> list[FirmScorecard]:
    pooled_hours = panel.columns()["hour"]
    cards = []
    for firm in panel.firms:
        perm = PermutationConfig(replications, derive_seed(perm_seed, "pss", firm.firm_id))
        try:
            card = scorecard(panel, firm.firm_id, pooled, firm_fits.get(firm.firm_id), perm, window, pooled_hours)
        except (MetricError, EstimationError) as exc:
            card = FirmScorecard(firm.firm_id, firm.industry, len(panel.records_for(firm.firm_id)))
            card.not_computable["all"] = str(exc)
        if card.mean_fee_usd is not None:
            regime, borderline = classify_regime(card.mean_fee_usd, firm.deferrability_default, threshold)
            card.regime, card.regime_borderline = regime.value, borderline
        cards.append(card)
    return cards


def cmd_score(args: argparse.Namespace, out: Outputs, config: ProjectConfig | None) -> int:
    panel = _load_panel(args.panel)
    pooled = _load_fit(args.pooled_fit)
    firm_fits, _ = _load_firm_fits(args.firm_fits) if args.firm_fits else ({}, {})
    replications = args.replications or (config.replications if config else 10_000)
    seed = args.seed if args.seed is not None else (config.permutation_seed if config else DEFAULT_ROOT_SEED)
    window = config.peak_window if config else PeakWindow()
    threshold = gas_threshold(config, pooled)
    log.info("score: %d firms, %d replications each", len(panel.firms), replications)
    cards = build_scorecards(panel, pooled, firm_fits, replications, seed, window, threshold)
    out.write_json(
        "scorecards.json",
        {
            "gas_threshold": threshold,
            "permutation": {"replications": replications, "seed": seed},
            "pooled_fit_id": pooled.fit_id,
            "scorecards": [c.to_dict() for c in cards],
        },
    )
    table = scorecard_table(cards)
    out.write("scorecards.txt", table)
    sys.stdout.write(table)
    return 1 if any("all" in c.not_computable for c in cards) else 0


def _parse_bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "yes", "y"):
        return True
    if value in ("0", "false", "no", "n"):
        return False
    raise argparse.ArgumentTypeError(f"expected true or false, got {text!r}")


def _gas_value(text: str, threshold: float) -> float:
    """Numeric gas estimate, or 'high'/'low' meaning twice / half the threshold."""
    named = {"high": 2.0 * threshold, "low": 0.5 * threshold}
    if text.lower() in named:
        return named[text.lower()]
    try:
        value = float(text)
    except ValueError:
        raise UsageError(f"--gas must be a number, 'high' or 'low'; got {text!r}") from None
    if not value >= 0:
        raise UsageError("--gas must be non-negative")
    return value


def cmd_recommend(args: argparse.Namespace, out: Outputs, config: ProjectConfig | None) -> int:
    fit = _load_fit(args.fit)
    window = config.peak_window if config else PeakWindow()
    threshold = args.gas_threshold if args.gas_threshold is not None else gas_threshold(config, fit)
    if not threshold > 0:
        raise UsageError("gas threshold must be positive")
    if args.deadline_hours is not None and not args.deferrable:
        raise UsageError("--deadline-hours only applies to deferrable transactions")
    if args.kappa < 0 or (args.volume is not None and args.volume < 0):
        raise UsageError("--kappa and --volume must be non-negative")
    if args.now_hour is not None and not 0 <= args.now_hour < 24:
        raise UsageError("--now-hour must be in 0..23")
    profile = TxProfile(
        gas_estimate=_gas_value(args.gas, threshold),
        deferrable=args.deferrable,
        kappa=args.kappa,
        deadline_window=args.deadline_hours,
        monthly_volume=args.volume,
    )
    rec = recommend(profile, forward_curve(fit, window), threshold, now_hour=args.now_hour)
    doc = rec.to_dict()
    doc["gas_threshold"] = threshold
    doc["fit_id"] = fit.fit_id
    if args.output_dir or os.environ.get(OUTPUT_ENV):
        out.write_json("recommendation.json", doc)
    sys.stdout.write(dumps(doc) if args.format == "json" else rec.to_text())
    return 0


def _scenario(path: str | None) -> dict[str, Any]:
    if path is None:
        return {}
    doc = read_json(path, "scenario file")
    if not isinstance(doc, dict):
        raise ConfigurationError("scenario must be a JSON object")
    return doc


def cmd_simulate(args: argparse.Namespace, out: Outputs, config: ProjectConfig | None) -> int:
    scenario = _scenario(args.scenario)
    hours = args.hours if args.hours is not None else int(scenario.get("hours", 168))
    if hours < 1:
        raise UsageError("--hours must be at least 1")
    bph = args.blocks_per_hour or int(scenario.get("blocks_per_hour", 300))
    root = args.seed if args.seed is not None else int(scenario.get("seed", DEFAULT_ROOT_SEED))
    try:
        demand = scenario.get("demand")
        params = DemandParams.from_dict(demand) if demand is not None else DemandParams.diurnal()
    except TypeError as exc:
        raise ConfigurationError(f"invalid demand parameters: {exc}") from exc
    traj = simulate(params, hours, bph, seed=derive_seed(root, "simulate"))
    out.write("trajectory.csv", traj.to_csv())
    summary = traj.summary()
    window = config.peak_window if config else PeakWindow()
    inside = [r["mean_base_fee_gwei"] for r in summary if r["hour"] in window.hours and r["blocks"]]
    outside = [r["mean_base_fee_gwei"] for r in summary if r["hour"] not in window.hours and r["blocks"]]
    doc = {
        "seed": root,
        "hours": hours,
        "blocks_per_hour": bph,
        "demand": params.to_dict(),
        "hourly": summary,
        "mean_base_fee_gwei_in_window": sum(inside) / len(inside) if inside else None,
        "mean_base_fee_gwei_out_window": sum(outside) / len(outside) if outside else None,
    }
    out.write_json("simulation_summary.json", doc)
    sys.stdout.write(
        f"mean base fee in window: {_fmt_gwei(doc['mean_base_fee_gwei_in_window'])} gwei, "
        f"outside: {_fmt_gwei(doc['mean_base_fee_gwei_out_window'])} gwei\n"
    )

    if args.emit_panel:
        panel_cfg = dict(scenario.get("panel", {}))
        firm_docs = scenario.get("firms") or [
            {"firm_id": "synthetic-a", "n_tx": 2_000},
            {"firm_id": "synthetic-b", "n_tx": 2_000},
        ]
        try:
            firms = [FirmSpec.from_dict(f) for f in firm_docs]
            if "usd_per_eth" in panel_cfg:
                panel_cfg["usd_per_eth"] = Decimal(str(panel_cfg["usd_per_eth"]))
            synthetic = export_synthetic_panel(traj, firms, seed=derive_seed(root, "panel"), **panel_cfg)
        except TypeError as exc:
            raise ConfigurationError(f"invalid panel or firm settings: {exc}") from exc
        out.write_json("panel.json", panel_to_dict(synthetic.panel))
        truth = dict(synthetic.truth)
        for key in ("hour_premia", "model1_hour_effects"):
            truth[key] = {str(h): v for h, v in truth[key].items()}
        out.write_json("truth.json", truth)
    return 0


def _fmt_gwei(value: float | None) -> str:
    return "---" if value is None else f"{value:.3f}"


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def cmd_report(args: argparse.Namespace, out: Outputs, config: ProjectConfig | None) -> int:
    inputs = {
        "panel": Path(args.panel),
        "pooled_fit": [Path(p) for p in args.pooled_fit],
        "firm_fits": Path(args.firm_fits),
        "scorecards": Path(args.scorecards),
    }
    missing = [str(p) for v in inputs.values() for p in (v if isinstance(v, list) else [v]) if not p.exists()]
    if missing:
        raise ConfigurationError("missing report inputs: " + ", ".join(missing))
    panel = _load_panel(inputs["panel"])
    pooled = [_load_fit(p) for p in inputs["pooled_fit"]]
    firm_fits, firm_errors = _load_firm_fits(inputs["firm_fits"])
    cards = _load_scorecards(inputs["scorecards"])
    window = config.peak_window if config else PeakWindow()

    out.write("coefficients_pooled.txt", coefficient_table(pooled, title="Hour-of-day fee regression, pooled"))
    ok = [f for f in firm_fits.values() if f is not None]
    firm_text = coefficient_table(ok, title="Hour-of-day fee regression, by firm") if ok else "No firm fits.\n"
    firm_text += "".join(f"{k}: not estimable: {v}\n" for k, v in sorted(firm_errors.items()))
    out.write("coefficients_firms.txt", firm_text)
    out.write("scorecards.txt", scorecard_table(cards))
    out.write("floors.txt", floors_table(cards))

    ww = {}
    for firm in panel.firms:
        cols = panel.columns(firm.firm_id)
        fees = [r.fee_usd for r in panel.records_for(firm.firm_id)]
        ww[firm.firm_id] = (firm.industry, weekday_weekend(cols["weekday"], fees, cols["phi_br"]))
    out.write("weekday_weekend.txt", weekday_weekend_table(ww))
    out.write("forward_curve.csv", forward_curve(pooled[0], window).to_csv())

    manifest = {
        "bundle_schema": 1,
        "gaspeak_version": __version__,
        "files": {name: _sha256(out.path(name)) for name in BUNDLE_FILES},
        "inputs": {
            "panel": _sha256(inputs["panel"]),
            "pooled_fit": [_sha256(p) for p in inputs["pooled_fit"]],
            "firm_fits": _sha256(inputs["firm_fits"]),
            "scorecards": _sha256(inputs["scorecards"]),
        },
        "pooled_fit_ids": [f.fit_id for f in pooled],
        "root_seed": config.root_seed if config else None,
    }
    out.write_json("manifest.json", manifest)
    sys.stdout.write(f"report bundle written to {out.directory}\n")
    return 0


# --------------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gaspeak", description="Intraday gas-fee analytics.")
    parser.add_argument("--version", action="version", version=f"gaspeak {__version__}")
    parser.add_argument("--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, config_required: bool = False) -> None:
        p.add_argument("--config", required=config_required, help="project config JSON")
        p.add_argument("--output-dir", help=f"output directory (overrides ${OUTPUT_ENV} and the config)")

    p = sub.add_parser("ingest", help="parse exports into a panel")
    common(p, config_required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("fit", help="estimate hour-of-day regressions")
    common(p)
    p.add_argument("--panel", required=True)
    p.add_argument("--model", choices=("base", "fullness"), default="base")
    p.add_argument("--fixed-effects", default="none", help="none, firm, week or firm,week")
    p.add_argument("--congestion", choices=("phi_br", "phi_s"), default="phi_br")
    p.add_argument("--baseline-hour", type=int, default=23)
    p.add_argument("--per-firm", action="store_true", help="also fit the fullness model per firm")
    p.add_argument("--name", help="output basename for the pooled fit")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("score", help="firm scorecards")
    common(p)
    p.add_argument("--panel", required=True)
    p.add_argument("--pooled-fit", required=True)
    p.add_argument("--firm-fits")
    p.add_argument("--replications", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("recommend", help="scheduling recommendation for one transaction profile")
    common(p)
    p.add_argument("--fit", required=True)
    p.add_argument("--gas", required=True, help="expected fee in threshold units, or high/low")
    p.add_argument("--deferrable", type=_parse_bool, required=True)
    p.add_argument("--kappa", type=float, default=0.0)
    p.add_argument("--volume", type=int)
    p.add_argument("--deadline-hours", type=int)
    p.add_argument("--now-hour", type=int)
    p.add_argument("--gas-threshold", type=float)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_recommend)

    p = sub.add_parser("simulate", help="run the fee-market simulator")
    common(p)
    p.add_argument("--scenario")
    p.add_argument("--seed", type=int)
    p.add_argument("--hours", type=int)
    p.add_argument("--blocks-per-hour", type=int)
    p.add_argument("--emit-panel", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", help="assemble the report bundle")
    common(p)
    p.add_argument("--panel", required=True)
    p.add_argument("--pooled-fit", required=True, action="append", help="repeatable; the first drives the curve")
    p.add_argument("--firm-fits", required=True)
    p.add_argument("--scorecards", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    warnings.simplefilter("ignore" if not args.verbose else "default", EstimationWarning)

    out: Outputs | None = None
    try:
        config = load_config(args.config) if args.config else None
        out = Outputs(resolve_output_dir(args.output_dir, config))
        func: Callable[..., int] = args.func
        return func(args, out, config)
    except GaspeakError as exc:
        if out is not None:
            out.rollback()
        print(f"gaspeak {args.command}: error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
