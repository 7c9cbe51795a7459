"""Fixed-width text tables and CSV emitters, with readers for round-trips.

Text layout: optional title lines, a header line, a rule of dash runs (one
run per column, two spaces apart), body rows, a closing rule, then notes.
Column extents come from the rule, so a cell may contain single spaces but
never a run of two, and a line made only of dashes reads as a rule.
"""

from __future__ import annotations

import csv
import io
import math
from typing import Any, Iterable, Mapping, Sequence

from .econometrics import HOURS, FitResult, hour_term, stars
from .ingest import Panel
from .metrics import FirmScorecard, WeekdayWeekend

GAP = "  "
WELCH_STARS = (0.10, 0.05, 0.01)


def _cell(value: Any) -> str:
    text = "" if value is None else str(value)
    if GAP in text or "\n" in text:
        raise ValueError(f"cell {text!r} contains a double space or newline")
    return text


def render_table(
    headers: Sequence[str],
    rows: Iterable[Sequence[Any]],
    title: str | None = None,
    notes: Sequence[str] = (),
    align: str | None = None,
) -> str:
    """Render a fixed-width table; ``align`` holds one 'l' or 'r' per column (default: first left)."""
    body = [[_cell(v) for v in row] for row in rows]
    heads = [_cell(h) for h in headers]
    if any(len(r) != len(heads) for r in body):
        raise ValueError("row width does not match header")
    align = align or "l" + "r" * (len(heads) - 1)
    widths = [max([len(h)] + [len(r[i]) for r in body]) for i, h in enumerate(heads)]

    def line(cells: Sequence[str]) -> str:
        out = [c.ljust(w) if a == "l" else c.rjust(w) for c, w, a in zip(cells, widths, align)]
        return GAP.join(out).rstrip()

    rule = GAP.join("-" * w for w in widths)
    lines = [title] if title else []
    lines += [line(heads), rule, *(line(r) for r in body), rule, *notes]
    return "\n".join(lines) + "\n"


def _is_rule(line: str) -> bool:
    return bool(line.strip()) and set(line.strip()) <= {"-", " "}


def parse_table(text: str) -> tuple[list[str], list[list[str]]]:
    """Inverse of render_table: (headers, rows) with every cell as text."""
    lines = text.splitlines()
    try:
        first = next(i for i, ln in enumerate(lines) if _is_rule(ln))
    except StopIteration:
        raise ValueError("no rule line; not a gaspeak text table") from None
    spans = []
    pos = 0
    for run in lines[first].split(GAP):
        spans.append((pos, pos + len(run)))
        pos += len(run) + len(GAP)

    def cut(ln: str) -> list[str]:
        return [ln[a:b].strip() if i < len(spans) - 1 else ln[a:].strip() for i, (a, b) in enumerate(spans)]

    headers = cut(lines[first - 1])
    rows = []
    for ln in lines[first + 1:]:
        if _is_rule(ln):
            break
        rows.append(cut(ln))
    return headers, rows


def write_csv(headers: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(headers)
    for row in rows:
        writer.writerow(["" if v is None else v for v in row])
    return out.getvalue()


def read_csv(text: str) -> list[dict[str, str]]:
    return list(csv.DictReader(io.StringIO(text)))


def _num(value: float | None, fmt: str) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "---"
    return format(value, fmt)


def _signed(value: float | None, digits: int = 3) -> str:
    return _num(value, f"+.{digits}f")


def _pct(value: float | None) -> str:
    return "---" if value is None else f"{100 * value:.1f}%"


# --------------------------------------------------------------------------- firm counts


def counts_table(panel: Panel) -> str:
    counts = panel.firm_counts()
    rows = []
    for f in panel.firms:
        excluded = sum(panel.exclusions.get(f.firm_id, {}).values())
        rows.append([f.industry, f.firm_id, counts.get(f.firm_id, 0), excluded])
    rows.append(["Pooled", "", panel.n, sum(r[3] for r in rows)])
    return render_table(["Industry", "Firm", "N", "Excluded"], rows, align="llrr")


# --------------------------------------------------------------------------- coefficients


def _term_label(term: str) -> str:
    if term == "const":
        return "Intercept"
    if term in ("phi_br", "phi_s"):
        return f"delta ({term})"
    return term


def _ordered_terms(fits: Sequence[FitResult]) -> list[str]:
    seen: list[str] = []
    hours = [hour_term(h) for h in range(HOURS)]
    for group in (["const"], hours, ["phi_br", "phi_s"]):
        for term in group:
            if any(term in f.coef for f in fits) and term not in seen:
                seen.append(term)
    return seen


def coefficient_table(fits: Sequence[FitResult], title: str | None = None) -> str:
    """Hour-of-day coefficients per fit: estimate with stars, HC3 SE in parentheses."""
    if not fits:
        raise ValueError("no fits to tabulate")
    headers = ["Term"]
    for f in fits:
        name = f"{f.label} {'M2' if f.spec.include_fullness else 'M1'}"
        headers += [name, f"{name} SE"]
    rows = []
    for term in _ordered_terms(fits):
        row = [_term_label(term)]
        for f in fits:
            coef = f.coef.get(term)
            if coef is None or math.isnan(coef):
                row += ["---", ""]
            else:
                row += [f"{coef:.4f}{stars(f.p.get(term))}", f"({_num(f.se_hc3.get(term), '.4f')})"]
        rows.append(row)
    rows.append(["N"] + [x for f in fits for x in (f.n, "")])
    rows.append(["Adj. R2"] + [x for f in fits for x in (_num(f.adj_r2, ".4f"), "")])
    base = sorted({f.spec.baseline_hour for f in fits})
    notes = [
        f"Baseline hour: {', '.join(f'h{b}' for b in base)}. HC3 standard errors in parentheses.",
        "M1: hour dummies only. M2: adds the fullness regressor.",
        "* p<0.05, ** p<0.01, *** p<0.001.",
    ]
    dropped = sorted({f"{t} ({why})" for f in fits for t, why in f.dropped.items()})
    if dropped:
        notes.append("Dropped: " + "; ".join(dropped))
    return render_table(headers, rows, title=title, notes=notes)


def coefficients_csv(fits: Sequence[FitResult]) -> str:
    rows = []
    for f in fits:
        for term in f.coef:
            rows.append([
                f.label, f.fit_id, term,
                *(_csv_float(d.get(term)) for d in (f.coef, f.se_hc3, f.t, f.p)),
            ])
    return write_csv(["label", "fit_id", "term", "coef", "se_hc3", "t", "p"], rows)


def _csv_float(value: float | None) -> str:
    return "" if value is None or math.isnan(value) else repr(float(value))


# --------------------------------------------------------------------------- scorecards


def _sorted_cards(cards: Sequence[FirmScorecard], key: str) -> list[FirmScorecard]:
    """Descending by ``key``; cards lacking it go last in firm-id order."""
    present = [c for c in cards if getattr(c, key) is not None]
    missing = [c for c in cards if getattr(c, key) is None]
    present.sort(key=lambda c: (-getattr(c, key), c.firm_id))
    missing.sort(key=lambda c: c.firm_id)
    return present + missing


def _regime_label(card: FirmScorecard) -> str:
    if card.regime is None:
        return "---"
    return card.regime + ("~" if card.regime_borderline else "")


def scorecard_table(cards: Sequence[FirmScorecard]) -> str:
    headers = [
        "Industry", "Firm", "N", "n_peak", "n_off", "s_off", "PSS", "p(PSS)",
        "A_i", "FeeSavings", "Floor USD", "Floor %", "delta", "Regime", "Omitted",
    ]
    rows = []
    for c in _sorted_cards(cards, "pss"):
        rows.append([
            c.industry, c.firm_id, c.n_total,
            _num(c.n_peak, "d"), _num(c.n_off, "d"), _num(c.s_off, ".3f"), _signed(c.pss),
            _num(c.pss_pvalue, ".4f"), _num(c.avoidance_ratio, ".3f"), _pct(c.fee_savings),
            _num(c.floor_usd, ",.2f"), _pct(c.floor_pct),
            "---" if c.pass_through is None else f"{c.pass_through:.3f}{stars(c.pass_through_p)}",
            _regime_label(c), ",".join(sorted(c.not_computable)) or "-",
        ])
    notes = [
        "Rows sorted by PSS descending. PSS = s_off - 16/24 for the default window.",
        "Regime ~ marks a gas estimate within 10% of the threshold.",
    ]
    for c in sorted(cards, key=lambda c: c.firm_id):
        for what, why in sorted(c.not_computable.items()):
            notes.append(f"{c.firm_id}: {what} not computable: {why}")
    return render_table(headers, rows, notes=notes, align="ll" + "r" * 11 + "ll")


def floors_table(cards: Sequence[FirmScorecard]) -> str:
    headers = ["Industry", "Firm", "N", "h*", "gas USD at h*", "C actual", "C cf", "Floor USD", "Floor %", "phi_br at h*"]
    rows = []
    for c in _sorted_cards(cards, "floor_pct"):
        if c.cheapest_hour is None:
            continue
        rows.append([
            c.industry, c.firm_id, c.n_total, c.cheapest_hour, _num(c.mean_gas_cheapest, ".3f"),
            _num(c.c_actual, ",.2f"), _num(c.c_cf, ",.2f"), _num(c.floor_usd, ",.2f"),
            _num(c.floor_pct, ".3f"), _num(c.fullness_at_cheapest, ".3f"),
        ])
    notes = [
        "h* = argmin_h mean fee; C cf = N x mean fee at h*; Floor = C actual - C cf; Floor % = Floor / C actual.",
        "Rows sorted by Floor % descending. All monetary values in USD.",
    ]
    return render_table(headers, rows, notes=notes, align="ll" + "r" * 8)


def floors_csv(cards: Sequence[FirmScorecard]) -> str:
    rows = [
        [c.firm_id, c.n_total, c.cheapest_hour, c.mean_gas_cheapest, c.c_actual, c.c_cf, c.floor_usd, c.floor_pct,
         c.fullness_at_cheapest]
        for c in _sorted_cards(cards, "floor_pct")
    ]
    return write_csv(
        ["firm", "n", "h_star", "mean_gas_usd_h_star", "c_actual", "c_cf", "floor_usd", "floor_pct", "phi_br_h_star"],
        rows,
    )


def weekday_weekend_table(rows_in: Mapping[str, tuple[str, WeekdayWeekend]]) -> str:
    """Rows keyed by firm id; values are (industry, result)."""
    headers = [
        "Industry", "Firm", "N M-F", "N Wke", "gas M-F", "gas Wke", "Premium", "t gas",
        "phi M-F", "phi Wke", "d phi", "t phi",
    ]
    rows = []
    notes = [
        "Premium = (M-F - Wke) / Wke. Welch t-tests with unequal variances.",
        "* p<0.10, ** p<0.05, *** p<0.01.",
    ]
    for firm_id in sorted(rows_in):
        industry, w = rows_in[firm_id]
        tg = None if w.welch_gas is None else f"{w.welch_gas.t:.3f}{stars(w.welch_gas.p_value, WELCH_STARS)}"
        tp = None if w.welch_phi is None else f"{w.welch_phi.t:.3f}{stars(w.welch_phi.p_value, WELCH_STARS)}"
        rows.append([
            industry, firm_id, w.n_weekday, w.n_weekend,
            _num(w.mean_gas_weekday, ".4f"), _num(w.mean_gas_weekend, ".4f"), _pct(w.premium), tg or "---",
            _num(w.mean_phi_weekday, ".3f"), _num(w.mean_phi_weekend, ".3f"), _signed(w.delta_phi), tp or "---",
        ])
        if w.omitted:
            notes.append(f"{firm_id}: {w.omitted}")
    return render_table(headers, rows, notes=notes, align="ll" + "r" * 10)
