"""One test per acceptance criterion; each prints a PASS/FAIL line with the measured margin."""

from __future__ import annotations

import math
import shutil
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from gaspeak.cli import BUNDLE_FILES, main
from gaspeak.econometrics import (
    ModelSpec,
    derive_seed,
    fit_model,
    hc3_se,
    hour_term,
    ols_fit,
    permutation_null,
    welch_t,
)
from gaspeak.feesim import (
    GWEI,
    DemandParams,
    FeeMarketState,
    FirmSpec,
    Policy,
    base_fee_update,
    default_workload,
    evaluate_policy,
    export_synthetic_panel,
    simulate,
)
from gaspeak.metrics import pss, pss_statistic, residual_floor
from gaspeak.scheduler import Regime, classify_regime
from helpers import synthetic_panel, write_exports
from oracles import ols_hc3_bruteforce, random_small_design
from reference_values import FLOOR_ROWS, PSS_ORDER, PSS_ROWS, WEEKEND_ROWS

ROOT_SEED = 20260331
WINDOW = set(range(11, 19))


def test_criterion_01_pss_fixtures(acceptance):
    worst = 0.0
    for firm, (n_peak, n_off, s_print, pss_print) in PSS_ROWS.items():
        hours = [12] * n_peak + [3] * n_off
        s_off, score = pss(hours)
        worst = max(worst, abs(s_off - s_print), abs(score - pss_print))
    order = sorted(PSS_ROWS, key=lambda f: -pss([12] * PSS_ROWS[f][0] + [3] * PSS_ROWS[f][1])[1])
    acceptance(1, worst <= 0.001 and order == PSS_ORDER, f"max |diff| {worst:.5f} <= 0.001; order {order == PSS_ORDER}")


def floor_fixture(n: int, h_star: int, c_actual: str, c_cf: str) -> tuple[list[int], list[Fraction]]:
    """N fees whose cheapest-hour mean is c_cf / N and whose total is c_actual.

    The printed cheapest-hour mean is rounded to 3 dp, so it is recovered from
    the printed counterfactual total rather than used directly.
    """
    mean = Fraction(c_cf) / n
    k = max(1, n // 24)
    rest = (Fraction(c_actual) - k * mean) / (n - k)
    hours = [h_star] * k + [(h_star + 1) % 24] * (n - k)
    return hours, [mean] * k + [rest] * (n - k)


def test_criterion_02_residual_floor_fixtures(acceptance):
    worst_usd = worst_pct = worst_mean = 0.0
    hstar_ok = True
    for firm, (n, h, mean_print, c_act, c_cf, floor_print, pct_print, _) in FLOOR_ROWS.items():
        hours, fees = floor_fixture(n, h, str(c_act), str(c_cf))
        r = residual_floor(hours, fees)
        hstar_ok &= r.cheapest_hour == h
        worst_mean = max(worst_mean, abs(r.mean_at_cheapest - mean_print))
        worst_usd = max(worst_usd, abs(r.c_actual - c_act), abs(r.c_cf - c_cf), abs(r.floor_usd - floor_print))
        worst_pct = max(worst_pct, abs(r.floor_pct - pct_print))

    rng = np.random.default_rng(derive_seed(ROOT_SEED, "floor-fuzz"))
    negative = 0
    for _ in range(1000):
        n = int(rng.integers(1, 400))
        hours = rng.integers(0, 24, n)
        fees = rng.lognormal(-2.0, 1.5, n) * (rng.random(n) > 0.05)
        negative += residual_floor(hours, fees).floor_usd < 0
    passed = hstar_ok and worst_mean <= 0.0005 and worst_usd <= 0.02 and worst_pct <= 0.005 and negative == 0
    acceptance(2, passed, f"max USD diff {worst_usd:.4f} <= 0.02, pct diff {worst_pct:.4f} <= 0.005, "
                          f"h* mean diff {worst_mean:.5f}, negative floors {negative}/1000")


def sample_with_mean(mean: float, n: int, spread: float, offset: int) -> np.ndarray:
    z = np.sin(np.arange(n) * 1.7 + offset)
    z = z - z.mean()
    return mean + spread * z


def test_criterion_03_welch_and_premium_fixtures(acceptance):
    worst = 0.0
    signs_ok = True
    for i, (firm, row) in enumerate(WEEKEND_ROWS.items()):
        n_mf, n_wke, gas_mf, gas_wke, prem, t_gas, phi_mf, phi_wke, d_phi, t_phi = row
        worst = max(worst, abs((gas_mf - gas_wke) / gas_wke - prem), abs((phi_mf - phi_wke) - d_phi))
        for m_a, m_b, t_print in ((gas_mf, gas_wke, t_gas), (phi_mf, phi_wke, t_phi)):
            a = sample_with_mean(m_a, n_mf, 0.5 * m_a, i)
            b = sample_with_mean(m_b, n_wke, 0.5 * m_b, i + 1)
            signs_ok &= np.sign(welch_t(a, b).t) == np.sign(t_print)
    hand = welch_t([1, 2, 3], [4, 5, 6]).t
    passed = worst <= 0.11 and signs_ok and abs(hand - (-3.674)) <= 0.001
    acceptance(3, passed, f"max formula diff {worst:.3f} <= 0.11; t signs match {signs_ok}; hand t {hand:.4f}")


def test_criterion_04_ols_hc3_oracle(acceptance):
    rng = np.random.default_rng(derive_seed(ROOT_SEED, "ols-oracle"))
    worst = 0.0
    for _ in range(200):
        X, y = random_small_design(rng)
        fit = ols_fit(X, y)
        beta, e, se = ols_hc3_bruteforce(X, y)
        got = np.concatenate([fit.coef, hc3_se(X, fit.residuals, fit.hat)])
        want = np.concatenate([beta, se])
        worst = max(worst, float(np.max(np.abs(got - want) / np.maximum(1.0, np.abs(want)))))

    invariant_failures = 0
    rng = np.random.default_rng(derive_seed(ROOT_SEED, "ols-invariants"))
    for _ in range(100):
        X, y = random_small_design(rng)
        fit = ols_fit(X, y)
        scale = float(10 ** rng.uniform(-3, 3))
        scaled = ols_fit(X, scale * y)
        orth = np.abs(X.T @ fit.residuals).max() <= 1e-8 * (np.abs(X).sum() * np.abs(y).max() + 1)
        coef_ok = np.allclose(scaled.coef, scale * fit.coef, rtol=1e-8, atol=1e-8 * scale * np.abs(fit.coef).max())
        se_ok = np.allclose(hc3_se(X, scaled.residuals, scaled.hat), scale * hc3_se(X, fit.residuals, fit.hat),
                            rtol=1e-6, atol=1e-12)
        invariant_failures += not (orth and coef_ok and se_ok)
    acceptance(4, worst <= 1e-10 and invariant_failures == 0,
               f"max rel diff {worst:.2e} <= 1e-10 over 200 cases; invariant failures {invariant_failures}/100")


def test_criterion_05_coefficient_recovery(acceptance):
    start = time.perf_counter()
    traj = simulate(DemandParams.diurnal(), hours=168, blocks_per_hour=60, seed=derive_seed(ROOT_SEED, "c5-sim"))
    firms = [FirmSpec(f"synthetic-{k}", 10_000) for k in range(5)]
    premium = tuple(0.05 if h in WINDOW else 0.0 for h in range(24))
    synthetic = export_synthetic_panel(traj, firms, seed=derive_seed(ROOT_SEED, "c5-panel"), hour_premium=premium)
    panel, truth = synthetic.panel, synthetic.truth
    m1 = fit_model(panel, ModelSpec())
    m2 = fit_model(panel, ModelSpec(include_fullness=True))
    elapsed = time.perf_counter() - start

    z1 = {h: (m1.coef[hour_term(h)] - truth["model1_hour_effects"][h]) / m1.se_hc3[hour_term(h)]
          for h in range(23)}
    worst_h = max(z1, key=lambda h: abs(z1[h]))
    delta, se = m2.coef["phi_br"], m2.se_hc3["phi_br"]
    z_delta = (delta - truth["pass_through"]) / se
    passed = (panel.n == 50_000 and all(abs(z) <= 3 for z in z1.values()) and delta > 0
              and abs(z_delta) <= 3 and elapsed < 30)
    acceptance(5, passed, f"max |z| M1 {abs(z1[worst_h]):.2f} (h{worst_h}) <= 3; delta {delta:.4f} "
                          f"(z {z_delta:+.2f}) vs 0.12; {elapsed:.1f}s < 30s")


def test_criterion_06_permutation_calibration(acceptance):
    start = time.perf_counter()
    stat = pss_statistic()
    R = 10_000

    n_null = 1_000
    hours = np.random.default_rng(derive_seed(ROOT_SEED, "c6-mean-firm")).integers(0, 24, n_null)
    null = permutation_null(hours, stat, R, seed=derive_seed(ROOT_SEED, "pss", "c6-mean-firm"))
    se = math.sqrt((2 / 9) / n_null / R)
    mean_z = float(null.null_draws.mean()) / se

    n_firm, firms = 500, 200
    rejected = 0
    for i in range(firms):
        h = np.random.default_rng(derive_seed(ROOT_SEED, "c6-firm", i)).integers(0, 24, n_firm)
        rejected += permutation_null(h, stat, R, seed=derive_seed(ROOT_SEED, "pss", f"c6-{i}")).p_value <= 0.05
    rate = rejected / firms
    elapsed = time.perf_counter() - start
    passed = abs(mean_z) <= 3 and 0.03 <= rate <= 0.07 and elapsed < 60
    acceptance(6, passed, f"null mean {null.null_draws.mean():+.2e} ({mean_z:+.2f} SE) within 3 SE; "
                          f"rejection rate {rate:.3f} in [0.03, 0.07]; {elapsed:.1f}s < 60s")


def test_criterion_07_fee_market_mechanism(acceptance):
    traj = simulate(DemandParams.diurnal(), hours=48, blocks_per_hour=300, seed=derive_seed(ROOT_SEED, "simulate"))
    means = traj.hourly_mean_base_fee()
    inside = float(np.mean([means[h] for h in WINDOW]))
    outside = float(np.mean([means[h] for h in range(24) if h not in WINDOW]))

    fees = traj.base_fee.astype(object)
    # each step equals the update rule applied to the previous block
    rule_ok = all(
        base_fee_update(FeeMarketState(i, int(fees[i]), traj.gas_target, last_gas_used=int(traj.gas_used[i])))
        == int(fees[i + 1])
        for i in range(traj.n_blocks - 1)
    )
    bounded = all(Fraction(7, 8) <= Fraction(int(b), int(a)) <= Fraction(9, 8) for a, b in zip(fees, fees[1:]))

    start = 8**12 * 5
    zero = simulate(DemandParams.zero(initial_base_fee=start), hours=1, blocks_per_hour=12, seed=0).base_fee.tolist()
    decay_ok = all(8 * b == 7 * a for a, b in zip(zero, zero[1:]))

    target = DemandParams(
        transactional_rate=(125.0,) * 24, transactional_gas=120_000, burst_rate=(0.0,) * 24,
        deterministic=True, initial_base_fee=12 * GWEI,
    )
    flat = simulate(target, hours=3, blocks_per_hour=50, seed=0)
    flat_ok = bool((flat.gas_used == flat.gas_target).all() and (flat.base_fee == 12 * GWEI).all())

    passed = inside > outside and rule_ok and bounded and decay_ok and flat_ok
    acceptance(7, passed, f"window {inside / GWEI:.2f} > outside {outside / GWEI:.2f} gwei; steps within 1/8 "
                          f"{bounded}; exact 7/8 decay {decay_ok}; target holds {flat_ok}")


def test_criterion_08_policy_ordering(acceptance):
    traj = simulate(DemandParams.diurnal(), hours=48, blocks_per_hour=300, seed=derive_seed(ROOT_SEED, "simulate"))
    workload = default_workload()
    results = {p: evaluate_policy(traj, p, workload) for p in Policy}
    cost = {p: r.mean_cost for p, r in results.items()}
    saving = 1 - cost[Policy.PEAK_SHAVE] / cost[Policy.UNIFORM]
    shaved = results[Policy.PEAK_SHAVE]
    floor = residual_floor([int(traj.hour_of_day[b]) for b in shaved.blocks], [int(c) for c in shaved.costs])
    passed = (cost[Policy.CHEAPEST_HOUR] <= cost[Policy.PEAK_SHAVE] <= cost[Policy.UNIFORM] and saving >= 0.10
              and floor.floor_usd > 0 and floor.c_cf > 0)
    per_gas = {p: c / (workload[0].gas * GWEI) for p, c in cost.items()}
    acceptance(8, passed, "mean cost gwei/gas: cheapest {:.2f} <= peak-shave {:.2f} <= uniform {:.2f}; saving {:.1%} "
                          ">= 10%; peak-shave floor {:.1%} of cost > 0".format(
                              per_gas[Policy.CHEAPEST_HOUR], per_gas[Policy.PEAK_SHAVE], per_gas[Policy.UNIFORM],
                              saving, floor.floor_pct))


def test_criterion_09_regime_matrix(acceptance):
    threshold = 0.18
    grid = [threshold * m for m in (0.0, 0.5, 0.9, 0.95, 0.999, 1.0, 1.001, 1.05, 1.1, 2.0, 100.0)]
    cells = {}
    for g in grid:
        for d in (True, False):
            cells[g, d] = classify_regime(g, d, threshold)[0]
    total = len(cells) == 2 * len(grid) and all(isinstance(r, Regime) for r in cells.values())
    toggles = all(
        {cells[g, True], cells[g, False]} in ({Regime.I, Regime.III}, {Regime.II, Regime.IV}) for g in grid
    ) and all(
        (cells[g, d] in (Regime.I, Regime.III)) == (g > threshold) for g in grid for d in (True, False)
    )
    boundary = cells[threshold, True] is Regime.II and cells[threshold, False] is Regime.IV
    exemplars = cells[2 * threshold, True] is Regime.I and cells[0.5 * threshold, False] is Regime.IV
    acceptance(9, total and toggles and boundary and exemplars,
               f"{len(cells)} cells each one regime; toggles {toggles}; threshold -> II/IV {boundary}; "
               f"exemplars {exemplars}")


def run_pipeline(config: Path, out: Path) -> None:
    panel = str(out / "panel.json")
    steps = [
        ["ingest", "--config", str(config)],
        ["fit", "--panel", panel],
        ["fit", "--panel", panel, "--model", "fullness", "--per-firm"],
        ["score", "--config", str(config), "--panel", panel, "--pooled-fit", str(out / "fit_pooled.json"),
         "--firm-fits", str(out / "fits_firms.json")],
        ["report", "--config", str(config), "--panel", panel, "--pooled-fit", str(out / "fit_pooled.json"),
         "--pooled-fit", str(out / "fit_pooled_fullness.json"), "--firm-fits", str(out / "fits_firms.json"),
         "--scorecards", str(out / "scorecards.json")],
    ]
    for args in steps:
        code = main([*args, "--output-dir", str(out)])
        assert code == 0, f"{args[0]} exited {code}"


def test_criterion_10_end_to_end_determinism(acceptance, tmp_path):
    exports = write_exports(synthetic_panel(n_per_firm=500, firms=4).panel, tmp_path / "exports")
    copy = tmp_path / "exports-copy"
    shutil.copytree(exports.parent, copy)
    run_pipeline(exports, tmp_path / "run-a")
    run_pipeline(copy / exports.name, tmp_path / "run-b")
    names = [*BUNDLE_FILES, "manifest.json"]
    same = [n for n in names if (tmp_path / "run-a" / n).read_bytes() == (tmp_path / "run-b" / n).read_bytes()]
    acceptance(10, len(same) == len(names), f"{len(same)}/{len(names)} bundle files byte-identical across two runs")
