"""OLS with HC3 standard errors, Welch t-tests and hour-permutation nulls."""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np
from scipy import linalg, stats

from .errors import ConfigurationError, EstimationError
from .ingest import Panel

HOURS = 24
LEVERAGE_TOL = 1e-10
RNG_ALGORITHM = "splitmix64-counter/v1"

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


class EstimationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ModelSpec:
    dependent: str = "fee_usd"
    baseline_hour: int = 23
    include_fullness: bool = False
    congestion: str = "phi_br"
    fixed_effects: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        if not 0 <= self.baseline_hour < HOURS:
            raise ConfigurationError(f"baseline_hour must be in 0..23, got {self.baseline_hour}")
        if self.congestion not in ("phi_br", "phi_s"):
            raise ConfigurationError(f"congestion regressor must be phi_br or phi_s, got {self.congestion!r}")
        object.__setattr__(self, "fixed_effects", frozenset(self.fixed_effects))
        bad = set(self.fixed_effects) - {"firm", "week"}
        if bad:
            raise ConfigurationError(f"unknown fixed effects: {sorted(bad)}")

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["fixed_effects"] = sorted(self.fixed_effects)
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> ModelSpec:
        return cls(**{**d, "fixed_effects": frozenset(d.get("fixed_effects", ()))})


@dataclass
class Design:
    X: np.ndarray
    y: np.ndarray
    terms: list[str]
    rows: np.ndarray
    dropped: dict[str, str] = field(default_factory=dict)


def hour_term(h: int) -> str:
    return f"h{h}"


def design_matrix(
    hours: Sequence[int],
    y: Sequence[float],
    spec: ModelSpec = ModelSpec(),
    congestion: Sequence[float] | None = None,
    firm: Sequence | None = None,
    week: Sequence | None = None,
    drop_singletons: bool = False,
) -> Design:
    """Intercept, 23 hour dummies, optional congestion column and FE dummies.

    Hour columns with no rows are dropped with a warning. With
    ``drop_singletons`` a dummy level observed exactly once is removed
    together with its row: that row is fitted exactly by its own dummy
    (leverage 1), so removing both leaves every other estimate unchanged
    while keeping HC3 defined.
    """
    hours = np.asarray(hours, dtype=np.int64)
    y = np.asarray(y, dtype=float)
    n = len(hours)
    if n == 0:
        raise EstimationError("empty sample: no rows to estimate from")
    if len(y) != n:
        raise ConfigurationError("hours and y differ in length")
    if hours.min() < 0 or hours.max() >= HOURS:
        raise ConfigurationError("hours must lie in 0..23")

    cols: list[np.ndarray] = [np.ones(n)]
    terms = ["const"]
    dummy = [False]
    for h in range(HOURS):
        if h != spec.baseline_hour:
            cols.append((hours == h).astype(float))
            terms.append(hour_term(h))
            dummy.append(True)
    if spec.include_fullness:
        if congestion is None:
            raise ConfigurationError("include_fullness requires a congestion column")
        c = np.asarray(congestion, dtype=float)
        if np.isnan(c).any():
            raise EstimationError(f"{spec.congestion} missing for some rows; annotate the panel first")
        cols.append(c)
        terms.append(spec.congestion)
        dummy.append(False)
    for name, values in (("firm", firm), ("week", week)):
        if name not in spec.fixed_effects:
            continue
        if values is None:
            raise ConfigurationError(f"fixed effect {name!r} requested without its column")
        values = np.asarray(values)
        for level in sorted(set(values.tolist()))[1:]:
            cols.append((values == level).astype(float))
            terms.append(f"{name}[{level}]")
            dummy.append(True)

    X = np.column_stack(cols)
    keep_rows = np.ones(n, dtype=bool)
    dropped: dict[str, str] = {}
    is_dummy = np.array(dummy)

    while True:
        counts = X[keep_rows].sum(axis=0)
        empty = [j for j in range(1, X.shape[1]) if is_dummy[j] and counts[j] == 0 and terms[j] not in dropped]
        single = (
            [j for j in range(1, X.shape[1]) if is_dummy[j] and counts[j] == 1 and terms[j] not in dropped]
            if drop_singletons
            else []
        )
        if not empty and not single:
            break
        for j in empty:
            dropped[terms[j]] = "no observations"
        for j in single:
            dropped[terms[j]] = "single observation (leverage 1)"
            keep_rows &= X[:, j] == 0
    for term, reason in dropped.items():
        warnings.warn(f"term {term} dropped: {reason}", EstimationWarning, stacklevel=2)

    keep_cols = [j for j, t in enumerate(terms) if t not in dropped]
    rows = np.flatnonzero(keep_rows)
    return Design(X[np.ix_(rows, keep_cols)], y[rows], [terms[j] for j in keep_cols], rows, dropped)


def build_design(
    panel: Panel, spec: ModelSpec = ModelSpec(), firm_id: str | None = None, drop_singletons: bool = False
) -> Design:
    cols = panel.columns(firm_id)
    if spec.dependent != "fee_usd":
        raise ConfigurationError(f"unsupported dependent variable {spec.dependent!r}")
    return design_matrix(
        cols["hour"],
        cols["fee_usd"],
        spec,
        congestion=cols[spec.congestion] if spec.include_fullness else None,
        firm=cols["firm"],
        week=cols["week"],
        drop_singletons=drop_singletons,
    )


@dataclass
class OLSFit:
    coef: np.ndarray
    residuals: np.ndarray
    hat: np.ndarray


def ols_fit(X: np.ndarray, y: np.ndarray, terms: Sequence[str] | None = None) -> OLSFit:
    """Least squares through a column-pivoted QR decomposition."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, k = X.shape
    names = list(terms) if terms is not None else [f"x{j}" for j in range(k)]
    if n < k:
        raise EstimationError(f"{n} rows cannot identify {k} coefficients")
    Q, R, perm = linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = max(n, k) * np.finfo(float).eps * (diag[0] if k else 0.0)
    rank = int((diag > tol).sum())
    if rank < k:
        # Dropped pivots plus every kept column that enters their linear combination.
        weights = linalg.solve_triangular(R[:rank, :rank], R[:rank, rank:]) if rank else np.zeros((0, k))
        involved = {perm[j] for j in range(rank, k)}
        involved |= {perm[i] for i in range(rank) if np.any(np.abs(weights[i]) > 1e-8)}
        collinear = sorted(names[j] for j in involved)
        raise EstimationError(f"design is rank deficient; collinear terms: {', '.join(collinear)}")
    coef = np.empty(k)
    coef[perm] = linalg.solve_triangular(R, Q.T @ y)
    residuals = y - X @ coef
    hat = np.einsum("ij,ij->i", Q, Q)
    return OLSFit(coef, residuals, hat)


def hc3_cov(X: np.ndarray, residuals: np.ndarray, hat: np.ndarray) -> np.ndarray:
    """(X'X)^-1 X' diag(e_i^2 / (1 - h_ii)^2) X (X'X)^-1 via a QR factor of X."""
    X = np.asarray(X, dtype=float)
    hat = np.asarray(hat, dtype=float)
    bad = np.flatnonzero(1.0 - hat < LEVERAGE_TOL)
    if bad.size:
        raise EstimationError(f"row {int(bad[0])} has leverage 1; HC3 is undefined")
    Q, R = np.linalg.qr(X)
    r_inv = linalg.solve_triangular(R, np.eye(R.shape[0]))
    A = Q * (np.asarray(residuals) / (1.0 - hat))[:, None]
    middle = A.T @ A
    return r_inv @ middle @ r_inv.T


def hc3_se(X: np.ndarray, residuals: np.ndarray, hat: np.ndarray) -> np.ndarray:
    return np.sqrt(np.clip(np.diag(hc3_cov(X, residuals, hat)), 0.0, None))


def adj_r2(residuals: np.ndarray, y: np.ndarray, k: int) -> float:
    """Adjusted R^2 with k regressors excluding the intercept; NaN when y is constant."""
    y = np.asarray(y, dtype=float)
    n = len(y)
    if n <= k + 1:
        raise EstimationError(f"adjusted R^2 needs n > k + 1 (n={n}, k={k})")
    sst = float(((y - y.mean()) ** 2).sum())
    if sst == 0.0:
        return float("nan")
    ssr = float((np.asarray(residuals) ** 2).sum())
    return 1.0 - (ssr / (n - k - 1)) / (sst / (n - 1))


@dataclass
class FitResult:
    coef: dict[str, float]
    se_hc3: dict[str, float]
    t: dict[str, float]
    p: dict[str, float]
    adj_r2: float
    n: int
    spec: ModelSpec
    dropped: dict[str, str] = field(default_factory=dict)
    y_mean: float = float("nan")
    label: str = "pooled"

    @property
    def fit_id(self) -> str:
        payload = json.dumps(self.to_dict(include_id=False), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:12]

    def hour_coef(self, h: int) -> float | None:
        """Hour premium relative to the baseline; None for a dropped hour."""
        if h == self.spec.baseline_hour:
            return 0.0
        return self.coef.get(hour_term(h))

    def to_dict(self, include_id: bool = True) -> dict[str, Any]:
        def clean(d: Mapping[str, float]) -> dict[str, float | None]:
            return {k: (None if v is None or math.isnan(v) else float(v)) for k, v in d.items()}

        doc = {
            "label": self.label,
            "spec": self.spec.to_dict(),
            "n": self.n,
            "adj_r2": None if math.isnan(self.adj_r2) else self.adj_r2,
            "y_mean": None if math.isnan(self.y_mean) else self.y_mean,
            "coef": clean(self.coef),
            "se_hc3": clean(self.se_hc3),
            "t": clean(self.t),
            "p": clean(self.p),
            "dropped": dict(self.dropped),
        }
        if include_id:
            doc["fit_id"] = self.fit_id
        return doc

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> FitResult:
        def unclean(d: Mapping[str, float | None]) -> dict[str, float]:
            return {k: float("nan") if v is None else float(v) for k, v in d.items()}

        return cls(
            coef=unclean(doc["coef"]),
            se_hc3=unclean(doc["se_hc3"]),
            t=unclean(doc["t"]),
            p=unclean(doc["p"]),
            adj_r2=float("nan") if doc["adj_r2"] is None else doc["adj_r2"],
            n=doc["n"],
            spec=ModelSpec.from_dict(doc["spec"]),
            dropped=dict(doc.get("dropped", {})),
            y_mean=float("nan") if doc.get("y_mean") is None else doc["y_mean"],
            label=doc.get("label", "pooled"),
        )


def fit_design(design: Design, spec: ModelSpec, label: str = "pooled") -> FitResult:
    X, y, terms = design.X, design.y, design.terms
    ols = ols_fit(X, y, terms)
    se = hc3_se(X, ols.residuals, ols.hat)
    n, k = X.shape
    df = n - k
    t = np.full(k, np.nan)
    positive = se > 0
    t[positive] = ols.coef[positive] / se[positive]
    p = np.full(k, np.nan)
    if df > 0:
        p[positive] = 2.0 * stats.t.sf(np.abs(t[positive]), df)
    r2 = adj_r2(ols.residuals, y, k - 1) if n > k else float("nan")
    return FitResult(
        coef=dict(zip(terms, ols.coef.tolist())),
        se_hc3=dict(zip(terms, se.tolist())),
        t=dict(zip(terms, t.tolist())),
        p=dict(zip(terms, p.tolist())),
        adj_r2=r2,
        n=n,
        spec=spec,
        dropped=dict(design.dropped),
        y_mean=float(np.mean(y)),
        label=label,
    )


def fit_model(
    panel: Panel, spec: ModelSpec = ModelSpec(), firm_id: str | None = None, drop_singletons: bool = True
) -> FitResult:
    """Build the design for the panel (or one firm) and fit it."""
    design = build_design(panel, spec, firm_id, drop_singletons=drop_singletons)
    return fit_design(design, spec, label=firm_id or "pooled")


def stars(p: float | None, thresholds: Sequence[float] = (0.05, 0.01, 0.001)) -> str:
    if p is None or math.isnan(p):
        return ""
    return "*" * sum(p < cut for cut in thresholds)


# --------------------------------------------------------------------------- Welch


@dataclass(frozen=True)
class WelchResult:
    mean_a: float
    mean_b: float
    t: float
    df: float
    n_a: int
    n_b: int
    p_value: float


def welch_t(a: Sequence[float], b: Sequence[float]) -> WelchResult:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(a) < 2 or len(b) < 2:
        raise EstimationError("Welch test needs at least two observations per sample")
    va, vb = a.var(ddof=1), b.var(ddof=1)
    if va == 0.0 and vb == 0.0:
        raise EstimationError("Welch test undefined: both samples have zero variance")
    qa, qb = va / len(a), vb / len(b)
    t = (a.mean() - b.mean()) / math.sqrt(qa + qb)
    df = (qa + qb) ** 2 / (qa**2 / (len(a) - 1) + qb**2 / (len(b) - 1))
    return WelchResult(float(a.mean()), float(b.mean()), float(t), float(df), len(a), len(b),
                       float(2.0 * stats.t.sf(abs(t), df)))


# --------------------------------------------------------------------------- permutation


def splitmix64(seed: int, index: np.ndarray) -> np.ndarray:
    """Outputs number ``index`` (1-based) of the SplitMix64 stream started at ``seed``."""
    z = np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + np.asarray(index, dtype=np.uint64) * _GAMMA
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def uniform_hours(seed: int, first_rep: int, n_reps: int, n: int) -> np.ndarray:
    """Hour draws for replications [first_rep, first_rep + n_reps), shape (n_reps, n).

    Record i of replication r uses stream output r * n + i + 1, mapped to an
    hour by a 32-bit multiply-shift, so any replication can be regenerated
    on its own.
    """
    start = np.uint64(first_rep) * np.uint64(n) + np.uint64(1)
    index = start + np.arange(n_reps * n, dtype=np.uint64)
    z = splitmix64(seed, index)
    hours = ((z >> np.uint64(32)) * np.uint64(HOURS)) >> np.uint64(32)
    return hours.astype(np.int64).reshape(n_reps, n)


@dataclass
class PermutationNull:
    statistic_name: str
    observed: float
    null_draws: np.ndarray
    p95: float
    p_value: float
    seed: int
    rng: str = RNG_ALGORITHM

    @property
    def replications(self) -> int:
        return len(self.null_draws)

    def to_dict(self, include_draws: bool = True) -> dict[str, Any]:
        doc = {
            "statistic_name": self.statistic_name,
            "observed": self.observed,
            "p95": self.p95,
            "p_value": self.p_value,
            "seed": self.seed,
            "rng": self.rng,
            "replications": self.replications,
        }
        if include_draws:
            doc["null_draws"] = self.null_draws.tolist()
        return doc


def permutation_null(
    hours: Sequence[int],
    statistic: Callable[[np.ndarray], np.ndarray],
    replications: int = 10_000,
    seed: int = 0,
    statistic_name: str = "statistic",
    chunk_elements: int = 4_000_000,
) -> PermutationNull:
    """Null distribution of ``statistic`` under independent uniform hour reassignment.

    ``statistic`` maps an integer array of shape (r, n) to r values. The
    p-value is add-one smoothed: (#{draw >= observed} + 1) / (R + 1).
    """
    if replications < 1:
        raise ConfigurationError("replications must be at least 1")
    observed_hours = np.asarray(hours, dtype=np.int64)
    n = len(observed_hours)
    if n == 0:
        raise EstimationError("permutation null needs at least one record")
    observed = float(np.asarray(statistic(observed_hours[None, :]))[0])
    per_chunk = max(1, chunk_elements // n)
    draws = np.empty(replications)
    for start in range(0, replications, per_chunk):
        count = min(per_chunk, replications - start)
        draws[start : start + count] = statistic(uniform_hours(seed, start, count, n))
    rank = (95 * replications + 99) // 100
    p95 = float(np.sort(draws)[rank - 1])
    p_value = (int((draws >= observed).sum()) + 1) / (replications + 1)
    return PermutationNull(statistic_name, observed, draws, p95, p_value, seed)


def derive_seed(root: int, *labels: object) -> int:
    """64-bit sub-seed: first 8 bytes (big-endian) of sha256("root:label1:label2...")."""
    text = ":".join([str(root), *map(str, labels)])
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "big")
