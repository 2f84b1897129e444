"""Synthetic benchmarks, evaluation metrics, and the forecasting harness.

The synthetic design: standard-normal predictors, one persisting
autoregressive coefficient series (kept away from zero by whole-path
rejection), a few intermittent series (autoregressive paths thresholded to
exact zero near the origin), and the rest identically zero.  Responses add
unit-variance observation noise.

The forecast harness refits each method on an expanding window and scores
one-step-ahead errors by cumulative mean squared forecast error.
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .baselines import cv_lambda, dlm_fit, lasso_expanding_path, lasso_fit
from .densities import transition_theta
from .em import CoefPath, Dataset, FitOptions, FitResult, fit_map
from .errors import ConfigurationError, DssError, ParameterError, StructuralError
from .params import DssParams

__all__ = [
    "SyntheticTruth",
    "MetricsReport",
    "simulate_panel",
    "simulate_synthetic",
    "sse",
    "hamming",
    "compute_metrics",
    "forecast_one_step",
    "msfe_path",
    "DssForecaster",
    "DlmForecaster",
    "LassoForecaster",
    "MethodForecast",
    "ForecastReport",
    "run_forecast_experiment",
    "ReplicationConfig",
    "ReplicationReport",
    "run_replications",
    "table_grid",
    "Standardizer",
    "LoadedPanel",
    "load_panel_csv",
]

# Coefficient-path generation scale: stationary variance 2 puts the total
# signal energy of the benchmark near 700, with the 0.5 activity threshold at
# about a third of a stationary standard deviation.
_GEN_PHI1 = 0.98
_GEN_STATIONARY_VAR = 2.0
_ACTIVITY_THRESHOLD = 0.5
_MAX_REJECTIONS = 100_000


@dataclass(frozen=True)
class SyntheticTruth:
    dataset: Dataset
    true_path: CoefPath
    active_mask: np.ndarray
    rejection_attempts: int = 1

    def __post_init__(self):
        mask = np.asarray(self.active_mask, dtype=int)
        if mask.shape != self.true_path.coefficients.shape:
            raise StructuralError("active_mask must match the coefficient matrix")
        object.__setattr__(self, "active_mask", mask)


def _stationary_ar1(
    rng: np.random.Generator, n_steps: int, phi1: float, stationary_sd: float
) -> np.ndarray:
    """Stationary AR(1) path of length n_steps + 1."""
    sd_innov = stationary_sd * math.sqrt(1.0 - phi1 * phi1)
    path = np.empty(n_steps + 1)
    path[0] = stationary_sd * rng.standard_normal()
    shocks = rng.standard_normal(n_steps) * sd_innov
    for t in range(n_steps):
        path[t + 1] = phi1 * path[t] + shocks[t]
    return path


def simulate_panel(
    p: int,
    n_times: int,
    seed: int,
    n_persistent: int = 1,
    n_intermittent: int = 3,
    phi1: float = _GEN_PHI1,
    noise_sd: float = 1.0,
    stationary_var: float = _GEN_STATIONARY_VAR,
) -> SyntheticTruth:
    """Generic sparse time-varying regression generator.

    Persistent series are regenerated until the whole path stays beyond the
    activity threshold in absolute value; intermittent series are thresholded
    pointwise to exact zero; remaining series are identically zero.
    """
    n_signal = n_persistent + n_intermittent
    if p < n_signal + 1:
        raise ConfigurationError(
            f"need p >= {n_signal + 1} ({n_signal} signal series plus noise), got p={p}"
        )
    if n_times < 2:
        raise ConfigurationError(f"need at least 2 time points, got {n_times}")
    rng = np.random.default_rng(seed)
    design = rng.standard_normal((n_times, p))

    full = np.zeros((p, n_times + 1))
    attempts = 0
    for j in range(n_persistent):
        while True:
            attempts += 1
            if attempts > _MAX_REJECTIONS:
                raise ConfigurationError(
                    "persistent-series rejection did not terminate; threshold too strict"
                )
            path = _stationary_ar1(rng, n_times, phi1, math.sqrt(stationary_var))
            if np.abs(path).min() > _ACTIVITY_THRESHOLD:
                full[j] = path
                break
    for j in range(n_persistent, n_signal):
        path = _stationary_ar1(rng, n_times, phi1, math.sqrt(stationary_var))
        path[np.abs(path) < _ACTIVITY_THRESHOLD] = 0.0
        full[j] = path

    coefficients = full[:, 1:]
    responses = np.einsum("tj,jt->t", design, coefficients) + noise_sd * rng.standard_normal(
        n_times
    )
    true_path = CoefPath(beta0=full[:, 0].copy(), coefficients=coefficients.copy())
    return SyntheticTruth(
        dataset=Dataset(responses, design),
        true_path=true_path,
        active_mask=(coefficients != 0.0).astype(int),
        rejection_attempts=attempts,
    )


def simulate_synthetic(p: int, n_times: int, seed: int) -> SyntheticTruth:
    """Benchmark design: one persisting series, three intermittent, rest zero."""
    if p < 5:
        raise ConfigurationError(f"the benchmark design needs p >= 5, got {p}")
    return simulate_panel(p, n_times, seed, n_persistent=1, n_intermittent=3)


_SUBSETS = ("all", "signal", "noise")


def _subset_rows(n_series: int, subset: str, n_signal: int) -> slice:
    if subset == "all":
        return slice(0, n_series)
    if subset == "signal":
        return slice(0, n_signal)
    if subset == "noise":
        return slice(n_signal, n_series)
    raise ParameterError(f"subset must be one of {_SUBSETS}, got {subset!r}")


def sse(estimate: CoefPath, truth: CoefPath, subset: str = "all", n_signal: int = 4) -> float:
    """Sum of squared coefficient errors over the chosen series subset."""
    if estimate.coefficients.shape != truth.coefficients.shape:
        raise StructuralError("estimate and truth shapes differ")
    rows = _subset_rows(estimate.n_series, subset, n_signal)
    diff = estimate.coefficients[rows] - truth.coefficients[rows]
    return float(np.sum(diff * diff))


def hamming(
    estimate: CoefPath, truth: CoefPath, subset: str = "all", n_signal: int = 4
) -> float:
    """Percentage of positions whose zero/nonzero status disagrees with truth.

    Zero detection is exact: the smoother and the LASSO threshold to exact
    zeros, and the dense smoother never does, so no epsilon is involved.
    """
    if estimate.coefficients.shape != truth.coefficients.shape:
        raise StructuralError("estimate and truth shapes differ")
    rows = _subset_rows(estimate.n_series, subset, n_signal)
    est = estimate.coefficients[rows] == 0.0
    tru = truth.coefficients[rows] == 0.0
    if est.size == 0:
        return 0.0
    return float(100.0 * np.mean(est != tru))


@dataclass(frozen=True)
class MetricsReport:
    sse_total: float
    sse_signal: float
    sse_noise: float
    hamming_total: float
    hamming_signal: float
    hamming_noise: float
    runtime_seconds: float


def compute_metrics(
    estimate: CoefPath, truth: CoefPath, runtime_seconds: float = 0.0, n_signal: int = 4
) -> MetricsReport:
    return MetricsReport(
        sse_total=sse(estimate, truth, "all", n_signal),
        sse_signal=sse(estimate, truth, "signal", n_signal),
        sse_noise=sse(estimate, truth, "noise", n_signal),
        hamming_total=hamming(estimate, truth, "all", n_signal),
        hamming_signal=hamming(estimate, truth, "signal", n_signal),
        hamming_noise=hamming(estimate, truth, "noise", n_signal),
        runtime_seconds=runtime_seconds,
    )


def forecast_one_step(
    path: CoefPath,
    weights,
    x_next: np.ndarray,
    params: DssParams,
    naive: bool = False,
) -> float:
    """One-step-ahead forecast from a fitted path.

    Uses the plug-in conditional mean of the coefficient transition: each
    coefficient contributes theta(beta_T) * (slab mean) since the spike mean
    is zero.  ``naive=True`` instead carries the last coefficients forward
    unchanged (ablation switch).
    """
    x_next = np.asarray(x_next, dtype=float)
    if x_next.shape != (path.n_series,):
        raise StructuralError(
            f"x_next must have shape ({path.n_series},), got {x_next.shape}"
        )
    beta_last = path.coefficients[:, -1]
    if naive:
        return float(x_next @ beta_last)
    if weights is not None:
        theta_last = weights.theta[:, -1]
    else:
        theta_last = np.asarray(transition_theta(beta_last, params))
    slab_mean_next = params.phi0 + params.phi1 * (beta_last - params.phi0)
    return float(x_next @ (theta_last * slab_mean_next))


def msfe_path(errors) -> np.ndarray:
    """Cumulative mean of squared forecast errors."""
    e = np.asarray(errors, dtype=float)
    if e.ndim != 1 or e.size == 0:
        raise StructuralError("msfe needs a nonempty 1-D error sequence")
    return np.cumsum(e * e) / np.arange(1, e.size + 1)


class DssForecaster:
    """Expanding-window forecaster for the sparse MAP smoother.

    Stateful: with ``warm_start`` the previous fit seeds the next one (the
    new time point starts from the last fitted column).
    """

    def __init__(
        self,
        params: DssParams,
        options: FitOptions | None = None,
        warm_start: bool = True,
        naive: bool = False,
    ):
        self.params = params
        self.options = options or FitOptions()
        self.warm_start = warm_start
        self.naive = naive
        self.last_fit: FitResult | None = None

    def __call__(self, train: Dataset, x_next: np.ndarray) -> float:
        init = None
        if self.warm_start and self.last_fit is not None:
            prev = self.last_fit.path
            if prev.n_times == train.n_times - 1:
                coef = np.hstack([prev.coefficients, prev.coefficients[:, -1:]])
                init = CoefPath(beta0=prev.beta0.copy(), coefficients=coef)
            elif prev.n_times == train.n_times:
                init = prev
        fit = fit_map(train, self.params, self.options, init=init)
        self.last_fit = fit
        return forecast_one_step(fit.path, fit.weights, x_next, self.params, self.naive)


class DlmForecaster:
    """Expanding-window forecaster for the dense smoother."""

    def __init__(self, phi1: float, lambda1: float):
        self.phi1 = phi1
        self.lambda1 = lambda1

    def __call__(self, train: Dataset, x_next: np.ndarray) -> float:
        path = dlm_fit(train, self.phi1, self.lambda1)
        return float(np.asarray(x_next) @ (self.phi1 * path.coefficients[:, -1]))


class LassoForecaster:
    """Expanding-window forecaster for the static cross-validated LASSO."""

    def __init__(self, folds: int = 10, seed: int = 0):
        self.folds = folds
        self.seed = seed

    def __call__(self, train: Dataset, x_next: np.ndarray) -> float:
        lam = cv_lambda(
            train.responses, train.design, folds=self.folds, seed=self.seed + train.n_times
        )
        fit = lasso_fit(train.responses, train.design, lam)
        return float(np.asarray(x_next) @ fit.coefficients)


@dataclass(frozen=True)
class MethodForecast:
    errors: np.ndarray
    msfe: np.ndarray
    final_msfe: float
    failed_steps: tuple[int, ...] = ()


@dataclass(frozen=True)
class ForecastReport:
    split: int
    methods: dict

    @property
    def partial(self) -> bool:
        return any(m.failed_steps for m in self.methods.values())


def _builtin_forecaster(name: str, config: dict):
    cfg = (config or {}).get(name, {})
    if name == "dss":
        return DssForecaster(
            params=cfg["params"],
            options=cfg.get("options"),
            warm_start=cfg.get("warm_start", True),
            naive=cfg.get("naive", False),
        )
    if name == "dlm":
        return DlmForecaster(phi1=cfg["phi1"], lambda1=cfg["lambda1"])
    if name == "lasso":
        return LassoForecaster(folds=cfg.get("folds", 10), seed=cfg.get("seed", 0))
    raise ConfigurationError(f"unknown forecast method {name!r}")


def run_forecast_experiment(
    data: Dataset,
    split: int,
    methods,
    config: dict | None = None,
) -> ForecastReport:
    """One-step-ahead expanding-window comparison.

    For each t from ``split`` to T-1 every method is fit on rows 1..t (the
    harness hands it a truncated dataset, so no method can see the future)
    and asked to predict the response at t+1.  A method failure at a step is
    recorded as a missing error and the run continues.
    """
    n_times = data.n_times
    if not 1 < split < n_times:
        raise ConfigurationError(f"split must lie strictly inside (1, {n_times})")
    resolved = []
    for spec in methods:
        if isinstance(spec, str):
            resolved.append((spec, _builtin_forecaster(spec, config or {})))
        else:
            name, fn = spec
            resolved.append((name, fn))

    n_steps = n_times - split
    errors = {name: np.full(n_steps, np.nan) for name, _ in resolved}
    failures = {name: [] for name, _ in resolved}
    for i, t in enumerate(range(split, n_times)):
        train = data.head(t)
        x_next = data.design[t]
        y_next = data.responses[t]
        for name, forecaster in resolved:
            try:
                yhat = forecaster(train, x_next)
                errors[name][i] = y_next - yhat
            except (DssError, FloatingPointError) as exc:  # noqa: PERF203
                failures[name].append((t, str(exc)))

    out = {}
    for name, _ in resolved:
        e = errors[name]
        # Failed steps contribute nothing to the running mean but are flagged.
        counts = np.cumsum(np.isfinite(e))
        msfe = np.cumsum(np.nan_to_num(e, nan=0.0) ** 2) / np.where(counts > 0, counts, 1)
        final = float(msfe[-1]) if counts[-1] > 0 else math.nan
        out[name] = MethodForecast(
            errors=e,
            msfe=msfe,
            final_msfe=final,
            failed_steps=tuple(t for t, _ in failures[name]),
        )
    return ForecastReport(split=split, methods=out)


def table_grid() -> list[DssParams]:
    """The 24-cell hyperparameter grid of the benchmark study."""
    cells = []
    for phi1 in (0.95, 0.98):
        for lam0 in (0.7, 0.9):
            for slab_var in (10.0, 25.0):
                for theta in (0.9, 0.95, 0.98):
                    cells.append(
                        DssParams(
                            theta_marginal=theta,
                            lambda0=lam0,
                            lambda1=slab_var * (1.0 - phi1**2),
                            phi0=0.0,
                            phi1=phi1,
                        )
                    )
    return cells


@dataclass(frozen=True)
class ReplicationConfig:
    p: int = 50
    n_times: int = 100
    seeds: tuple[int, ...] = tuple(range(10))
    include_dlm: bool = True
    include_lasso: bool = True
    dss_cells: tuple[DssParams, ...] = ()
    dss_options: FitOptions = field(default_factory=FitOptions)
    dlm_phi1: float = _GEN_PHI1
    dlm_lambda1: float = 1.0
    lasso_folds: int = 10
    workers: int = 1


def _cell_label(kind: str, params: DssParams | None) -> str:
    if params is None:
        return kind
    slab_var = params.stationary_var
    return (
        f"dss phi1={params.phi1:g} lambda0={params.lambda0:g} "
        f"slab_var={slab_var:g} theta={params.theta_marginal:g}"
    )


def _replication_task(args) -> dict:
    kind, label, params, config, seed = args
    truth = simulate_synthetic(config.p, config.n_times, seed)
    start = time.perf_counter()
    try:
        if kind == "dss":
            fit = fit_map(truth.dataset, params, config.dss_options)
            estimate = fit.path
        elif kind == "dlm":
            estimate = dlm_fit(truth.dataset, config.dlm_phi1, config.dlm_lambda1)
        elif kind == "lasso":
            estimate = lasso_expanding_path(
                truth.dataset, folds=config.lasso_folds, seed=seed
            )
        else:
            raise ConfigurationError(f"unknown method kind {kind!r}")
    except DssError as exc:
        return {"label": label, "seed": seed, "error": str(exc)}
    runtime = time.perf_counter() - start
    metrics = compute_metrics(estimate, truth.true_path, runtime)
    return {"label": label, "seed": seed, "metrics": metrics}


@dataclass(frozen=True)
class ReplicationReport:
    rows: tuple[dict, ...]

    def to_csv(self, file) -> None:
        cols = [
            "method",
            "time_s",
            "sse_total",
            "hamming_total",
            "sse_signal",
            "hamming_signal",
            "sse_noise",
            "hamming_noise",
            "n_seeds",
            "n_failures",
        ]
        with open(file, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(cols)
            for row in self.rows:
                writer.writerow([row["method"]] + [repr(row[c]) for c in cols[1:-2]] + [row["n_seeds"], row["n_failures"]])

    def cell(self, label: str) -> dict:
        for row in self.rows:
            if row["method"] == label:
                return row
        raise KeyError(label)


def run_replications(config: ReplicationConfig) -> ReplicationReport:
    """Average metrics over seeds for every method cell.

    Per-cell failures are recorded (and excluded from the averages) without
    aborting the run; aggregation order is fixed so the report is
    reproducible regardless of worker scheduling.
    """
    tasks = []
    if config.include_dlm:
        tasks += [("dlm", "dlm", None, config, s) for s in config.seeds]
    if config.include_lasso:
        tasks += [("lasso", "lasso", None, config, s) for s in config.seeds]
    for cell in config.dss_cells:
        label = _cell_label("dss", cell)
        tasks += [("dss", label, cell, config, s) for s in config.seeds]

    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_replication_task, tasks))
    else:
        results = [_replication_task(t) for t in tasks]

    by_label: dict[str, list[dict]] = {}
    for res in results:
        by_label.setdefault(res["label"], []).append(res)

    rows = []
    for label in dict.fromkeys(t[1] for t in tasks):
        cell_results = by_label.get(label, [])
        good = [r["metrics"] for r in cell_results if "metrics" in r]
        failures = [r for r in cell_results if "error" in r]
        if good:
            row = {
                "method": label,
                "time_s": float(np.mean([m.runtime_seconds for m in good])),
                "sse_total": float(np.mean([m.sse_total for m in good])),
                "hamming_total": float(np.mean([m.hamming_total for m in good])),
                "sse_signal": float(np.mean([m.sse_signal for m in good])),
                "hamming_signal": float(np.mean([m.hamming_signal for m in good])),
                "sse_noise": float(np.mean([m.sse_noise for m in good])),
                "hamming_noise": float(np.mean([m.hamming_noise for m in good])),
                "n_seeds": len(good),
                "n_failures": len(failures),
            }
        else:
            row = {
                "method": label,
                "time_s": math.nan,
                "sse_total": math.nan,
                "hamming_total": math.nan,
                "sse_signal": math.nan,
                "hamming_signal": math.nan,
                "sse_noise": math.nan,
                "hamming_noise": math.nan,
                "n_seeds": 0,
                "n_failures": len(failures),
            }
        rows.append(row)
    return ReplicationReport(rows=tuple(rows))


@dataclass(frozen=True)
class Standardizer:
    """Per-column affine transform parameters (mean 0, sd 1 scaling)."""

    column_names: tuple[str, ...]
    means: np.ndarray
    sds: np.ndarray

    def transform(self, matrix: np.ndarray) -> np.ndarray:
        return (np.asarray(matrix, dtype=float) - self.means) / self.sds

    def inverse(self, matrix: np.ndarray) -> np.ndarray:
        return np.asarray(matrix, dtype=float) * self.sds + self.means


@dataclass(frozen=True)
class LoadedPanel:
    dataset: Dataset
    target: str
    standardizer: Standardizer | None = None


def load_panel_csv(
    path,
    target: str,
    date_column: bool = False,
    standardize: bool = False,
) -> LoadedPanel:
    """Read a rectangular numeric panel with a header row.

    ``target`` names the response column; the remaining numeric columns form
    the design matrix.  With ``date_column`` the first column is an
    identifier and is ignored for the numbers.  Parse failures name the
    1-based data row and column.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise StructuralError(f"{path}: empty file") from None
        raw_rows = list(reader)
    if not raw_rows:
        raise StructuralError(f"{path}: no data rows")

    start_col = 1 if date_column else 0
    names = [h.strip() for h in header[start_col:]]
    if target not in names:
        raise StructuralError(f"{path}: target column {target!r} not in header {names}")
    width = len(header)
    body = np.empty((len(raw_rows), len(names)))
    for r, row in enumerate(raw_rows, start=1):
        if len(row) != width:
            raise StructuralError(
                f"{path}: row {r} has {len(row)} cells, expected {width}"
            )
        for c, cell in enumerate(row[start_col:], start=start_col + 1):
            try:
                value = float(cell)
            except ValueError:
                raise StructuralError(
                    f"{path}: non-numeric cell at row {r}, column {c}"
                ) from None
            if not math.isfinite(value):
                raise StructuralError(
                    f"{path}: non-finite cell at row {r}, column {c}"
                )
            body[r - 1, c - start_col - 1] = value

    standardizer = None
    if standardize:
        means = body.mean(axis=0)
        sds = body.std(axis=0)
        flat = np.flatnonzero(sds == 0.0)
        if flat.size:
            raise StructuralError(
                f"{path}: column {names[flat[0]]!r} is constant; cannot standardize"
            )
        body = (body - means) / sds
        standardizer = Standardizer(tuple(names), means, sds)

    target_idx = names.index(target)
    responses = body[:, target_idx]
    design = np.delete(body, target_idx, axis=1)
    design_names = tuple(n for i, n in enumerate(names) if i != target_idx)
    return LoadedPanel(
        dataset=Dataset(responses, design, column_names=design_names),
        target=target,
        standardizer=standardizer,
    )
