"""Experiment harness: CSV ingestion, preprocessing, protocols and reports.

Protocols mirror the evaluation setup: synthetic (n, sigma) grids with
repeated trials, real-data benchmark runs over random train/test splits
with shuffled training labels, and seed-ratio sweeps. Every trial draws
its randomness from a SeedSequence substream derived from the experiment
seed and the trial's position, so reports are bitwise reproducible.
"""

from __future__ import annotations

import csv
import json
import math
import time
import warnings
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .baselines import naive_ao, ols_unshuffled
from .core import Coefficients, Dataset, Permutation, SeedSet, default_lambda, ridge_solve
from .gncr import GncrConfig, gncr_solve
from .metrics import beta_correlation, perm_overlap, test_error, train_error
from .synth import generate, recovery_feasible, snr


class DataError(ValueError):
    """Input data is missing, malformed, or degenerate."""


# ---------------------------------------------------------------- loading

def load_csv(path, label_columns) -> Dataset:
    """Read a headered numeric CSV into features and labels.

    Features are the non-label columns in file order; labels follow the
    order given in ``label_columns``. Unparsable cells fail fast with the
    offending file line.
    """
    label_columns = list(label_columns)
    if not label_columns:
        raise DataError("at least one label column is required")
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        missing = [c for c in label_columns if c not in header]
        if missing:
            raise DataError(f"{path}: label column(s) not found: {', '.join(missing)}")
        label_idx = [header.index(c) for c in label_columns]
        feature_idx = [i for i in range(len(header)) if i not in set(label_idx)]
        if not feature_idx:
            raise DataError(f"{path}: no feature columns left after removing labels")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: line {lineno}: expected {len(header)} cells, got {len(row)}")
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                bad = next(c for c in row if not _is_float(c))
                raise DataError(f"{path}: line {lineno}: non-numeric cell {bad!r}") from None
    if not rows:
        raise DataError(f"{path}: no data rows")
    table = np.asarray(rows, dtype=float)
    return Dataset(X=table[:, feature_idx], Y=table[:, label_idx])


def _is_float(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


# ----------------------------------------------------------- preprocessing

@dataclass(frozen=True)
class PreprocessPolicy:
    """outlier_z: drop rows with any column z-score beyond this; None disables."""

    outlier_z: float | None = 4.0
    max_outlier_sweeps: int = 100


@dataclass(frozen=True)
class ColumnTransform:
    kind: str          # "zscore" | "minmax" | "dropped"
    offset: float
    scale: float


@dataclass(frozen=True)
class TransformRecord:
    """Fitted per-column transforms plus dropped rows/columns.

    Keeps enough to map coefficients fitted on processed data back to raw
    units: if x' = (x - a) / s and y' = (y - b) / t, then
    y = X_raw beta_raw + intercept with beta_raw[k, j] = beta[k, j] t_j / s_k.
    """

    x_transforms: tuple[ColumnTransform, ...]
    y_transforms: tuple[ColumnTransform, ...]
    kept_x_columns: tuple[int, ...]
    kept_y_columns: tuple[int, ...]
    dropped_rows: tuple[int, ...]

    def raw_coefficients(self, beta) -> tuple[np.ndarray, np.ndarray]:
        """Map processed-space beta to raw-space (beta_raw, intercept)."""
        b = beta.beta if isinstance(beta, Coefficients) else np.asarray(beta, dtype=float)
        s = np.array([t.scale for t in self.x_transforms])
        a = np.array([t.offset for t in self.x_transforms])
        t = np.array([t.scale for t in self.y_transforms])
        off = np.array([t.offset for t in self.y_transforms])
        beta_raw = b * t[None, :] / s[:, None]
        intercept = off - a @ beta_raw
        return beta_raw, intercept

    def predict_raw(self, X_raw, beta) -> np.ndarray:
        """Predictions in raw label units from raw (kept) feature columns."""
        X_raw = np.asarray(X_raw, dtype=float)
        beta_raw, intercept = self.raw_coefficients(beta)
        return X_raw @ beta_raw + intercept


def _fit_column(col: np.ndarray) -> ColumnTransform:
    if col.min() >= 0.0:
        lo, hi = float(col.min()), float(col.max())
        if hi - lo == 0.0:
            return ColumnTransform(kind="dropped", offset=lo, scale=1.0)
        return ColumnTransform(kind="minmax", offset=lo, scale=hi - lo)
    mean, std = float(col.mean()), float(col.std())
    if std == 0.0:
        return ColumnTransform(kind="dropped", offset=mean, scale=1.0)
    return ColumnTransform(kind="zscore", offset=mean, scale=std)


def preprocess(data: Dataset, policy: PreprocessPolicy | None = None):
    """Outlier removal plus per-column scaling.

    Signed columns are standardized to zero mean and unit standard
    deviation; all-non-negative columns are mapped to [0, 1]. The outlier
    sweep removes rows whose z-score exceeds the policy threshold in any
    column and repeats until stable, so the whole step is idempotent.
    Returns the processed dataset and the fitted TransformRecord.
    """
    policy = policy or PreprocessPolicy()
    if data.n < 2:
        raise DataError("preprocessing needs at least two rows")
    table = np.hstack([data.X, data.Y])
    keep = np.ones(data.n, dtype=bool)
    if policy.outlier_z is not None:
        for _ in range(policy.max_outlier_sweeps):
            sub = table[keep]
            mean = sub.mean(axis=0)
            std = sub.std(axis=0)
            std[std == 0.0] = np.inf  # constant columns flag no outliers
            z = np.abs((table - mean) / std)
            bad = keep & (z > policy.outlier_z).any(axis=1)
            if not bad.any():
                break
            keep &= ~bad
            if keep.sum() < 2:
                raise DataError("outlier removal left fewer than two rows")
    dropped_rows = tuple(int(i) for i in np.nonzero(~keep)[0])
    table = table[keep]

    d_x = data.d_x
    x_specs = [_fit_column(table[:, k]) for k in range(d_x)]
    y_specs = [_fit_column(table[:, d_x + k]) for k in range(data.d_y)]
    for k, spec in enumerate(x_specs):
        if spec.kind == "dropped":
            warnings.warn(f"dropping zero-variance feature column {k}", stacklevel=2)
    for k, spec in enumerate(y_specs):
        if spec.kind == "dropped":
            warnings.warn(f"dropping zero-variance label column {k}", stacklevel=2)
    kept_x = tuple(k for k, s in enumerate(x_specs) if s.kind != "dropped")
    kept_y = tuple(k for k, s in enumerate(y_specs) if s.kind != "dropped")
    if not kept_x:
        raise DataError("all feature columns have zero variance")
    if not kept_y:
        raise DataError("all label columns have zero variance")

    X = np.column_stack([
        (table[:, k] - x_specs[k].offset) / x_specs[k].scale for k in kept_x
    ])
    Y = np.column_stack([
        (table[:, d_x + k] - y_specs[k].offset) / y_specs[k].scale for k in kept_y
    ])
    record = TransformRecord(
        x_transforms=tuple(x_specs[k] for k in kept_x),
        y_transforms=tuple(y_specs[k] for k in kept_y),
        kept_x_columns=kept_x,
        kept_y_columns=kept_y,
        dropped_rows=dropped_rows,
    )
    return Dataset(X=X, Y=Y), record


# ----------------------------------------------------------------- splits

def split(data: Dataset, fraction: float, rng_seed) -> tuple[Dataset, Dataset]:
    """Uniform random row split into (train, test), deterministic per seed."""
    if not 0.0 < fraction < 1.0:
        raise DataError("split fraction must lie strictly between 0 and 1")
    n_train = int(round(data.n * fraction))
    if n_train < 1 or n_train > data.n - 1:
        raise DataError(f"degenerate split: {n_train}/{data.n - n_train} rows")
    order = np.random.default_rng(rng_seed).permutation(data.n)
    train_idx = np.sort(order[:n_train])
    test_idx = np.sort(order[n_train:])
    return (
        Dataset(X=data.X[train_idx], Y=data.Y[train_idx]),
        Dataset(X=data.X[test_idx], Y=data.Y[test_idx]),
    )


def shuffle_labels(data: Dataset, rng) -> tuple[Dataset, Permutation]:
    """Hide the row correspondence of an aligned dataset.

    Returns the shuffled dataset and the true permutation in X-to-Y
    orientation (X-row i pairs with shuffled-Y-row mapping[i]).
    """
    rng = np.random.default_rng(rng)
    mapping = rng.permutation(data.n)
    Y = np.empty_like(data.Y)
    Y[mapping] = data.Y
    return Dataset(X=data.X, Y=Y), Permutation(mapping)


# ----------------------------------------------------------- configuration

VALID_MODES = ("synthetic-grid", "real", "seed-sweep")
VALID_ALGORITHMS = ("gncr", "naive", "ols")


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str = "synthetic-grid"
    # synthetic-grid axes
    n_values: tuple[int, ...] = (20, 40, 60)
    sigma_values: tuple[float, ...] = (0.0, 0.01, 0.02)
    d_x: int = 2
    d_y: int = 1
    # real-data source
    dataset_path: str | None = None
    label_columns: tuple[str, ...] = ()
    # seed-sweep
    seed_ratios: tuple[float, ...] = (0.0, 0.2, 0.4, 0.6, 0.8)
    n: int = 100
    sigma: float = 0.01
    # shared
    repeats: int = 1
    split_ratio: float = 0.8
    algorithms: tuple[str, ...] = ("gncr",)
    gncr: GncrConfig = field(default_factory=GncrConfig)
    rng_seed: int = 0
    c1: float = 3.0
    outlier_z: float | None = 4.0
    record_timing: bool = False

    def __post_init__(self):
        if self.mode not in VALID_MODES:
            raise DataError(f"unknown mode {self.mode!r}")
        if self.repeats < 1:
            raise DataError("repeats must be at least 1")
        if not 0.0 < self.split_ratio < 1.0:
            raise DataError("split_ratio must lie strictly between 0 and 1")
        for algo in self.algorithms:
            if algo not in VALID_ALGORITHMS:
                raise DataError(f"unknown algorithm {algo!r}")
        for r in self.seed_ratios:
            if not 0.0 <= r <= 1.0:
                raise DataError("seed ratios must lie in [0, 1]")


@dataclass(frozen=True)
class TrialRecord:
    mode: str
    algorithm: str
    n: int
    d_x: int
    d_y: int
    repeat: int
    sigma: float | None = None
    dataset: str | None = None
    seed_ratio: float | None = None
    overlap: float | None = None
    beta_corr: float | None = None
    train_error: float | None = None
    test_error: float | None = None
    seconds: float | None = None
    converged: bool | None = None
    stages: int | None = None
    inner_iters: int | None = None
    snr: float | None = None
    recovery_feasible: bool | None = None
    error: str | None = None


METRIC_FIELDS = ("overlap", "beta_corr", "train_error", "test_error", "seconds")


def _trace_summary(result):
    stages = len(result.trace)
    inner = int(sum(st.iterations for st in result.trace))
    return stages, inner


def _timed(fn, record_timing):
    start = time.perf_counter()
    out = fn()
    elapsed = round(time.perf_counter() - start, 3) if record_timing else None
    return out, elapsed


# ------------------------------------------------------------- protocols

def run_synthetic_grid(cfg: ExperimentConfig) -> list[TrialRecord]:
    """Generate-and-solve over the (n, sigma) grid with per-trial substreams."""
    if cfg.mode != "synthetic-grid":
        raise DataError("config mode must be 'synthetic-grid'")
    cells = [(n, s) for n in cfg.n_values for s in cfg.sigma_values]
    root = np.random.SeedSequence(cfg.rng_seed)
    streams = root.spawn(len(cells) * cfg.repeats)
    records: list[TrialRecord] = []
    for ci, (n, sigma) in enumerate(cells):
        for rep in range(cfg.repeats):
            stream = streams[ci * cfg.repeats + rep]
            try:
                records.extend(_synthetic_trial(cfg, n, sigma, rep, stream))
            except Exception as exc:  # record and continue with the grid
                records.append(TrialRecord(
                    mode=cfg.mode, algorithm="-", n=n, d_x=cfg.d_x, d_y=cfg.d_y,
                    repeat=rep, sigma=sigma, error=str(exc),
                ))
    return records


def _synthetic_trial(cfg, n, sigma, rep, stream) -> list[TrialRecord]:
    inst = generate(n, cfg.d_x, cfg.d_y, sigma, rng_seed=stream)
    snr_val = snr(inst.truth_beta, sigma)
    feasible = recovery_feasible(n, snr_val, cfg.c1) if n >= 2 else None
    lam = cfg.gncr.lam if cfg.gncr.lam is not None else default_lambda(inst.data.X)
    out = []
    for algo in cfg.algorithms:
        common = dict(
            mode=cfg.mode, algorithm=algo, n=n, d_x=cfg.d_x, d_y=cfg.d_y,
            repeat=rep, sigma=sigma,
            snr=None if math.isinf(snr_val) else snr_val,
            recovery_feasible=feasible,
        )
        if algo == "ols":
            beta, secs = _timed(
                lambda: ridge_solve(inst.data.X, inst.data.Y, inst.truth_perm, lam),
                cfg.record_timing,
            )
            out.append(TrialRecord(
                **common,
                overlap=1.0,
                beta_corr=beta_correlation(beta, inst.truth_beta),
                train_error=train_error(inst.data, inst.truth_perm, beta),
                seconds=secs,
                converged=True,
            ))
            continue
        if algo == "gncr":
            result, secs = _timed(lambda: gncr_solve(inst.data, SeedSet(), cfg.gncr),
                                  cfg.record_timing)
        else:
            result, secs = _timed(lambda: naive_ao(inst.data, lam=lam), cfg.record_timing)
        stages, inner = _trace_summary(result)
        out.append(TrialRecord(
            **common,
            overlap=perm_overlap(result.perm, inst.truth_perm),
            beta_corr=beta_correlation(result.beta, inst.truth_beta),
            train_error=train_error(inst.data, result.perm, result.beta),
            seconds=secs,
            converged=result.converged,
            stages=stages,
            inner_iters=inner,
        ))
    return out


def _load_real(cfg: ExperimentConfig) -> Dataset:
    if cfg.dataset_path is None:
        raise DataError("a dataset path is required for real-data runs")
    data = load_csv(cfg.dataset_path, cfg.label_columns)
    processed, _ = preprocess(data, PreprocessPolicy(outlier_z=cfg.outlier_z))
    return processed


def run_real(cfg: ExperimentConfig) -> list[TrialRecord]:
    """Benchmark protocol: split, shuffle the training labels, solve, score.

    The reference coefficients are the ridge fit on the unshuffled training
    split; OLS rows report its train/test errors, solver rows additionally
    report overlap and the coefficient cosine against that reference.
    """
    if cfg.mode != "real":
        raise DataError("config mode must be 'real'")
    data = _load_real(cfg)
    root = np.random.SeedSequence(cfg.rng_seed)
    records: list[TrialRecord] = []
    for rep, stream in enumerate(root.spawn(cfg.repeats)):
        split_ss, shuffle_ss = stream.spawn(2)
        train, test = split(data, cfg.split_ratio, split_ss)
        shuffled, truth = shuffle_labels(train, shuffle_ss)
        lam = cfg.gncr.lam if cfg.gncr.lam is not None else default_lambda(train.X)
        beta_ref = ols_unshuffled(train, lam)
        common = dict(mode=cfg.mode, n=train.n, d_x=train.d_x, d_y=train.d_y,
                      repeat=rep, dataset=cfg.dataset_path)
        for algo in cfg.algorithms:
            if algo == "ols":
                beta, secs = _timed(lambda: ols_unshuffled(train, lam), cfg.record_timing)
                records.append(TrialRecord(
                    **common, algorithm="ols",
                    train_error=test_error(train, beta),  # identity pairing on aligned data
                    test_error=test_error(test, beta),
                    seconds=secs, converged=True,
                ))
                continue
            if algo == "gncr":
                result, secs = _timed(lambda: gncr_solve(shuffled, SeedSet(), cfg.gncr),
                                      cfg.record_timing)
            else:
                result, secs = _timed(lambda: naive_ao(shuffled, lam=lam), cfg.record_timing)
            stages, inner = _trace_summary(result)
            records.append(TrialRecord(
                **common, algorithm=algo,
                overlap=perm_overlap(result.perm, truth),
                beta_corr=beta_correlation(result.beta, beta_ref),
                train_error=train_error(shuffled, result.perm, result.beta),
                test_error=test_error(test, result.beta),
                seconds=secs, converged=result.converged,
                stages=stages, inner_iters=inner,
            ))
    return records


def run_seed_sweep(cfg: ExperimentConfig) -> list[TrialRecord]:
    """GnCR with a growing fraction of revealed true pairs.

    Synthetic instances (or real splits) are drawn per repeat from streams
    independent of the ratio, so the ratio-0 trial matches the unseeded
    solve exactly. Reported overlap includes the given seeds.
    """
    if cfg.mode != "seed-sweep":
        raise DataError("config mode must be 'seed-sweep'")
    real = cfg.dataset_path is not None
    data = _load_real(cfg) if real else None
    root = np.random.SeedSequence(cfg.rng_seed)
    records: list[TrialRecord] = []
    for rep, stream in enumerate(root.spawn(cfg.repeats)):
        inst_ss, seeds_ss = stream.spawn(2)
        if real:
            split_ss, shuffle_ss = inst_ss.spawn(2)
            train, test = split(data, cfg.split_ratio, split_ss)
            shuffled, truth = shuffle_labels(train, shuffle_ss)
            lam = cfg.gncr.lam if cfg.gncr.lam is not None else default_lambda(train.X)
            beta_ref = ols_unshuffled(train, lam)
        else:
            inst = generate(cfg.n, cfg.d_x, cfg.d_y, cfg.sigma, rng_seed=inst_ss)
            shuffled, truth, test, beta_ref = inst.data, inst.truth_perm, None, inst.truth_beta
        for ratio, ratio_ss in zip(cfg.seed_ratios, seeds_ss.spawn(len(cfg.seed_ratios))):
            k = int(round(ratio * shuffled.n))
            if k > 0:
                rows = np.sort(np.random.default_rng(ratio_ss).choice(
                    shuffled.n, size=k, replace=False))
                seeds = SeedSet([(int(i), int(truth.mapping[i])) for i in rows])
            else:
                seeds = SeedSet()
            result, secs = _timed(lambda: gncr_solve(shuffled, seeds, cfg.gncr),
                                  cfg.record_timing)
            stages, inner = _trace_summary(result)
            records.append(TrialRecord(
                mode=cfg.mode, algorithm="gncr", n=shuffled.n, d_x=shuffled.d_x,
                d_y=shuffled.d_y, repeat=rep,
                sigma=None if real else cfg.sigma,
                dataset=cfg.dataset_path, seed_ratio=ratio,
                overlap=perm_overlap(result.perm, truth),
                beta_corr=beta_correlation(result.beta, beta_ref),
                train_error=train_error(shuffled, result.perm, result.beta),
                test_error=test_error(test, result.beta) if real else None,
                seconds=secs, converged=result.converged,
                stages=stages, inner_iters=inner,
            ))
    return records


def run_experiment(cfg: ExperimentConfig) -> list[TrialRecord]:
    if cfg.mode == "synthetic-grid":
        return run_synthetic_grid(cfg)
    if cfg.mode == "real":
        return run_real(cfg)
    return run_seed_sweep(cfg)


# --------------------------------------------------------------- reports

def _group_key(rec: TrialRecord) -> str:
    parts = [rec.algorithm]
    if rec.n is not None and rec.mode == "synthetic-grid":
        parts.append(f"n={rec.n}")
    if rec.sigma is not None:
        parts.append(f"sigma={rec.sigma:g}")
    if rec.seed_ratio is not None:
        parts.append(f"ratio={rec.seed_ratio:g}")
    return "|".join(parts)


def aggregate(records) -> dict[str, dict[str, dict[str, float]]]:
    """Per-group mean/std of each metric, ignoring missing values."""
    groups: dict[str, list[TrialRecord]] = {}
    for rec in records:
        if rec.error is not None:
            continue
        groups.setdefault(_group_key(rec), []).append(rec)
    out = {}
    for key in sorted(groups):
        stats = {}
        for metric in METRIC_FIELDS:
            vals = [getattr(r, metric) for r in groups[key] if getattr(r, metric) is not None]
            if vals:
                stats[metric] = {
                    "mean": float(np.mean(vals)),
                    "std": float(np.std(vals)),
                }
        out[key] = stats
    return out


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_report(records, fmt: str, path, config: ExperimentConfig | None = None) -> str:
    """Write trials plus aggregates as CSV or JSON; byte-stable per records."""
    records = list(records)
    if not records:
        raise DataError("no records to report")
    path = str(path)
    if fmt == "csv":
        _emit_csv(records, path)
    elif fmt == "json":
        _emit_json(records, path, config)
    else:
        raise DataError(f"unknown report format {fmt!r}")
    return path


def _emit_csv(records, path):
    fields = list(TrialRecord.__dataclass_fields__)
    aggs = aggregate(records)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["row_kind"] + fields)
        for rec in records:
            d = asdict(rec)
            writer.writerow(["trial"] + [_csv_cell(d[f]) for f in fields])
        # Aggregate rows carry the metric columns (overlap, beta_corr,
        # train_error, test_error, seconds) as group means.
        for key, stats in aggs.items():
            d = {f: None for f in fields}
            d["algorithm"] = key
            for metric in METRIC_FIELDS:
                if metric in stats:
                    d[metric] = stats[metric]["mean"]
            writer.writerow(["aggregate"] + [_csv_cell(d[f]) for f in fields])


def _emit_json(records, path, config):
    payload = {
        "config": _config_dict(config) if config is not None else {},
        "trials": [asdict(rec) for rec in records],
        "aggregates": aggregate(records),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def _config_dict(cfg: ExperimentConfig) -> dict:
    d = asdict(cfg)
    d["gncr"] = asdict(cfg.gncr)
    return d
