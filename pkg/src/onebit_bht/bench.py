"""Monte Carlo harness: NMSE and timing sweeps over measurement counts and
activity levels, with CSV/JSON output."""
import csv
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Tuple

import numpy as np

from .model import ModelParams, generate_measurements, sample_sparse_signal
from .numerics import least_squares_init
from .pipeline import BhtMleConfig, InfeasibleSolutionError, run_bht_mle, run_mle_baseline

logger = logging.getLogger(__name__)

__all__ = [
    "ALGORITHMS",
    "CSV_COLUMNS",
    "ExperimentSpec",
    "TrialRecord",
    "nmse_db",
    "trial_seed",
    "run_trial",
    "run_monte_carlo",
    "summarize",
    "emit_results",
    "load_records",
]

ALGORITHMS = ("bht_mle", "mle", "ls_init")
CSV_COLUMNS = ("algorithm", "m", "n_meas", "p", "trial_index", "seed",
               "nmse_db", "wall_time_s", "flags")
THREADS_ENV = "ONEBIT_BHT_THREADS"


@dataclass(frozen=True)
class ExperimentSpec:
    m: int = 200
    n_meas_grid: Tuple[int, ...] = (400, 500, 600, 700, 800)
    p_grid: Tuple[float, ...] = (0.1, 0.2)
    sigma_e: float = 0.1
    sigma_n: float = 0.1
    sigma_r: float = 1.0
    trials: int = 100
    base_seed: int = 0
    algorithms: Tuple[str, ...] = ("bht_mle", "mle")
    infeasible_policy: str = "project"
    timing: bool = True

    def __post_init__(self):
        object.__setattr__(self, "n_meas_grid", tuple(int(n) for n in self.n_meas_grid))
        object.__setattr__(self, "p_grid", tuple(float(p) for p in self.p_grid))
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.n_meas_grid or not self.p_grid or not self.algorithms:
            raise ValueError("grids and algorithm list must be non-empty")
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown:
            raise ValueError(f"unknown algorithms {sorted(unknown)}; choose from {ALGORITHMS}")
        for n_meas in self.n_meas_grid:
            for p in self.p_grid:
                self.params(n_meas, p)
        BhtMleConfig(infeasible_policy=self.infeasible_policy)

    def params(self, n_meas, p):
        return ModelParams(m=self.m, n_meas=n_meas, p=p, sigma_e=self.sigma_e,
                           sigma_n=self.sigma_n, sigma_r=self.sigma_r)


@dataclass
class TrialRecord:
    algorithm: str
    m: int
    n_meas: int
    p: float
    trial_index: int
    seed: int
    nmse_db: float
    wall_time_s: float
    flags: Tuple[str, ...] = field(default_factory=tuple)

    def sort_key(self):
        return (self.algorithm, self.p, self.n_meas, self.trial_index)


def nmse_db(s_true, s_hat):
    """20 log10(||s - s_hat|| / ||s||); exact recovery gives -inf."""
    s_true = np.asarray(s_true, dtype=float)
    s_hat = np.asarray(s_hat, dtype=float)
    if s_true.shape != s_hat.shape:
        raise ValueError("s_true and s_hat must have equal length")
    ref = np.linalg.norm(s_true)
    if ref == 0:
        raise ValueError("s_true must be nonzero")
    err = np.linalg.norm(s_true - s_hat)
    return -math.inf if err == 0 else 20.0 * math.log10(err / ref)


def trial_seed(base_seed, p, n_meas, trial_index):
    """Seed keyed on grid values, so extending a grid never moves existing trials."""
    key = [int(base_seed), int(round(p * 1_000_000)), int(n_meas), int(trial_index)]
    return int(np.random.SeedSequence(key).generate_state(1, dtype=np.uint64)[0] >> 1)


def _recover(algorithm, a_mat, y, spec):
    if algorithm == "bht_mle":
        config = BhtMleConfig(infeasible_policy=spec.infeasible_policy)
        res = run_bht_mle(a_mat, y, spec.sigma_e, spec.sigma_n, config)
        return res.s_hat, res.wall_time, res.flags
    if algorithm == "mle":
        res = run_mle_baseline(a_mat, y, spec.sigma_e, spec.sigma_n,
                               infeasible_policy=spec.infeasible_policy)
        return res.s_hat, res.wall_time, res.flags
    start = time.perf_counter()
    s_hat = least_squares_init(a_mat, y)
    return s_hat, time.perf_counter() - start, frozenset()


def run_trial(spec, p, n_meas, trial_index):
    """Draw one data set and run every requested algorithm on it."""
    seed = trial_seed(spec.base_seed, p, n_meas, trial_index)
    params = spec.params(n_meas, p)
    rng = np.random.default_rng(seed)
    signal = sample_sparse_signal(params, rng)
    meas = generate_measurements(signal, params, rng)

    records = []
    for algorithm in spec.algorithms:
        try:
            s_hat, elapsed, flags = _recover(algorithm, meas.a_mat, meas.y, spec)
            err = nmse_db(signal.s, s_hat)
        except (InfeasibleSolutionError, np.linalg.LinAlgError) as exc:
            logger.warning("%s failed on trial %d (N=%d, p=%g): %s",
                           algorithm, trial_index, n_meas, p, exc)
            err, elapsed, flags = math.nan, math.nan, frozenset({"failed"})
        records.append(TrialRecord(
            algorithm=algorithm, m=spec.m, n_meas=n_meas, p=p, trial_index=trial_index,
            seed=seed, nmse_db=err, wall_time_s=elapsed if spec.timing else math.nan,
            flags=tuple(sorted(flags)),
        ))
    return records


def _run_trial_args(args):
    return run_trial(*args)


def worker_count(requested=None):
    n = requested or os.cpu_count() or 1
    cap = os.environ.get(THREADS_ENV)
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, n)


def run_monte_carlo(spec, workers=None):
    """All trials of ``spec``, sorted by (algorithm, p, n_meas, trial_index)."""
    tasks = [(spec, p, n, t) for p in spec.p_grid for n in spec.n_meas_grid
             for t in range(spec.trials)]
    n_workers = min(worker_count(workers), len(tasks))
    if n_workers == 1:
        batches = map(_run_trial_args, tasks)
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            batches = list(pool.map(_run_trial_args, tasks, chunksize=4))
    records = [rec for batch in batches for rec in batch]
    records.sort(key=TrialRecord.sort_key)
    return records


def summarize(records):
    """Per (algorithm, n_meas, p) mean/std of NMSE over finite records.

    Exact-recovery (-inf) and failed (nan) records are excluded from the
    statistics and counted in ``excluded``.
    """
    groups = {}
    for rec in records:
        groups.setdefault((rec.algorithm, rec.n_meas, rec.p), []).append(rec)
    rows = []
    for (algorithm, n_meas, p), recs in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][2], kv[0][1])):
        vals = np.array([r.nmse_db for r in recs], dtype=float)
        finite = vals[np.isfinite(vals)]
        times = np.array([r.wall_time_s for r in recs], dtype=float)
        times = times[np.isfinite(times)]
        rows.append(dict(
            algorithm=algorithm, n_meas=n_meas, p=p,
            mean_nmse_db=float(finite.mean()) if finite.size else math.nan,
            std_nmse_db=float(finite.std(ddof=1)) if finite.size > 1 else math.nan,
            count=int(finite.size),
            excluded=int(vals.size - finite.size),
            median_wall_time_s=float(np.median(times)) if times.size else math.nan,
        ))
    return rows


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _summary_path(path):
    path = Path(path)
    return path.with_name(path.stem + ".summary" + path.suffix)


def emit_results(records, fmt, path):
    """Write ``records`` to ``path`` as csv or json, plus a summary file next
    to it (``<stem>.summary<suffix>``). Returns the summary path."""
    if fmt not in ("csv", "json"):
        raise ValueError(f"format must be 'csv' or 'json', got {fmt!r}")
    path = Path(path)
    summary = summarize(records)
    summary_path = _summary_path(path)
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for rec in records:
                row = asdict(rec)
                row["flags"] = ";".join(rec.flags)
                writer.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
        with open(summary_path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            cols = list(summary[0]) if summary else ["algorithm", "n_meas", "p", "mean_nmse_db",
                                                     "std_nmse_db", "count", "excluded",
                                                     "median_wall_time_s"]
            writer.writerow(cols)
            for row in summary:
                writer.writerow([_fmt(row[c]) for c in cols])
    else:
        payload = []
        for rec in records:
            row = asdict(rec)
            row["flags"] = list(rec.flags)
            for key in ("nmse_db", "wall_time_s"):
                if not math.isfinite(row[key]):
                    row[key] = repr(row[key])
            payload.append(row)
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1)
            fh.write("\n")
        with open(summary_path, "w") as fh:
            json.dump([{k: (repr(v) if isinstance(v, float) and not math.isfinite(v) else v)
                        for k, v in row.items()} for row in summary], fh, indent=1)
            fh.write("\n")
    return summary_path


def _parse_field(name, raw):
    if name == "flags":
        if isinstance(raw, list):
            return tuple(raw)
        return tuple(raw.split(";")) if raw else ()
    if name in ("m", "n_meas", "trial_index", "seed"):
        return int(raw)
    if name in ("p", "nmse_db", "wall_time_s"):
        return float(raw)
    return raw


def load_records(path):
    """Read records written by :func:`emit_results` (format from suffix)."""
    path = Path(path)
    if path.suffix == ".json":
        with open(path) as fh:
            rows = json.load(fh)
    else:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    return [TrialRecord(**{k: _parse_field(k, v) for k, v in row.items()}) for row in rows]
