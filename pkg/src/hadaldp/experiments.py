"""Reproducible experiment runs behind the `fo` and `hh` subcommands.

A run is fully described by an ExperimentConfig (JSON file, overridden by
CLI flags).  Each trial regenerates its dataset and protocol state from
seeds derived off (config.seed, trial), so the same config file gives the
same CSV byte-for-byte.  Alongside the metrics, every run re-checks a few
internal consistency properties (transform path against the direct dot
product, medians being actual row estimates, serialization round-trips);
any violation is reported and flips the exit status, on the theory that a
benchmark that silently measures a broken estimator is worse than no
benchmark.
"""

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import freq_oracle as fo
from . import heavy_hitters as hh
from . import hrr
from .datasets import exact_frequency, gen_planted, gen_zipf, load_dataset
from .randomizer import PrivacyBudget

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["trial", "protocol", "n", "d", "eps", "k", "m", "B", "L",
               "lambda", "max_err", "p95_err", "p99_err", "recall_3lambda",
               "false_pos_lt_lambda", "build_ms", "query_ms"]

PROTOCOLS = ("hrr", "hada-oracle", "hada-heavy")


@dataclass
class ExperimentConfig:
    protocol: str = "hada-oracle"
    n: int = 100_000
    d: int = 1 << 20
    eps: float = 1.0
    beta: float = 0.1
    beta_prime: float = 0.05
    c_k: float = 8.0
    c_m: float = None          # None -> take the profile's value
    c_lambda: float = 1.0
    scheme: str = "independent"
    profile: str = "practical"
    trials: int = 3
    seed: int = 0
    n_queries: int = 200
    dataset_kind: str = "zipf"   # zipf | planted | file
    zipf_s: float = 1.1
    planted: list = field(default_factory=list)  # [[element, count], ...]
    dataset_path: str = None
    out: str = None
    max_frontier: int = None
    max_dim: int = hrr.DEFAULT_MAX_DIM

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol {self.protocol!r}; have {PROTOCOLS}")
        if self.profile not in fo.PROFILES:
            raise ValueError(f"unknown profile {self.profile!r}; "
                             f"have {tuple(fo.PROFILES)}")
        if self.trials < 1:
            raise ValueError("need at least one trial")

    @property
    def resolved_c_m(self):
        if self.c_m is not None:
            return float(self.c_m)
        return fo.PROFILES[self.profile]["c_m"]

    @classmethod
    def from_dict(cls, raw):
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)


def load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        return ExperimentConfig.from_dict(json.load(fh))


def _trial_seed(config, trial, tag):
    ss = np.random.SeedSequence([config.seed, trial, tag])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _dataset_for(config, trial):
    rng = np.random.default_rng(np.random.SeedSequence(
        [config.seed, trial, 0xDA7A]))
    kind = config.dataset_kind
    if kind == "zipf":
        return gen_zipf(config.n, config.d, config.zipf_s, rng)
    if kind == "planted":
        return gen_planted(config.n, config.d, config.planted, rng)
    if kind == "file":
        if not config.dataset_path:
            raise ValueError("dataset_kind 'file' needs dataset_path")
        ds = load_dataset(config.dataset_path)
        if ds.d != config.d or ds.n != config.n:
            logger.info("taking n=%d, d=%d from the dataset file", ds.n, ds.d)
        return ds
    raise ValueError(f"unknown dataset kind {kind!r}")


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, (time.perf_counter() - t0) * 1e3


def _error_stats(estimates, truths):
    errs = np.abs(np.asarray(estimates, dtype=np.float64)
                  - np.asarray(truths, dtype=np.float64))
    if errs.size == 0:
        return None, None, None
    return (float(errs.max()),
            float(np.percentile(errs, 95)),
            float(np.percentile(errs, 99)))


def _sample_queries(ds, config, trial):
    rng = np.random.default_rng(np.random.SeedSequence(
        [config.seed, trial, 0x9E37]))
    if ds.n == 0:
        return np.empty(0, dtype=np.uint64)
    pos = rng.integers(0, ds.n, size=min(config.n_queries, ds.n))
    return ds.elements[pos]


def _check(failures, cond, what):
    if not cond:
        failures.append(what)
        logger.error("consistency check failed: %s", what)


def _run_hrr_trial(config, ds, trial, failures):
    budget = PrivacyBudget(config.eps)
    seed = _trial_seed(config, trial, 0x48)
    state, build_ms = _timed(lambda: hrr.build(
        ds.elements, ds.d, budget, seed, max_dim=config.max_dim))
    queries = _sample_queries(ds, config, trial)
    counts = exact_frequency(ds)

    def run_queries():
        return np.array([hrr.query(state, int(v)) for v in queries])

    estimates, query_ms = _timed(run_queries)
    _check(failures, np.isfinite(estimates).all(), "hrr estimates not finite")

    if trial == 0 and ds.n:
        raw = hrr.build(ds.elements, ds.d, budget, seed,
                        max_dim=config.max_dim, finalize=False)
        probe = [int(v) for v in queries[:3]]
        direct = [hrr.query_direct(raw, v) for v in probe]
        raw.finalize()
        _check(failures,
               all(hrr.query(raw, v) == e for v, e in zip(probe, direct)),
               "hrr transform path disagrees with the direct dot product")
        back = hrr.from_bytes(hrr.to_bytes(state))
        _check(failures,
               all(hrr.query(back, v) == hrr.query(state, v) for v in probe),
               "hrr serialization round-trip changed estimates")

    truths = [counts.get(int(v), 0) for v in queries]
    max_err, p95, p99 = _error_stats(estimates, truths)
    return {"trial": trial, "protocol": "hrr", "n": ds.n, "d": ds.d,
            "eps": config.eps, "m": state.m, "max_err": max_err,
            "p95_err": p95, "p99_err": p99,
            "build_ms": build_ms, "query_ms": query_ms}


def _run_oracle_trial(config, ds, trial, failures):
    params = fo.OracleParams(eps=config.eps, beta_prime=config.beta_prime,
                             c_k=config.c_k, c_m=config.resolved_c_m,
                             scheme=config.scheme)
    seed = _trial_seed(config, trial, 0xF0)
    state, build_ms = _timed(lambda: fo.construct(ds.elements, ds.d, params, seed))
    queries = _sample_queries(ds, config, trial)
    counts = exact_frequency(ds)
    estimates, query_ms = _timed(lambda: fo.query_many(state, queries))
    _check(failures, np.isfinite(estimates).all(),
           "oracle estimates not finite")

    if trial == 0 and queries.size:
        for v in queries[:3]:
            got = fo.query(state, int(v))
            rows = fo.row_estimates(state, int(v))
            _check(failures, any(got == r for r in rows),
                   "median is not one of the row estimates")
        back = fo.from_bytes(fo.to_bytes(state))
        _check(failures,
               np.array_equal(fo.query_many(back, queries), estimates),
               "oracle serialization round-trip changed estimates")

    truths = [counts.get(int(v), 0) for v in queries]
    max_err, p95, p99 = _error_stats(estimates, truths)
    return {"trial": trial, "protocol": "hada-oracle", "n": ds.n, "d": ds.d,
            "eps": config.eps, "k": state.k, "m": state.m,
            "max_err": max_err, "p95_err": p95, "p99_err": p99,
            "build_ms": build_ms, "query_ms": query_ms}


def _run_heavy_trial(config, ds, trial, failures, out_dir):
    params = hh.HeavyParams(eps=config.eps, beta=config.beta,
                            c_k=config.c_k, c_m=config.resolved_c_m,
                            c_lambda=config.c_lambda, scheme=config.scheme)
    seed = _trial_seed(config, trial, 0x4448)
    hist, build_ms = _timed(lambda: hh.run(
        ds.elements, ds.d, params, seed, max_frontier=config.max_frontier))
    meta = hist.metadata
    lam = meta["lambda"]
    counts = exact_frequency(ds)

    _check(failures, np.isfinite(hist.estimates).all(),
           "heavy-hitter estimates not finite")
    _check(failures,
           len(set(hist.elements.tolist())) == len(hist),
           "heavy-hitter output repeats an element")

    returned = [int(v) for v in hist.elements]
    truths = [counts.get(v, 0) for v in returned]
    max_err, p95, p99 = _error_stats(hist.estimates, truths)
    targets = {v for v, c in counts.items() if c >= 3.0 * lam}
    recall = (len(targets & set(returned)) / len(targets)) if targets else 1.0
    false_pos = sum(1 for v, f in zip(returned, truths) if f < lam)

    if out_dir is not None:
        hist.write_csv(out_dir / f"hist_trial{trial}.csv")
        hist.write_meta(out_dir / f"hist_trial{trial}.meta.json")

    return {"trial": trial, "protocol": "hada-heavy", "n": ds.n, "d": ds.d,
            "eps": config.eps, "k": meta.get("k"), "m": meta.get("m"),
            "B": meta.get("B"), "L": meta.get("L"), "lambda": lam,
            "max_err": max_err, "p95_err": p95, "p99_err": p99,
            "recall_3lambda": recall, "false_pos_lt_lambda": false_pos,
            "build_ms": build_ms, "query_ms": None}


_TRIAL_RUNNERS = {"hrr": _run_hrr_trial, "hada-oracle": _run_oracle_trial}


def _format_cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isinf(value):
            return "inf"
        return repr(value)
    return str(value)


def write_rows_csv(rows, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(_format_cell(row.get(c)) for c in CSV_COLUMNS)
                     + "\n")


def _aggregate(rows):
    agg = {}
    for col in CSV_COLUMNS[2:]:
        vals = [row[col] for row in rows
                if isinstance(row.get(col), (int, float))
                and math.isfinite(row[col])]
        if vals:
            agg[col] = float(np.median(vals))
    return agg


def run_experiment(config):
    """Run config.trials trials; returns the summary dict.

    summary["assertion_failures"] is empty iff every internal consistency
    check passed; the CLI turns that into the exit status.
    """
    out_dir = None
    if config.out is not None:
        out_dir = Path(config.out)
        out_dir.mkdir(parents=True, exist_ok=True)

    rows = []
    failures = []
    for trial in range(config.trials):
        ds = _dataset_for(config, trial)
        if config.protocol == "hada-heavy":
            row = _run_heavy_trial(config, ds, trial, failures, out_dir)
        else:
            row = _TRIAL_RUNNERS[config.protocol](config, ds, trial, failures)
        for col in CSV_COLUMNS:
            row.setdefault(col, None)
        rows.append(row)
        logger.info("trial %d done: %s", trial,
                    {k: v for k, v in row.items() if v is not None})

    summary = {"config": asdict(config), "trials": rows,
               "aggregates": _aggregate(rows),
               "assertion_failures": failures}
    if out_dir is not None:
        write_rows_csv(rows, out_dir / "trials.csv")
        with open(out_dir / "summary.json", "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")
        summary["out"] = str(out_dir)
    return summary
