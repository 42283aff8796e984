"""Heavy hitters over huge domains via a prefix-tree of hashed oracles.

The domain is read as L base-B digits (B ~ sqrt(n)).  Users are split into
L groups; group tau answers for the level-tau prefix of its element, at
budget eps/2, through the hashed median-of-k oracle with ONE hash family
shared by every level.  The server walks the tree: it keeps a frontier of
candidate prefixes, asks the level oracle for each child's frequency
(scaled by L, since only n/L users answered), and keeps children whose
estimate clears 2*lambda.  Surviving leaves get re-estimated by a final
refinement oracle built from ALL users (again at eps/2, unscaled), so each
user reports exactly twice and the whole protocol spends eps.

If every estimate the walk sees is within lambda of the truth, the output
provably contains every element of frequency >= 3*lambda, contains nothing
below lambda, and every frontier stays within n/lambda candidates.  When
lambda is set below the noise these properties collapse and the frontier
can grow geometrically; the run warns at 2n/lambda per the contract and
only stops early if the caller opts into `max_frontier`.
"""

import json
import logging
import math
from dataclasses import dataclass

import numpy as np

from . import freq_oracle as fo
from .hashing import sample_hash
from .partition import SCHEMES, take_partition
from .prefixes import (children_of, encode_prefix, encode_prefix_batch,
                       make_code)
from .randomizer import setup_stream

logger = logging.getLogger(__name__)


class FrontierOverflow(RuntimeError):
    """Raised when an opt-in max_frontier guard is exceeded mid-search."""


@dataclass(frozen=True)
class HeavyParams:
    eps: float
    beta: float
    c_k: float = 8.0
    c_m: float = fo.THEORY_CM
    c_lambda: float = 1.0
    scheme: str = "independent"

    def __post_init__(self):
        if not 0.0 < self.eps <= 1.0:
            raise ValueError(f"eps must lie in (0, 1], got {self.eps}")
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if min(self.c_k, self.c_m, self.c_lambda) <= 0:
            raise ValueError("constants must be positive")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; have {SCHEMES}")


def lambda_threshold(params, n, d):
    """(c_lambda/eps) * sqrt(n * log2(d) * ln(n/beta) / ln(n))."""
    if n < 2:
        return math.inf
    bits = max(1.0, math.log2(d))
    return (params.c_lambda / params.eps) * math.sqrt(
        n * bits * math.log(n / params.beta) / math.log(n))


@dataclass
class SearchResult:
    leaves: list          # level-L prefixes (= elements) that survived
    level_sizes: list     # |frontier| after each level 1..L


def search_with_oracle(freq_oracle, code, lam, *, max_frontier=None,
                       on_level=None):
    """The bare tree walk, decoupled from privacy noise.

    `freq_oracle(tau, prefix)` answers with any real number; a child
    survives iff its answer is >= 2*lam.  Feeding exact counts (or exact
    counts perturbed by at most lam) makes the walk's guarantees exact,
    which is how the deterministic tests drive it.
    """
    frontier = [0]
    sizes = []
    threshold = 2.0 * lam
    for tau in range(1, code.levels + 1):
        candidates = children_of(np.asarray(frontier, dtype=np.uint64), code)
        # B^L generally overshoots d; drop prefixes no element of [0, d)
        # can have, so the walk never wanders into the padding overhang
        candidates = candidates[candidates <= encode_prefix(code.domain - 1,
                                                            tau, code)]
        if max_frontier is not None and candidates.size > max_frontier:
            raise FrontierOverflow(
                f"level {tau}: {candidates.size} candidates exceed the "
                f"max_frontier guard of {max_frontier}")
        frontier = [int(s) for s in candidates if freq_oracle(tau, int(s)) >= threshold]
        sizes.append(len(frontier))
        if on_level is not None:
            on_level(tau, len(frontier))
        if not frontier:
            break
    return SearchResult(leaves=frontier, level_sizes=sizes)


@dataclass
class SuccinctHistogram:
    elements: np.ndarray    # uint64, sorted by estimate descending
    estimates: np.ndarray   # float64
    metadata: dict

    def __len__(self):
        return int(self.elements.size)

    def items(self):
        return [(int(e), float(x)) for e, x in zip(self.elements, self.estimates)]

    def write_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("element,estimate\n")
            for e, x in zip(self.elements, self.estimates):
                fh.write(f"{int(e)},{float(x)!r}\n")

    def write_meta(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.metadata, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _empty_histogram(metadata):
    return SuccinctHistogram(elements=np.empty(0, dtype=np.uint64),
                             estimates=np.empty(0, dtype=np.float64),
                             metadata=metadata)


def run(elements, d, params, seed, *, max_frontier=None):
    """Full two-report protocol; returns the succinct histogram.

    Every user lands in exactly one level oracle (their level group) and in
    the refinement oracle, each report randomized at eps/2.  Level-tau
    estimates are L * oracle answer; refinement estimates are unscaled and
    are what the histogram reports.
    """
    elements = np.ascontiguousarray(elements, dtype=np.uint64)
    n = int(elements.size)
    if not 1 <= d <= fo.MAX_DOMAIN:
        raise ValueError(f"domain size must lie in [1, 2^61 - 1], got {d}")
    if n and int(elements.max()) >= d:
        raise ValueError(f"elements must lie in [0, {d})")
    meta = {"protocol": "hada-heavy", "n": n, "d": int(d),
            "eps": params.eps, "beta": params.beta, "c_k": params.c_k,
            "c_m": params.c_m, "c_lambda": params.c_lambda,
            "scheme": params.scheme, "seed": int(seed),
            "reports_per_user": 2, "budget_per_report": params.eps / 2.0}
    if n == 0:
        logger.warning("no users; returning an empty histogram")
        meta.update({"status": "empty-input", "lambda": math.inf})
        return _empty_histogram(meta)

    code = make_code(n, d)
    lam = lambda_threshold(params, n, d)
    levels = code.levels
    meta.update({"B": code.branching, "L": levels, "lambda": lam})
    if lam >= n:
        logger.warning(
            "lambda = %.1f is not below n = %d; no element can qualify, "
            "returning an empty histogram", lam, n)
        meta["status"] = "lambda-at-or-above-n"
        return _empty_histogram(meta)

    beta_prime = params.beta / (n * levels)
    oracle_params = fo.OracleParams(eps=params.eps / 2.0, beta_prime=beta_prime,
                                    c_k=params.c_k, c_m=params.c_m,
                                    scheme=params.scheme)
    k = fo.repetitions_for(oracle_params)
    # One hash family serves every constituent oracle, so its range must
    # satisfy the largest of them: the refinement oracle over all n users.
    m = fo.hash_range_for(oracle_params, n)
    hash_rng = setup_stream(seed, 0, 1)
    hashes = [sample_hash(m, hash_rng) for _ in range(k)]
    meta.update({"k": k, "m": m, "beta_prime": beta_prime})

    groups = take_partition(n, levels, params.scheme,
                            setup_stream(seed, 0, 0)).members()
    warn_at = 2.0 * n / lam
    states = {}

    def level_oracle(tau, prefix):
        if tau not in states:
            members = groups[tau - 1]
            if members.size == 0:
                # a starved level has no reports and so no evidence;
                # every candidate it is asked about dies at the 2*lambda bar
                states[tau] = None
            else:
                enc = encode_prefix_batch(elements[members], tau, code)
                d_tau = encode_prefix(d - 1, tau, code) + 1
                states[tau] = fo.construct(enc, d_tau, oracle_params, seed,
                                           hashes=hashes, round_index=tau)
        if states[tau] is None:
            return 0.0
        return levels * fo.query(states[tau], prefix)

    def on_level(tau, kept):
        if kept > warn_at:
            logger.warning(
                "level %d kept %d candidates, above 2n/lambda = %.0f; the "
                "accuracy assumption behind the search looks violated",
                tau, kept, warn_at)

    search = search_with_oracle(level_oracle, code, lam,
                                max_frontier=max_frontier, on_level=on_level)
    meta["level_sizes"] = search.level_sizes

    refinement = fo.construct(elements, d, oracle_params, seed,
                              hashes=hashes, round_index=levels + 1)
    leaves = np.asarray(search.leaves, dtype=np.uint64)
    estimates = fo.query_many(refinement, leaves)
    order = np.argsort(-estimates, kind="stable")
    meta["status"] = "ok"
    return SuccinctHistogram(elements=leaves[order],
                             estimates=estimates[order], metadata=meta)
