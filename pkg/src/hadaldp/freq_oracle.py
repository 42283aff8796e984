"""Hashed, partitioned frequency oracle: median of k repetitions.

Users are split into k subsets.  Subset j shares one pairwise-independent
hash h_j mapping the domain into [m], and runs the Hadamard randomizer on
the hashed value, so the server keeps a k x m matrix instead of a
length-2^ceil(log2 d) vector.  One row-wise transform finalizes all k
repetitions.  A query re-hashes the element per row, scales each row's
cell by k (each subset only saw ~1/k of the users), and takes the median
across rows, which shrugs off the few rows where the hash collided with
something heavy or the subset drew unlucky noise.

Sizing comes from the accuracy analysis: k grows with log(1/beta') and m
with eps * sqrt(n).  Two named constant profiles are shipped:

- "theory": c_k = 8, c_m = 8 * e^2 * sqrt(8) ~= 167.2, the values the
  proofs need.
- "practical": c_k = 8, c_m = 4.  Heuristic; much smaller server state,
  no formal guarantee behind the constant.

The median of an even-length list is the lower-middle order statistic
(1-based index ceil(k/2)), so a query always returns one of the actual
per-row estimates rather than an average of two.
"""

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from . import backend
from .hashing import PairwiseHash, sample_hash
from .partition import SCHEMES, take_partition
from .randomizer import (PrivacyBudget, debias_factor, draw_coins, draw_rows,
                         round_streams, setup_stream)

THEORY_CM = 8.0 * math.e ** 2 * math.sqrt(8.0)

PROFILES = {
    "theory": {"c_k": 8.0, "c_m": THEORY_CM},
    "practical": {"c_k": 8.0, "c_m": 4.0},
}

MAGIC = b"HDFO"
VERSION = 1
_HEADER = struct.Struct("<4sHBBIQQddQ")
# magic, version, scheme, reserved, k, m, d, eps, beta_prime, n_users

MAX_DOMAIN = (1 << 61) - 1  # hash inputs must stay below the hash prime


@dataclass(frozen=True)
class OracleParams:
    eps: float
    beta_prime: float
    c_k: float = 8.0
    c_m: float = THEORY_CM
    scheme: str = "independent"

    def __post_init__(self):
        PrivacyBudget(self.eps)  # range check, (0, 1]
        if not 0.0 < self.beta_prime < 1.0:
            raise ValueError(f"beta_prime must lie in (0, 1), got {self.beta_prime}")
        if self.c_k < 1:
            raise ValueError(f"c_k must be at least 1, got {self.c_k}")
        if self.c_m <= 0:
            raise ValueError(f"c_m must be positive, got {self.c_m}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; have {SCHEMES}")


def repetitions_for(params):
    """k = ceil(c_k * ln(1/beta')), at least 1.

    The 1e-9 slack absorbs float noise in ln(1/beta') so that, e.g.,
    beta' = e^-2 with c_k = 8 lands on 16, not 17.
    """
    raw = params.c_k * math.log(1.0 / params.beta_prime)
    return max(1, math.ceil(raw - 1e-9))


def hash_range_for(params, n):
    """Smallest power of two >= c_m * eps * sqrt(n), and >= 2."""
    if n < 0:
        raise ValueError(f"user count must be non-negative, got {n}")
    target = params.c_m * params.eps * math.sqrt(n)
    m = 2
    while m < target:
        m <<= 1
    return m


def theoretical_error_bound(params, n, c=1.0):
    """c * (1/eps) * sqrt(n * ln(1/beta')): the shape the analysis promises.

    For reporting and tests only; nothing in the protocol consumes it.
    """
    return c * (1.0 / params.eps) * math.sqrt(n * math.log(1.0 / params.beta_prime))


@dataclass
class OracleState:
    params: OracleParams
    k: int
    m: int
    d: int
    n_users: int
    hashes: list
    matrix: np.ndarray                 # k x m, finalized estimates
    subset_sizes: np.ndarray = field(default=None, repr=False)

    @property
    def median_index(self):
        # lower-middle order statistic, 0-based
        return (self.k - 1) // 2


def construct(elements, d, params, seed, *, hashes=None, round_index=0):
    """Build the k x m matrix from one pass over the users.

    When `hashes` is given (the heavy-hitter protocol shares one family
    across all its oracles) they fix both k and m; otherwise k and m are
    derived from params and n, and the family is sampled here.
    """
    elements = np.ascontiguousarray(elements, dtype=np.uint64)
    n = int(elements.size)
    if n == 0:
        raise ValueError("cannot build an oracle from zero users")
    if not 1 <= d <= MAX_DOMAIN:
        raise ValueError(f"domain size must lie in [1, 2^61 - 1], got {d}")
    if int(elements.max()) >= d:
        raise ValueError(f"elements must lie in [0, {d})")
    budget = PrivacyBudget(params.eps)

    if hashes is not None:
        if not hashes:
            raise ValueError("need at least one hash")
        k = len(hashes)
        m = hashes[0].m
        if any(h.m != m for h in hashes):
            raise ValueError("all shared hashes must have the same range m")
    else:
        k = repetitions_for(params)
        m = hash_range_for(params, n)
        hash_rng = setup_stream(seed, round_index, 1)
        hashes = [sample_hash(m, hash_rng) for _ in range(k)]

    part = take_partition(n, k, params.scheme, setup_stream(seed, round_index, 0))
    rows_rng, coins_rng = round_streams(seed, round_index)
    rows = draw_rows(rows_rng, n, m)
    coins = draw_coins(coins_rng, n)

    matrix = np.zeros((k, m), dtype=np.float64)
    for j, idx in enumerate(part.members()):
        if idx.size == 0:
            continue
        cols = hashes[j].eval_batch(elements[idx])
        backend.accumulate_reports(matrix[j], rows[idx], cols,
                                   coins[idx], budget.keep_prob)

    backend.fwht_inplace(matrix)
    matrix *= debias_factor(params.eps)
    return OracleState(params=params, k=k, m=m, d=int(d), n_users=n,
                       hashes=hashes, matrix=matrix, subset_sizes=part.sizes)


def row_estimates(state, v):
    """The k per-row estimates k * matrix[j, h_j(v)] a query medians over."""
    v = int(v)
    if not 0 <= v < state.d:
        raise ValueError(f"element {v} outside [0, {state.d})")
    cols = np.fromiter((h.eval(v) for h in state.hashes), dtype=np.int64,
                       count=state.k)
    return state.k * state.matrix[np.arange(state.k), cols]


def query(state, v):
    """Median of the k scaled per-row estimates for element v."""
    vals = row_estimates(state, v)
    mid = state.median_index
    return float(np.partition(vals, mid)[mid])


def query_many(state, vs):
    """Vectorized query; returns one estimate per element of vs."""
    vs = np.ascontiguousarray(vs, dtype=np.uint64)
    if vs.size == 0:
        return np.empty(0, dtype=np.float64)
    if int(vs.max()) >= state.d:
        raise ValueError(f"elements must lie in [0, {state.d})")
    vals = np.empty((state.k, vs.size), dtype=np.float64)
    for j, h in enumerate(state.hashes):
        cols = h.eval_batch(vs).astype(np.int64)
        vals[j] = state.matrix[j, cols]
    vals *= state.k
    mid = state.median_index
    return np.partition(vals, mid, axis=0)[mid]


_SCHEME_CODE = {name: i for i, name in enumerate(SCHEMES)}


def to_bytes(state):
    """Header + k hash records (JSON, length-prefixed) + k*m LE float64."""
    head = _HEADER.pack(MAGIC, VERSION, _SCHEME_CODE[state.params.scheme], 0,
                        state.k, state.m, state.d, state.params.eps,
                        state.params.beta_prime, state.n_users)
    parts = [head]
    for h in state.hashes:
        blob = h.to_json().encode("utf-8")
        parts.append(struct.pack("<I", len(blob)))
        parts.append(blob)
    parts.append(state.matrix.astype("<f8", copy=False).tobytes())
    return b"".join(parts)


def from_bytes(blob):
    magic, version, scheme_code, _, k, m, d, eps, beta_prime, n_users = \
        _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise ValueError(f"unsupported version {version}")
    if scheme_code >= len(SCHEMES):
        raise ValueError(f"unknown scheme code {scheme_code}")
    offset = _HEADER.size
    hashes = []
    for _ in range(k):
        (length,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        hashes.append(PairwiseHash.from_json(blob[offset:offset + length].decode("utf-8")))
        offset += length
    expected = offset + 8 * k * m
    if len(blob) != expected:
        raise ValueError(f"blob is {len(blob)} bytes, expected {expected}")
    matrix = np.frombuffer(blob, dtype="<f8", offset=offset).reshape(k, m).copy()
    params = OracleParams(eps=eps, beta_prime=beta_prime,
                          scheme=SCHEMES[scheme_code])
    return OracleState(params=params, k=k, m=m, d=d, n_users=n_users,
                       hashes=hashes, matrix=matrix)
