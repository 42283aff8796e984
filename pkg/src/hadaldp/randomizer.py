"""Client-side randomizers and the report wire format.

Every client sends a single +-1: the sign of one Hadamard entry H[row, col],
kept with probability e^eps/(e^eps + 1) and flipped otherwise.  Which column
the entry comes from is the only thing the three protocol variants disagree
about: the raw element (direct oracle), a hashed element (hashed oracle), or
a hashed prefix of the element (heavy-hitter levels).

With b the +-1 keep/flip coin, E[b] = (e^eps - 1)/(e^eps + 1), so the server
multiplies accumulated reports by debias_factor(eps) = (e^eps + 1)/(e^eps - 1)
to make estimates unbiased.  Each client call consumes exactly one coin from
its stream; replay with the same seed reproduces the transcript byte for
byte.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .prefixes import encode_prefix


def keep_probability(eps):
    """Bernoulli parameter e^eps / (e^eps + 1) of sending the true sign.

    Pure law helper, no budget validation: it answers "what would the
    randomizer do at this eps" even for eps outside the protocol range.
    """
    e = math.exp(eps)
    return e / (e + 1.0)


def debias_factor(eps):
    """Server-side correction (e^eps + 1)/(e^eps - 1), the reciprocal of E[b]."""
    e = math.exp(eps)
    return (e + 1.0) / (e - 1.0)


@dataclass(frozen=True)
class PrivacyBudget:
    """Per-report budget; the analysis (and this package) require 0 < eps <= 1."""

    eps: float
    keep_prob: float = field(init=False, repr=False)

    def __post_init__(self):
        if not (0.0 < self.eps <= 1.0):
            raise ValueError(f"eps must lie in (0, 1], got {self.eps}")
        object.__setattr__(self, "keep_prob", keep_probability(self.eps))

    def split(self, ways):
        """Evenly divided sub-budget, for protocols that report more than once."""
        return PrivacyBudget(self.eps / ways)


def _sign(row, col):
    return -1 if (int(row) & int(col)).bit_count() & 1 else 1


def hadamard_randomize(row, col, budget, rng):
    """One randomized report: the sign of H[row, col], flipped with prob 1/(e^eps+1)."""
    s = _sign(row, col)
    return s if rng.random() < budget.keep_prob else -s


def hrr_client(row, budget, element, rng):
    """Direct-oracle client: the column is the element itself."""
    return hadamard_randomize(row, int(element), budget, rng)


def hada_oracle_client(row, h, budget, element, rng):
    """Hashed-oracle client: the column is h(element)."""
    return hadamard_randomize(row, h.eval(int(element)), budget, rng)


def hada_heavy_client(tau, row, h, budget, element, code, rng):
    """Heavy-hitter client at level tau: the column is h(prefix_tau(element))."""
    return hadamard_randomize(row, h.eval(encode_prefix(element, tau, code)), budget, rng)


# --- wire format -----------------------------------------------------------
# One byte per report: 0x00 encodes -1, 0x01 encodes +1.

def encode_reports(reports):
    arr = np.asarray(reports)
    if arr.size and not np.all(np.abs(arr) == 1):
        raise ValueError("reports must be +-1")
    return ((arr + 1) // 2).astype(np.uint8).tobytes()

def decode_reports(blob):
    raw = np.frombuffer(blob, dtype=np.uint8)
    if raw.size and int(raw.max()) > 1:
        raise ValueError("invalid report byte; expected 0x00 or 0x01")
    return (raw.astype(np.int8) * 2 - 1)


# --- per-round randomness --------------------------------------------------

def _stream(master_seed, round_index, *labels):
    ss = np.random.SeedSequence([int(master_seed), int(round_index), *labels])
    return np.random.Generator(np.random.Philox(ss))


def round_streams(master_seed, round_index):
    """Two Philox streams for one protocol round: public row draws and coins.

    User u's row is draw u of the first stream and their coin is draw u of
    the second, so the transcript is a pure function of (master seed, round
    index, user index) no matter how the build is chunked or sharded.
    """
    return (_stream(master_seed, round_index, 0),
            _stream(master_seed, round_index, 1))


def setup_stream(master_seed, round_index, label):
    """Auxiliary stream for a round's one-off draws (partition, hash sampling)."""
    return _stream(master_seed, round_index, 2, int(label))


def draw_rows(rng, count, m):
    return rng.integers(0, m, size=count, dtype=np.uint64)


def draw_coins(rng, count):
    return rng.random(count)
