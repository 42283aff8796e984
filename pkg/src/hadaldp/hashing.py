"""Pairwise-independent hashing h(x) = ((a*x + b) mod p) mod m, p = 2^61 - 1.

The Mersenne prime keeps the modular reduction branch-free (fold the high
bits back in, 2^61 == 1 mod p) and leaves room for domains up to 2^61.
Scalar evaluation goes through Python's arbitrary-precision ints, so it is
exact by construction; the batch path uses the 32-bit-limb uint64 kernel
from the backend.  The two must agree everywhere, and tests hold them to
that.
"""

import json
from dataclasses import dataclass

import numpy as np

from . import backend

P61 = (1 << 61) - 1


@dataclass(frozen=True)
class PairwiseHash:
    """One member of the affine family, fixed modulus p = 2^61 - 1."""

    a: int
    b: int
    p: int
    m: int

    def __post_init__(self):
        if self.p != P61:
            raise ValueError(f"modulus must be 2^61 - 1, got {self.p}")
        if not 1 <= self.a < self.p:
            raise ValueError(f"a must lie in [1, p), got {self.a}")
        if not 0 <= self.b < self.p:
            raise ValueError(f"b must lie in [0, p), got {self.b}")
        if self.m < 1:
            raise ValueError(f"range m must be positive, got {self.m}")

    def eval(self, x):
        """Exact scalar evaluation through Python ints."""
        x = int(x)
        if not 0 <= x < self.p:
            raise ValueError(f"input {x} outside [0, 2^61 - 1)")
        return ((self.a * x + self.b) % self.p) % self.m

    def eval_batch(self, xs):
        """Vectorized evaluation of a uint64 array via the limb kernel."""
        xs = np.ascontiguousarray(xs, dtype=np.uint64)
        if xs.size and int(xs.max()) >= self.p:
            raise ValueError("batch contains inputs outside [0, 2^61 - 1)")
        return backend.hash_eval(xs, self.a, self.b, self.m)

    def to_json(self):
        return json.dumps({"a": self.a, "b": self.b, "p": self.p, "m": self.m})

    @classmethod
    def from_json(cls, blob):
        d = json.loads(blob)
        return cls(a=int(d["a"]), b=int(d["b"]), p=int(d["p"]), m=int(d["m"]))


def sample_hash(m, rng):
    """Draw one function: a uniform in [1, p), b uniform in [0, p)."""
    a = int(rng.integers(1, P61))
    b = int(rng.integers(0, P61))
    return PairwiseHash(a=a, b=b, p=P61, m=int(m))
