import math

import numpy as np
import pytest

from hadaldp import hrr
from hadaldp.hadamard import entry
from hadaldp.randomizer import PrivacyBudget, debias_factor

BUDGET = PrivacyBudget(1.0)


def test_dim_for_rounds_up_to_power_of_two():
    assert hrr.dim_for(1) == 1
    assert hrr.dim_for(2) == 2
    assert hrr.dim_for(3) == 4
    assert hrr.dim_for(4) == 4
    assert hrr.dim_for(5) == 8
    assert hrr.dim_for(1 << 20) == 1 << 20


def test_dim_cap():
    with pytest.raises(ValueError):
        hrr.dim_for((1 << 28) + 1)
    assert hrr.dim_for(1 << 29, max_dim=1 << 29) == 1 << 29


def test_empty_build_is_all_zero():
    state = hrr.build(np.empty(0, dtype=np.uint64), 16, BUDGET, seed=0)
    assert state.m == 16
    assert (state.buffer == 0).all()
    for v in range(16):
        assert hrr.query(state, v) == 0.0


def test_query_equals_query_direct_everywhere():
    rng = np.random.default_rng(1)
    elems = rng.integers(0, 64, size=500, dtype=np.uint64)
    raw = hrr.build(elems, 64, BUDGET, seed=7, finalize=False)
    direct = [hrr.query_direct(raw, v) for v in range(64)]
    raw.finalize()
    transformed = [hrr.query(raw, v) for v in range(64)]
    assert transformed == direct   # bitwise, not approx


def test_single_report_algebra():
    # one user, forced keep: the raw accumulator holds +-1 at one row, so
    # the estimate for any v is debias * entry(m, r, held) * entry(m, r, v)
    raw = hrr.build(np.array([3], dtype=np.uint64), 8, BUDGET, seed=123,
                    finalize=False)
    nz = np.flatnonzero(raw.buffer)
    assert nz.size == 1
    r = int(nz[0])
    sign = int(raw.buffer[r])
    assert sign in (-1, 1)
    c = debias_factor(1.0)
    for v in range(8):
        expect = c * sign * entry(8, r, v)
        assert hrr.query_direct(raw, v) == pytest.approx(expect, rel=1e-12)


def test_chunk_size_does_not_change_transcript():
    rng = np.random.default_rng(2)
    elems = rng.integers(0, 1024, size=5000, dtype=np.uint64)
    a = hrr.build(elems, 1024, BUDGET, seed=99, chunk_size=64)
    b = hrr.build(elems, 1024, BUDGET, seed=99, chunk_size=1 << 20)
    assert np.array_equal(a.buffer, b.buffer)


def test_round_index_changes_transcript():
    elems = np.zeros(100, dtype=np.uint64)
    a = hrr.build(elems, 16, BUDGET, seed=5, round_index=0)
    b = hrr.build(elems, 16, BUDGET, seed=5, round_index=1)
    assert not np.array_equal(a.buffer, b.buffer)


def test_unbiased_on_point_mass():
    """All users hold element 0; the Monte-Carlo mean estimate over T
    builds approaches n within 3 * c_eps * sqrt(n / T)."""
    n, d, trials = 10_000, 8, 100
    elems = np.zeros(n, dtype=np.uint64)
    total = 0.0
    for t in range(trials):
        state = hrr.build(elems, d, BUDGET, seed=1000 + t)
        total += hrr.query(state, 0)
    mean = total / trials
    tol = 3.0 * debias_factor(1.0) * math.sqrt(n / trials)
    assert abs(mean - n) <= tol, f"mean {mean} vs n {n}, tol {tol}"


def test_rejects_out_of_domain():
    with pytest.raises(ValueError):
        hrr.build(np.array([4], dtype=np.uint64), 4, BUDGET, seed=0)
    state = hrr.build(np.array([1], dtype=np.uint64), 4, BUDGET, seed=0)
    with pytest.raises(ValueError):
        hrr.query(state, 4)


def test_finalize_gates():
    state = hrr.build(np.array([1, 2], dtype=np.uint64), 4, BUDGET, seed=0,
                      finalize=False)
    with pytest.raises(RuntimeError):
        hrr.query(state, 1)
    state.finalize()
    with pytest.raises(RuntimeError):
        state.finalize()
    with pytest.raises(RuntimeError):
        hrr.query_direct(state, 1)


def test_serialization_round_trip():
    rng = np.random.default_rng(4)
    elems = rng.integers(0, 256, size=2000, dtype=np.uint64)
    state = hrr.build(elems, 256, BUDGET, seed=31)
    blob = hrr.to_bytes(state)
    back = hrr.from_bytes(blob)
    assert back.m == state.m and back.n_users == state.n_users
    assert back.budget.eps == state.budget.eps
    assert np.array_equal(back.buffer, state.buffer)
    for v in rng.integers(0, 256, size=50):
        assert hrr.query(back, int(v)) == hrr.query(state, int(v))


def test_from_bytes_rejects_garbage():
    state = hrr.build(np.array([0], dtype=np.uint64), 4, BUDGET, seed=1)
    blob = hrr.to_bytes(state)
    with pytest.raises(ValueError):
        hrr.from_bytes(b"XXXX" + blob[4:])
    with pytest.raises(ValueError):
        hrr.from_bytes(blob[:-8])
