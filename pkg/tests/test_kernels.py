import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from threshdp import _kernels_py as py
from threshdp import kernels

cy = pytest.importorskip("threshdp._kernels")

u64 = hnp.arrays(np.uint64, st.integers(0, 50), elements=st.integers(0, 2**64 - 1))


def lcp_oracle(a, b, width):
    sa, sb = format(a, f"0{width}b"), format(b, f"0{width}b")
    n = 0
    while n < width and sa[n] == sb[n]:
        n += 1
    return n


@given(st.integers(1, 64), st.data())
def test_pair_lcp_backends_match_oracle(width, data):
    elems = st.integers(0, 2**width - 1)
    a = data.draw(hnp.arrays(np.uint64, st.integers(0, 30), elements=elems))
    b = data.draw(hnp.arrays(np.uint64, a.shape, elements=elems))
    want = [lcp_oracle(int(x), int(y), width) for x, y in zip(a, b)]
    assert py.pair_lcp(a, b, width).tolist() == want
    assert np.asarray(cy.pair_lcp(a, b, width)).tolist() == want


@given(u64, st.integers(0, 63))
def test_prefix_runs_backends_agree(values, shift):
    values = np.sort(values)
    ref_v, ref_c = py.prefix_runs(values, shift)
    got_v, got_c = cy.prefix_runs(values, shift)
    assert np.array_equal(ref_v, got_v) and np.array_equal(ref_c, got_c)
    assert ref_c.sum() == values.size
    assert ref_v.tolist() == sorted(set((values >> np.uint64(shift)).tolist()))


@settings(max_examples=50)
@given(st.integers(1, 6), st.integers(0, 41), st.floats(0, 20), st.integers(0, 2**31))
def test_count_close_pairs_backends_agree(rows, cols, radius, seed):
    rng = np.random.default_rng(seed)
    perms = rng.permuted(np.tile(np.arange(1, cols + 1, dtype=np.int64), (rows, 1)), axis=1)
    ref = py.count_close_pairs(perms, radius)
    assert np.array_equal(ref, cy.count_close_pairs(perms, radius))
    want = [sum(abs(p[2 * i] - p[2 * i + 1]) <= radius for i in range(cols // 2)) for p in perms]
    assert ref.tolist() == want


def test_length_mismatch_rejected():
    a = np.zeros(3, dtype=np.uint64)
    with pytest.raises(ValueError):
        py.pair_lcp(a, a[:2], 8)
    with pytest.raises(ValueError):
        cy.pair_lcp(a, a[:2], 8)


def backend_in_subprocess(**env):
    code = "import threshdp.kernels as k; print(k.BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], env={**os.environ, **env},
                         capture_output=True, text=True, check=True)
    return out.stdout.strip()


def test_backend_selection():
    forced = bool(os.environ.get("THRESHDP_PURE_PYTHON"))
    assert kernels.BACKEND == ("python" if forced else "cython")
    assert backend_in_subprocess(THRESHDP_PURE_PYTHON="1") == "python"
    env = {k: v for k, v in os.environ.items() if k != "THRESHDP_PURE_PYTHON"}
    out = subprocess.run([sys.executable, "-c", "import threshdp; print(threshdp.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "cython"
