"""Cross-validation of the FP8 codec against torch's native float8 dtypes.

An entirely independent implementation of the same bit layouts; skipped
when torch is not installed.
"""

import numpy as np
import pytest

torch = pytest.importorskip("torch")

from mossq.fp8 import E4M3, E5M2, decode_table, fp8_decode, fp8_encode

pytestmark = pytest.mark.skipif(
    not hasattr(torch, "float8_e4m3fn"), reason="torch lacks float8 dtypes")

PAIRS = [(E4M3, "float8_e4m3fn"), (E5M2, "float8_e5m2")]


@pytest.mark.parametrize("fmt,tname", PAIRS, ids=["e4m3", "e5m2"])
def test_decode_table_matches_torch(fmt, tname):
    tdt = getattr(torch, tname)
    tvals = torch.arange(256, dtype=torch.uint8).view(tdt).float().numpy()
    ours = decode_table(fmt)
    both_nan = np.isnan(tvals) & np.isnan(ours)
    assert np.all((tvals == ours) | both_nan)
    zero = ours == 0.0
    assert np.array_equal(np.signbit(tvals[zero]), np.signbit(ours[zero]))


@pytest.mark.parametrize("fmt,tname", PAIRS, ids=["e4m3", "e5m2"])
def test_encode_matches_torch_cast(fmt, tname):
    tdt = getattr(torch, tname)
    rng = np.random.default_rng(31)
    # stay strictly inside the finite range: overflow policy differs for
    # e5m2 (torch produces inf, this codec saturates)
    x = np.concatenate([
        rng.uniform(-fmt.max_value, fmt.max_value, 20_000),
        rng.normal(0, fmt.max_value / 1000, 20_000),
        rng.normal(0, 2.0 ** (1 - fmt.bias), 10_000),  # subnormal territory
    ]).astype(np.float32)
    ours = fp8_decode(fp8_encode(x, fmt), fmt)
    theirs = torch.from_numpy(x).to(tdt).float().numpy()
    assert np.array_equal(ours, theirs)


def test_e4m3_saturation_matches_torch():
    x = np.array([500.0, 1e9, -1e9, 448.0001], dtype=np.float32)
    ours = fp8_decode(fp8_encode(x, E4M3), E4M3)
    theirs = torch.from_numpy(x).to(torch.float8_e4m3fn).float().numpy()
    assert np.array_equal(ours, theirs)
