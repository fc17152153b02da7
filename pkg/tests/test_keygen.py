from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lorakey.channel import simulate_trace
from lorakey.errors import AlignmentError, ParameterError
from lorakey.keygen import (
    KeyBits,
    downsample,
    generate_key,
    kdr,
    quantize_mean,
    read_keys,
    reconcilable,
    write_keys,
)
from lorakey.runner import ExperimentConfig

bit_arrays = st.integers(1, 300).flatmap(
    lambda n: st.tuples(*(arrays(np.uint8, n, elements=st.integers(0, 1)) for _ in range(3)))
)


def test_downsample_identity_and_stride():
    x = np.arange(1, 11)
    np.testing.assert_array_equal(downsample(x, 10), x)
    np.testing.assert_array_equal(downsample(x, 5), [1, 3, 5, 7, 9])


def test_downsample_index_spacing():
    idx = downsample(np.arange(10_000), 256)
    gaps = np.diff(idx)
    assert np.all(gaps > 0)
    assert gaps.max() - gaps.min() <= 1


def test_downsample_rejects_bad_length():
    with pytest.raises(ParameterError):
        downsample(np.arange(5), 6)
    with pytest.raises(ParameterError):
        downsample(np.arange(5), 0)


def test_quantize_examples():
    key = quantize_mean([-50.0, -60.0])
    np.testing.assert_array_equal(key.bits, [1, 0])
    assert key.mu == -55.0 and not key.degenerate
    flat = quantize_mean(np.full(8, -70.0))
    assert not flat.bits.any() and flat.degenerate
    # the middle sample sits exactly on the mean
    np.testing.assert_array_equal(quantize_mean([-50.0, -55.0, -60.0]).bits, [1, 0, 0])


@settings(max_examples=200, deadline=None)
@given(arrays(float, st.integers(1, 200), elements=st.integers(-120, 0).map(float)), st.integers(-40, 40))
def test_quantize_ignores_offsets(x, c):
    # integer-valued RSSI keeps the shifted mean exact
    a, b = quantize_mean(x), quantize_mean(x + c)
    np.testing.assert_array_equal(a.bits, b.bits)
    assert kdr(a, b) == 0.0


def test_kdr_examples():
    ones = KeyBits(np.ones(16))
    assert kdr(ones, ones) == 0.0
    assert kdr(ones, KeyBits(np.zeros(16))) == 1.0
    assert kdr(KeyBits([1, 0, 1, 1]), KeyBits([1, 1, 1, 0])) == 0.5
    with pytest.raises(AlignmentError):
        kdr(KeyBits([1, 0]), KeyBits([1, 0, 1]))


@settings(max_examples=300, deadline=None)
@given(bit_arrays)
def test_kdr_is_a_metric_and_exact(triple):
    a, b, c = (KeyBits(t) for t in triple)
    exact = Fraction(sum(int(x != y) for x, y in zip(a.bits, b.bits)), len(a))
    assert abs(kdr(a, b) - float(exact)) < 1e-12
    assert kdr(a, b) == kdr(b, a)
    assert (kdr(a, b) == 0.0) == bool(np.array_equal(a.bits, b.bits))
    assert kdr(a, c) <= kdr(a, b) + kdr(b, c) + 1e-12


def test_reconcilable_threshold():
    assert reconcilable(0.1026)
    assert reconcilable(0.2)
    assert not reconcilable(0.2001)
    assert not reconcilable(0.4798)
    with pytest.raises(ParameterError):
        reconcilable(1.5)


def test_key_formats_roundtrip(tmp_path):
    key = KeyBits([1, 0, 1, 1, 0, 0, 0, 1, 1])
    assert key.to_ascii() == "101100011"
    assert key.to_hex() == "b18"
    path = write_keys([key, KeyBits([0, 1])], tmp_path / "k.txt")
    back = read_keys(path)
    assert [k.to_ascii() for k in back] == ["101100011", "01"]
    assert write_keys([key], tmp_path / "h.txt", fmt="hex").read_text() == "b18\n"
    with pytest.raises(ParameterError):
        KeyBits.from_ascii("10x1")


@pytest.mark.parametrize("scenario", ["Ib", "Id"])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_simulated_reciprocity(scenario, seed):
    trace = simulate_trace(*ExperimentConfig().setup(scenario, 3.0, seed))
    ka = generate_key(trace.alice, 256, "alice")
    kb = generate_key(trace.bob, 256, "bob")
    assert len(ka) == 256 and ka.downsample_step == pytest.approx(10_000 / 256)
    assert kdr(ka, kb) <= 0.2
