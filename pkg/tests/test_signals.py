import numpy as np
import pytest

from trdma import signals
from trdma.errors import NumericError
from trdma.signals import ComplexSequence


def _rand_seq(rng, n, start=0):
    return ComplexSequence(start, rng.standard_normal(n) + 1j * rng.standard_normal(n))


def test_empty_sequence_is_canonical():
    e = ComplexSequence(7, [])
    assert e.is_empty
    assert e.start == 0
    assert e == ComplexSequence.empty()
    assert e[3] == 0j


def test_indexing_outside_support_is_zero():
    a = ComplexSequence(-2, [1, 2, 3])
    assert a[-2] == 1
    assert a[0] == 3
    assert a[-3] == 0j
    assert a[1] == 0j
    assert a.end == 1
    np.testing.assert_array_equal(a.values(-4, 2), [0, 0, 1, 2, 3, 0])


def test_equality_ignores_zero_padding():
    assert ComplexSequence(0, [1, 2, 0, 0]) == ComplexSequence(0, [1, 2])
    assert ComplexSequence(-1, [0, 1, 2]) == ComplexSequence(0, [1, 2])
    assert ComplexSequence(0, [1, 2]) != ComplexSequence(1, [1, 2])


def test_taps_are_read_only():
    a = ComplexSequence(0, [1, 2])
    with pytest.raises(ValueError):
        a.taps[0] = 5


def test_trimmed_drops_exact_zeros():
    t = ComplexSequence(3, [0, 0, 1j, 0, 2, 0]).trimmed()
    assert t.start == 5
    np.testing.assert_array_equal(t.taps, [1j, 0, 2])
    assert ComplexSequence(0, [0, 0]).trimmed().is_empty


def test_convolve_with_delta_shifts():
    rng = np.random.default_rng(0)
    a = _rand_seq(rng, 9, start=-3)
    out = signals.convolve(a, ComplexSequence.delta(5, 2.0))
    assert out.start == 2
    np.testing.assert_allclose(out.taps, 2.0 * a.taps)


def test_convolve_matches_direct_sum():
    rng = np.random.default_rng(1)
    a, b = _rand_seq(rng, 6, start=2), _rand_seq(rng, 4, start=-1)
    out = signals.convolve(a, b)
    for k in range(out.start - 2, out.end + 2):
        expected = sum(a[j] * b[k - j] for j in range(a.start, a.end))
        assert out[k] == pytest.approx(expected, abs=1e-12)


def test_convolve_with_empty_is_empty():
    assert signals.convolve(ComplexSequence(0, [1, 2]), ComplexSequence.empty()).is_empty


def test_crosscorr_convention():
    rng = np.random.default_rng(2)
    a, b = _rand_seq(rng, 7, start=1), _rand_seq(rng, 5, start=-2)
    r = signals.crosscorr(a, b)
    for tau in range(-12, 12):
        expected = sum(a[k] * np.conj(b[k - tau]) for k in range(a.start, a.end))
        assert r[tau] == pytest.approx(expected, abs=1e-12)


def test_autocorrelation_peaks_at_zero_with_energy():
    rng = np.random.default_rng(3)
    a = _rand_seq(rng, 32, start=4)
    r = signals.crosscorr(a, a)
    idx, value = signals.peak(r)
    assert idx == 0
    assert value.real == pytest.approx(signals.energy(a))
    assert value.imag == pytest.approx(0.0, abs=1e-12)


def test_time_reverse_conj_is_an_involution():
    rng = np.random.default_rng(4)
    a = _rand_seq(rng, 10, start=-4)
    r = signals.time_reverse_conj(a, 6)
    assert r[6 - a.start] == np.conj(a[a.start])
    assert signals.time_reverse_conj(r, 6) == a


def test_accumulate_shifted_grows_support():
    acc = ComplexSequence(0, [1, 1])
    out = signals.accumulate_shifted(acc, -2.0, 3, ComplexSequence(0, [1, 1j]))
    assert out.start == 0
    np.testing.assert_array_equal(out.taps, [1, 1, 0, -2, -2j])
    assert acc == ComplexSequence(0, [1, 1])


def test_arithmetic_operators():
    a = ComplexSequence(0, [1, 2])
    b = ComplexSequence(1, [1, 1])
    assert a + b == ComplexSequence(0, [1, 3, 1])
    assert a - a == ComplexSequence.empty()
    assert 2 * a == a * 2 == ComplexSequence(0, [2, 4])
    assert -a == ComplexSequence(0, [-1, -2])
    assert a.shift(-3) == ComplexSequence(-3, [1, 2])


def test_sum_sequences_over_disjoint_supports():
    out = signals.sum_sequences([ComplexSequence(-2, [1]), ComplexSequence(2, [3])])
    assert out.start == -2
    np.testing.assert_array_equal(out.taps, [1, 0, 0, 0, 3])
    assert signals.sum_sequences([]).is_empty


def test_allclose_is_relative_to_peak():
    a = ComplexSequence(0, [1e6, 1.0])
    b = ComplexSequence(0, [1e6, 1.0 + 1e-7])
    assert signals.allclose(a, b)
    assert not signals.allclose(ComplexSequence(0, [1.0]), ComplexSequence(0, [1.0 + 1e-9]))


def test_peak_ties_go_to_smallest_index():
    idx, value = signals.peak(ComplexSequence(-1, [1, -2, 2j, 0.5]))
    assert idx == 0
    assert value == -2


def test_peak_of_empty_raises():
    with pytest.raises(NumericError, match="empty"):
        signals.peak(ComplexSequence.empty())


def test_upsample_places_symbols_on_grid():
    u = signals.upsample([1, -1, 1j], spacing=3, start=2)
    assert u.start == 2
    np.testing.assert_array_equal(u.taps, [1, 0, 0, -1, 0, 0, 1j])
    assert signals.upsample([]).is_empty


def test_convolution_algebra():
    rng = np.random.default_rng(5)
    a, b, c = _rand_seq(rng, 5, start=-2), _rand_seq(rng, 7, start=3), _rand_seq(rng, 4, start=1)
    conv = signals.convolve
    assert signals.allclose(conv(a, b), conv(b, a))
    assert signals.allclose(conv(conv(a, b), c), conv(a, conv(b, c)), rtol=1e-12)
    assert signals.allclose(conv(a, b + c), conv(a, b) + conv(a, c), rtol=1e-12)


def test_crosscorr_hermitian_symmetry():
    rng = np.random.default_rng(6)
    a, b = _rand_seq(rng, 8, start=-1), _rand_seq(rng, 6, start=2)
    ab, ba = signals.crosscorr(a, b), signals.crosscorr(b, a)
    for tau in range(-15, 16):
        assert ab[-tau] == pytest.approx(np.conj(ba[tau]), abs=1e-12)


def test_energy_and_shift():
    assert signals.energy(ComplexSequence(0, [3, 4j])) == 25.0
    rng = np.random.default_rng(7)
    a = _rand_seq(rng, 11, start=-5)
    assert signals.energy(a.shift(17)) == signals.energy(a)


def test_accumulate_shifted_cancels_exactly():
    out = signals.accumulate_shifted(ComplexSequence.delta(5), -1.0, 5, ComplexSequence.delta(0))
    assert out == ComplexSequence.empty()
    assert out.trimmed().is_empty
