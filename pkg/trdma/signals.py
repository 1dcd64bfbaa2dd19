"""
Offset-aware complex sequence algebra.

A ComplexSequence is a finite block of complex samples placed at an integer
start index; everything outside the block is implicitly zero. Channel impulse
responses, precoders, correlations and equivalent channels are all values of
this one type, so the arithmetic below is written once and shared.

Correlation convention: crosscorr(a, b)[tau] = sum_k a[k] * conj(b[k - tau]),
which peaks at lag 0 when a == b.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError


@dataclass(frozen=True, eq=False)
class ComplexSequence:
    start: int = 0
    taps: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.complex128))

    def __post_init__(self):
        taps = np.array(self.taps, dtype=np.complex128).reshape(-1)
        taps.setflags(write=False)
        #The canonical empty sequence always sits at 0.
        start = int(self.start) if taps.size else 0
        object.__setattr__(self, "taps", taps)
        object.__setattr__(self, "start", start)

    @classmethod
    def delta(cls, index=0, value=1.0):
        return cls(index, [value])

    @classmethod
    def empty(cls):
        return cls()

    def __len__(self):
        return self.taps.size

    @property
    def end(self):
        """One past the last stored index."""
        return self.start + self.taps.size

    @property
    def is_empty(self):
        return self.taps.size == 0

    def __getitem__(self, k):
        k = int(k)
        if self.start <= k < self.end:
            return complex(self.taps[k - self.start])
        return 0j

    def values(self, lo, hi):
        """Dense samples over the absolute index range [lo, hi)."""
        out = np.zeros(max(hi - lo, 0), dtype=np.complex128)
        a, b = max(lo, self.start), min(hi, self.end)
        if a < b:
            out[a - lo:b - lo] = self.taps[a - self.start:b - self.start]
        return out

    def shift(self, n):
        return ComplexSequence(self.start + int(n), self.taps)

    def trimmed(self):
        """Drop leading and trailing exact zeros."""
        nz = np.flatnonzero(self.taps)
        if nz.size == 0:
            return ComplexSequence.empty()
        return ComplexSequence(self.start + nz[0], self.taps[nz[0]:nz[-1] + 1])

    def __add__(self, other):
        return accumulate_shifted(self, 1.0, 0, other)

    def __sub__(self, other):
        return accumulate_shifted(self, -1.0, 0, other)

    def __neg__(self):
        return ComplexSequence(self.start, -self.taps)

    def __mul__(self, c):
        return ComplexSequence(self.start, self.taps * complex(c))

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, ComplexSequence):
            return NotImplemented
        return max_abs_diff(self, other) == 0.0

    __hash__ = None

    def __repr__(self):
        return "ComplexSequence(start=%d, len=%d)" % (self.start, len(self))


def _union(seqs):
    seqs = [s for s in seqs if not s.is_empty]
    if not seqs:
        return 0, 0
    return min(s.start for s in seqs), max(s.end for s in seqs)


def max_abs_diff(a, b):
    """Largest sample difference, zero padding ignored."""
    lo, hi = _union([a, b])
    if lo == hi:
        return 0.0
    return float(np.max(np.abs(a.values(lo, hi) - b.values(lo, hi))))


def allclose(a, b, rtol=1e-12, atol=0.0):
    """Value equality under padding, tolerance relative to the larger peak magnitude."""
    scale = max([float(np.max(np.abs(s.taps))) for s in (a, b) if not s.is_empty] or [0.0])
    return max_abs_diff(a, b) <= atol + rtol * scale


def sum_sequences(seqs):
    seqs = list(seqs)
    lo, hi = _union(seqs)
    if lo == hi:
        return ComplexSequence.empty()
    acc = np.zeros(hi - lo, dtype=np.complex128)
    for s in seqs:
        if not s.is_empty:
            acc[s.start - lo:s.end - lo] += s.taps
    return ComplexSequence(lo, acc)


def convolve(a, b):
    """
    result[k] = sum_j a[j] * b[k - j], starting at a.start + b.start.
    Direct evaluation; the lengths involved here are a few hundred taps.
    """
    if a.is_empty or b.is_empty:
        return ComplexSequence.empty()
    return ComplexSequence(a.start + b.start, np.convolve(a.taps, b.taps))


def time_reverse_conj(a, pivot):
    """result[k] = conj(a[pivot - k]). Applying it twice with the same pivot is the identity."""
    if a.is_empty:
        return ComplexSequence.empty()
    return ComplexSequence(pivot - (a.end - 1), np.conj(a.taps[::-1]))


def crosscorr(a, b):
    #Same thing as convolving with the conjugate-reversed b about 0.
    return convolve(a, time_reverse_conj(b, 0))


def energy(a):
    return float(np.vdot(a.taps, a.taps).real)


def accumulate_shifted(acc, c, shift, b):
    """
    result[k] = acc[k] + c * b[k - shift] over the union of both supports.
    This is the precoder update of the iterative algorithm.
    """
    moved = b.shift(shift)
    lo, hi = _union([acc, moved])
    if lo == hi:
        return ComplexSequence.empty()
    out = acc.values(lo, hi)
    if not moved.is_empty:
        out[moved.start - lo:moved.end - lo] += complex(c) * moved.taps
    return ComplexSequence(lo, out)


def upsample(symbols, spacing=1, start=0):
    """Symbol l placed at index start + l*spacing, zeros in between."""
    symbols = np.asarray(symbols, dtype=np.complex128).reshape(-1)
    if symbols.size == 0:
        return ComplexSequence.empty()
    out = np.zeros((symbols.size - 1) * spacing + 1, dtype=np.complex128)
    out[::spacing] = symbols
    return ComplexSequence(start, out)


def peak(a):
    """Absolute index and value of the largest magnitude sample; ties go to the smallest index."""
    if a.is_empty:
        raise NumericError("peak of an empty sequence")
    idx = int(np.argmax(np.abs(a.taps)))
    return a.start + idx, complex(a.taps[idx])
