"""
Conventional time-reversal precoders and the iterative (ITRDMA) refinement.

The iterative precoder starts from time reversal and repeatedly looks for the
largest unwanted sample of the focused field, over every user and every lag of
the window [-(L-1), L-1]. It then adds a time-reversed waveform aimed at that
user and lag, with the opposite complex amplitude, which cancels the sample
exactly. The residual field is updated in place by linearity; nothing is
re-convolved inside the loop.

Indexing used throughout: lag tau is relative to the designed focusing tap L-1,
the residual grid stores column t = tau + L - 1, and the precoder buffer stores
absolute index k at column k + L - 1.
"""
import logging
import os
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from joblib import Parallel, delayed

from . import formats, utils
from .channel import normalize_user, normalized_taps
from .errors import ConfigError, DimensionMismatchError, InputError, NumericError
from .signals import ComplexSequence, convolve, crosscorr, sum_sequences, time_reverse_conj, upsample

log = logging.getLogger("precoder")

EPSILON = 1e-3
#Headline operating point of the measurements.
N_MAX = 50

KIND_TR = "TR"
KIND_ITRDMA = "ITRDMA"

TRACE_COLUMNS = ("target", "n", "i_hat", "tau_hat", "re", "im", "max_abs_delta_after")


@dataclass(frozen=True)
class TraceEntry:
    n: int
    user: int
    lag: int
    value: complex
    max_abs_after: float


@dataclass(eq=False)
class ResidualGrid:
    """delta[i, tau + L - 1] = focused field at user i minus the single-spike target."""
    delta: np.ndarray
    trace: List[TraceEntry] = field(default_factory=list)

    @property
    def n_taps(self):
        return (self.delta.shape[1] + 1) // 2

    def max_abs(self):
        return float(np.max(np.abs(self.delta)))


@dataclass(frozen=True, eq=False)
class PrecoderSet:
    """sequences[i0][m] is the transmit waveform on antenna m for the stream of user i0."""
    sequences: Tuple[Tuple[ComplexSequence, ...], ...]
    kind: str
    iterations_used: Tuple[int, ...]
    epsilon: float = EPSILON
    n_max: int = 0
    residuals: Tuple[Optional[ResidualGrid], ...] = ()

    def __post_init__(self):
        if self.kind not in (KIND_TR, KIND_ITRDMA):
            raise ConfigError("unknown precoder kind %r" % self.kind)
        seqs = tuple(tuple(row) for row in self.sequences)
        if not seqs or len(set(len(row) for row in seqs)) != 1 or len(seqs[0]) == 0:
            raise DimensionMismatchError("precoder set must hold N x M sequences with N, M >= 1")
        if len(self.iterations_used) != len(seqs):
            raise DimensionMismatchError("iterations_used has %d entries for %d users"
                                         % (len(self.iterations_used), len(seqs)))
        object.__setattr__(self, "sequences", seqs)
        object.__setattr__(self, "iterations_used", tuple(int(n) for n in self.iterations_used))

    @property
    def n_users(self):
        return len(self.sequences)

    @property
    def n_antennas(self):
        return len(self.sequences[0])

    def user_energy(self, i0):
        return float(sum(np.vdot(s.taps, s.taps).real for s in self.sequences[i0]))

    def __eq__(self, other):
        if not isinstance(other, PrecoderSet):
            return NotImplemented
        if (self.kind, self.iterations_used, self.epsilon, self.n_max) != \
                (other.kind, other.iterations_used, other.epsilon, other.n_max):
            return False
        if (self.n_users, self.n_antennas) != (other.n_users, other.n_antennas):
            return False
        return all(a.start == b.start and np.array_equal(a.taps, b.taps)
                   for ra, rb in zip(self.sequences, other.sequences) for a, b in zip(ra, rb))

    __hash__ = None


def _finalize(block, start):
    """Energy normalization across antennas (last step of the algorithm)."""
    block = np.ascontiguousarray(block)
    e = float(np.sum(np.abs(block) ** 2))
    if not e > 0:
        raise NumericError("precoder has zero energy")
    block = block / np.sqrt(e)
    return tuple(ComplexSequence(start, row) for row in block)


def _check_user(cirset, i0):
    if not 0 <= i0 < cirset.n_users:
        raise DimensionMismatchError("target user %d not in bank of %d users" % (i0, cirset.n_users))


def normalized_correlation_bank(cirset):
    """
    R~[j][i](tau) = sum_m crosscorr(h~_{j,m}, h~_{i,m})(tau), tau in [-(L-1), L-1].
    R~[j][i] is also the field seen at user j when the TR precoder of user i is sent.
    """
    banks = [normalize_user(cirset, i) for i in range(cirset.n_users)]
    return [[sum_sequences(crosscorr(hj, hi) for hj, hi in zip(banks[j], banks[i]))
             for i in range(cirset.n_users)] for j in range(cirset.n_users)]


def correlation_array(cirset, bank=None):
    """Dense form of the correlation bank: out[j, i, tau + L - 1]."""
    bank = normalized_correlation_bank(cirset) if bank is None else bank
    l = cirset.n_taps
    return np.stack([np.stack([r.values(-(l - 1), l) for r in row]) for row in bank])


def tr_precoder(cirset, i0):
    """s_{i0,m}[k] = conj(h~_{i0,m}[L-1-k]): support [0, L-1], unit total energy."""
    _check_user(cirset, i0)
    h = normalized_taps(cirset, i0)
    return _finalize(np.conj(h[:, ::-1]), 0)


class ItrdmaState:
    """
    One run of the iterative algorithm for target user i0.
    step() performs one cancellation, run() loops until the stopping rule,
    precoder() gives the current waveforms before the final normalization.
    """

    def __init__(self, cirset, i0, corr=None):
        _check_user(cirset, i0)
        self.i0 = i0
        self.n_taps = l = cirset.n_taps
        h_norm = np.stack([normalized_taps(cirset, i) for i in range(cirset.n_users)])
        #TR template of every user, starting at 0.
        self.templates = np.conj(h_norm[:, :, ::-1])
        self.corr = correlation_array(cirset) if corr is None else corr
        self.buf = np.zeros((cirset.n_antennas, 3 * l - 2), dtype=np.complex128)
        self.buf[:, l - 1:2 * l - 1] = self.templates[i0]
        self.lo, self.hi = 0, l - 1
        self.delta = np.array(self.corr[:, i0, :])
        self.delta[i0, l - 1] -= 1.0
        self.trace = []
        self.n = 0

    def max_abs(self):
        return float(np.max(np.abs(self.delta)))

    def select(self):
        """Global argmax of |delta|, smallest lag first, then smallest user."""
        flat = int(np.argmax(np.abs(self.delta.T)))
        t, i_hat = divmod(flat, self.delta.shape[0])
        return i_hat, t - (self.n_taps - 1)

    def step(self):
        l = self.n_taps
        width = 2 * l - 1
        i_hat, tau_hat = self.select()
        c = complex(self.delta[i_hat, tau_hat + l - 1])
        #s <- s - c * (TR template of i_hat delayed by tau_hat)
        self.buf[:, tau_hat + l - 1:tau_hat + 2 * l - 1] -= c * self.templates[i_hat]
        self.lo = min(self.lo, tau_hat)
        self.hi = max(self.hi, tau_hat + l - 1)
        #delta_i(tau) <- delta_i(tau) - c * R~_{i,i_hat}(tau - tau_hat), inside the window only
        a, b = max(0, tau_hat), min(width, width + tau_hat)
        self.delta[:, a:b] -= c * self.corr[:, i_hat, a - tau_hat:b - tau_hat]
        self.n += 1
        entry = TraceEntry(self.n, i_hat, tau_hat, c, self.max_abs())
        self.trace.append(entry)
        log.debug("user %d iter %d: cancel user %d lag %d |%.3e|, max residual %.3e",
                  self.i0, self.n, i_hat, tau_hat, abs(c), entry.max_abs_after)
        return entry

    def run(self, epsilon=EPSILON, n_max=N_MAX):
        while self.max_abs() > epsilon and self.n < n_max:
            self.step()
        return self

    def _block(self):
        l = self.n_taps
        return self.buf[:, self.lo + l - 1:self.hi + l]

    def precoder(self):
        return tuple(ComplexSequence(self.lo, row) for row in self._block())

    def residual_grid(self):
        return ResidualGrid(np.array(self.delta), list(self.trace))

    def finalize(self):
        return _finalize(self._block(), self.lo)


def _check_stopping(epsilon, n_max):
    if not epsilon >= 0:
        raise ConfigError("epsilon must be >= 0, got %r" % epsilon)
    if int(n_max) != n_max or n_max < 0:
        raise ConfigError("n_max must be a non-negative integer, got %r" % n_max)


def itrdma_precoder(cirset, i0, epsilon=EPSILON, n_max=N_MAX, corr=None):
    """Returns (M normalized waveforms, residual grid with the iteration trace)."""
    _check_stopping(epsilon, n_max)
    state = ItrdmaState(cirset, i0, corr).run(epsilon, int(n_max))
    return state.finalize(), state.residual_grid()


def itrdma_checkpoints(cirset, i0, checkpoints, epsilon=EPSILON, corr=None):
    """
    {n: (normalized waveforms, iterations actually used)} for every requested n,
    taken from one run. The greedy path does not depend on n_max, so each entry
    equals a separate run with n_max = n.
    """
    checkpoints = sorted(set(int(n) for n in checkpoints))
    _check_stopping(epsilon, checkpoints[-1] if checkpoints else 0)
    state = ItrdmaState(cirset, i0, corr)
    out = {}
    for n in checkpoints:
        state.run(epsilon, n)
        out[n] = (state.finalize(), state.n)
    return out


def residual_consistency_check(cirset, i0, precoder_state, delta):
    """
    Recomputes the focused field of a (pre-normalization) precoder through the
    normalized channel, f_i(tau) = sum_m crosscorr(h~_{i,m}, q_m)(tau) with
    q_m the precoder conjugate-reversed about L-1, and returns the largest gap
    between the tracked residual and f_i - target_i over the window.
    """
    if isinstance(delta, ResidualGrid):
        delta = delta.delta
    l = cirset.n_taps
    if delta.shape != (cirset.n_users, 2 * l - 1):
        raise DimensionMismatchError("residual grid shape %s, expected %s"
                                     % (delta.shape, (cirset.n_users, 2 * l - 1)))
    templates = [time_reverse_conj(s, l - 1) for s in precoder_state]
    worst = 0.0
    for i in range(cirset.n_users):
        field_i = sum_sequences(crosscorr(h, q) for h, q in zip(normalize_user(cirset, i), templates))
        expected = field_i.values(-(l - 1), l)
        if i == i0:
            expected[l - 1] -= 1.0
        worst = max(worst, float(np.max(np.abs(delta[i] - expected))))
    return worst


def _solve_user(cirset, i0, kind, epsilon, n_max, corr):
    if kind == KIND_TR:
        return tr_precoder(cirset, i0), 0, None
    seqs, grid = itrdma_precoder(cirset, i0, epsilon, n_max, corr)
    return seqs, len(grid.trace), grid


def build_precoders(cirset, kind=KIND_ITRDMA, epsilon=EPSILON, n_max=N_MAX, n_jobs=1):
    """
    Precoders for every target user. Users are independent, so they may be solved
    in parallel; joblib keeps results in user order.
    """
    kind = kind.upper()
    if kind not in (KIND_TR, KIND_ITRDMA):
        raise ConfigError("unknown precoder kind %r" % kind)
    if kind == KIND_TR:
        n_max = 0
    _check_stopping(epsilon, n_max)
    corr = correlation_array(cirset) if kind == KIND_ITRDMA else None
    results = Parallel(n_jobs=n_jobs)(delayed(_solve_user)(cirset, i0, kind, epsilon, int(n_max), corr)
                                      for i0 in range(cirset.n_users))
    seqs, iters, grids = zip(*results)
    log.debug("%s precoders built for %d users, iterations %s", kind, cirset.n_users, list(iters))
    return PrecoderSet(seqs, kind, iters, float(epsilon), int(n_max), grids)


def transmit_waveforms(precoders, symbols, symbol_spacing=1):
    """Per-antenna transmitted signal: s_m = sum_i upsampled(x_i) * s_{i,m}."""
    if len(symbols) != precoders.n_users:
        raise DimensionMismatchError("%d symbol streams for %d users" % (len(symbols), precoders.n_users))
    streams = [upsample(x, symbol_spacing) for x in symbols]
    return tuple(sum_sequences(convolve(streams[i], precoders.sequences[i][m]) for i in range(precoders.n_users))
                 for m in range(precoders.n_antennas))


def _record(precoders):
    return (precoders.kind, precoders.epsilon, precoders.n_max, precoders.iterations_used,
            [[(s.start, s.taps) for s in row] for row in precoders.sequences])


def store(precoders, path):
    if str(path).lower().endswith(".json"):
        data = formats.encode_precoder_json(*_record(precoders))
    else:
        data = formats.encode_precoder(*_record(precoders))
    utils.atomic_write(path, data)
    log.info("Stored %s precoders for %d users to %s", precoders.kind, precoders.n_users, path)


def load(path):
    if not os.path.isfile(path):
        raise InputError("precoder file not found: %s" % path)
    if str(path).lower().endswith(".json"):
        with open(path, "rb") as f:
            kind, epsilon, n_max, iters, seqs = formats.decode_precoder_json(f.read(), path)
    else:
        with open(path, "rb") as f:
            kind, epsilon, n_max, iters, seqs = formats.decode_precoder(f.read(), path)
    sequences = [[ComplexSequence(start, taps) for start, taps in row] for row in seqs]
    return PrecoderSet(sequences, kind, iters, epsilon, n_max)


def trace_rows(precoders):
    for i0, grid in enumerate(precoders.residuals):
        if grid is None:
            continue
        for e in grid.trace:
            yield {"target": i0, "n": e.n, "i_hat": e.user, "tau_hat": e.lag,
                   "re": e.value.real, "im": e.value.imag, "max_abs_delta_after": e.max_abs_after}


def write_trace_csv(precoders, path, comments=()):
    utils.write_csv(path, TRACE_COLUMNS, list(trace_rows(precoders)), comments)
