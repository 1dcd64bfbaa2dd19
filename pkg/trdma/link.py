"""
Link-level evaluation: equivalent channels, SIR/SINR, symbol transmission and BER.

w[i][j] is the composite response at user i of the precoder aimed at user j,
through the un-normalized channel. The designed focusing tap is L-1.
"""
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.stats import norm

from . import utils
from .errors import ConfigError, DimensionMismatchError
from .signals import ComplexSequence, convolve, energy, sum_sequences, upsample

log = logging.getLogger("link")

SPANS = ("full", "one_sided")

CONSTELLATIONS = {
    "BPSK": np.array([1.0 + 0j, -1.0 + 0j]),
    #Gray mapped: bit pair (b0, b1) -> ((1 - 2 b0) + 1j (1 - 2 b1)) / sqrt(2)
    "QPSK": np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / math.sqrt(2.0),
}
BITS_PER_SYMBOL = {"BPSK": 1, "QPSK": 2}

REPORT_COLUMNS = ("scenario_id", "user", "sir_db", "sinr_db", "sigma", "ber",
                  "iterations", "displacement_m", "speed_mps")


@dataclass(frozen=True, eq=False)
class EquivalentChannelSet:
    w: Tuple[Tuple[ComplexSequence, ...], ...]
    peak_index: int
    n_taps: int

    @property
    def n_users(self):
        return len(self.w)


def equivalent_channel(cirset, precoders):
    """w[i][j] = sum_m h_{i,m} * s_{j,m}, exact linear superposition."""
    if (cirset.n_users, cirset.n_antennas) != (precoders.n_users, precoders.n_antennas):
        raise DimensionMismatchError("channel is %d users x %d antennas, precoders are %d x %d"
                                     % (cirset.n_users, cirset.n_antennas, precoders.n_users, precoders.n_antennas))
    n, m = cirset.n_users, cirset.n_antennas
    w = tuple(tuple(sum_sequences(convolve(cirset.cir(i, a), precoders.sequences[j][a]) for a in range(m))
                    for j in range(n)) for i in range(n))
    return EquivalentChannelSet(w, cirset.n_taps - 1, cirset.n_taps)


def _lobe_energy(seq, lo, hi, skip=None):
    """Energy of seq over absolute indices [lo, hi), optionally leaving one index out."""
    vals = seq.values(lo, hi)
    if skip is not None and lo <= skip < hi:
        vals[skip - lo] = 0.0
    return float(np.vdot(vals, vals).real)


def interference(eq, i, span="full"):
    """
    ISI + IUI power at user i.
    full: every sample of w[i][i] except the peak, plus all of w[i][j], j != i.
    one_sided: the literal sum of the source, ISI over the L-1 taps after the peak
    and IUI over the L taps starting at the peak.
    """
    if span not in SPANS:
        raise ConfigError("unknown interference span %r, expected one of %s" % (span, SPANS))
    p = eq.peak_index
    own = eq.w[i][i]
    if span == "full":
        lo, hi = min(own.start, p), max(own.end, p + 1)
        isi = _lobe_energy(own, lo, hi, skip=p)
        iui = sum(energy(eq.w[i][j]) for j in range(eq.n_users) if j != i)
    else:
        l = eq.n_taps
        isi = _lobe_energy(own, p + 1, p + l)
        iui = sum(_lobe_energy(eq.w[i][j], p, p + l) for j in range(eq.n_users) if j != i)
    return isi + iui


def sinr(eq, i, sigma, span="full"):
    """|w_ii[peak]|^2 / (I_i + sigma^2) as a linear ratio. sigma = 0 gives the SIR."""
    if sigma < 0:
        raise ConfigError("noise sigma must be >= 0, got %r" % sigma)
    num = abs(eq.w[i][i][eq.peak_index]) ** 2
    den = interference(eq, i, span) + sigma * sigma
    if den == 0:
        return math.inf if num > 0 else math.nan
    return num / den


def sir(eq, i, span="full"):
    return sinr(eq, i, 0.0, span)


def snr_to_sigma(eq_reference, i, snr_db):
    """
    Operating SNR is |w_ii[peak]|^2 / sigma^2 of the reference (conventional TR)
    precoder on the same channel; every precoder of a scenario then shares this sigma.
    """
    peak = abs(eq_reference.w[i][i][eq_reference.peak_index])
    return peak / math.sqrt(utils.from_db(snr_db))


def _check_constellation(constellation):
    name = str(constellation).upper()
    if name not in CONSTELLATIONS:
        raise ConfigError("unknown constellation %r, expected one of %s" % (constellation, sorted(CONSTELLATIONS)))
    return name


def random_symbols(constellation, n_symbols, rng):
    """Uniform random constellation points."""
    points = CONSTELLATIONS[_check_constellation(constellation)]
    return points[rng.integers(0, points.size, size=n_symbols)]


def _bits(constellation, symbols):
    symbols = np.asarray(symbols)
    if constellation == "BPSK":
        return (symbols.real < 0)[:, None]
    return np.stack([symbols.real < 0, symbols.imag < 0], axis=1)


def simulate_transmission(eq, symbols, sigma, seed, symbol_spacing=1):
    """
    y_i[k] = sum_j sum_l x_j[l] w_{i,j}[k - l*spacing] + n_i[k]
    with circular complex Gaussian noise of standard deviation sigma per sample.
    """
    if len(symbols) != eq.n_users:
        raise DimensionMismatchError("%d symbol streams for %d users" % (len(symbols), eq.n_users))
    if sigma < 0:
        raise ConfigError("noise sigma must be >= 0, got %r" % sigma)
    if int(symbol_spacing) < 1:
        raise ConfigError("symbol spacing must be >= 1, got %r" % symbol_spacing)
    rng = np.random.default_rng(seed)
    streams = [upsample(x, int(symbol_spacing)) for x in symbols]
    out = []
    for i in range(eq.n_users):
        y = sum_sequences(convolve(streams[j], eq.w[i][j]) for j in range(eq.n_users))
        if sigma > 0 and not y.is_empty:
            noise = rng.standard_normal(len(y)) + 1j * rng.standard_normal(len(y))
            y = ComplexSequence(y.start, y.taps + sigma / math.sqrt(2.0) * noise)
        out.append(y)
    return out


def demodulate_ber(received, reference, constellation, peak_index, symbol_spacing=1):
    """
    Samples every stream at peak_index + l*spacing, slices to the nearest
    constellation point (sign decisions for BPSK and Gray QPSK) and counts bit errors.
    """
    name = _check_constellation(constellation)
    if len(received) != len(reference):
        raise DimensionMismatchError("%d received streams for %d references" % (len(received), len(reference)))
    errors, total = 0, 0
    for y, x in zip(received, reference):
        x = np.asarray(x, dtype=np.complex128)
        if x.size == 0:
            continue
        k = peak_index + symbol_spacing * np.arange(x.size)
        samples = y.values(peak_index, int(k[-1]) + 1)[k - peak_index]
        errors += int(np.count_nonzero(_bits(name, samples) != _bits(name, x)))
        total += x.size * BITS_PER_SYMBOL[name]
    return errors / total if total else 0.0


def theoretical_ber(constellation, es_n0_db):
    """AWGN bit error rate: BPSK Q(sqrt(2 Es/N0)), Gray QPSK Q(sqrt(Es/N0))."""
    name = _check_constellation(constellation)
    es_n0 = utils.from_db(es_n0_db)
    if name == "BPSK":
        return norm.sf(np.sqrt(2.0 * es_n0))
    return norm.sf(np.sqrt(es_n0))


@dataclass
class LinkReport:
    scenario_id: str
    sir_db: List[float]
    sinr_db: List[float]
    sigma: float
    n_symbols: int = 0
    ber: Optional[List[float]] = None
    iterations: Optional[List[int]] = None
    displacement_m: float = 0.0
    speed_mps: float = 0.0
    config: dict = field(default_factory=dict)

    def rows(self):
        for i in range(len(self.sir_db)):
            yield {
                "scenario_id": self.scenario_id, "user": i,
                "sir_db": self.sir_db[i], "sinr_db": self.sinr_db[i], "sigma": float(self.sigma),
                "ber": None if self.ber is None else float(self.ber[i]),
                "iterations": None if self.iterations is None else self.iterations[i],
                "displacement_m": float(self.displacement_m), "speed_mps": float(self.speed_mps),
            }

    def to_json(self):
        return utils.dumps(asdict(self), sort_keys=True, indent=2)

    def write_csv(self, path, comments=()):
        utils.write_csv(path, REPORT_COLUMNS, list(self.rows()), comments)

    def write_json(self, path):
        utils.atomic_write(path, self.to_json())


def evaluate_link(cirset, precoders, sigma=0.0, scenario_id="eval", constellation=None, n_symbols=0,
                  seed=0, symbol_spacing=1, span="full"):
    """SIR and SINR for every user, plus BER when a constellation and symbol count are given."""
    eq = equivalent_channel(cirset, precoders)
    sirs = [float(utils.to_db(sir(eq, i, span))) for i in range(eq.n_users)]
    sinrs = [float(utils.to_db(sinr(eq, i, sigma, span))) for i in range(eq.n_users)]
    ber = None
    if constellation and n_symbols > 0:
        rng = np.random.default_rng(seed)
        symbols = [random_symbols(constellation, n_symbols, rng) for _ in range(eq.n_users)]
        received = simulate_transmission(eq, symbols, sigma, seed + 1, symbol_spacing)
        ber = [demodulate_ber([received[i]], [symbols[i]], constellation, eq.peak_index, symbol_spacing)
               for i in range(eq.n_users)]
    log.info("Scenario %s: SIR %s dB, SINR %s dB", scenario_id,
             ", ".join("%.2f" % v for v in sirs), ", ".join("%.2f" % v for v in sinrs))
    return LinkReport(scenario_id, sirs, sinrs, float(sigma), int(n_symbols) if ber is not None else 0, ber,
                      list(precoders.iterations_used))
