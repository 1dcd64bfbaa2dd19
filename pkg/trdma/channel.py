"""
Banks of channel impulse responses: synthetic generation, per-user normalization,
receiver displacement and persistence.

The synthetic generator stands in for a reverberating room: every tap is an
independent circular complex Gaussian whose power decays exponentially with delay.
"""
import logging
import math
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import constants
from scipy.optimize import brentq

from . import formats, utils
from .errors import ConfigError, DimensionMismatchError, InputError, NumericError
from .signals import ComplexSequence

log = logging.getLogger("channel")

"""
Desk-scale defaults. The decay constant of the power-delay profile is a free
parameter, 25% of the CIR length unless set.
"""
N_USERS = 2
N_ANTENNAS = 8
N_TAPS = 256
DECAY_FRACTION = 0.25
BANDWIDTH_HZ = 100e6
CARRIER_HZ = 2e9

#sinc(x) = 1/2 in numpy's normalized sinc units, i.e. sin(pi x)/(pi x) = 1/2
_HALF_SINC_ROOT = brentq(lambda x: np.sinc(x) - 0.5, 0.1, 1.0, xtol=1e-15)


@dataclass(frozen=True)
class ChannelSpec:
    n_users: int = N_USERS
    n_antennas: int = N_ANTENNAS
    n_taps: int = N_TAPS
    decay_taps: Optional[float] = None
    seed: int = 1
    bandwidth_hz: float = BANDWIDTH_HZ
    carrier_hz: float = CARRIER_HZ

    def __post_init__(self):
        for name in ("n_users", "n_antennas", "n_taps"):
            if int(getattr(self, name)) < 1:
                raise ConfigError("%s must be >= 1, got %r" % (name, getattr(self, name)))
        if self.decay_taps is not None and not self.decay_taps > 0:
            raise ConfigError("decay_taps must be > 0, got %r" % self.decay_taps)
        if not self.bandwidth_hz > 0 or not self.carrier_hz > 0:
            raise ConfigError("bandwidth and carrier frequency must be positive")

    @property
    def effective_decay(self):
        return DECAY_FRACTION * self.n_taps if self.decay_taps is None else float(self.decay_taps)

    @property
    def tap_interval(self):
        return 1.0 / self.bandwidth_hz

    @property
    def carrier_wavelength(self):
        return constants.c / self.carrier_hz

    def power_profile(self):
        """Expected tap power P[k] = exp(-k / decay_taps); an infinite decay gives a flat profile."""
        k = np.arange(self.n_taps, dtype=np.float64)
        return np.exp(-k / self.effective_decay)


@dataclass(frozen=True, eq=False)
class CirSet:
    """
    taps[i, m, k] = h_{i,m}[k], all sequences start at 0 with exactly L taps.
    power_profile is the per-tap variance for synthetic banks, None for loaded ones.
    """
    taps: np.ndarray
    tap_interval: float
    carrier_wavelength: float
    power_profile: Optional[np.ndarray] = None

    def __post_init__(self):
        taps = np.array(self.taps, dtype=np.complex128)
        if taps.ndim != 3 or min(taps.shape) < 1:
            raise DimensionMismatchError("CIR bank must be N x M x L with all sizes >= 1, got shape %s"
                                         % (taps.shape,))
        taps.setflags(write=False)
        object.__setattr__(self, "taps", taps)
        if self.power_profile is not None:
            profile = np.array(self.power_profile, dtype=np.float64)
            if profile.shape != (taps.shape[2],):
                raise DimensionMismatchError("power profile has %d taps, bank has %d"
                                             % (profile.size, taps.shape[2]))
            profile.setflags(write=False)
            object.__setattr__(self, "power_profile", profile)

    @property
    def n_users(self):
        return self.taps.shape[0]

    @property
    def n_antennas(self):
        return self.taps.shape[1]

    @property
    def n_taps(self):
        return self.taps.shape[2]

    def cir(self, i, m):
        return ComplexSequence(0, self.taps[i, m])

    @property
    def cirs(self):
        return tuple(tuple(self.cir(i, m) for m in range(self.n_antennas)) for i in range(self.n_users))

    def user_energy(self, i):
        """Total energy of user i's bank, summed over antennas and taps."""
        return float(np.sum(np.abs(self.taps[i]) ** 2))

    def __eq__(self, other):
        if not isinstance(other, CirSet):
            return NotImplemented
        return (self.taps.shape == other.taps.shape and np.array_equal(self.taps, other.taps)
                and self.tap_interval == other.tap_interval
                and self.carrier_wavelength == other.carrier_wavelength)

    __hash__ = None


def generate_synthetic(spec):
    """
    Each tap is drawn independently as circular complex Gaussian with variance P[k].
    The draw only depends on spec (seed included): real parts first, then imaginary.
    """
    shape = (spec.n_users, spec.n_antennas, spec.n_taps)
    profile = spec.power_profile()
    rng = np.random.default_rng(spec.seed)
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    taps = np.sqrt(profile / 2.0) * (re + 1j * im)
    log.debug("Generated %d x %d x %d CIR bank, seed %d, decay %.1f taps",
              spec.n_users, spec.n_antennas, spec.n_taps, spec.seed, spec.effective_decay)
    return CirSet(taps, spec.tap_interval, spec.carrier_wavelength, profile)


def user_root_energy(cirset, i):
    e = cirset.user_energy(i)
    if not e > 0:
        raise NumericError("user %d has an all-zero CIR bank" % i)
    return math.sqrt(e)


def normalized_taps(cirset, i):
    """h~_{i,m}[k] as an M x L array: the bank divided by its root total energy."""
    return cirset.taps[i] / user_root_energy(cirset, i)


def normalize_user(cirset, i):
    taps = normalized_taps(cirset, i)
    return tuple(ComplexSequence(0, row) for row in taps)


def _check_distance(d, wavelength, multiplier):
    if d < 0:
        raise ConfigError("displacement must be >= 0, got %r" % d)
    if not wavelength > 0:
        raise ConfigError("wavelength must be > 0, got %r" % wavelength)
    if not multiplier > 0:
        raise ConfigError("coherence multiplier must be > 0, got %r" % multiplier)


def spatial_correlation(d, wavelength, multiplier=1.0):
    """
    Diffuse-field correlation sin(2 pi d / lambda) / (2 pi d / lambda).
    multiplier stretches the coherence length, e.g. for a receiver outside the cavity.
    """
    _check_distance(d, wavelength, multiplier)
    return float(np.sinc(2.0 * d / (wavelength * multiplier)))


def coherence_half_distance(wavelength, multiplier=1.0):
    """Smallest displacement at which the diffuse-field correlation falls to 1/2."""
    _check_distance(0.0, wavelength, multiplier)
    return _HALF_SINC_ROOT * wavelength * multiplier / 2.0


def displaced(cirset, d, seed, users=None, coherence_multiplier=1.0):
    """
    The bank seen after the receiver moved by d meters:
        h_d = rho(d) * h_0 + sqrt(1 - rho(d)^2) * g
    with g an independent draw from the same per-tap distribution. One rho mixes
    every antenna of a moved user; g is independent per (user, antenna, tap).
    users restricts the move to some receivers; the others keep their CIRs.
    """
    if cirset.power_profile is None:
        raise ConfigError("displacement needs the per-tap variance profile of a synthetic bank; "
                          "replay measured positions as separate CIR files instead")
    rho = spatial_correlation(d, cirset.carrier_wavelength, coherence_multiplier)
    if d == 0:
        return cirset
    rng = np.random.default_rng(seed)
    shape = cirset.taps.shape
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    g = np.sqrt(cirset.power_profile / 2.0) * (re + 1j * im)
    sel = list(range(cirset.n_users)) if users is None else list(users)
    for i in sel:
        if not 0 <= i < cirset.n_users:
            raise DimensionMismatchError("user %d not in bank of %d users" % (i, cirset.n_users))
    taps = np.array(cirset.taps)
    taps[sel] = rho * cirset.taps[sel] + math.sqrt(max(0.0, 1.0 - rho * rho)) * g[sel]
    return CirSet(taps, cirset.tap_interval, cirset.carrier_wavelength, cirset.power_profile)


def _is_json(path):
    return str(path).lower().endswith(".json")


def store(cirset, path):
    if _is_json(path):
        data = formats.encode_cir_json(cirset.taps, cirset.tap_interval, cirset.carrier_wavelength)
    else:
        data = formats.encode_cir(cirset.taps, cirset.tap_interval, cirset.carrier_wavelength)
    utils.atomic_write(path, data)
    log.info("Stored %d x %d x %d CIR bank to %s", cirset.n_users, cirset.n_antennas, cirset.n_taps, path)


def load(path):
    if not os.path.isfile(path):
        raise InputError("CIR file not found: %s" % path)
    if _is_json(path):
        with open(path, "rb") as f:
            taps, tap_interval, wavelength = formats.decode_cir_json(f.read(), path)
    else:
        with open(path, "rb") as f:
            taps, tap_interval, wavelength = formats.decode_cir(f.read(), path)
    return CirSet(taps, tap_interval, wavelength)
