"""
Run configuration: an INI file with one section per module.

Every key has a documented default below; `--print-defaults` dumps this table
as a valid config file. Values are parsed once into typed Python values, and the
typed form is what gets hashed and echoed next to every output.
"""
import configparser
import logging
import os

import numpy as np

from . import utils
from .channel import ChannelSpec
from .errors import ConfigError, InputError

log = logging.getLogger("config")


def _int(s):
    return int(s)


def _float(s):
    return float(s)


def _opt_float(s):
    return None if s.strip() == "" else float(s)


def _str(s):
    return s.strip()


def _int_list(s):
    """'1-30', '1,2,5' or a mix like '1-3,7'."""
    out = []
    for part in s.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            a, b = part.split("-", 1)
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(int(part))
    return out


def _float_list(s):
    """Comma list; an item 'start:stop:step' expands to a closed grid."""
    out = []
    for part in s.split(","):
        part = part.strip()
        if not part:
            continue
        if ":" in part:
            a, b, step = (float(x) for x in part.split(":"))
            if not step > 0:
                raise ValueError("grid step must be > 0")
            count = int(np.floor((b - a) / step + 1e-9)) + 1
            out.extend(float(v) for v in np.round(a + step * np.arange(count), 12))
        else:
            out.append(float(part))
    return out


def _kind_list(s):
    """'tr,itrdma:20,itrdma:50' -> [('TR', 0), ('ITRDMA', 20), ('ITRDMA', 50)]"""
    out = []
    for part in s.split(","):
        part = part.strip().upper()
        if not part:
            continue
        kind, _, n = part.partition(":")
        if kind not in ("TR", "ITRDMA"):
            raise ValueError("unknown precoder kind %r" % kind)
        out.append((kind, 0 if kind == "TR" else int(n or 50)))
    return out


def _choice(*options):
    def parse(s):
        v = s.strip().lower()
        if v not in options:
            raise ValueError("expected one of %s" % ", ".join(options))
        return v
    return parse


"""
section -> key -> (default text, parser, help)
"""
SCHEMA = {
    "channel": {
        "n_users": ("2", _int, "number of single-antenna users N"),
        "n_antennas": ("8", _int, "transmit antennas M"),
        "n_taps": ("256", _int, "CIR length L in taps"),
        "decay_taps": ("", _opt_float, "power-delay-profile decay in taps; blank = 25% of L, inf = flat"),
        "seed": ("1", _int, "seed of the single channel used by gen-channel"),
        "bandwidth_hz": ("100e6", _float, "bandwidth B, tap interval is 1/B"),
        "carrier_hz": ("2e9", _float, "carrier frequency, wavelength is c/f"),
        "coherence_multiplier": ("1.0", _float, "stretch factor of the spatial coherence length"),
    },
    "precoder": {
        "kind": ("itrdma", _choice("tr", "itrdma"), "tr or itrdma"),
        "epsilon": ("1e-3", _float, "stop when max |residual| <= epsilon"),
        "n_max": ("50", _int, "maximum number of cancellations per user"),
    },
    "link": {
        "sigma": ("0.0", _float, "noise standard deviation per complex sample"),
        "snr_db": ("", _opt_float, "operating SNR w.r.t. the TR peak; overrides sigma when set"),
        "constellation": ("bpsk", _choice("bpsk", "qpsk"), "bpsk or qpsk"),
        "n_symbols": ("1000", _int, "symbols per user for BER; 0 skips BER"),
        "symbol_spacing": ("1", _int, "taps between symbols"),
        "interference_span": ("full", _choice("full", "one_sided"), "full or one_sided"),
        "seed": ("7", _int, "seed of symbols and noise"),
    },
    "experiments": {
        "seeds": ("1-30", _int_list, "ensemble channel seeds, e.g. 1-30 or 1,4,9"),
        "iterations": ("0,10,20,50,100,200,400", _int_list, "iteration counts of the SIR sweep"),
        "kinds": ("tr,itrdma:20,itrdma:50", _kind_list, "precoders compared under mobility"),
        "snr_db": ("30", _float, "operating SNR of the displacement sweep"),
        "speed_snr_db": ("2,10", _float_list, "operating SNRs of the speed sweep"),
        "displacements_m": ("0:0.3:0.005", _float_list, "displacement grid in meters"),
        "tau_s": ("1e-3", _float, "time between channel estimation and transmission"),
        "speeds_mps": ("0,1,2,5,10,15,20,30,45,60,90,120,150", _float_list, "speed grid in m/s"),
        "table1_d_half_m": ("0.03", _float, "half-strength displacement used for the speed table"),
        "table1_tau_s": ("0.05,0.01,0.001", _float_list, "channel ages of the speed table"),
        "profile_iterations": ("50", _int, "ITRDMA iterations of the focusing profiles"),
        "target_user": ("0", _int, "the user focused on and moved"),
        "tensorboard_dir": ("", _str, "write sweep scalars for TensorBoard here; blank disables"),
    },
    "run": {
        "n_jobs": ("0", _int, "parallel workers; 0 = number of processors"),
        "output_dir": ("out", _str, "directory of every artifact"),
        "channel_file": ("channel.cir", _str, "CIR bank, relative to output_dir unless absolute"),
        "precoder_file": ("precoders.pre", _str, "precoder set, relative to output_dir unless absolute"),
    },
}


DEFAULTS = {s: {k: v[0] for k, v in keys.items()} for s, keys in SCHEMA.items()}


class Config:
    """Typed values, section -> key -> value."""

    def __init__(self, values):
        self.values = values

    def __getitem__(self, section):
        return self.values[section]

    def as_dict(self, include_run=False):
        """[run] only says where and how fast, so it stays out of the hash and the echo."""
        def plain(v):
            if isinstance(v, (list, tuple)):
                return [plain(x) for x in v]
            return v
        return {s: {k: plain(v) for k, v in sorted(keys.items())} for s, keys in sorted(self.values.items())
                if include_run or s != "run"}

    def hash(self):
        return utils.config_hash(self.as_dict())

    @property
    def n_jobs(self):
        n = self.values["run"]["n_jobs"]
        return (os.cpu_count() or 1) if n <= 0 else n

    def path(self, key):
        p = self.values["run"][key]
        return p if os.path.isabs(p) else os.path.join(self.values["run"]["output_dir"], p)

    def channel_spec(self, seed=None):
        c = self.values["channel"]
        return ChannelSpec(n_users=c["n_users"], n_antennas=c["n_antennas"], n_taps=c["n_taps"],
                           decay_taps=c["decay_taps"], seed=c["seed"] if seed is None else seed,
                           bandwidth_hz=c["bandwidth_hz"], carrier_hz=c["carrier_hz"])


def defaults_ini():
    lines = []
    for section, keys in SCHEMA.items():
        lines.append("[%s]" % section)
        for key, (default, _, help_text) in keys.items():
            lines.append("# %s" % help_text)
            lines.append("%s = %s" % (key, default))
        lines.append("")
    return "\n".join(lines)


def _parse(section, key, text):
    if section not in SCHEMA or key not in SCHEMA[section]:
        raise ConfigError("unknown config key %s.%s" % (section, key))
    try:
        return SCHEMA[section][key][1](text)
    except ValueError as e:
        raise ConfigError("bad value for %s.%s = %r: %s" % (section, key, text, e))


def load_config(path=None, overrides=(), seed=None):
    """
    Defaults, then the file, then `section.key=value` overrides, then the seed flag.
    Unknown sections or keys are errors rather than silently ignored.
    """
    parser = configparser.ConfigParser(interpolation=None)
    parser.read_dict(DEFAULTS)
    if path is not None:
        if not os.path.isfile(path):
            raise InputError("config file not found: %s" % path)
        file_parser = configparser.ConfigParser(interpolation=None)
        try:
            file_parser.read(path)
        except configparser.Error as e:
            raise ConfigError("cannot parse %s: %s" % (path, e))
        for section in file_parser.sections():
            for key, value in file_parser.items(section):
                _parse(section, key, value)
                parser.set(section, key, value)
    for item in overrides:
        name, sep, value = item.partition("=")
        section, dot, key = name.strip().partition(".")
        if not sep or not dot:
            raise ConfigError("override %r is not of the form section.key=value" % item)
        _parse(section, key, value)
        parser.set(section, key, value)
    values = {s: {k: _parse(s, k, parser.get(s, k)) for k in keys} for s, keys in SCHEMA.items()}
    if seed is not None:
        values["channel"]["seed"] = int(seed)
        seeds = values["experiments"]["seeds"]
        values["experiments"]["seeds"] = [int(seed)] + [s for s in seeds[1:] if s != int(seed)]
    cfg = Config(values)
    log.debug("Config from %s with %d override(s), hash %s", path or "defaults", len(overrides), cfg.hash())
    return cfg


def experiment_config(cfg, output_dir=None):
    """ExperimentConfig for the sweeps, hashed exactly like the config it came from."""
    from .experiments import ExperimentConfig
    e = cfg["experiments"]
    p = cfg["precoder"]
    return ExperimentConfig(
        channel=cfg.channel_spec(),
        seeds=e["seeds"],
        iterations=e["iterations"],
        epsilon=p["epsilon"],
        kinds=e["kinds"],
        snr_db=e["snr_db"],
        speed_snr_db=e["speed_snr_db"],
        displacements=e["displacements_m"],
        tau=e["tau_s"],
        speeds=e["speeds_mps"],
        table1_d_half=e["table1_d_half_m"],
        table1_tau=e["table1_tau_s"],
        profile_iterations=e["profile_iterations"],
        target_user=e["target_user"],
        coherence_multiplier=cfg["channel"]["coherence_multiplier"],
        span=cfg["link"]["interference_span"],
        n_jobs=cfg.n_jobs,
        output_dir=cfg["run"]["output_dir"] if output_dir is None else output_dir,
        tensorboard_dir=e["tensorboard_dir"],
        config_doc=cfg.as_dict(),
    )
