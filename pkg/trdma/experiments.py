"""
Ensemble sweeps over synthetic channels, one CSV per figure or table:

    fig2_profiles.csv        received amplitude vs time, TR and ITRDMA, target and other users
    fig3_sir_vs_iter.csv     SIR vs number of iterations
    fig4_focusing_map.csv    target amplitude vs time and receiver displacement
    fig5_sinr_vs_disp.csv    SINR vs displacement between estimation and transmission
    fig6_sinr_vs_speed.csv   SINR vs receiver speed for a fixed channel age
    table1_speed.csv         speed at which the focused signal drops to half strength

Every ensemble member is one channel seed. Members are independent jobs run
through joblib, which hands results back in submission order, so the files do
not depend on the number of workers.
"""
import dataclasses
import logging
import os
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from joblib import Parallel, delayed
from tensorboardX import SummaryWriter

from . import link, precoder, utils
from .channel import ChannelSpec, coherence_half_distance, displaced, generate_synthetic
from .errors import ConfigError

log = logging.getLogger("experiments")

FIG2 = "fig2_profiles"
FIG2_SUMMARY = "fig2_profile_summary"
FIG3 = "fig3_sir_vs_iter"
FIG3_SEEDS = "fig3_sir_vs_iter_per_seed"
FIG4 = "fig4_focusing_map"
FIG5 = "fig5_sinr_vs_disp"
FIG6 = "fig6_sinr_vs_speed"
TABLE1 = "table1_speed"

KMH_PER_MPS = 3.6
#Iteration range where the SIR growth law is fitted.
GROWTH_RANGE = (50, 400)
#Stream id mixed into a member seed for the displacement innovation.
MOBILITY_STREAM = 1

DEFAULT_DISPLACEMENTS = tuple(float(v) for v in np.round(np.arange(61) * 0.005, 12))
DEFAULT_SPEEDS = (0.0, 1.0, 2.0, 5.0, 10.0, 15.0, 20.0, 30.0, 45.0, 60.0, 90.0, 120.0, 150.0)


@dataclass(frozen=True)
class ExperimentConfig:
    channel: ChannelSpec = ChannelSpec()
    seeds: Tuple[int, ...] = tuple(range(1, 31))
    iterations: Tuple[int, ...] = (0, 10, 20, 50, 100, 200, 400)
    epsilon: float = precoder.EPSILON
    kinds: Tuple[Tuple[str, int], ...] = ((precoder.KIND_TR, 0), (precoder.KIND_ITRDMA, 20),
                                          (precoder.KIND_ITRDMA, 50))
    snr_db: float = 30.0
    speed_snr_db: Tuple[float, ...] = (2.0, 10.0)
    displacements: Tuple[float, ...] = DEFAULT_DISPLACEMENTS
    tau: float = 1e-3
    speeds: Tuple[float, ...] = DEFAULT_SPEEDS
    table1_d_half: float = 0.03
    table1_tau: Tuple[float, ...] = (0.05, 0.01, 0.001)
    profile_iterations: int = precoder.N_MAX
    target_user: int = 0
    coherence_multiplier: float = 1.0
    span: str = "full"
    n_jobs: int = 1
    output_dir: str = "out"
    tensorboard_dir: str = ""
    #Typed config the run was built from; hashed instead of the fields when present.
    config_doc: Optional[dict] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        for name in ("seeds", "iterations", "speed_snr_db", "displacements", "speeds", "table1_tau"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        object.__setattr__(self, "kinds", tuple((k.upper(), int(n)) for k, n in self.kinds))
        for name in ("seeds", "iterations", "kinds", "displacements", "speeds"):
            if not getattr(self, name):
                raise ConfigError("experiment grid %s is empty" % name)
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("ensemble seeds must be distinct")
        if not self.tau > 0:
            raise ConfigError("tau must be > 0, got %r" % self.tau)
        if min(self.displacements) < 0 or min(self.speeds) < 0:
            raise ConfigError("displacements and speeds must be >= 0")
        if min(self.iterations) < 0 or self.profile_iterations < 0:
            raise ConfigError("iteration counts must be >= 0")
        if not 0 <= self.target_user < self.channel.n_users:
            raise ConfigError("target user %d not among %d users" % (self.target_user, self.channel.n_users))
        if self.span not in link.SPANS:
            raise ConfigError("unknown interference span %r" % self.span)

    def as_doc(self):
        if self.config_doc is not None:
            return self.config_doc
        doc = dataclasses.asdict(self)
        for key in ("n_jobs", "output_dir", "tensorboard_dir", "config_doc"):
            doc.pop(key)
        return doc

    def hash(self):
        return utils.config_hash(self.as_doc())


@dataclass
class SweepResult:
    name: str
    columns: Tuple[str, ...]
    rows: List[dict]
    comments: List[str] = field(default_factory=list)

    def column(self, name, **where):
        """Values of one column over the rows matching every key=value filter."""
        return [r[name] for r in self.rows if all(r[k] == v for k, v in where.items())]


@dataclass(frozen=True)
class HalfStrengthEstimate:
    reached: bool
    distance_m: Optional[float] = None

    def __str__(self):
        return "%.6f" % self.distance_m if self.reached else "not reached"


def kind_label(kind, n):
    return kind if kind == precoder.KIND_TR else "%s(%d)" % (kind, n)


def _member_spec(config, seed):
    return dataclasses.replace(config.channel, seed=int(seed))


def _mobility_seed(seed):
    return int(np.random.SeedSequence([int(seed), MOBILITY_STREAM]).generate_state(1)[0])


def _itrdma_sets(cirset, checkpoints, epsilon, corr=None):
    """{n: PrecoderSet} for every requested iteration count, one greedy run per user."""
    corr = precoder.correlation_array(cirset) if corr is None else corr
    per_user = [precoder.itrdma_checkpoints(cirset, i0, checkpoints, epsilon, corr)
                for i0 in range(cirset.n_users)]
    out = {}
    for n in checkpoints:
        seqs = [per_user[i0][n][0] for i0 in range(cirset.n_users)]
        used = [per_user[i0][n][1] for i0 in range(cirset.n_users)]
        out[n] = precoder.PrecoderSet(seqs, precoder.KIND_ITRDMA, used, epsilon, n)
    return out


def _kind_sets(cirset, kinds, epsilon):
    tr = precoder.build_precoders(cirset, precoder.KIND_TR)
    wanted = sorted(set(n for k, n in kinds if k == precoder.KIND_ITRDMA))
    itr = _itrdma_sets(cirset, wanted, epsilon) if wanted else {}
    return tr, [tr if k == precoder.KIND_TR else itr[n] for k, n in kinds]


def _summary_writer(config, name):
    if not config.tensorboard_dir:
        return None
    return SummaryWriter(logdir=os.path.join(config.tensorboard_dir, name))


def _run(config, fn, *args):
    return Parallel(n_jobs=config.n_jobs)(delayed(fn)(config, seed, *args) for seed in config.seeds)


def write_results(results, config, output_dir=None):
    """Each result becomes <name>.csv (comment header with the config hash) plus <name>.json config echo."""
    output_dir = config.output_dir if output_dir is None else output_dir
    h = config.hash()
    paths = []
    for r in results:
        path = os.path.join(output_dir, r.name + ".csv")
        comments = ["config_hash=%s" % h, "averaging=%s" % utils.AVERAGING_NOTE] + list(r.comments)
        utils.write_csv(path, r.columns, r.rows, comments)
        utils.atomic_write(os.path.join(output_dir, r.name + ".json"),
                           utils.canonical_json({"output": r.name, "config": config.as_doc(), "config_hash": h}))
        log.info("Wrote %s (%d rows)", path, len(r.rows))
        paths.append(path)
    return paths


"""
Focusing profiles: amplitude of the field produced by the target's precoder at
every user, for TR and for ITRDMA.
"""
def profile_rows(cirset, target, iterations, epsilon, seed=None):
    tr = precoder.build_precoders(cirset, precoder.KIND_TR)
    itr = _itrdma_sets(cirset, [iterations], epsilon)[iterations]
    rows = []
    for kind, n, pset in ((precoder.KIND_TR, 0, tr), (precoder.KIND_ITRDMA, iterations, itr)):
        eq = link.equivalent_channel(cirset, pset)
        for j in range(cirset.n_users):
            w = eq.w[j][target]
            for k in range(w.start, w.end):
                rows.append({"seed": seed, "kind": kind_label(kind, n), "receiver": j,
                             "role": "target" if j == target else "other",
                             "lag": k - eq.peak_index, "time_s": (k - eq.peak_index) * cirset.tap_interval,
                             "amplitude": abs(w[k])})
    return rows


def profile_summary(cirset, target, iterations, epsilon):
    """Per precoder kind: peak amplitude, largest side lobe at the target, largest lobe at the others."""
    tr = precoder.build_precoders(cirset, precoder.KIND_TR)
    itr = _itrdma_sets(cirset, [iterations], epsilon)[iterations]
    out = {}
    for kind, n, pset in ((precoder.KIND_TR, 0, tr), (precoder.KIND_ITRDMA, iterations, itr)):
        eq = link.equivalent_channel(cirset, pset)
        own = eq.w[target][target]
        amp = np.abs(own.taps)
        p = eq.peak_index - own.start
        side = np.delete(amp, p) if 0 <= p < amp.size else amp
        others = [float(np.max(np.abs(eq.w[j][target].taps))) for j in range(cirset.n_users) if j != target]
        out[kind_label(kind, n)] = {
            "peak_amplitude": float(abs(own[eq.peak_index])),
            "max_side_lobe": float(np.max(side)) if side.size else 0.0,
            "max_other_user": max(others) if others else 0.0,
        }
    return out


def _profile_member(config, seed):
    cirset = generate_synthetic(_member_spec(config, seed))
    return profile_summary(cirset, config.target_user, config.profile_iterations, config.epsilon)


def focusing_profile(config):
    if config.channel.n_users < 2:
        raise ConfigError("focusing profiles need at least 2 users")
    first = generate_synthetic(_member_spec(config, config.seeds[0]))
    profiles = SweepResult(FIG2, ("seed", "kind", "receiver", "role", "lag", "time_s", "amplitude"),
                           profile_rows(first, config.target_user, config.profile_iterations,
                                        config.epsilon, config.seeds[0]),
                           ["profiles of the first ensemble seed; lag relative to the focusing tap"])
    summaries = _run(config, _profile_member)
    rows = []
    for seed, summary in zip(config.seeds, summaries):
        for kind, vals in summary.items():
            rows.append(dict(seed=seed, kind=kind, **vals))
    summary = SweepResult(FIG2_SUMMARY, ("seed", "kind", "peak_amplitude", "max_side_lobe", "max_other_user"),
                          rows)
    return profiles, summary


def focusing_map(config):
    """Amplitude at the target versus lag and displacement, ITRDMA precoder computed at d = 0."""
    seed = config.seeds[0]
    cir0 = generate_synthetic(_member_spec(config, seed))
    n = config.profile_iterations
    pset = _itrdma_sets(cir0, [n], config.epsilon)[n]
    t = config.target_user
    l = cir0.n_taps
    rows = []
    for d in config.displacements:
        cir_d = displaced(cir0, d, _mobility_seed(seed), users=[t], coherence_multiplier=config.coherence_multiplier)
        eq = link.equivalent_channel(cir_d, pset)
        w = eq.w[t][t]
        for k in range(-(l - 1), 3 * (l - 1) + 1):
            rows.append({"displacement_m": d, "kind": kind_label(precoder.KIND_ITRDMA, n),
                         "lag": k - eq.peak_index, "time_s": (k - eq.peak_index) * cir0.tap_interval,
                         "amplitude": abs(w[k])})
    return SweepResult(FIG4, ("displacement_m", "kind", "lag", "time_s", "amplitude"), rows,
                       ["seed %d, target user %d" % (seed, t)])


def fit_growth_exponent(iterations, sir_linear, lo=GROWTH_RANGE[0], hi=GROWTH_RANGE[1]):
    """Slope of log SIR against log n over lo <= n <= hi; None with fewer than 2 points."""
    n = np.asarray(iterations, dtype=np.float64)
    s = np.asarray(sir_linear, dtype=np.float64)
    keep = (n >= lo) & (n <= hi) & (n > 0)
    if np.count_nonzero(keep) < 2:
        return None
    return float(np.polyfit(np.log(n[keep]), np.log(s[keep]), 1)[0])


def _iteration_member(config, seed):
    cirset = generate_synthetic(_member_spec(config, seed))
    sets = _itrdma_sets(cirset, config.iterations, config.epsilon)
    out = np.zeros((len(config.iterations), cirset.n_users))
    for a, n in enumerate(config.iterations):
        eq = link.equivalent_channel(cirset, sets[n])
        out[a] = [link.sir(eq, i, config.span) for i in range(cirset.n_users)]
    log.debug("seed %d: SIR %s dB", seed, np.round(utils.to_db(out.mean(axis=1)), 2))
    return out


def sweep_iterations(config):
    """
    SIR (sigma = 0) on the full equivalent channels versus the iteration count;
    n = 0 is conventional TR. Returns (ensemble summary, per-seed values).
    """
    if 0 not in config.iterations:
        raise ConfigError("the iteration list must include 0 (the TR baseline)")
    sirs = np.stack(_run(config, _iteration_member))
    rows, per_seed = [], []
    means = []
    for a, n in enumerate(config.iterations):
        vals = sirs[:, a, :].reshape(-1)
        means.append(float(np.mean(vals)))
        rows.append({"n": n, "mean_sir_db": utils.mean_db(vals), "std_db": float(np.std(utils.to_db(vals))),
                     "min_sir_db": float(np.min(utils.to_db(vals))), "max_sir_db": float(np.max(utils.to_db(vals))),
                     "samples": vals.size})
        for b, seed in enumerate(config.seeds):
            for i in range(sirs.shape[2]):
                per_seed.append({"n": n, "seed": seed, "user": i, "sir_db": float(utils.to_db(sirs[b, a, i]))})
    exponent = fit_growth_exponent(config.iterations, means)
    comments = ["sir over every (seed, user) pair, interference span %s" % config.span,
                "growth_exponent_%d_%d=%s" % (GROWTH_RANGE[0], GROWTH_RANGE[1],
                                              "n/a" if exponent is None else "%.4f" % exponent)]
    log.info("SIR sweep: %s", ", ".join("n=%d %.2f dB" % (r["n"], r["mean_sir_db"]) for r in rows))
    writer = _summary_writer(config, FIG3)
    if writer is not None:
        for r in rows:
            writer.add_scalar("sir_db/mean", r["mean_sir_db"], r["n"])
        writer.close()
    return (SweepResult(FIG3, ("n", "mean_sir_db", "std_db", "min_sir_db", "max_sir_db", "samples"), rows, comments),
            SweepResult(FIG3_SEEDS, ("n", "seed", "user", "sir_db"), per_seed))


def _mobility_member(config, seed, distances, snrs_db):
    """
    Precoders are computed on the channel at d = 0, then applied to the channel
    after the target receiver moved. The innovation draw is shared by every d of
    one seed, so each member traces a smooth decorrelation path.
    Returns (sinr[snr, kind, d] linear, peak amplitude[kind, d]).
    """
    cir0 = generate_synthetic(_member_spec(config, seed))
    t = config.target_user
    tr, sets = _kind_sets(cir0, config.kinds, config.epsilon)
    eq_ref = link.equivalent_channel(cir0, tr)
    sigmas = [link.snr_to_sigma(eq_ref, t, snr) for snr in snrs_db]
    sinrs = np.zeros((len(snrs_db), len(sets), len(distances)))
    amps = np.zeros((len(sets), len(distances)))
    mseed = _mobility_seed(seed)
    for c, d in enumerate(distances):
        cir_d = displaced(cir0, d, mseed, users=[t], coherence_multiplier=config.coherence_multiplier)
        for b, pset in enumerate(sets):
            eq = link.equivalent_channel(cir_d, pset)
            amps[b, c] = abs(eq.w[t][t][eq.peak_index])
            for a, sigma in enumerate(sigmas):
                sinrs[a, b, c] = link.sinr(eq, t, sigma, config.span)
    return sinrs, amps


def estimate_half_strength_distance(distances, amplitudes):
    """
    First displacement where the amplitude curve falls to half of its d = 0 value,
    linearly interpolated between grid points.
    """
    d = np.asarray(distances, dtype=np.float64)
    a = np.asarray(amplitudes, dtype=np.float64)
    if d.size == 0 or d.size != a.size:
        raise ConfigError("need matching, non-empty displacement and amplitude grids")
    order = np.argsort(d, kind="stable")
    d, a = d[order], a[order]
    if d[0] != 0:
        raise ConfigError("the displacement grid must start at 0")
    half = a[0] / 2.0
    below = np.flatnonzero(a <= half)
    if below.size == 0:
        return HalfStrengthEstimate(False)
    k = int(below[0])
    if a[k] == half or k == 0:
        return HalfStrengthEstimate(True, float(d[k]))
    frac = (a[k - 1] - half) / (a[k - 1] - a[k])
    return HalfStrengthEstimate(True, float(d[k - 1] + frac * (d[k] - d[k - 1])))


def sweep_displacement(config):
    if 0.0 not in config.displacements:
        raise ConfigError("the displacement grid must include 0")
    distances = sorted(config.displacements)
    members = _run(config, _mobility_member, distances, [config.snr_db])
    sinrs = np.stack([m[0] for m in members])
    amps = np.stack([m[1] for m in members])
    rows, comments = [], []
    writer = _summary_writer(config, FIG5)
    for b, (kind, n) in enumerate(config.kinds):
        label = kind_label(kind, n)
        curve = amps[:, b, :].mean(axis=0)
        est = estimate_half_strength_distance(distances, curve)
        comments.append("d_half[%s]=%s" % (label, est))
        for c, d in enumerate(distances):
            vals = sinrs[:, 0, b, c]
            rows.append({"displacement_m": d, "kind": label, "iterations": n, "snr_db": config.snr_db,
                         "mean_sinr_db": utils.mean_db(vals), "std_db": float(np.std(utils.to_db(vals))),
                         "mean_peak_amplitude": float(curve[c])})
            if writer is not None:
                writer.add_scalar("sinr_db/%s" % label, rows[-1]["mean_sinr_db"], int(round(d * 1000)))
    if writer is not None:
        writer.close()
    wavelength = config.channel.carrier_wavelength
    comments.append("diffuse-field half-correlation distance=%.6f m (wavelength %.6f m, multiplier %g)"
                    % (coherence_half_distance(wavelength, config.coherence_multiplier), wavelength,
                       config.coherence_multiplier))
    comments.append("operating SNR referenced to the TR peak at d=0; sigma shared by every precoder of a seed")
    return SweepResult(FIG5, ("displacement_m", "kind", "iterations", "snr_db", "mean_sinr_db", "std_db",
                              "mean_peak_amplitude"), rows, comments)


def sweep_speed(config):
    """The displacement sweep evaluated at d = v * tau for each speed and operating SNR."""
    speeds = sorted(config.speeds)
    distances = [v * config.tau for v in speeds]
    members = _run(config, _mobility_member, distances, list(config.speed_snr_db))
    sinrs = np.stack([m[0] for m in members])
    rows = []
    writer = _summary_writer(config, FIG6)
    for a, snr in enumerate(config.speed_snr_db):
        for b, (kind, n) in enumerate(config.kinds):
            label = kind_label(kind, n)
            for c, v in enumerate(speeds):
                vals = sinrs[:, a, b, c]
                rows.append({"speed_mps": v, "speed_kmh": v * KMH_PER_MPS, "displacement_m": distances[c],
                             "snr_db": snr, "kind": label, "iterations": n,
                             "mean_sinr_db": utils.mean_db(vals), "std_db": float(np.std(utils.to_db(vals)))})
                if writer is not None:
                    writer.add_scalar("sinr_db/snr%g/%s" % (snr, label), rows[-1]["mean_sinr_db"], int(round(v)))
    if writer is not None:
        writer.close()
    return SweepResult(FIG6, ("speed_mps", "speed_kmh", "displacement_m", "snr_db", "kind", "iterations",
                              "mean_sinr_db", "std_db"), rows, ["tau=%g s" % config.tau])


def half_strength_speed(d_half, tau):
    """Speed that covers d_half meters within the channel age tau: (m/s, km/h)."""
    if not d_half > 0 or not tau > 0:
        raise ConfigError("half-strength distance and tau must be > 0, got %r and %r" % (d_half, tau))
    v = d_half / tau
    return v, v * KMH_PER_MPS


def table1(config):
    rows = []
    for tau in config.table1_tau:
        mps, kmh = half_strength_speed(config.table1_d_half, tau)
        rows.append({"tau_s": tau, "tau_ms": tau * 1000.0, "d_half_m": config.table1_d_half,
                     "speed_mps": mps, "speed_kmh": kmh})
    return SweepResult(TABLE1, ("tau_s", "tau_ms", "d_half_m", "speed_mps", "speed_kmh"), rows)
