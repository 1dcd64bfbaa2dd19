"""
Command-line front end: `python trdma_cli.py <subcommand> -c config.ini [--set section.key=value ...]`

    gen-channel          draw one synthetic CIR bank and store it
    precode              build TR or ITRDMA precoders for a stored bank
    evaluate             SIR/SINR (and BER) of stored precoders on a stored bank
    sweep-iterations     fig3_sir_vs_iter.csv
    sweep-displacement   fig5_sinr_vs_disp.csv
    sweep-speed          fig6_sinr_vs_speed.csv
    table1               table1_speed.csv
    profiles             fig2_profiles.csv and fig4_focusing_map.csv
"""
import argparse
import logging
import os
import sys

from . import __version__, channel, config, experiments, formats, link, precoder
from .errors import TrdmaError

log = logging.getLogger("cli")

SUBCOMMANDS = ("gen-channel", "precode", "evaluate", "sweep-iterations", "sweep-displacement",
               "sweep-speed", "table1", "profiles")

REPORT_NAME = "link_report"
TRACE_NAME = "itrdma_trace.csv"


def _common_options():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="INI config file, defaults are used for every key it leaves out")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="Override one config key, may be repeated")
    common.add_argument("--seed", type=int, help="Channel seed, also put first in the sweep ensemble")
    common.add_argument("-o", "--output-dir", help="Directory of every artifact, overrides run.output_dir")
    common.add_argument("-v", "--verbose", action="store_true", default=False, help="Debug logging")
    common.add_argument("-q", "--quiet", action="store_true", default=False, help="Warnings and errors only")
    return common


def build_parser():
    common = _common_options()
    parser = argparse.ArgumentParser(prog="trdma_cli.py",
                                     description="Time-reversal and iterative TR precoding simulator")
    parser.add_argument("--print-defaults", action="store_true", default=False,
                        help="Print every config key with its default as an INI file and exit")
    parser.add_argument("--version", action="store_true", default=False,
                        help="Print the program and file-format versions and exit")
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND")
    p = sub.add_parser("gen-channel", parents=[common], help="Generate a synthetic CIR bank")
    p.add_argument("--channel", help="Output CIR file (.json for the text form), overrides run.channel_file")
    p = sub.add_parser("precode", parents=[common], help="Build precoders for a CIR bank")
    p.add_argument("--channel", help="Input CIR file")
    p.add_argument("--precoders", help="Output precoder file (.json for the text form)")
    p = sub.add_parser("evaluate", parents=[common], help="Evaluate stored precoders on a CIR bank")
    p.add_argument("--channel", help="Input CIR file")
    p.add_argument("--precoders", help="Input precoder file")
    p.add_argument("--scenario", default="eval", help="Scenario id written into the report")
    for name in SUBCOMMANDS[3:]:
        sub.add_parser(name, parents=[common], help="Write the %s output" % name)
    return parser


def _setup_logging(args):
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(format="%(asctime)-15s %(levelname)s %(message)s", level=level)


def _load(args):
    overrides = list(args.overrides)
    if args.output_dir:
        overrides.append("run.output_dir=%s" % args.output_dir)
    cfg = config.load_config(args.config, overrides, args.seed)
    return cfg


def _file(cfg, key, explicit):
    return explicit if explicit else cfg.path(key)


def _gen_channel(cfg, args):
    spec = cfg.channel_spec()
    cirset = channel.generate_synthetic(spec)
    path = _file(cfg, "channel_file", args.channel)
    channel.store(cirset, path)
    log.info("Generated %d x %d x %d CIR bank, seed %d -> %s",
             cirset.n_users, cirset.n_antennas, cirset.n_taps, spec.seed, path)
    return [path]


def _precode(cfg, args):
    cirset = channel.load(_file(cfg, "channel_file", args.channel))
    p = cfg["precoder"]
    pset = precoder.build_precoders(cirset, p["kind"], p["epsilon"], p["n_max"], cfg.n_jobs)
    path = _file(cfg, "precoder_file", args.precoders)
    precoder.store(pset, path)
    out = [path]
    if pset.kind == precoder.KIND_ITRDMA:
        trace = os.path.join(cfg["run"]["output_dir"], TRACE_NAME)
        precoder.write_trace_csv(pset, trace, ["config_hash=%s" % cfg.hash()])
        out.append(trace)
    log.info("%s precoders, iterations used %s", pset.kind, list(pset.iterations_used))
    return out


def _evaluate(cfg, args):
    cirset = channel.load(_file(cfg, "channel_file", args.channel))
    pset = precoder.load(_file(cfg, "precoder_file", args.precoders))
    l = cfg["link"]
    sigma = l["sigma"]
    if l["snr_db"] is not None:
        #One sigma for the whole scenario, set by the strongest TR peak.
        eq_tr = link.equivalent_channel(cirset, precoder.build_precoders(cirset, precoder.KIND_TR))
        sigma = max(link.snr_to_sigma(eq_tr, i, l["snr_db"]) for i in range(cirset.n_users))
    report = link.evaluate_link(cirset, pset, sigma, args.scenario, l["constellation"], l["n_symbols"],
                                l["seed"], l["symbol_spacing"], l["interference_span"])
    report.config = cfg.as_dict()
    base = os.path.join(cfg["run"]["output_dir"], REPORT_NAME)
    comments = ["config_hash=%s" % cfg.hash(), "interference span %s" % l["interference_span"]]
    report.write_csv(base + ".csv", comments)
    report.write_json(base + ".json")
    return [base + ".csv", base + ".json"]


def _sweep(name):
    def run(cfg, args):
        ecfg = config.experiment_config(cfg)
        if name == "sweep-iterations":
            results = experiments.sweep_iterations(ecfg)
        elif name == "sweep-displacement":
            results = [experiments.sweep_displacement(ecfg)]
        elif name == "sweep-speed":
            results = [experiments.sweep_speed(ecfg)]
        elif name == "table1":
            results = [experiments.table1(ecfg)]
        else:
            results = list(experiments.focusing_profile(ecfg)) + [experiments.focusing_map(ecfg)]
        return experiments.write_results(results, ecfg)
    return run


HANDLERS = {
    "gen-channel": _gen_channel,
    "precode": _precode,
    "evaluate": _evaluate,
}
HANDLERS.update((name, _sweep(name)) for name in SUBCOMMANDS[3:])


def version_text():
    return "trdma %s (CIR format %d, precoder format %d)" % (__version__, formats.CIR_VERSION,
                                                              formats.PRECODER_VERSION)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.version:
        print(version_text())
        return 0
    if args.print_defaults:
        print(config.defaults_ini())
        return 0
    if args.command is None:
        parser.print_usage(sys.stderr)
        print("error category=config message=a subcommand is required", file=sys.stderr)
        return 2
    _setup_logging(args)
    try:
        cfg = _load(args)
        print("config_hash=%s" % cfg.hash())
        paths = HANDLERS[args.command](cfg, args)
    except TrdmaError as e:
        print("error category=%s message=%s" % (e.category, e), file=sys.stderr)
        return e.exit_code
    for p in paths:
        log.info("Output: %s", p)
    return 0
