"""Command line entry point ``tbq``.

Subcommands::

    tbq design    realize a quantizer for one network and write it as JSON
    tbq bounds    analytic MSE of every estimator at the configured rate
    tbq sweep     sweep one axis (r, rate, pilots, csi-noise) and write CSV
    tbq simulate  Monte-Carlo check of the realized systems at one rate
"""
import argparse
import json
import logging
import sys
import warnings

from .hardware import QuantBudget
from .mimo.estimators import digital_only_design, mimo_hl, spatial_design
from .mimo.network import generate_network
from .sim.config import ConfigError, ExperimentConfig
from .sim.montecarlo import chunk_seed
from .sim.sweep import point_settings, run_sweep

log = logging.getLogger("tbq")


def _common(p):
    p.add_argument("--config", help="JSON experiment configuration")
    p.add_argument("--seed", type=int, help="override the configured seed (unsigned 64-bit)")
    p.add_argument("--out", help="output path (default: stdout or the configured path)")
    p.add_argument("--threads", type=int, default=1, help="worker threads for Monte-Carlo")
    p.add_argument("--no-dither", action="store_true", help="quantize without dither")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    ap = argparse.ArgumentParser(prog="tbq", description="Task-based quantization experiments")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", help="realize a quantizer for one network")
    _common(p)
    p.add_argument("--system", choices=("hl", "shl", "digital"), default="hl")
    p.add_argument("--network", type=int, default=0, help="network draw index")

    p = sub.add_parser("bounds", help="analytic MSE of every estimator")
    _common(p)

    p = sub.add_parser("sweep", help="sweep one axis and write CSV")
    _common(p)
    p.add_argument("--axis", choices=("r", "rate", "pilots", "csi-noise"))
    p.add_argument("--gnuplot", action="store_true", help="also write a gnuplot script next to the CSV")
    p.add_argument("--timing", action="store_true", help="fill the wall_ms column")

    p = sub.add_parser("simulate", help="Monte-Carlo check at the configured rate")
    _common(p)
    return ap


def _load(args):
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    over = {}
    if args.seed is not None:
        over["seed"] = args.seed
    if args.no_dither:
        over["dither"] = False
    return cfg.replace(**over) if over else cfg


def _write(text, path):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _cmd_design(args):
    cfg = _load(args)
    scn, R, r_hl, r_s = point_settings(cfg.replace(axis="rate", grid=(cfg.rate,)), cfg.rate)
    net = generate_network(scn, chunk_seed(cfg.seed, 0, args.network))
    if args.system == "hl":
        d = mimo_hl(net, 0, scn, QuantBudget(R, r_hl, cfg.eta))[0]
    elif args.system == "shl":
        d = spatial_design(net, 0, scn, QuantBudget(R, r_s, cfg.eta))
    else:
        d = digital_only_design(net, 0, scn, R, cfg.eta)
    out = {"system": args.system, "rate": R, "network": args.network, "design": d.to_dict()}
    _write(json.dumps(out) + "\n", args.out or cfg.out)


def _cmd_bounds(args):
    cfg = _load(args)
    cfg = cfg.replace(axis="rate", grid=(cfg.rate,), simulate=())
    _write(run_sweep(cfg).to_csv(), args.out or cfg.out)


def _cmd_sweep(args):
    over = {}
    if args.axis:
        over["axis"] = args.axis.replace("-", "_")
        over["grid"] = None
    cfg = _load(args)
    if over:
        if cfg.axis == over["axis"]:
            over.pop("grid")
        cfg = cfg.replace(**over)
    res = run_sweep(cfg, threads=args.threads,
                    progress=lambda r: log.info("%s=%g %s done", cfg.axis, r.axis, r.estimator))
    path = args.out or cfg.out
    _write(res.to_csv(timing=args.timing), path)
    if args.gnuplot:
        if path in (None, "-"):
            raise ConfigError("out", "--gnuplot needs an output file")
        _write(res.gnuplot_script(path), path + ".gp")


def _cmd_simulate(args):
    cfg = _load(args)
    sim = cfg.simulate or tuple(e for e in ("mmse", "hl", "shl", "digital") if e in cfg.estimators)
    ests = tuple(dict.fromkeys(cfg.estimators + sim))
    cfg = cfg.replace(axis="rate", grid=(cfg.rate,), simulate=sim, estimators=ests)
    _write(run_sweep(cfg, threads=args.threads).to_csv(), args.out or cfg.out)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if not args.verbose:
        warnings.simplefilter("ignore", UserWarning)
    try:
        {"design": _cmd_design, "bounds": _cmd_bounds, "sweep": _cmd_sweep,
         "simulate": _cmd_simulate}[args.command](args)
    except (ConfigError, FileNotFoundError) as e:
        print(f"tbq: error: {e}", file=sys.stderr)
        return 2
    except BrokenPipeError:
        sys.stderr.close()
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
