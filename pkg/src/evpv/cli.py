"""Command-line interface: ``evpv <verb> [--config FILE] [options]``.

Exit codes: 0 success, 2 configuration error, 3 input-data error,
4 external-service error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import __version__
from .config import SCENARIO_NAMES, load_config
from .errors import ConfigError, ExternalServiceError, InputDataError
from .pipeline import STAGES, Pipeline

VERBS = {s: (s,) for s in STAGES}
VERBS["run"] = STAGES
HELP = {
    "zones": "build traffic zones and aggregate population, workplaces and POIs",
    "mobility": "distance matrix, gravity-model trips and vehicle-km per zone",
    "demand": "daily charging demand per zone and location",
    "profiles": "Monte Carlo charging sessions, load profiles and charging points",
    "pv": "PV production per kWp (optimal orientation unless fixed)",
    "indicators": "daily self-sufficiency, self-consumption and coverage per PV capacity",
    "report": "grid-context report and fleet-renewal timelines",
    "run": "all stages in order",
}


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    S = argparse.SUPPRESS
    p.add_argument("--config", default=S, help="YAML config file (default: built-in case study)")
    p.add_argument("--seed", type=int, default=S, help="master random seed")
    p.add_argument("--out-dir", default=S, help="output directory (default: ./evpv-out)")
    p.add_argument("--runs", type=int, default=S, help="Monte Carlo days for load profiles")
    p.add_argument("--scenario", choices=SCENARIO_NAMES, default=S, help="restrict to one charging scenario")
    p.add_argument("--threads", type=int, default=S, help="cap on worker threads")
    p.add_argument("-v", "--verbose", action="count", default=S)
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    ap = argparse.ArgumentParser(prog="evpv", parents=[common],
                                 description="EV charging demand and PV complementarity model")
    ap.add_argument("--version", action="version", version=f"evpv {__version__}")
    sub = ap.add_subparsers(dest="verb", required=True, metavar="VERB")
    for verb in VERBS:
        sub.add_parser(verb, parents=[common], help=HELP[verb], description=HELP[verb])
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    opt = vars(args)
    logging.basicConfig(level=logging.WARNING - 10 * min(opt.get("verbose", 0), 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(opt.get("config"))
        cfg = cfg.with_overrides(seed=opt.get("seed"), runs=opt.get("runs"), threads=opt.get("threads"),
                                 scenario=opt.get("scenario"))
        pipe = Pipeline(cfg, opt.get("out_dir", "evpv-out"))
        man = pipe.run(VERBS[args.verb])
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except InputDataError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 3
    except ExternalServiceError as exc:
        print(f"external service error: {exc}", file=sys.stderr)
        return 4
    print(json.dumps({"out_dir": str(pipe.root), "stages": list(man["stages"]),
                      "config_hash": man["config_hash"][:12]}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
