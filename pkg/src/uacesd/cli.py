"""``simulate`` command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 majority-divergence abort.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import ConfigError, MajorityDivergenceError
from .harness import _parse_snr, emit_results, load_config, override, run_experiment
from .receiver import MODES

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="simulate",
        description="Monte Carlo link simulation of blind grant-free mmWave receivers.")
    p.add_argument("--config", required=True, help="JSON experiment configuration")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="master seed (overrides config)")
    p.add_argument("--workers", type=int, help="worker processes (overrides config)")
    p.add_argument("--mode", action="append", choices=MODES,
                   help="receiver mode; repeat for several (overrides config)")
    p.add_argument("--snr-list", nargs="+", help="SNR points in dB (overrides config)")
    p.add_argument("--trials", type=int, help="trials per SNR point (overrides config)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    log = logging.getLogger("simulate")
    try:
        cfg = load_config(args.config)
        snrs = [_parse_snr(s) for s in args.snr_list] if args.snr_list else None
        cfg = override(cfg, seed=args.seed, workers=args.workers, modes=args.mode,
                       snr_db_list=snrs, trials=args.trials)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    def progress(rec):
        log.info("%s snr=%g ber=%.3g aer=%.3g nmse=%.2f dB", rec.mode, rec.snr_db,
                 rec.ber, rec.aer, rec.nmse_h_db)

    try:
        records = run_experiment(cfg, progress)
    except MajorityDivergenceError as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    for path in emit_results(records, args.out):
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
