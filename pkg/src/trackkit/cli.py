"""Command line entry point: ``trackkit run`` and ``trackkit validate``."""

import argparse
import logging
import sys

from .config import parse_config
from .errors import ConfigError, DataError

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3


def _parser():
    p = argparse.ArgumentParser(prog="trackkit", description="Rolling-window index-tracking backtests.")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the backtest described by a JSON config")
    run.add_argument("--config", required=True, help="path to the run configuration (JSON)")
    run.add_argument("--seed", type=int, default=None, help="override the config seed")
    run.add_argument("--out", default=None, help="override the output directory")
    run.add_argument("-v", "--verbose", action="store_true", help="log every solve")
    val = sub.add_parser("validate", help="check a config and its data file without solving")
    val.add_argument("--config", required=True)
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(args.config)
        if args.command == "run":
            if args.seed is not None:
                if args.seed < 0:
                    raise ConfigError("--seed must be nonnegative")
                cfg.seed = args.seed
            if args.out is not None:
                cfg.out = args.out
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    # imported late so `validate` on a bad config stays fast
    from .backtest import load_panel, run_backtest
    from .data import make_windows
    from .reports import emit_reports

    try:
        panel, rets = load_panel(cfg)
        plan = make_windows(rets.returns.shape[0], cfg.in_len, cfg.out_len, cfg.step)
        if args.command == "validate":
            print(f"ok: {len(cfg.models)} models, {rets.returns.shape[1]} assets, "
                  f"{rets.returns.shape[0]} return rows, {len(plan.windows)} windows")
            return EXIT_OK
        store = run_backtest(cfg, panel)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA

    paths = emit_reports(store, cfg.out)
    failed = store.failures()
    print(f"{len(store.models)} models x {len(store.plan.windows)} windows -> {cfg.out}")
    for tag in store.models:
        agg = store.aggregate.get(tag)
        te = "failed" if agg is None else f"TE {agg.te:.6g}"
        print(f"  {tag:<10} {te}")
    if failed:
        print(f"{len(failed)} solve(s) failed; see {paths['manifest'].name}", file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
