"""Command line interface.

    specpart <subcommand> --config <path> [--cache-dir <path>] [--seed <u64>]
             [--jobs <n>]

Subcommands run one stage pipeline each; `run` executes the stages enabled
in the config and `report` aggregates prior outputs (rendering figures
alongside the delimited files).  Exit status: 0 all checks pass, 1 a check
failed (reports still written), 2 configuration error, 3 computation error.
"""

from __future__ import annotations

import argparse
import sys

from .config import parse_config, validate_config
from .errors import ConfigError, SpecpartError
from .pipeline import run_config

_STAGE_OF = {
    "check-symbols": ["check-symbols"],
    "spectrum": ["check-symbols", "spectrum"],
    "partition": ["check-symbols", "partition"],
    "weyl": ["check-symbols", "weyl"],
    "evolve": ["check-symbols", "evolve"],
    "report": ["report"],
    "run": None,  # stages from the config
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="specpart",
        description="spectral partition diagnostics for elliptic systems on T^2",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("run", "execute all stages enabled in the config"),
        ("check-symbols", "build the model symbol and verify its field structure"),
        ("spectrum", "quantize and eigendecompose at each configured cutoff"),
        ("partition", "projections, companion operators, series matching"),
        ("weyl", "Weyl coefficients, counting fits, mollified density"),
        ("evolve", "propagators, shell commutators, wave packets"),
        ("report", "aggregate outputs into report.json and render figures"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to the INI run configuration")
        p.add_argument("--cache-dir", default=None, help="override the cache directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--jobs", type=int, default=None, help="BLAS thread budget")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config)
        if args.cache_dir is not None:
            cfg.cache_dir = args.cache_dir
        if args.seed is not None:
            cfg.seed = args.seed
        if args.jobs is not None:
            cfg.jobs = args.jobs
        validate_config(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if cfg.jobs:
        try:
            import threadpoolctl

            threadpoolctl.threadpool_limits(cfg.jobs)
        except ImportError:
            pass
    try:
        status, manifest = run_config(cfg, _STAGE_OF[args.command])
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SpecpartError as exc:
        print(f"computation error: {exc}", file=sys.stderr)
        return 3
    for stage, info in manifest["stages"].items():
        for name, check in info["checks"].items():
            tag = "PASS" if check["pass"] else "FAIL"
            print(f"[{tag}] {name}: value={check['value']:.6g} "
                  f"threshold={check['threshold']:.6g}")
    print(f"wrote {len(manifest['files'])} files to {cfg.output_dir}")
    return status


if __name__ == "__main__":
    sys.exit(main())
