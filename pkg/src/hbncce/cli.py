"""Command-line interface.

Subcommands:
  sweep  field sweep of Hahn-echo coherence curves -> CSVs + summary JSON
  eseem  per-nucleus echo-modulation decomposition -> summary JSON
  tb     transition-boundary / unmodulated-product analysis -> summary JSON
  fit    T2 extraction from an existing coherence CSV

Experiments are configured by --preset and/or --config (flat key-value
file); --seed and --threads override the config.  Results are
thread-count-invariant: the same config and seed give byte-identical CSVs
for any --threads value.
"""

import argparse
import dataclasses
import json
import os
import sys

from . import runner
from .runner import PRESETS, ConfigError, parse_config


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="hbncce",
        description="Hahn-echo decoherence of a spin-1 defect in h-BN "
        "nuclear-spin baths (cluster-correlation expansion).",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, needs_out=True):
        p.add_argument("--config", help="flat key-value config file")
        p.add_argument("--preset", choices=sorted(PRESETS),
                       help="named experiment preset")
        p.add_argument("--out", required=needs_out, help="output directory")
        p.add_argument("--seed", type=int, help="override the isotope seed")
        p.add_argument("--threads", type=int,
                       help="worker threads (0 = one per CPU)")

    add_common(sub.add_parser("sweep", help="field sweep of echo coherence"))
    add_common(sub.add_parser("eseem", help="per-nucleus modulation decomposition"))
    add_common(sub.add_parser("tb", help="transition-boundary analysis"))

    fit = sub.add_parser("fit", help="T2 extraction from a coherence CSV")
    fit.add_argument("csv", help="coherence CSV (tau_us,t_us,re_L,im_L,abs_L)")
    fit.add_argument("--out", help="optional output directory for summary.json")
    return parser


def _resolve_config(args):
    if args.config is None and args.preset is None:
        raise ConfigError("provide --config and/or --preset")
    if args.preset is not None:
        config = dataclasses.replace(PRESETS[args.preset])
        if args.config is not None:
            override = parse_config(args.config)
            defaults = runner.ExperimentConfig()
            for f in dataclasses.fields(defaults):
                val = getattr(override, f.name)
                if val != getattr(defaults, f.name):
                    setattr(config, f.name, val)
    else:
        config = parse_config(args.config)
    if args.seed is not None:
        config.seed = args.seed
    if args.threads is not None:
        config.threads = args.threads
    if config.threads == 0:
        config.threads = os.cpu_count() or 1
    return config.validate()


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "fit":
            summary = runner.run_fit(args.csv, out_dir=args.out)
            json.dump(summary, sys.stdout, indent=2, sort_keys=True)
            sys.stdout.write("\n")
            return 0
        config = _resolve_config(args)
        run = {"sweep": runner.run_sweep, "eseem": runner.run_eseem,
               "tb": runner.run_tb}[args.command]
        summary = run(config, args.out)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.command == "sweep":
        n_fields = len(summary["fields"])
        n_errors = len(summary["field_errors"])
        print(f"wrote {n_fields} coherence curves to {args.out}"
              + (f" ({n_errors} fields failed)" if n_errors else ""))
        if n_fields == 0 and n_errors > 0:
            return 1
    else:
        print(f"wrote summary.json to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
