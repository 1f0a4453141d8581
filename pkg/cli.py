#!/usr/bin/env python3
"""
Command-line entry point for time-varying graph signal reconstruction

  python cli.py generate --seed 7 --out data/synthetic
  python cli.py reconstruct --dataset data/synthetic/manifest.json --method graphtrss --density 0.3 --out recon.csv
  python cli.py benchmark --config experiment.json
  python cli.py report --records results/records.csv --out results
"""

import argparse
import json
import logging
import os
import sys
from dataclasses import replace

# Add the current directory to Python path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from models.exceptions import ConfigError, DatasetFormatError, ReconstructionError
from models.experiment import ExperimentConfig, derive_cell_seed, run_monte_carlo, write_reports
from models.methods import METHODS, run_method
from models.metrics import compute_metrics
from utils.data_generator import SyntheticConfig, generate_synthetic, random_sampling_mask
from utils.dataset_io import load_dataset, write_dataset_csv, write_signal_csv
from utils.run_logging import configure_logging
from utils.validators import ConfigValidator

logger = logging.getLogger("cli")


def _read_json(path):
    if path is None:
        return {}
    try:
        with open(path, "r") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigError("config", f"file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError("config", f"invalid JSON: {e}")
    if not isinstance(data, dict):
        raise ConfigError("config", "expected a JSON object")
    return data


def _first_error(validation):
    if not validation['is_valid']:
        field_name, _, message = validation['errors'][0].partition(": ")
        raise ConfigError(field_name, message)
    for warning in validation['warnings']:
        logger.warning("Config: %s", warning)


def cmd_generate(args):
    """Synthetic dataset -> nodes CSV, signals CSV and manifest"""
    data = _read_json(args.config)
    _first_error(ConfigValidator.validate_synthetic(data))
    if args.seed is not None:
        data["seed"] = args.seed
    dataset = generate_synthetic(SyntheticConfig.from_dict(data))
    manifest = write_dataset_csv(dataset, args.out)
    print(json.dumps({"manifest": str(manifest), "nodes": dataset.shape[0], "times": dataset.shape[1]}))
    return 0


def cmd_reconstruct(args):
    """One method on one random mask -> completed matrix CSV"""
    params = _read_json(args.config)
    _first_error(ConfigValidator.validate_method_params(args.method, params))
    if args.dataset == "synthetic":
        dataset = generate_synthetic(SyntheticConfig(seed=args.seed))
    else:
        dataset = load_dataset(args.dataset)

    seed = derive_cell_seed(args.seed, args.density, 0)
    n, m = dataset.shape
    mask = random_sampling_mask(n, m, args.density, seed)
    outcome = run_method(args.method, dataset, dataset.signal.values, mask, params, seed)
    write_signal_csv(outcome.reconstruction, args.out)

    unsampled = mask.complement()
    report = {"method": args.method, "density": args.density, "mask_hash": mask.mask_hash,
              "converged": outcome.converged, "out": args.out}
    if unsampled.any():
        report.update(compute_metrics(outcome.reconstruction, dataset.signal.values, unsampled).to_dict())
    print(json.dumps(report))
    return 0


def cmd_benchmark(args):
    """Experiment config -> records, summary and curve CSVs"""
    if args.config is None:
        raise ConfigError("config", "benchmark needs --config")
    cfg = ExperimentConfig.from_json(args.config)
    overrides = {}
    if args.out is not None:
        overrides["output_dir"] = args.out
    if args.seed is not None:
        overrides["base_seed"] = args.seed
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.method:
        overrides["methods"] = tuple(args.method)
    if args.density:
        overrides["densities"] = tuple(args.density)
    if overrides:
        cfg = replace(cfg, **overrides)

    records = run_monte_carlo(cfg)
    summary_path, curve_path = write_reports(cfg.records_path)
    print(json.dumps({"records": str(cfg.records_path), "summary": str(summary_path),
                      "curve": str(curve_path), "count": len(records)}))
    return 0


def cmd_report(args):
    """Records CSV -> summary and curve CSVs"""
    summary_path, curve_path = write_reports(args.records, args.out)
    print(json.dumps({"summary": str(summary_path), "curve": str(curve_path)}))
    return 0


class UsageErrorParser(argparse.ArgumentParser):
    """Reports usage errors as one JSON line on stderr, exit code 2"""

    def error(self, message):
        sys.exit(_fail("UsageError", message, code=2))


def build_parser():
    parser = UsageErrorParser(description="Time-varying graph signal reconstruction")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging")
    parser.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a synthetic dataset")
    gen.add_argument("--config", help="JSON object of synthetic dataset parameters")
    gen.add_argument("--seed", type=int, default=None)
    gen.add_argument("--out", required=True, help="output directory")
    gen.set_defaults(func=cmd_generate)

    rec = sub.add_parser("reconstruct", help="reconstruct one dataset from one random mask")
    rec.add_argument("--dataset", default="synthetic", help="manifest path or 'synthetic'")
    rec.add_argument("--method", required=True, choices=sorted(METHODS))
    rec.add_argument("--density", type=float, required=True)
    rec.add_argument("--seed", type=int, default=0)
    rec.add_argument("--config", help="JSON object of method parameters")
    rec.add_argument("--out", required=True, help="completed-matrix CSV path")
    rec.set_defaults(func=cmd_reconstruct)

    bench = sub.add_parser("benchmark", help="run a Monte Carlo experiment")
    bench.add_argument("--config", required=True, help="experiment JSON")
    bench.add_argument("--seed", type=int, default=None, help="override base_seed")
    bench.add_argument("--out", default=None, help="override output_dir")
    bench.add_argument("--method", action="append", choices=sorted(METHODS), help="restrict to these methods")
    bench.add_argument("--density", action="append", type=float, help="restrict to these densities")
    bench.add_argument("--workers", type=int, default=None)
    bench.set_defaults(func=cmd_benchmark)

    rep = sub.add_parser("report", help="summarize a records CSV")
    rep.add_argument("--records", required=True)
    rep.add_argument("--out", default=None, help="output directory (default: next to the records)")
    rep.set_defaults(func=cmd_report)

    return parser


def _fail(kind, message, field=None, code=1):
    sys.stderr.write(json.dumps({"error": kind, "field": field, "message": message}) + "\n")
    return code


def main(argv=None):
    args = build_parser().parse_args(argv)
    configure_logging(-1 if args.quiet else args.verbose)
    try:
        return args.func(args)
    except ConfigError as e:
        return _fail("ConfigError", str(e), field=e.field, code=2)
    except DatasetFormatError as e:
        return _fail("DatasetFormatError", str(e), field=e.column, code=2)
    except ReconstructionError as e:
        return _fail(type(e).__name__, str(e))


if __name__ == "__main__":
    sys.exit(main())
