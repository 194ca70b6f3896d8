"""``snaprg`` command line.

Exit codes: 0 success, 2 invalid configuration or arguments, 3 unreadable
or malformed input, 4 a computation failed (the message names the stage).
"""

from __future__ import annotations

import argparse
import logging
import shutil
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, load_config
from .dataset import DatasetError, deduplicate, ingest_text, read_dataset, write_dataset
from .lattice import LatticeError, build_lattice, decimation_mask, max_rg_steps
from .mcmc import SamplerError, sample_snapshots
from .pipeline import (
    FIT_COLUMNS,
    StageError,
    fit_row,
    run_pipeline,
    write_correlation_table,
    write_degree_table,
    write_histogram_table,
    write_ks_matrix,
)
from .rg import FrameMismatchError, apply_rg
from .stats import StatsError, correlation_function, log_binned_histogram
from .tables import read_degrees, write_json, write_tsv
from .wfn import WfnError, build_wfn

logger = logging.getLogger("snaprg")

EXIT_OK, EXIT_CONFIG, EXIT_INPUT, EXIT_COMPUTE = 0, 2, 3, 4


class CliError(Exception):
    def __init__(self, stage: str, message: str, code: int):
        super().__init__(message)
        self.stage = stage
        self.code = code


def _load(path, stage="input"):
    try:
        return read_dataset(path)
    except FileNotFoundError:
        raise CliError(stage, f"{path}: no such file", EXIT_INPUT) from None
    except DatasetError as exc:
        raise CliError(stage, str(exc), EXIT_INPUT) from None


def _config(path):
    try:
        return load_config(path)
    except FileNotFoundError:
        raise CliError("config", f"{path}: no such file", EXIT_CONFIG) from None
    except ConfigError as exc:
        raise CliError("config", str(exc), EXIT_CONFIG) from None


# ---------------------------------------------------------------- commands


def cmd_sample(args) -> None:
    cfg = _config(args.config)
    out = Path(args.output or cfg.output_dir / "snapshots_step0.snaprg")
    try:
        ds = sample_snapshots(cfg.model, cfg.sampler)
    except SamplerError as exc:
        raise CliError("sample", str(exc), EXIT_COMPUTE) from None
    ds.metadata["config"] = cfg.raw
    out.parent.mkdir(parents=True, exist_ok=True)
    write_dataset(ds, out)
    for st in ds.metadata["chains"]:
        logger.info("chain %(chain)d: acceptance rate %(acceptance_rate)s, "
                    "mean cluster size %(mean_cluster_size)s", st)
    print(out)


def cmd_ingest(args) -> None:
    try:
        lattice = build_lattice(args.dimension, args.lengths)
    except LatticeError as exc:
        raise CliError("config", f"lattice: {exc}", EXIT_CONFIG) from None
    try:
        ds = ingest_text(args.input, lattice, mapping=args.mapping,
                         n_steps_applied=args.steps_applied, source_tag=args.tag)
    except FileNotFoundError:
        raise CliError("ingest", f"{args.input}: no such file", EXIT_INPUT) from None
    except DatasetError as exc:
        raise CliError("ingest", str(exc), EXIT_INPUT) from None
    write_dataset(ds, args.output)
    print(args.output)


def cmd_rg(args) -> None:
    ds = _load(args.input)
    cap = max_rg_steps(ds.lattice)
    if args.n_steps < 0 or ds.n_steps_applied + args.n_steps > cap:
        raise CliError("rg", f"{args.n_steps} steps after {ds.n_steps_applied} exceed the "
                       f"capacity ({cap}) of lattice {list(ds.lattice.lengths)}", EXIT_CONFIG)
    prefix = Path(args.output_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    if args.n_steps == 0:
        target = Path(f"{prefix}_step{ds.n_steps_applied}.snaprg")
        shutil.copyfile(args.input, target)
        print(target)
        return
    for k in range(ds.n_steps_applied + 1, ds.n_steps_applied + args.n_steps + 1):
        try:
            ds = apply_rg(ds, decimation_mask(ds.lattice, k))
        except FrameMismatchError as exc:
            raise CliError("rg", str(exc), EXIT_INPUT) from None
        target = Path(f"{prefix}_step{k}.snaprg")
        write_dataset(ds, target)
        print(target)


def cmd_wfn(args) -> None:
    ds = _load(args.input)
    uniq = deduplicate(ds)
    try:
        res = build_wfn(uniq, inclusive=args.cutoff_inclusive, block=args.block_size,
                        n_jobs=args.n_jobs)
    except WfnError as exc:
        raise CliError("wfn", str(exc), EXIT_COMPUTE) from None
    write_degree_table(args.output, res, uniq.multiplicities)
    summary = {
        "input": str(args.input),
        "n_snapshots": ds.n_snapshots,
        "n_unique": res.n_nodes,
        "n_bits": ds.n_bits,
        "rg_steps": ds.n_steps_applied,
        "R": float(res.cutoff),
        "R_fraction": f"{res.cutoff.numerator}/{res.cutoff.denominator}",
        "edge_rule": "D <= R" if res.inclusive else "D < R",
        "n_zero_degree": int(np.sum(res.degrees == 0)),
    }
    summary_path = args.summary or Path(args.output).with_suffix(".json")
    write_json(summary_path, summary)
    print(args.output)


def cmd_analyze(args) -> None:
    if not args.degrees and not args.correlation:
        raise CliError("analyze", "nothing to analyze: give --degrees or --correlation",
                       EXIT_CONFIG)
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    window = tuple(args.window) if args.window else None
    if args.degrees:
        labels, samples, rows = [], [], []
        for path in args.degrees:
            try:
                k = read_degrees(path)
            except (OSError, ValueError) as exc:
                raise CliError("analyze", str(exc), EXIT_INPUT) from None
            label = Path(path).stem
            labels.append(label)
            samples.append(k)
            try:
                hist = log_binned_histogram(k, args.bin_ratio)
            except StatsError as exc:
                raise CliError("analyze", f"{path}: {exc}", EXIT_COMPUTE) from None
            write_histogram_table(out / f"histogram_{label}.tsv", hist)
            row, _ = fit_row(label, hist, window, min_decades=args.min_decades,
                             min_r2=args.min_r2, min_bins=args.min_bins)
            rows.append(row)
        write_tsv(out / "fits.tsv", FIT_COLUMNS, rows,
                  comments=["P_k ~ k^-gamma, weighted least squares on log-binned density"])
        write_ks_matrix(out / "ks_matrix.tsv", labels, samples)
    for path in args.correlation or ():
        ds = _load(path)
        try:
            corr = correlation_function(ds, args.max_d)
        except StatsError as exc:
            raise CliError("analyze", f"{path}: {exc}", EXIT_CONFIG) from None
        write_correlation_table(out / f"correlation_{Path(path).stem}.tsv", corr, args.eta)
    print(out)


def cmd_pipeline(args) -> None:
    cfg = _config(args.config)
    try:
        manifest = run_pipeline(cfg, resume=args.resume, n_jobs=args.n_jobs,
                                output_dir=args.output_dir)
    except StageError as exc:
        raise CliError(exc.stage, exc.message, EXIT_COMPUTE) from None
    n_files = sum(len(r["outputs"]) for r in manifest["stages"].values())
    print(f"{Path(args.output_dir or cfg.output_dir) / 'manifest.json'} ({n_files} files)")


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="snaprg", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sample", help="draw Ising snapshots from a config")
    s.add_argument("--config", required=True)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("ingest", help="convert text configurations to a dataset file")
    s.add_argument("input")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--dimension", type=int, required=True)
    s.add_argument("--lengths", type=int, nargs="+", required=True)
    s.add_argument("--mapping", choices=("pm1", "01"), default="pm1")
    s.add_argument("--steps-applied", type=int, default=0)
    s.add_argument("--tag")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("rg", help="apply decimation steps, one file per step")
    s.add_argument("input")
    s.add_argument("--n-steps", type=int, required=True)
    s.add_argument("-o", "--output-prefix", required=True)
    s.set_defaults(func=cmd_rg)

    s = sub.add_parser("wfn", help="network degrees of a dataset")
    s.add_argument("input")
    s.add_argument("-o", "--output", required=True, help="degree table (.tsv)")
    s.add_argument("--summary", help="JSON summary path (default: output with .json)")
    s.add_argument("--cutoff-inclusive", action="store_true", help="edges for D <= R")
    s.add_argument("--block-size", type=int, default=256)
    s.add_argument("--n-jobs", type=int)
    s.set_defaults(func=cmd_wfn)

    s = sub.add_parser("analyze", help="histograms, fits, KS matrix, correlations")
    s.add_argument("--degrees", nargs="+", help="degree tables or one-integer-per-line files")
    s.add_argument("--correlation", nargs="+", help="dataset files")
    s.add_argument("-o", "--output-dir", required=True)
    s.add_argument("--bin-ratio", type=float, default=1.3)
    s.add_argument("--window", type=int, nargs=2, metavar=("K_LOW", "K_HIGH"))
    s.add_argument("--min-decades", type=float, default=1.0)
    s.add_argument("--min-r2", type=float, default=0.98)
    s.add_argument("--min-bins", type=int, default=5)
    s.add_argument("--max-d", type=int, default=8)
    s.add_argument("--eta", type=float, default=0.25)
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("pipeline", help="sample, rg, wfn and analyze from a config")
    s.add_argument("--config", required=True)
    s.add_argument("--output-dir")
    s.add_argument("--resume", action="store_true",
                   help="skip stages whose outputs match the manifest")
    s.add_argument("--n-jobs", type=int)
    s.set_defaults(func=cmd_pipeline)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    if getattr(args, "bin_ratio", 2.0) <= 1:
        parser.error("--bin-ratio must exceed 1")
    try:
        args.func(args)
    except CliError as exc:
        print(f"snaprg: error [{exc.stage}]: {exc}", file=sys.stderr)
        return exc.code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
