"""Staged end-to-end runs: sample, coarse-grain, build networks, analyze.

Every stage writes its files into the output directory and records their
SHA-256 checksums in ``manifest.json``.  A stage is skipped on resume when
its key (stage settings plus input checksums) and all recorded output
checksums still match.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import RunConfig
from .dataset import deduplicate, read_dataset, write_dataset
from .mcmc import sample_snapshots
from .rg import apply_rg
from .lattice import decimation_mask
from .stats import (
    NoWindowError,
    correlation_function,
    fit_power_law,
    ks_distance,
    log_binned_histogram,
    rescale_correlation,
)
from .tables import read_degrees, sha256_file, write_json, write_tsv
from .wfn import build_wfn

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self.message = message


# ------------------------------------------------------------ table writers


def write_degree_table(path, result, multiplicities) -> None:
    R = result.cutoff
    write_tsv(
        path,
        ["node", "degree", "r1", "multiplicity"],
        zip(range(result.n_nodes), result.degrees, result.r1, multiplicities),
        comments=[f"R = {R.numerator}/{R.denominator} = {float(R)!r}",
                  f"edge rule: D {'<=' if result.inclusive else '<'} R",
                  f"n_nodes = {result.n_nodes}"],
    )


def write_histogram_table(path, hist) -> None:
    write_tsv(
        path,
        ["k_low", "k_high", "center", "count", "density"],
        zip(hist.edges[:-1], hist.edges[1:] - 1, hist.centers, hist.counts, hist.density),
        comments=[f"bin ratio = {hist.ratio!r}",
                  f"zero-degree nodes excluded = {hist.n_zero}",
                  f"nodes = {hist.n_total}"],
    )


FIT_COLUMNS = ["label", "status", "gamma", "stderr", "k_low", "k_high", "r2", "n_bins"]


def fit_row(label, hist, cfg_window, *, min_decades, min_r2, min_bins):
    """One row of the fit table; a missing window is reported, not raised."""
    try:
        fit = fit_power_law(hist, cfg_window, min_decades=min_decades,
                            min_r2=min_r2, min_bins=min_bins)
    except NoWindowError as exc:
        logger.warning("%s: %s", label, exc)
        return [label, "no_window", None, None, None, None, None, None], None
    return [label, "ok", fit.gamma, fit.stderr, fit.k_low, fit.k_high, fit.r2,
            fit.n_bins], fit


def write_ks_matrix(path, labels, samples) -> np.ndarray:
    n = len(samples)
    mat = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            mat[i, j] = mat[j, i] = ks_distance(samples[i], samples[j]).statistic
    write_tsv(path, ["label", *labels],
              ([labels[i], *mat[i]] for i in range(n)),
              comments=["two-sample Kolmogorov-Smirnov statistic"])
    return mat


def write_correlation_table(path, corr, eta) -> None:
    r = rescale_correlation(corr, eta)
    write_tsv(
        path,
        ["d", "d_original", "C", "stderr", "C_rescaled", "stderr_rescaled"],
        zip(corr.separations, corr.separations * corr.scale, corr.values,
            corr.stderr, r.values, r.stderr),
        comments=[f"rg steps = {corr.n_steps}",
                  f"scale = {corr.scale!r}",
                  f"eta = {eta!r}",
                  "d in current-frame units; d_original = d * scale"],
    )


# ---------------------------------------------------------------- manifest


def _digest(obj) -> str:
    text = json.dumps(obj, sort_keys=True, default=str)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass
class _Manifest:
    path: Path
    data: dict

    @classmethod
    def load(cls, out_dir: Path, resume: bool) -> "_Manifest":
        path = out_dir / MANIFEST
        data = {"stages": {}}
        if resume and path.exists():
            try:
                data = json.loads(path.read_text(encoding="utf-8"))
            except json.JSONDecodeError:
                logger.warning("unreadable manifest, running all stages")
        return cls(path, data)

    def is_current(self, stage: str, key: str) -> bool:
        rec = self.data["stages"].get(stage)
        if rec is None or rec.get("key") != key:
            return False
        for name, digest in rec["outputs"].items():
            f = self.path.parent / name
            if not f.exists() or sha256_file(f) != digest:
                return False
        return True

    def record(self, stage: str, key: str, outputs, summary=None) -> None:
        out_dir = self.path.parent
        self.data["stages"][stage] = {
            "key": key,
            "outputs": {name: sha256_file(out_dir / name) for name in outputs},
            "summary": summary or {},
        }
        self.save()

    def checksums(self, stage: str) -> dict:
        return self.data["stages"][stage]["outputs"]

    def save(self) -> None:
        write_json(self.path, self.data)


# ---------------------------------------------------------------- pipeline


def run_pipeline(cfg: RunConfig, *, resume: bool = False, n_jobs: int | None = None,
                 output_dir=None) -> dict:
    """Run every stage; returns the manifest as a dict.

    Raises
    ------
    StageError
        Tagged with the failing stage.
    """
    out = Path(output_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    man = _Manifest.load(out, resume)
    threads = n_jobs if n_jobs is not None else cfg.wfn_jobs
    n_steps = cfg.n_rg_steps

    def stage(name, key_obj, fn):
        key = _digest(key_obj)
        if resume and man.is_current(name, key):
            logger.info("stage %s: up to date, skipped", name)
            return man.data["stages"][name]["summary"]
        logger.info("stage %s: running", name)
        try:
            outputs, summary = fn()
        except StageError:
            raise
        except Exception as exc:  # noqa: BLE001 - re-raised with the stage tag
            raise StageError(name, f"{type(exc).__name__}: {exc}") from exc
        man.record(name, key, outputs, summary)
        return summary

    # sample
    step_file = [f"snapshots_step{n}.snaprg" for n in range(n_steps + 1)]

    def do_sample():
        ds = sample_snapshots(cfg.model, cfg.sampler)
        write_dataset(ds, out / step_file[0])
        return [step_file[0]], {"beta": cfg.sampler.beta, "chains": ds.metadata["chains"],
                                "n_snapshots": ds.n_snapshots}

    raw = cfg.raw
    stage("sample", {"lattice": raw.get("lattice"), "model": raw.get("model"),
                     "sampler": raw.get("sampler")}, do_sample)

    # rg, one stage per step so a resumed run keeps finished steps
    for n in range(1, n_steps + 1):
        def do_rg(n=n):
            parent = read_dataset(out / step_file[n - 1])
            ds = apply_rg(parent, decimation_mask(parent.lattice, n))
            write_dataset(ds, out / step_file[n])
            return [step_file[n]], {"n_bits": ds.n_bits}

        stage(f"rg_step{n}",
              {"input": man.checksums(f"rg_step{n - 1}" if n > 1 else "sample")}, do_rg)

    # wfn per step
    wfn_key = {k: raw.get("wfn", {}).get(k) for k in ("cutoff_inclusive", "block_size")}
    for n in range(n_steps + 1):
        def do_wfn(n=n):
            ds = read_dataset(out / step_file[n])
            uniq = deduplicate(ds)
            res = build_wfn(uniq, inclusive=cfg.cutoff_inclusive, block=cfg.block_size,
                            n_jobs=threads)
            deg_name, sum_name = f"degrees_step{n}.tsv", f"wfn_step{n}.json"
            write_degree_table(out / deg_name, res, uniq.multiplicities)
            summary = {
                "rg_steps": n,
                "n_bits": ds.n_bits,
                "n_snapshots": ds.n_snapshots,
                "n_unique": res.n_nodes,
                "R": float(res.cutoff),
                "R_fraction": f"{res.cutoff.numerator}/{res.cutoff.denominator}",
                "edge_rule": "D <= R" if res.inclusive else "D < R",
                "n_zero_degree": int(np.sum(res.degrees == 0)),
                "mean_degree": float(np.mean(res.degrees)),
            }
            write_json(out / sum_name, summary)
            return [deg_name, sum_name], summary

        src = "sample" if n == 0 else f"rg_step{n}"
        stage(f"wfn_step{n}", {"input": man.checksums(src), "wfn": wfn_key}, do_wfn)

    # analysis over all steps
    def do_analyze():
        outputs = []
        labels = [f"step{n}" for n in range(n_steps + 1)]
        samples = [read_degrees(out / f"degrees_step{n}.tsv") for n in range(n_steps + 1)]
        fit_rows, fits = [], {}
        for n, k in enumerate(samples):
            hist = log_binned_histogram(k, cfg.bin_ratio)
            name = f"histogram_step{n}.tsv"
            write_histogram_table(out / name, hist)
            outputs.append(name)
            row, fit = fit_row(labels[n], hist, cfg.window, min_decades=cfg.min_decades,
                               min_r2=cfg.min_r2, min_bins=cfg.min_bins)
            fit_rows.append(row)
            fits[labels[n]] = None if fit is None else {
                "gamma": fit.gamma, "stderr": fit.stderr, "window": list(fit.window),
                "r2": fit.r2}
        write_tsv(out / "fits.tsv", FIT_COLUMNS, fit_rows,
                  comments=["P_k ~ k^-gamma, weighted least squares on log-binned density"])
        ks = write_ks_matrix(out / "ks_matrix.tsv", labels, samples)
        outputs += ["fits.tsv", "ks_matrix.tsv"]
        corr_summary = {}
        for n in range(n_steps + 1):
            ds = read_dataset(out / step_file[n])
            mask = ds.mask()
            limit = min(mask.extent(a) for a in range(ds.lattice.dimension)) // 2
            max_d = min(cfg.max_d if cfg.max_d is not None else 8, limit)
            if max_d < 1:
                continue
            corr = correlation_function(ds, max_d)
            name = f"correlation_step{n}.tsv"
            write_correlation_table(out / name, corr, cfg.eta)
            outputs.append(name)
            corr_summary[labels[n]] = {"max_d": max_d, "scale": corr.scale}
        summary = {
            "fits": fits,
            "ks": {f"{labels[i]}-{labels[j]}": float(ks[i, j])
                   for i in range(len(labels)) for j in range(i + 1, len(labels))},
            "correlations": corr_summary,
        }
        write_json(out / "summary.json", summary)
        outputs.append("summary.json")
        return outputs, summary

    inputs = {f"wfn_step{n}": man.checksums(f"wfn_step{n}") for n in range(n_steps + 1)}
    inputs.update({"fit": raw.get("fit"), "analysis": raw.get("analysis"),
                   "bin_ratio": cfg.bin_ratio})
    stage("analyze", inputs, do_analyze)
    return man.data


def manifest_checksums(manifest: dict) -> dict:
    """Flat ``{file: sha256}`` over all stages."""
    return {name: digest
            for rec in manifest["stages"].values()
            for name, digest in rec["outputs"].items()}
