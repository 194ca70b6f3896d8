"""Run configuration: a YAML (or JSON) document with fixed sections.

Example::

    lattice: {dimension: 2, lengths: [64, 64]}
    model: {J: 1.0, perturbation: none}
    sampler: {T_over_Tc: 1.0, n_snapshots: 100000, n_decor: 10, seed: 7}
    rg: {n_steps: 2}
    wfn: {cutoff_inclusive: false, bin_ratio: 1.3}
    fit: {window: auto}
    analysis: {max_d: 8, eta: 0.25}
    io: {output_dir: runs/critical}

Exactly one of ``beta``, ``T`` and ``T_over_Tc`` sets the temperature
(``k_B = 1``).  Unknown keys are rejected.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .lattice import LatticeError, LatticeSpec, build_lattice, max_rg_steps
from .mcmc import BETA_C_2D, T_C_3D, IsingModel, SamplerConfig, SamplerError


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field path."""


_SCHEMA = {
    "lattice": {"dimension", "lengths"},
    "model": {"J", "perturbation", "strength"},
    "sampler": {"beta", "T", "T_over_Tc", "n_snapshots", "n_therm", "n_decor",
                "n_chains", "mix", "seed", "n_jobs"},
    "rg": {"n_steps"},
    "wfn": {"cutoff_inclusive", "bin_ratio", "block_size", "n_jobs"},
    "fit": {"window", "min_decades", "min_r2", "min_bins"},
    "analysis": {"max_d", "eta"},
    "io": {"output_dir"},
}
_REQUIRED = ("lattice", "sampler")


@dataclass(frozen=True)
class RunConfig:
    lattice: LatticeSpec
    model: IsingModel
    sampler: SamplerConfig
    n_rg_steps: int = 0
    cutoff_inclusive: bool = False
    bin_ratio: float = 1.3
    block_size: int = 256
    wfn_jobs: int | None = None
    window: tuple[int, int] | None = None
    min_decades: float = 1.0
    min_r2: float = 0.98
    min_bins: int = 5
    max_d: int | None = None
    eta: float = 0.25
    output_dir: Path = Path("snaprg-out")
    raw: dict = field(default_factory=dict, repr=False)


def load_config(path) -> RunConfig:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    except (yaml.YAMLError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: cannot parse: {exc}") from None
    return parse_config(doc or {})


def _get(section: dict, key: str, path: str, kind, default=None, required=False):
    if key not in section:
        if required:
            raise ConfigError(f"{path}.{key}: required")
        return default
    value = section[key]
    try:
        if kind is bool:
            if not isinstance(value, bool):
                raise TypeError
            return value
        if kind is int and (isinstance(value, bool) or float(value) != int(value)):
            raise TypeError
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{path}.{key}: expected {kind.__name__}, got {value!r}") from None


def parse_config(doc: dict) -> RunConfig:
    """Validate every section before any work starts."""
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a mapping")
    for key in doc:
        if key not in _SCHEMA:
            raise ConfigError(f"{key}: unknown section")
    for name, allowed in _SCHEMA.items():
        sec = doc.get(name, {})
        if sec is None:
            sec = {}
        if not isinstance(sec, dict):
            raise ConfigError(f"{name}: expected a mapping")
        for key in sec:
            if key not in allowed:
                raise ConfigError(f"{name}.{key}: unknown key")
    for name in _REQUIRED:
        if name not in doc:
            raise ConfigError(f"{name}: required section missing")

    lat_s = doc["lattice"]
    dim = _get(lat_s, "dimension", "lattice", int, required=True)
    lengths = lat_s.get("lengths")
    if not isinstance(lengths, list):
        raise ConfigError("lattice.lengths: expected a list of integers")
    try:
        lattice = build_lattice(dim, lengths)
    except (LatticeError, TypeError, ValueError) as exc:
        raise ConfigError(f"lattice: {exc}") from None

    mod_s = doc.get("model") or {}
    try:
        model = IsingModel(
            lattice,
            J=_get(mod_s, "J", "model", float, 1.0),
            perturbation=_get(mod_s, "perturbation", "model", str, "none"),
            strength=_get(mod_s, "strength", "model", float),
        )
    except SamplerError as exc:
        raise ConfigError(f"model: {exc}") from None

    smp = doc["sampler"]
    temps = [k for k in ("beta", "T", "T_over_Tc") if k in smp]
    if len(temps) != 1:
        raise ConfigError("sampler: give exactly one of beta, T, T_over_Tc")
    if "beta" in smp:
        beta = _get(smp, "beta", "sampler", float)
    elif "T" in smp:
        T = _get(smp, "T", "sampler", float)
        if not T > 0:
            raise ConfigError("sampler.T: must be positive")
        beta = 1.0 / T
    else:
        frac = _get(smp, "T_over_Tc", "sampler", float)
        if not frac > 0:
            raise ConfigError("sampler.T_over_Tc: must be positive")
        if model.perturbation == "nnn":
            raise ConfigError("sampler.T_over_Tc: no reference T_c for the nnn model; give beta")
        t_c = 1.0 / BETA_C_2D if dim == 2 else T_C_3D
        beta = 1.0 / (frac * t_c)
    default_mix = 0.5 if model.z2_symmetric else 0.0
    try:
        sampler = SamplerConfig(
            beta=beta,
            n_snapshots=_get(smp, "n_snapshots", "sampler", int, required=True),
            n_therm=_get(smp, "n_therm", "sampler", int, 1000),
            n_decor=_get(smp, "n_decor", "sampler", int, 10),
            n_chains=_get(smp, "n_chains", "sampler", int, 1),
            mix=_get(smp, "mix", "sampler", float, default_mix),
            seed=_get(smp, "seed", "sampler", int, 0),
            n_jobs=_get(smp, "n_jobs", "sampler", int, 1),
        )
    except SamplerError as exc:
        raise ConfigError(str(exc)) from None
    if sampler.mix > 0 and not model.z2_symmetric:
        raise ConfigError("sampler.mix: Wolff updates are invalid with a field; set 0")

    rg_s = doc.get("rg") or {}
    n_steps = _get(rg_s, "n_steps", "rg", int, 0)
    if n_steps < 0 or n_steps > max_rg_steps(lattice):
        raise ConfigError(
            f"rg.n_steps: {n_steps} outside [0, {max_rg_steps(lattice)}] for this lattice"
        )

    wfn_s = doc.get("wfn") or {}
    ratio = _get(wfn_s, "bin_ratio", "wfn", float, 1.3)
    if not ratio > 1:
        raise ConfigError("wfn.bin_ratio: must exceed 1")
    block = _get(wfn_s, "block_size", "wfn", int, 256)
    if block < 1:
        raise ConfigError("wfn.block_size: must be positive")

    fit_s = doc.get("fit") or {}
    window = fit_s.get("window", "auto")
    if window in (None, "auto"):
        window = None
    elif (isinstance(window, list) and len(window) == 2
          and all(isinstance(v, (int, float)) for v in window) and window[0] < window[1]):
        window = (int(window[0]), int(window[1]))
    else:
        raise ConfigError(f"fit.window: expected 'auto' or [k_low, k_high], got {window!r}")

    ana_s = doc.get("analysis") or {}
    max_d = _get(ana_s, "max_d", "analysis", int)
    if max_d is not None and max_d < 0:
        raise ConfigError("analysis.max_d: must be non-negative")

    io_s = doc.get("io") or {}
    return RunConfig(
        lattice=lattice,
        model=model,
        sampler=sampler,
        n_rg_steps=n_steps,
        cutoff_inclusive=_get(wfn_s, "cutoff_inclusive", "wfn", bool, False),
        bin_ratio=ratio,
        block_size=block,
        wfn_jobs=_get(wfn_s, "n_jobs", "wfn", int),
        window=window,
        min_decades=_get(fit_s, "min_decades", "fit", float, 1.0),
        min_r2=_get(fit_s, "min_r2", "fit", float, 0.98),
        min_bins=_get(fit_s, "min_bins", "fit", int, 5),
        max_d=max_d,
        eta=_get(ana_s, "eta", "analysis", float, 0.25),
        output_dir=Path(_get(io_s, "output_dir", "io", str, "snaprg-out")),
        raw=doc,
    )
