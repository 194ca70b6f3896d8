"""Ising snapshot sampling, decimation RG and wave-function-network statistics."""

from .dataset import (
    DatasetError,
    DedupDataset,
    SnapshotDataset,
    deduplicate,
    ingest_text,
    read_dataset,
    write_dataset,
)
from .estimators import PowerLawDegreeFit, SnapshotRG, WaveFunctionNetwork
from .lattice import (
    LatticeError,
    LatticeSpec,
    build_lattice,
    decimation_mask,
    max_rg_steps,
    neighbor_table,
)
from .mcmc import (
    BETA_C_2D,
    T_C_2D,
    T_C_3D,
    IsingModel,
    SamplerConfig,
    binder_cumulant,
    exact_enumeration,
    locate_critical_temperature,
    sample_snapshots,
)
from .rg import apply_rg, rg_flow
from .stats import (
    correlation_function,
    correlation_length,
    fit_power_law,
    ks_distance,
    log_binned_histogram,
    rescale_correlation,
)
from .wfn import WfnResult, build_wfn, hamming

__version__ = "0.1.0"

__all__ = [
    "BETA_C_2D", "T_C_2D", "T_C_3D",
    "DatasetError", "DedupDataset", "IsingModel", "LatticeError", "LatticeSpec",
    "PowerLawDegreeFit", "SamplerConfig", "SnapshotDataset", "SnapshotRG",
    "WaveFunctionNetwork", "WfnResult",
    "apply_rg", "binder_cumulant", "build_lattice", "build_wfn", "correlation_function",
    "correlation_length", "decimation_mask", "deduplicate", "exact_enumeration",
    "fit_power_law", "hamming", "ingest_text", "ks_distance", "locate_critical_temperature",
    "log_binned_histogram", "max_rg_steps", "neighbor_table", "read_dataset",
    "rescale_correlation", "rg_flow", "sample_snapshots", "write_dataset",
]
