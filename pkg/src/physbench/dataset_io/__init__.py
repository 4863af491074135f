"""Dataset bundle format: ``system_meta.json`` plus ``trajectories.npz``."""

from .bundle import (
    ARRAY_FILE,
    CHANNEL_TABLES,
    META_FILE,
    DatasetBundle,
    bundles_equal,
    read_bundle,
    validate_bundle,
    write_bundle,
)
from .generate import (
    bundle_fixed_mask,
    bundle_trajectories,
    generate_bundle,
    mesh_bundle,
    spring_bundle,
    system_from_bundle,
    wave_bundle,
)
from .npy import decode_npy, encode_npy, read_npz, write_npz
from .ns_ingest import grid_edges, ingest_external_ns, ns_bundle, scene_masks, time_derivative

__all__ = [
    "ARRAY_FILE",
    "CHANNEL_TABLES",
    "META_FILE",
    "DatasetBundle",
    "bundle_fixed_mask",
    "bundle_trajectories",
    "bundles_equal",
    "decode_npy",
    "encode_npy",
    "generate_bundle",
    "grid_edges",
    "ingest_external_ns",
    "mesh_bundle",
    "ns_bundle",
    "read_bundle",
    "read_npz",
    "scene_masks",
    "spring_bundle",
    "system_from_bundle",
    "time_derivative",
    "validate_bundle",
    "wave_bundle",
    "write_bundle",
    "write_npz",
]
