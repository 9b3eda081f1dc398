"""Recording loaders (CSV, raw binary, MAT-v5 subset) and dataset manifests."""

from .loaders import load_csv, load_raw, write_raw
from .manifest import DatasetManifest, ManifestEntry, load_manifest, parse_manifest
from .matfile import MatArray, load_mat_v5, read_mat_arrays

__all__ = [
    "DatasetManifest", "ManifestEntry", "MatArray",
    "load_csv", "load_manifest", "load_mat_v5", "load_raw",
    "parse_manifest", "read_mat_arrays", "write_raw",
]
