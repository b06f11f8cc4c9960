"""PathSet container and its on-disk format.

A PathSet is written as two files sharing a stem:

* ``<stem>.npy`` -- float64 array of shape (L, N, M), gross returns per
  rebalance period (or per month, see ``provenance["granularity"]``).
* ``<stem>.json`` -- sidecar with provenance: source (bootstrap | synthetic |
  historical), generation config, seed, shape, and for bootstrap sets the
  SHA-256 of the source panel returns.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1


@dataclass
class PathSet:
    returns: np.ndarray  # (L, N, M)
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        r = np.asarray(self.returns, dtype=float)
        if r.ndim == 2:
            r = r[None]
        if r.ndim != 3 or min(r.shape) < 1:
            raise ValueError(f"PathSet needs an (L, N, M) array, got shape {r.shape}")
        if not np.all(r > 0):
            raise ValueError("gross returns must be strictly positive")
        self.returns = r

    @property
    def n_paths(self) -> int:
        return self.returns.shape[0]

    @property
    def n_periods(self) -> int:
        return self.returns.shape[1]

    @property
    def n_assets(self) -> int:
        return self.returns.shape[2]

    def __len__(self):
        return self.n_paths

    def __getitem__(self, i) -> np.ndarray:
        return self.returns[i]


def array_checksum(a: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(a, dtype="<f8").tobytes()).hexdigest()


def _stem(path) -> Path:
    p = Path(path)
    return p.with_suffix("") if p.suffix in (".npy", ".json") else p


def save_pathset(ps: PathSet, path) -> tuple[Path, Path]:
    stem = _stem(path)
    stem.parent.mkdir(parents=True, exist_ok=True)
    npy, meta = stem.with_suffix(".npy"), stem.with_suffix(".json")
    np.save(npy, np.ascontiguousarray(ps.returns, dtype="<f8"), allow_pickle=False)
    L, N, M = ps.returns.shape
    sidecar = {"format_version": FORMAT_VERSION, "L": L, "N": N, "M": M, **ps.provenance}
    meta.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return npy, meta


def load_pathset(path) -> PathSet:
    stem = _stem(path)
    r = np.load(stem.with_suffix(".npy"), allow_pickle=False)
    meta_path = stem.with_suffix(".json")
    prov = json.loads(meta_path.read_text(encoding="utf-8")) if meta_path.exists() else {}
    for k in ("format_version", "L", "N", "M"):
        prov.pop(k, None)
    return PathSet(r, prov)
