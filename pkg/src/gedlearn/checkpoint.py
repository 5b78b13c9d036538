"""Versioned JSON checkpoints of named, shaped float arrays."""

from __future__ import annotations

import json

import numpy as np

FORMAT_VERSION = 1


def save_arrays(path, kind: str, arrays: dict, meta: dict | None = None) -> None:
    """Write named arrays with their shapes; floats round-trip exactly."""
    payload = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "meta": meta or {},
        "arrays": {
            name: {"shape": list(np.asarray(a).shape),
                   "data": np.asarray(a, dtype=np.float64).reshape(-1).tolist()}
            for name, a in arrays.items()
        },
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, sort_keys=True)
        f.write("\n")


def load_arrays(path, expect_kind: str | None = None):
    """Read a checkpoint back as (arrays, meta)."""
    with open(path, "r", encoding="utf-8") as f:
        payload = json.load(f)
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version!r}")
    if expect_kind is not None and payload.get("kind") != expect_kind:
        raise ValueError(f"expected a {expect_kind!r} checkpoint, found {payload.get('kind')!r}")
    arrays = {
        name: np.asarray(rec["data"], dtype=np.float64).reshape(rec["shape"])
        for name, rec in payload["arrays"].items()
    }
    return arrays, payload.get("meta", {})
