"""Checkpoint files: named float64 arrays + metadata + optimizer moments.

A checkpoint is an ``.npz`` holding parameter arrays, optional Adam
moments, and a JSON metadata blob (format version, training step, model
kind, config hash, sha256 checksum of the parameter bytes).  Loading
verifies the checksum and, when requested, the config hash, so stale or
corrupt files fail loudly instead of silently degrading results.
"""

import hashlib
import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .neural import AdamState

FORMAT_VERSION = 1


class CheckpointError(RuntimeError):
    pass


def stable_hash(obj) -> str:
    """sha256 of a canonical JSON encoding; used for config identity."""
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def params_checksum(params) -> str:
    digest = hashlib.sha256()
    for name in sorted(params):
        digest.update(name.encode())
        digest.update(np.ascontiguousarray(params[name]).tobytes())
    return digest.hexdigest()


@dataclass
class Checkpoint:
    params: dict
    meta: dict
    adam: Optional[AdamState] = None


def save_checkpoint(path, params, meta, adam_state=None):
    meta = dict(meta)
    meta["format_version"] = FORMAT_VERSION
    meta["checksum"] = params_checksum(params)
    arrays = {f"p/{k}": v for k, v in params.items()}
    if adam_state is not None:
        arrays.update({f"am/{k}": v for k, v in adam_state.m.items()})
        arrays.update({f"av/{k}": v for k, v in adam_state.v.items()})
        meta["adam_t"] = adam_state.t
    arrays["__meta__"] = np.array(json.dumps(meta, sort_keys=True))
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)
    return path


def load_checkpoint(path, expect_config_hash=None) -> Checkpoint:
    with np.load(path, allow_pickle=False) as npz:
        try:
            meta = json.loads(str(npz["__meta__"]))
        except Exception as exc:
            raise CheckpointError(f"unreadable checkpoint metadata: {path}") from exc
        params = {k[2:]: npz[k].copy() for k in npz.files if k.startswith("p/")}
        adam_m = {k[3:]: npz[k].copy() for k in npz.files if k.startswith("am/")}
        adam_v = {k[3:]: npz[k].copy() for k in npz.files if k.startswith("av/")}
    if meta.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version in {path}")
    if params_checksum(params) != meta.get("checksum"):
        raise CheckpointError(f"checksum mismatch, checkpoint corrupt: {path}")
    if expect_config_hash is not None and meta.get("config_hash") != expect_config_hash:
        raise CheckpointError(
            f"config hash mismatch: checkpoint {meta.get('config_hash')} vs "
            f"expected {expect_config_hash}")
    adam = None
    if adam_m:
        adam = AdamState(params)
        adam.m = adam_m
        adam.v = adam_v
        adam.t = int(meta.get("adam_t", 0))
    return Checkpoint(params=params, meta=meta, adam=adam)
