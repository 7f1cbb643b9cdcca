"""Versioned network checkpoint files.

Binary layout (all integers little-endian uint32):

    magic "SWOFFDQN" | version | M | n_layers | dims[n_layers+1]
    then per layer: weights (dims[i] x dims[i+1], float64 LE, row-major)
                    biases  (dims[i+1], float64 LE)

A sidecar `<path>.meta` holds training provenance (config, seed, feature
normalizers, reward scale) as sorted `key = value` lines. Loading validates
the header against the file contents and the caller's configuration.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Dict, Tuple, Union

import numpy as np

from .network import Network

MAGIC = b"SWOFFDQN"
FORMAT_VERSION = 1


class CheckpointError(RuntimeError):
    pass


def _meta_text(meta: Dict[str, object]) -> str:
    lines = [f"{k} = {meta[k]}" for k in sorted(meta)]
    return "\n".join(lines) + "\n"


def parse_meta(text: str) -> Dict[str, str]:
    out: Dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise CheckpointError(f"malformed metadata line {lineno}: {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def meta_path(path: Union[str, Path]) -> Path:
    return Path(str(path) + ".meta")


def save_checkpoint(path: Union[str, Path], net: Network, m: int, meta: Dict[str, object]) -> None:
    path = Path(path)
    dims = net.dims
    if dims[-1] != m + 1:
        raise CheckpointError(f"output width {dims[-1]} does not match M+1={m + 1}")
    header = MAGIC + struct.pack(
        f"<III{len(dims)}I", FORMAT_VERSION, m, len(net.weights), *dims
    )
    with open(path, "wb") as fh:
        fh.write(header)
        for w, b in zip(net.weights, net.biases):
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes(order="C"))
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes(order="C"))
    full_meta = dict(meta)
    full_meta.setdefault("format_version", FORMAT_VERSION)
    full_meta.setdefault("m", m)
    full_meta.setdefault("dims", ",".join(str(d) for d in dims))
    meta_path(path).write_text(_meta_text(full_meta))


def load_checkpoint(path: Union[str, Path]) -> Tuple[Network, Dict[str, str]]:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint file not found: {path}")
    blob = path.read_bytes()
    if blob[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path} is not a checkpoint (bad magic)")
    off = len(MAGIC)
    version, m, n_layers = struct.unpack_from("<III", blob, off)
    off += 12
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format version {version}")
    dims = struct.unpack_from(f"<{n_layers + 1}I", blob, off)
    off += 4 * (n_layers + 1)
    if dims[-1] != m + 1:
        raise CheckpointError("checkpoint header is inconsistent: output width != M+1")
    expected = off + sum(8 * (dims[i] * dims[i + 1] + dims[i + 1]) for i in range(n_layers))
    if len(blob) < expected:
        raise CheckpointError(
            f"{path} is truncated: {len(blob)} bytes, header promises {expected}"
        )
    weights = []
    biases = []
    for i in range(n_layers):
        n_in, n_out = dims[i], dims[i + 1]
        w = np.frombuffer(blob, dtype="<f8", count=n_in * n_out, offset=off).reshape(n_in, n_out)
        off += 8 * n_in * n_out
        b = np.frombuffer(blob, dtype="<f8", count=n_out, offset=off)
        off += 8 * n_out
        weights.append(np.array(w, dtype=float))
        biases.append(np.array(b, dtype=float))
    if off != len(blob):
        raise CheckpointError(f"{path} has {len(blob) - off} trailing bytes; file is corrupt")
    mp = meta_path(path)
    if not mp.exists():
        raise CheckpointError(f"metadata sidecar not found: {mp}")
    meta = parse_meta(mp.read_text())
    meta.setdefault("m", str(m))
    return Network(weights=weights, biases=biases), meta
