"""Binary containers for datasets (``C2BD``) and model checkpoints (``C2BM``).

Layout::

    magic      4 bytes
    version    uint32, little endian
    hlen       uint64, little endian
    header     hlen bytes of UTF-8 JSON; ``blocks`` lists (name, shape) in payload order
    payload    little-endian float64 blocks, back to back
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from ..grids import Grid
from ..model import C2BNet
from ..nn import Layer, Mlp
from ..pde.dataset import Dataset

DATASET_MAGIC = b"C2BD"
MODEL_MAGIC = b"C2BM"
VERSION = 1
_PREFIX = struct.Struct("<4sIQ")


class FormatError(ValueError):
    """Unreadable container. ``code`` is one of ``bad_magic``, ``bad_version``,
    ``truncated_header``, ``truncated_payload``, ``bad_header``, ``shape_mismatch``."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


def _pack(magic: bytes, header: dict, blocks: list[tuple[str, np.ndarray]]) -> bytes:
    header = dict(header)
    header["blocks"] = [{"name": name, "shape": list(np.shape(a))} for name, a in blocks]
    raw = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [_PREFIX.pack(magic, VERSION, len(raw)), raw]
    parts += [np.ascontiguousarray(a, dtype="<f8").tobytes() for _, a in blocks]
    return b"".join(parts)


def _unpack(buf: bytes, magic: bytes) -> tuple[dict, dict[str, np.ndarray]]:
    if len(buf) < _PREFIX.size:
        raise FormatError("truncated_header", "file shorter than the fixed prefix")
    got, version, hlen = _PREFIX.unpack_from(buf)
    if got != magic:
        raise FormatError("bad_magic", f"expected {magic!r}, found {got!r}")
    if version != VERSION:
        raise FormatError("bad_version", f"unsupported container version {version}")
    start = _PREFIX.size
    if len(buf) < start + hlen:
        raise FormatError("truncated_header", "header runs past the end of the file")
    try:
        header = json.loads(buf[start : start + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError("bad_header", str(exc)) from None
    offset = start + hlen
    arrays = {}
    for block in header.get("blocks", []):
        shape = tuple(int(s) for s in block["shape"])
        nbytes = 8 * int(np.prod(shape, dtype=np.int64))
        if len(buf) < offset + nbytes:
            raise FormatError("truncated_payload", f"block {block['name']!r} is incomplete")
        arrays[block["name"]] = np.frombuffer(buf, dtype="<f8", count=nbytes // 8, offset=offset).reshape(shape).astype(np.float64)
        offset += nbytes
    if offset != len(buf):
        raise FormatError("shape_mismatch", f"{len(buf) - offset} trailing bytes after the last block")
    return header, arrays


def _write_atomic(path: Path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dataset_bytes(data: Dataset) -> bytes:
    header = {
        "problem": data.problem,
        "input_grid": data.input_grid.to_dict(),
        "output_grid": data.output_grid.to_dict(),
        "seeds": [int(s) for s in data.seeds],
        "noise_sigma": data.noise_sigma,
        "profile": data.profile,
        "meta": data.meta,
    }
    return _pack(DATASET_MAGIC, header, [("inputs", data.inputs), ("outputs", data.outputs)])


def dataset_from_bytes(buf: bytes) -> Dataset:
    header, arrays = _unpack(buf, DATASET_MAGIC)
    try:
        return Dataset(
            problem=header["problem"],
            inputs=arrays["inputs"],
            outputs=arrays["outputs"],
            input_grid=Grid.from_dict(header["input_grid"]),
            output_grid=Grid.from_dict(header["output_grid"]),
            seeds=np.array(header["seeds"], dtype=np.uint64),
            noise_sigma=float(header["noise_sigma"]),
            profile=header["profile"],
            meta=header.get("meta", {}),
        )
    except KeyError as exc:
        raise FormatError("bad_header", f"missing field {exc}") from None
    except ValueError as exc:
        raise FormatError("shape_mismatch", str(exc)) from None


def save_dataset(data: Dataset, path) -> None:
    _write_atomic(Path(path), dataset_bytes(data))


def load_dataset(path) -> Dataset:
    return dataset_from_bytes(Path(path).read_bytes())


def model_bytes(net: C2BNet) -> bytes:
    layers = []
    blocks = []
    for k, layer in enumerate(net.mlp.layers):
        layers.append({"activation": layer.activation, "has_bias": layer.bias is not None})
        blocks.append((f"W{k}", layer.weights))
        if layer.bias is not None:
            blocks.append((f"b{k}", layer.bias))
    blocks += [("mean", net.mean), ("std", net.std)]
    header = {
        "layers": layers,
        "input_grid": None if net.input_grid is None else net.input_grid.to_dict(),
        "output_grid": None if net.output_grid is None else net.output_grid.to_dict(),
        "meta": net.meta,
    }
    return _pack(MODEL_MAGIC, header, blocks)


def model_from_bytes(buf: bytes) -> C2BNet:
    header, arrays = _unpack(buf, MODEL_MAGIC)
    try:
        layers = []
        for k, spec in enumerate(header["layers"]):
            bias = arrays[f"b{k}"] if spec["has_bias"] else None
            layers.append(Layer(arrays[f"W{k}"], bias, spec["activation"]))
        for a, b in zip(layers, layers[1:]):
            if a.weights.shape[1] != b.weights.shape[0]:
                raise FormatError("shape_mismatch", "layer dimensions do not chain")
        mlp = Mlp(layers)
        if arrays["mean"].shape != (mlp.in_dim,) or arrays["std"].shape != (mlp.in_dim,):
            raise FormatError("shape_mismatch", "standardiser does not match the input dimension")
        grid = lambda d: None if d is None else Grid.from_dict(d)  # noqa: E731
        return C2BNet(
            mlp, arrays["mean"], arrays["std"], grid(header["input_grid"]), grid(header["output_grid"]), header.get("meta", {})
        )
    except KeyError as exc:
        raise FormatError("bad_header", f"missing field {exc}") from None


def save_model(net: C2BNet, path) -> None:
    _write_atomic(Path(path), model_bytes(net))


def load_model(path) -> C2BNet:
    return model_from_bytes(Path(path).read_bytes())
