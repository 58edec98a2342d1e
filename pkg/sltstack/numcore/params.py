"""
Model Parameters
Named parameter collections, seeded initialisation and the SQBR1 checkpoint format
"""

import json
import struct
from collections import OrderedDict
from pathlib import Path
from typing import Dict, Iterator, Mapping, Tuple, Union

import numpy as np

from ..errors import CheckpointFormatError, ConfigError
from .tensor import Tensor, default_dtype

CHECKPOINT_MAGIC = b"SQBR1"

# A detached snapshot of a ModelParams, what gets averaged and written to disk
Checkpoint = Dict[str, np.ndarray]


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None) -> np.ndarray:
    """Uniform(-r, r) with r = sqrt(6 / (fan_in + fan_out))"""
    shape = (fan_in, fan_out) if shape is None else shape
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(default_dtype())


class ModelParams:
    """Ordered mapping of parameter name to trainable leaf Tensor"""

    def __init__(self):
        self._tensors: "OrderedDict[str, Tensor]" = OrderedDict()

    def add(self, name: str, value: np.ndarray) -> Tensor:
        if name in self._tensors:
            raise ConfigError(f"duplicate parameter name {name}")
        tensor = Tensor(np.array(value, dtype=default_dtype()), requires_grad=True, name=name)
        self._tensors[name] = tensor
        return tensor

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def items(self):
        return self._tensors.items()

    def names(self):
        return list(self._tensors)

    def subset(self, prefix: str) -> Dict[str, Tensor]:
        return {name: t for name, t in self._tensors.items() if name.startswith(prefix)}

    def num_parameters(self) -> int:
        return int(sum(t.data.size for t in self._tensors.values()))

    def zero_grad(self) -> None:
        for tensor in self._tensors.values():
            tensor.zero_grad()

    def grads(self) -> Dict[str, np.ndarray]:
        """Gradients after a backward pass; unreached parameters report zeros"""
        return {
            name: (t.grad if t.grad is not None else np.zeros_like(t.data))
            for name, t in self._tensors.items()
        }

    def copy(self) -> "ModelParams":
        """Independent parameters with the same names and values"""
        clone = ModelParams()
        for name, tensor in self._tensors.items():
            clone.add(name, tensor.data.copy())
        return clone

    def snapshot(self) -> Checkpoint:
        return OrderedDict((name, t.data.astype(np.float32, copy=True)) for name, t in self._tensors.items())

    def load(self, arrays: Mapping[str, np.ndarray], strict: bool = True) -> None:
        """
        Copy values into the parameters

        Args:
            arrays: name -> array, e.g. a checkpoint
            strict: reject missing or unexpected names

        Raises:
            ConfigError: naming the first layer whose name or shape does not match
        """
        if strict:
            missing = [n for n in self._tensors if n not in arrays]
            unexpected = [n for n in arrays if n not in self._tensors]
            if missing or unexpected:
                raise ConfigError(f"checkpoint mismatch: missing {missing[:5]}, unexpected {unexpected[:5]}")
        for name, value in arrays.items():
            if name not in self._tensors:
                continue
            tensor = self._tensors[name]
            if tuple(value.shape) != tensor.shape:
                raise ConfigError(f"layer {name}: checkpoint shape {tuple(value.shape)} != model shape {tensor.shape}")
            tensor.data = np.array(value, dtype=tensor.data.dtype)


def save_checkpoint(path: Union[str, Path], checkpoint: Mapping[str, np.ndarray]) -> None:
    """Write ``SQBR1 | u32 manifest length | JSON manifest | little-endian float32 data``"""
    manifest = [{"name": name, "shape": list(arr.shape)} for name, arr in checkpoint.items()]
    header = json.dumps(manifest, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<I", len(header)))
        f.write(header)
        for arr in checkpoint.values():
            f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    raw = Path(path).read_bytes()
    if not raw.startswith(CHECKPOINT_MAGIC):
        raise CheckpointFormatError(f"{path}: missing SQBR1 magic")
    offset = len(CHECKPOINT_MAGIC)
    try:
        (header_len,) = struct.unpack_from("<I", raw, offset)
        offset += 4
        manifest = json.loads(raw[offset:offset + header_len].decode("utf-8"))
    except (struct.error, ValueError) as e:
        raise CheckpointFormatError(f"{path}: unreadable manifest ({e})") from e
    offset += header_len

    checkpoint: Checkpoint = OrderedDict()
    for entry in manifest:
        shape: Tuple[int, ...] = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        end = offset + 4 * count
        if end > len(raw):
            raise CheckpointFormatError(f"{path}: truncated at parameter {entry['name']}")
        checkpoint[entry["name"]] = np.frombuffer(raw[offset:end], dtype="<f4").reshape(shape).astype(np.float32)
        offset = end
    if offset != len(raw):
        raise CheckpointFormatError(f"{path}: {len(raw) - offset} trailing bytes")
    return checkpoint
