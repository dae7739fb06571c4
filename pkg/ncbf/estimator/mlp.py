"""Fully connected regression network and its model file format.

Model file (little-endian)::

    magic "MLPW" | u32 version | u32 layer_count | u32 dims[layer_count]
    u8 activation[layer_count - 1]
    f32 parameters, layer by layer: weights (out, in) row-major, then biases

Networks compute in float64 and are stored in float32.
"""

import enum
import math
import struct
from pathlib import Path

import numpy as np
import torch
from torch import nn

from ncbf.errors import CorruptFile, IncompatibleVersion, MissingArtifact, ShapeMismatch

from .base import BaseEstimator

MODEL_MAGIC = b"MLPW"
MODEL_VERSION = 1
MODEL_HEADER = struct.Struct("<4sII")


class Activation(enum.IntEnum):
    LINEAR = 0
    RELU = 1


def large_dims(num_users: int, num_elements: int) -> list[int]:
    return [2 * num_users, 1024, 512, 512, 256, 128, 64, num_elements]


def small_dims(num_users: int, num_elements: int) -> list[int]:
    return [2 * num_users, 256, 128, 128, 64, 32, 32, num_elements]


class MlpModel(nn.Module):
    def __init__(
        self,
        dims,
        hidden: Activation = Activation.RELU,
        output: Activation = Activation.LINEAR,
    ):
        super().__init__()
        if len(dims) < 2:
            raise ShapeMismatch(f"an MLP needs at least 2 layer dims, got {dims}")
        self.dims = tuple(int(d) for d in dims)
        self.hidden_activation = Activation(hidden)
        self.output_activation = Activation(output)
        self.layers = nn.ModuleList(
            nn.Linear(a, b, dtype=torch.float64)
            for a, b in zip(self.dims[:-1], self.dims[1:])
        )

    @property
    def activations(self) -> list[Activation]:
        hidden = [self.hidden_activation] * (len(self.layers) - 1)
        return hidden + [self.output_activation]

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[-1] != self.dims[0]:
            raise ShapeMismatch(
                f"input width {x.shape[-1]} does not match dims[0]={self.dims[0]}"
            )
        for layer, activation in zip(self.layers, self.activations):
            x = layer(x)
            if activation == Activation.RELU:
                x = torch.relu(x)
        return x

    @torch.no_grad()
    def quantize_(self) -> "MlpModel":
        """Round every parameter to the nearest float32 value, in place."""
        for p in self.parameters():
            p.copy_(p.to(torch.float32).to(torch.float64))
        return self

    def __repr__(self):
        return f"<MlpModel dims={list(self.dims)}>"


def init_model(dims, seed: int) -> MlpModel:
    """Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.

    Weights are drawn in float32 so a fresh model round-trips through the
    model file exactly.
    """
    model = MlpModel(dims)
    generator = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for layer in model.layers:
            fan_out, fan_in = layer.weight.shape
            bound = math.sqrt(6 / (fan_in + fan_out))
            draw = torch.empty(fan_out, fan_in, dtype=torch.float32)
            draw.uniform_(-bound, bound, generator=generator)
            layer.weight.copy_(draw.to(torch.float64))
            layer.bias.zero_()
    return model


def forward(model: MlpModel, inputs) -> np.ndarray:
    x = torch.as_tensor(np.asarray(inputs, dtype=np.float64))
    with torch.no_grad():
        return model(x).numpy()


def model_to_bytes(model: MlpModel) -> bytes:
    dims = model.dims
    parts = [
        MODEL_HEADER.pack(MODEL_MAGIC, MODEL_VERSION, len(dims)),
        struct.pack(f"<{len(dims)}I", *dims),
        struct.pack(f"<{len(dims) - 1}B", *model.activations),
    ]
    for layer in model.layers:
        parts.append(layer.weight.detach().numpy().astype("<f4").tobytes())
        parts.append(layer.bias.detach().numpy().astype("<f4").tobytes())
    return b"".join(parts)


def model_from_bytes(data: bytes) -> MlpModel:
    if len(data) < MODEL_HEADER.size:
        raise CorruptFile(f"model file truncated: {len(data)} header bytes")
    magic, version, layer_count = MODEL_HEADER.unpack_from(data)
    if magic != MODEL_MAGIC:
        raise CorruptFile(f"bad model magic {magic!r}")
    if version != MODEL_VERSION:
        raise IncompatibleVersion("model file", version, MODEL_VERSION)
    if layer_count < 2:
        raise CorruptFile(f"model file declares {layer_count} layers")

    offset = MODEL_HEADER.size
    tags_size = layer_count - 1
    if len(data) < offset + 4 * layer_count + tags_size:
        raise CorruptFile("model file truncated inside the layer table")
    dims = struct.unpack_from(f"<{layer_count}I", data, offset)
    offset += 4 * layer_count
    tags = struct.unpack_from(f"<{tags_size}B", data, offset)
    offset += tags_size

    n_params = sum(a * b + b for a, b in zip(dims[:-1], dims[1:]))
    if len(data) != offset + 4 * n_params:
        raise CorruptFile(
            f"model file has {len(data)} bytes, layer table promises "
            f"{offset + 4 * n_params}"
        )
    try:
        model = MlpModel(dims, hidden=tags[0], output=tags[-1])
    except ValueError as e:
        raise CorruptFile(f"unknown activation tag in {tags}") from e

    params = np.frombuffer(data, dtype="<f4", offset=offset).astype(np.float64)
    cursor = 0
    with torch.no_grad():
        for layer in model.layers:
            for p in (layer.weight, layer.bias):
                chunk = params[cursor : cursor + p.numel()]
                p.copy_(torch.from_numpy(chunk.reshape(p.shape)))
                cursor += p.numel()
    return model


def save_model(model: MlpModel, path):
    Path(path).write_bytes(model_to_bytes(model))


def load_model(path) -> MlpModel:
    path = Path(path)
    if not path.exists():
        raise MissingArtifact(f"model file {path} not found")
    return model_from_bytes(path.read_bytes())


class MlpEstimator(BaseEstimator):
    def __init__(self, model: MlpModel | None = None, path=None):
        if model is None:
            if path is None:
                raise ValueError("MlpEstimator needs a model or a path")
            model = load_model(path)
        self.model = model.eval()

    def predict(self, inputs: np.ndarray) -> np.ndarray:
        return forward(self.model, np.atleast_2d(inputs))
