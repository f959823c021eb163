"""Convolutional autoencoder with configurable depth and latent width.

Encoder: num_layers stride-2 3x3 convolutions with ReLU, channel schedule
min(32 * 2**i, 512), then a flatten and a plain affine map to the latent
code. Decoder mirrors it: affine back to the flattened size, reshape, ReLU,
transposed convolutions with ReLU, and a final sigmoid so pixels stay in
(0, 1). Checkpoints round-trip bit-exactly and carry a CRC-32 integrity
check.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .rng import Rng
from .tensor import ConvSpec, Tensor

CHECKPOINT_MAGIC = b"CAE1"
CHECKPOINT_VERSION = 1


class CheckpointError(Exception):
    """Base class for checkpoint load failures."""


class CheckpointIntegrityError(CheckpointError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


@dataclass(frozen=True)
class CaeConfig:
    num_layers: int = 5
    latent_dim: int = 64
    input_size: int = 128

    def __post_init__(self):
        if not 2 <= self.num_layers <= 6:
            raise ValueError(f"num_layers must be in [2, 6], got {self.num_layers}")
        if not 8 <= self.latent_dim <= 128:
            raise ValueError(f"latent_dim must be in [8, 128], got {self.latent_dim}")
        if self.input_size < 8 or self.input_size % (1 << self.num_layers) != 0:
            raise ValueError(
                f"input_size {self.input_size} not divisible by 2^{self.num_layers}"
            )

    @property
    def channels(self) -> tuple[int, ...]:
        return tuple(min(32 << i, 512) for i in range(self.num_layers))

    @property
    def bottleneck_side(self) -> int:
        return self.input_size >> self.num_layers

    @property
    def flat_size(self) -> int:
        return self.channels[-1] * self.bottleneck_side**2


class Cae:
    """Parameter set plus the forward computation."""

    def __init__(self, config: CaeConfig, params: dict[str, Tensor]):
        self.config = config
        self.params = params
        self.spec = ConvSpec()

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def encode(self, x: Tensor) -> Tensor:
        cfg = self.config
        n = x.shape[0]
        if x.ndim != 4 or x.shape[1:] != (1, cfg.input_size, cfg.input_size):
            raise ValueError(
                f"expected input (N,1,{cfg.input_size},{cfg.input_size}), got {x.shape}"
            )
        h = x
        for i in range(cfg.num_layers):
            h = T.relu(T.conv2d(h, self.params[f"enc{i}.w"], self.params[f"enc{i}.b"], self.spec))
        h = T.reshape(h, (n, cfg.flat_size))
        return T.dense(h, self.params["enc_fc.w"], self.params["enc_fc.b"])

    def decode(self, z: Tensor) -> Tensor:
        cfg = self.config
        n = z.shape[0]
        if z.ndim != 2 or z.shape[1] != cfg.latent_dim:
            raise ValueError(f"expected latent (N,{cfg.latent_dim}), got {z.shape}")
        h = T.dense(z, self.params["dec_fc.w"], self.params["dec_fc.b"])
        h = T.relu(T.reshape(h, (n, cfg.channels[-1], cfg.bottleneck_side, cfg.bottleneck_side)))
        for i in range(cfg.num_layers):
            h = T.conv_transpose2d(h, self.params[f"dec{i}.w"], self.params[f"dec{i}.b"], self.spec)
            h = T.sigmoid(h) if i == cfg.num_layers - 1 else T.relu(h)
        return h

    def forward(self, x: Tensor) -> Tensor:
        return self.decode(self.encode(x))

    __call__ = forward

    def num_parameters(self) -> int:
        return sum(p.size for p in self.params.values())


def _he_normal(rng: Rng, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    std = np.sqrt(2.0 / fan_in)
    return rng.normals(int(np.prod(shape))).reshape(shape) * std


def build_cae(config: CaeConfig, seed: int) -> Cae:
    """He-initialized parameters (zero biases), deterministic in the seed."""
    rng = Rng(seed)
    k = ConvSpec().kernel
    params: dict[str, Tensor] = {}

    def add(name: str, w: np.ndarray, bias_len: int) -> None:
        params[f"{name}.w"] = Tensor(w, requires_grad=True)
        params[f"{name}.b"] = Tensor(np.zeros(bias_len), requires_grad=True)

    chans = config.channels
    c_in = 1
    for i, c_out in enumerate(chans):
        add(f"enc{i}", _he_normal(rng, (c_out, c_in, k, k), c_in * k * k), c_out)
        c_in = c_out
    add("enc_fc", _he_normal(rng, (config.flat_size, config.latent_dim), config.flat_size), config.latent_dim)
    add("dec_fc", _he_normal(rng, (config.latent_dim, config.flat_size), config.latent_dim), config.flat_size)
    dec_chans = list(reversed(chans))[1:] + [1]
    c_in = chans[-1]
    for i, c_out in enumerate(dec_chans):
        add(f"dec{i}", _he_normal(rng, (c_in, c_out, k, k), c_in * k * k), c_out)
        c_in = c_out
    return Cae(config, params)


# ---------------------------------------------------------------------------
# checkpoint format: magic | payload | crc32(payload), little-endian
# payload: version u32 | num_layers u32 | latent_dim u32 | input_size u32 |
#          n_params u32 | records (name_len u32, name, ndim u32, dims u32*, f64 data)


def _checkpoint_payload(cae: Cae) -> bytes:
    cfg = cae.config
    parts = [
        struct.pack(
            "<5I",
            CHECKPOINT_VERSION,
            cfg.num_layers,
            cfg.latent_dim,
            cfg.input_size,
            len(cae.params),
        )
    ]
    for name, p in cae.params.items():
        nb = name.encode("utf-8")
        parts.append(struct.pack("<I", len(nb)))
        parts.append(nb)
        parts.append(struct.pack("<I", p.ndim))
        parts.append(struct.pack(f"<{p.ndim}I", *p.shape))
        parts.append(np.ascontiguousarray(p.data, dtype="<f8").tobytes())
    return b"".join(parts)


def save_checkpoint(cae: Cae, path) -> None:
    payload = _checkpoint_payload(cae)
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(payload)
        f.write(struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF))


def load_checkpoint(path) -> Cae:
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < len(CHECKPOINT_MAGIC) + 4 or not blob.startswith(CHECKPOINT_MAGIC):
        raise CheckpointError(f"{path}: not an autoencoder checkpoint")
    payload, (crc_stored,) = blob[4:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(payload) & 0xFFFFFFFF != crc_stored:
        raise CheckpointIntegrityError(f"{path}: checksum mismatch, file is corrupt")
    off = 0

    def take(fmt: str):
        nonlocal off
        vals = struct.unpack_from(fmt, payload, off)
        off += struct.calcsize(fmt)
        return vals

    version, num_layers, latent_dim, input_size, n_params = take("<5I")
    if version != CHECKPOINT_VERSION:
        raise CheckpointVersionError(
            f"{path}: checkpoint version {version}, expected {CHECKPOINT_VERSION}"
        )
    config = CaeConfig(num_layers=num_layers, latent_dim=latent_dim, input_size=input_size)
    params: dict[str, Tensor] = {}
    for _ in range(n_params):
        (name_len,) = take("<I")
        name = payload[off : off + name_len].decode("utf-8")
        off += name_len
        (ndim,) = take("<I")
        shape = take(f"<{ndim}I")
        count = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(payload, dtype="<f8", count=count, offset=off).reshape(shape)
        off += count * 8
        params[name] = Tensor(arr.copy(), requires_grad=True)
    return Cae(config, params)
