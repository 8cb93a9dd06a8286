"""Dual-stream impairment classifier.

Two convolutional encoders with separate weights (one per foot) feed a
concatenated feature vector into an MLP head; each hidden head layer is
Linear -> BatchNorm -> ReLU -> Dropout, and the final layer is
zero-initialized so an untrained model outputs the uniform distribution.
At paper scale the head is 4096 -> 1024 -> 256 -> 3; the desk-scale default
keeps the same shape at 2F -> 1024 -> 256 -> 3 with a smaller encoder.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .layers import BatchNorm, Conv2d, Dropout, Layer, Linear, Parameter, ReLU, softmax

NUM_CLASSES = 3


@dataclass
class ModelConfig:
    map_size: int = 56
    encoder_channels: Tuple[int, ...] = (8, 16, 32)
    feature_dim: int = 128
    head_hidden: Tuple[int, ...] = (1024, 256)
    dropout_p: float = 0.3
    lr: float = 1e-4
    weight_decay: float = 1e-5
    batch_size: int = 32
    patience: int = 15
    max_epochs: int = 200
    val_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        self.encoder_channels = tuple(self.encoder_channels)
        self.head_hidden = tuple(self.head_hidden)

    @property
    def head_dims(self) -> List[int]:
        return [2 * self.feature_dim, *self.head_hidden, NUM_CLASSES]

    def to_dict(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict) -> "ModelConfig":
        return cls(**data)


class Encoder:
    """Strided conv blocks (Conv -> BN -> ReLU) then a linear projection to F features."""

    def __init__(self, config: ModelConfig, rng: np.random.Generator, name: str):
        self.layers: List[Layer] = []
        in_ch = 1
        size = config.map_size
        for i, out_ch in enumerate(config.encoder_channels):
            conv = Conv2d(in_ch, out_ch, rng, f"{name}.conv{i}")
            self.layers += [conv, BatchNorm(out_ch, f"{name}.bn{i}"), ReLU()]
            size = conv.out_size(size, size)[0]
            in_ch = out_ch
        self.flat_dim = in_ch * size * size
        self.project = Linear(self.flat_dim, config.feature_dim, rng, f"{name}.project")
        self.act = ReLU()
        self._pre_flatten_shape: Optional[Tuple[int, ...]] = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        out = x[:, None, :, :]  # single input channel
        for layer in self.layers:
            out = layer.forward(out)
        self._pre_flatten_shape = out.shape
        flat = out.reshape(out.shape[0], -1)
        return self.act.forward(self.project.forward(flat))

    def backward(self, dy: np.ndarray) -> None:
        d = self.project.backward(self.act.backward(dy))
        d = d.reshape(self._pre_flatten_shape)
        for layer in reversed(self.layers):
            d = layer.backward(d)

    def sublayers(self) -> List[Layer]:
        return [*self.layers, self.project, self.act]


class MlpHead:
    """Hidden layers with BatchNorm/ReLU/Dropout; zero-initialized output layer."""

    def __init__(self, dims: Sequence[int], dropout_p: float, rng: np.random.Generator,
                 dropout_rng: np.random.Generator, name: str = "head"):
        if dims[-1] != NUM_CLASSES:
            raise ValueError(f"head must end in {NUM_CLASSES} classes")
        self.blocks: List[List[Layer]] = []
        for i in range(len(dims) - 2):
            self.blocks.append(
                [
                    Linear(dims[i], dims[i + 1], rng, f"{name}.fc{i}"),
                    BatchNorm(dims[i + 1], f"{name}.bn{i}"),
                    ReLU(),
                    Dropout(dropout_p, dropout_rng),
                ]
            )
        self.out = Linear(dims[-2], dims[-1], rng, f"{name}.out", zero_init=True)

    def forward(self, x: np.ndarray) -> np.ndarray:
        for block in self.blocks:
            for layer in block:
                x = layer.forward(x)
        return self.out.forward(x)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        d = self.out.backward(dy)
        for block in reversed(self.blocks):
            for layer in reversed(block):
                d = layer.backward(d)
        return d

    def sublayers(self) -> List[Layer]:
        return [layer for block in self.blocks for layer in block] + [self.out]


class ImpairmentNet:
    def __init__(self, config: ModelConfig):
        self.config = config
        rng = np.random.default_rng([config.seed & 0xFFFFFFFF, 0x11E7])
        self.dropout_rng = np.random.default_rng([config.seed & 0xFFFFFFFF, 0xD120])
        self.encoder_left = Encoder(config, rng, "enc_left")
        self.encoder_right = Encoder(config, rng, "enc_right")
        self.head = MlpHead(config.head_dims, config.dropout_p, rng, self.dropout_rng)
        self._feature_dim = config.feature_dim

    def _all_layers(self) -> List[Layer]:
        return self.encoder_left.sublayers() + self.encoder_right.sublayers() + self.head.sublayers()

    def set_train(self, train: bool) -> None:
        for layer in self._all_layers():
            layer.train_mode = train

    def forward(self, left: np.ndarray, right: np.ndarray, train: bool = False) -> np.ndarray:
        """Logits for a batch of (left, right) maps of shape (N, H, W)."""
        expected = (self.config.map_size, self.config.map_size)
        if left.shape[1:] != expected or right.shape[1:] != expected:
            raise ValueError(f"maps must be {expected}, got {left.shape[1:]} / {right.shape[1:]}")
        self.set_train(train)
        f_left = self.encoder_left.forward(np.asarray(left, dtype=np.float64))
        f_right = self.encoder_right.forward(np.asarray(right, dtype=np.float64))
        features = np.concatenate([f_left, f_right], axis=1)
        return self.head.forward(features)

    def forward_proba(self, left: np.ndarray, right: np.ndarray, train: bool = False) -> np.ndarray:
        return softmax(self.forward(left, right, train=train))

    def backward(self, dlogits: np.ndarray) -> None:
        dfeat = self.head.backward(dlogits)
        self.encoder_left.backward(dfeat[:, : self._feature_dim])
        self.encoder_right.backward(dfeat[:, self._feature_dim :])

    def parameters(self) -> List[Parameter]:
        return [p for layer in self._all_layers() for p in layer.parameters()]

    def buffers(self) -> Dict[str, np.ndarray]:
        out: Dict[str, np.ndarray] = {}
        for layer in self._all_layers():
            out.update(layer.buffers())
        return out

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def state_tensors(self) -> Dict[str, np.ndarray]:
        tensors = {p.name: p.value for p in self.parameters()}
        tensors.update(self.buffers())
        return tensors

    def load_state(self, tensors: Dict[str, np.ndarray]) -> None:
        own = self.state_tensors()
        missing = set(own) - set(tensors)
        if missing:
            raise KeyError(f"checkpoint missing tensors: {sorted(missing)[:3]}")
        for name, arr in own.items():
            if arr.shape != tensors[name].shape:
                raise ValueError(f"shape mismatch for {name}")
            arr[...] = tensors[name]
