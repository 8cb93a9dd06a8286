"""Dataset assembly: balanced, stratified 80/20 splits of rasterized segments."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..analytics.maps import rasterize_pressure_map
from ..gateway.segment import GaitSegment
from ..records import Foot
from ..sim.cohort import ImpairmentLevel

LEVELS = [ImpairmentLevel.MILD, ImpairmentLevel.MODERATE, ImpairmentLevel.SEVERE]
TRAIN_FRACTION = 0.8


@dataclass
class Dataset:
    left_maps: np.ndarray  # (n, H, W)
    right_maps: np.ndarray
    labels: np.ndarray  # (n,) int class indices
    train_idx: np.ndarray
    test_idx: np.ndarray
    split_seed: int
    class_counts: Dict[str, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, idx: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.left_maps[idx], self.right_maps[idx], self.labels[idx]


def maps_from_segments(segments: Sequence[GaitSegment], map_size: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    left = np.empty((len(segments), map_size, map_size))
    right = np.empty((len(segments), map_size, map_size))
    labels = np.empty(len(segments), dtype=int)
    for i, seg in enumerate(segments):
        if seg.label is None:
            raise ValueError("segment without label cannot join a dataset")
        left[i] = rasterize_pressure_map(seg, Foot.LEFT, map_size, map_size).values
        right[i] = rasterize_pressure_map(seg, Foot.RIGHT, map_size, map_size).values
        labels[i] = seg.label.index
    return left, right, labels


def build_dataset_from_arrays(
    left: np.ndarray, right: np.ndarray, labels: np.ndarray, seed: int
) -> Dataset:
    """Balance to the minority class, shuffle, and split 80/20 stratified."""
    rng = np.random.default_rng([int(seed) & 0xFFFFFFFF, 0xDA7A])
    per_class = [np.nonzero(labels == level.index)[0] for level in LEVELS]
    for level, idx in zip(LEVELS, per_class):
        if len(idx) == 0:
            raise ValueError(f"dataset needs at least one segment of class {level.value}")
    minority = min(len(idx) for idx in per_class)

    train_parts: List[np.ndarray] = []
    test_parts: List[np.ndarray] = []
    kept_counts: Dict[str, int] = {}
    for level, idx in zip(LEVELS, per_class):
        chosen = rng.choice(idx, size=minority, replace=False)
        chosen = rng.permutation(chosen)
        n_train = int(round(TRAIN_FRACTION * minority))
        train_parts.append(chosen[:n_train])
        test_parts.append(chosen[n_train:])
        kept_counts[level.value] = minority

    train_idx = rng.permutation(np.concatenate(train_parts))
    test_idx = rng.permutation(np.concatenate(test_parts))
    return Dataset(
        left_maps=np.asarray(left, dtype=np.float64),
        right_maps=np.asarray(right, dtype=np.float64),
        labels=np.asarray(labels, dtype=int),
        train_idx=train_idx,
        test_idx=test_idx,
        split_seed=seed,
        class_counts=kept_counts,
    )


def build_dataset(segments: Sequence[GaitSegment], seed: int, map_size: int = 56) -> Dataset:
    left, right, labels = maps_from_segments(segments, map_size)
    return build_dataset_from_arrays(left, right, labels, seed)
