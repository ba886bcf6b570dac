"""Labeled training data from laser sweeps.

Each finite beam return contributes an unsafe (-1) sample at the hit point
and, when the return exceeds the pullback offset, a safe (+1) sample pulled
back along the same beam by that offset. Sets from successive sweeps are
merged with voxel-hash spatial deduplication so online aggregation stays
bounded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .sensor import LaserScan, scan_to_world

SAFE = 1
UNSAFE = -1


@dataclass
class TrainingSet:
    positions: np.ndarray = field(default_factory=lambda: np.empty((0, 2)))
    labels: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))
    timestamps: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def safe_positions(self) -> np.ndarray:
        return self.positions[self.labels == SAFE]

    @property
    def unsafe_positions(self) -> np.ndarray:
        return self.positions[self.labels == UNSAFE]

    def has_both_labels(self) -> bool:
        return SAFE in self.labels and UNSAFE in self.labels

    def to_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write("x,y,label,t\n")
            for (x, y), lab, t in zip(self.positions, self.labels, self.timestamps):
                f.write(f"{float(x)!r},{float(y)!r},{int(lab)},{float(t)!r}\n")


def generate_training_data(scan: LaserScan, offset_d: float) -> TrainingSet:
    """One unsafe sample per finite beam at the hit point, plus a safe sample
    pulled back by offset_d along the beam when the return allows it."""
    if offset_d <= 0:
        raise ValueError("offset_d must be positive")
    positions, labels = [], []
    for i in scan.finite_indices():
        r = float(scan.ranges[i])
        positions.append(scan_to_world(scan, i, r))
        labels.append(UNSAFE)
        if r > offset_d:
            positions.append(scan_to_world(scan, i, r - offset_d))
            labels.append(SAFE)
    if not positions:
        return TrainingSet()
    pos = np.asarray(positions)
    return TrainingSet(positions=pos, labels=np.asarray(labels, dtype=int),
                       timestamps=np.full(len(pos), scan.timestamp))


class _VoxelIndex:
    """Uniform hash grid answering 'is any same-label point within tol?'."""

    def __init__(self, tol: float):
        # Tolerances below any physical precision degenerate to exact-match
        # dedup (and would overflow the cell index).
        self.tol = tol if tol >= 1e-9 else 0.0
        self.cells: dict[tuple[int, int, int], list[np.ndarray]] = {}

    def _key(self, p, label) -> tuple[int, int, int]:
        if self.tol == 0.0:
            return (int(label), hash(float(p[0])), hash(float(p[1])))
        return (int(label), math.floor(p[0] / self.tol), math.floor(p[1] / self.tol))

    def probe_and_add(self, p: np.ndarray, label: int) -> bool:
        """Add p unless a same-label point lies within tol; True if added."""
        if self.tol == 0.0:
            key = self._key(p, label)
            bucket = self.cells.setdefault(key, [])
            for q in bucket:
                if q[0] == p[0] and q[1] == p[1]:
                    return False
            bucket.append(p)
            return True
        _, ci, cj = self._key(p, label)
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                for q in self.cells.get((label, ci + di, cj + dj), ()):
                    if (p[0] - q[0]) ** 2 + (p[1] - q[1]) ** 2 <= self.tol ** 2:
                        return False
        self.cells.setdefault((label, ci, cj), []).append(p)
        return True


def aggregate(accumulated: TrainingSet, new: TrainingSet, dedup_tol: float) -> TrainingSet:
    """Union of the two sets, dropping new samples within dedup_tol of an
    existing same-label sample. Accumulated samples keep their order; kept new
    samples are appended in order."""
    if dedup_tol < 0:
        raise ValueError("dedup_tol must be nonnegative")
    index = _VoxelIndex(dedup_tol)
    for p, lab in zip(accumulated.positions, accumulated.labels):
        index.probe_and_add(p, int(lab))
    keep = [index.probe_and_add(p, int(lab))
            for p, lab in zip(new.positions, new.labels)]
    keep = np.asarray(keep, dtype=bool) if keep else np.empty(0, dtype=bool)
    return TrainingSet(
        positions=np.concatenate([accumulated.positions, new.positions[keep]]),
        labels=np.concatenate([accumulated.labels, new.labels[keep]]),
        timestamps=np.concatenate([accumulated.timestamps, new.timestamps[keep]]),
    )
