"""Partition of the (viewpoint, light) grid into evaluation splits.

Viewpoints are split into train / held-out-validation / held-out-test sets
and lights into train / held-out-test sets.  Frames then fall into:

* ``train`` - train viewpoints under train lights,
* ``val`` - validation viewpoints, each under a small random subset of
  train lights (novel view, seen light),
* ``easy`` - test viewpoints under all train lights (novel view, seen light),
* ``hard`` - test viewpoints under held-out lights (novel view, novel light),
* ``unused`` - everything else (e.g. train viewpoints under held-out lights).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SPLIT_NAMES = ("train", "val", "easy", "hard", "unused")


@dataclass
class SplitAssignment:
    """Index sets (0-based) plus the derived frame partition."""

    n_views: int
    n_lights: int
    val_views: list[int]
    test_views: list[int]
    test_lights: list[int]
    val_lights: dict[int, list[int]]
    train: list[tuple[int, int]] = field(default_factory=list)
    val: list[tuple[int, int]] = field(default_factory=list)
    easy: list[tuple[int, int]] = field(default_factory=list)
    hard: list[tuple[int, int]] = field(default_factory=list)
    unused: list[tuple[int, int]] = field(default_factory=list)

    def frames(self, split: str) -> list[tuple[int, int]]:
        if split not in SPLIT_NAMES:
            raise ValueError(f"unknown split {split!r}; expected one of {SPLIT_NAMES}")
        return getattr(self, split)

    def to_dict(self) -> dict:
        return {
            "n_views": self.n_views,
            "n_lights": self.n_lights,
            "val_views": list(self.val_views),
            "test_views": list(self.test_views),
            "test_lights": list(self.test_lights),
            "val_lights": {str(k): list(v) for k, v in self.val_lights.items()},
            "frames": {name: [list(f) for f in self.frames(name)] for name in SPLIT_NAMES},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SplitAssignment":
        out = cls(
            n_views=d["n_views"],
            n_lights=d["n_lights"],
            val_views=list(d["val_views"]),
            test_views=list(d["test_views"]),
            test_lights=list(d["test_lights"]),
            val_lights={int(k): list(v) for k, v in d["val_lights"].items()},
        )
        for name in SPLIT_NAMES:
            setattr(out, name, [tuple(f) for f in d["frames"][name]])
        return out


def generate_splits(
    n_views: int,
    n_lights: int,
    seed: int = 0,
    holdout: int = 3,
    n_val_views: int | None = None,
    n_test_views: int | None = None,
    n_test_lights: int | None = None,
    val_lights_per_view: int | None = None,
) -> SplitAssignment:
    """Draw a seeded random split of an ``n_views x n_lights`` frame grid.

    ``holdout`` is the default size for every held-out set; the keyword
    overrides allow asymmetric holdouts for small synthetic grids.
    """
    n_val = holdout if n_val_views is None else n_val_views
    n_test = holdout if n_test_views is None else n_test_views
    n_tl = holdout if n_test_lights is None else n_test_lights
    n_vl = holdout if val_lights_per_view is None else val_lights_per_view
    if min(n_val, n_test, n_tl, n_vl) < 1:
        raise ValueError("all holdout sizes must be >= 1")
    if n_views <= n_val + n_test:
        raise ValueError(f"need n_views > {n_val + n_test}, got {n_views}")
    if n_lights <= n_tl:
        raise ValueError(f"need n_lights > {n_tl}, got {n_lights}")
    if n_vl > n_lights - n_tl:
        raise ValueError("val_lights_per_view exceeds the number of train lights")

    rng = np.random.default_rng(seed)
    view_perm = rng.permutation(n_views)
    val_views = sorted(int(v) for v in view_perm[:n_val])
    test_views = sorted(int(v) for v in view_perm[n_val : n_val + n_test])
    test_lights = sorted(int(m) for m in rng.permutation(n_lights)[:n_tl])

    train_lights = [m for m in range(n_lights) if m not in set(test_lights)]
    val_lights = {
        v: sorted(int(m) for m in rng.choice(train_lights, size=n_vl, replace=False))
        for v in val_views
    }

    assignment = SplitAssignment(
        n_views=n_views,
        n_lights=n_lights,
        val_views=val_views,
        test_views=test_views,
        test_lights=test_lights,
        val_lights=val_lights,
    )
    val_set = set(val_views)
    test_set = set(test_views)
    tl_set = set(test_lights)
    for n in range(n_views):
        for m in range(n_lights):
            if n in test_set:
                (assignment.hard if m in tl_set else assignment.easy).append((n, m))
            elif n in val_set:
                if m in val_lights[n]:
                    assignment.val.append((n, m))
                else:
                    assignment.unused.append((n, m))
            elif m in tl_set:
                assignment.unused.append((n, m))
            else:
                assignment.train.append((n, m))
    return assignment


def save_splits(assignment: SplitAssignment, path) -> Path:
    path = Path(path)
    with open(path, "w") as fh:
        json.dump(assignment.to_dict(), fh, indent=1)
    return path


def load_splits(path) -> SplitAssignment:
    with open(path) as fh:
        return SplitAssignment.from_dict(json.load(fh))
