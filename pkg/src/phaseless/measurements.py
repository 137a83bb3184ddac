"""Container for magnitude measurements, partitioned by sensing layer."""

from __future__ import annotations

import numpy as np


class PhaselessMeasurements:
    """Nonnegative magnitudes |Phi x|, one named block per matrix layer.

    ``lazy`` holds thunks for sub-ensemble blocks that are only needed on
    rare decode branches; calling one yields the same values a full
    measurement would have contained.
    """

    def __init__(self, blocks: dict, lazy: dict | None = None):
        for name, arr in blocks.items():
            if np.any(np.asarray(arr) < 0):
                raise ValueError(f"negative magnitude in block {name!r}")
        self.blocks = dict(blocks)
        self.lazy = dict(lazy or {})
        self.derived = {}  # cached views/concatenations of blocks

    def __getitem__(self, name: str) -> np.ndarray:
        return self.blocks[name]

    def __contains__(self, name: str) -> bool:
        return name in self.blocks

    @property
    def total_rows(self) -> int:
        return int(sum(np.asarray(b).size for b in self.blocks.values()))

    def concat(self) -> np.ndarray:
        """Flat row-major view in block insertion order (the dense row order)."""
        parts = [np.asarray(b).ravel() for b in self.blocks.values()]
        return np.concatenate(parts) if parts else np.zeros(0)
