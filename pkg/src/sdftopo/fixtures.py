"""Synthetic binary masks with known topology.

========== ==================
kind       Betti numbers
========== ==================
ring       (1, 1)
broken-ring (1, 0)
line       (1, 0)
broken-line (2, 0)
grid       (1, cells ** 2)
random-blobs  varies
========== ==================

The ring is 3 pixels thick; the broken ring is the same ring with a 3 pixel
gap cut across it. The seed moves the gap and jitters the centre; it has no
effect on the topology.
"""
from __future__ import annotations

import numpy as np

from .grid import as_mask

KINDS = ("ring", "broken-ring", "line", "broken-line", "grid", "random-blobs")


def _ring(size: int, rng) -> tuple[np.ndarray, float, float]:
    jitter = rng.uniform(-1.0, 1.0, size=2) if rng is not None else np.zeros(2)
    cy, cx = (size - 1) / 2.0 + jitter
    rr, cc = np.mgrid[:size, :size]
    dist = np.hypot(rr - cy, cc - cx)
    radius = 0.3 * size
    return (np.abs(dist - radius) <= 1.5), cy, cx


def gen_fixture(kind: str, size: int = 32, seed: int = 0, cells: int = 3) -> np.ndarray:
    if kind not in KINDS:
        raise ValueError(f"unknown fixture kind {kind!r}; choose from {KINDS}")
    if size < 8:
        raise ValueError("fixtures need size >= 8")
    rng = np.random.default_rng(seed)
    m = np.zeros((size, size), dtype=bool)
    mid = size // 2

    if kind in ("ring", "broken-ring"):
        m, cy, cx = _ring(size, rng if seed else None)
        if kind == "broken-ring":
            # 3-pixel band through the centre, on one of four sides
            side = int(rng.integers(4)) if seed else 0
            rr, cc = np.mgrid[:size, :size]
            ry, rx = int(round(cy)), int(round(cx))
            if side == 0:
                band = (np.abs(rr - ry) <= 1) & (cc > rx)
            elif side == 1:
                band = (np.abs(rr - ry) <= 1) & (cc < rx)
            elif side == 2:
                band = (np.abs(cc - rx) <= 1) & (rr < ry)
            else:
                band = (np.abs(cc - rx) <= 1) & (rr > ry)
            m &= ~band
    elif kind in ("line", "broken-line"):
        m[mid, 2:size - 2] = True
        if kind == "broken-line":
            m[mid, mid] = False
    elif kind == "grid":
        if cells < 1 or (size - 1) / cells < 2:
            raise ValueError(f"cannot fit {cells} x {cells} cells in size {size}")
        ticks = np.round(np.linspace(0, size - 1, cells + 1)).astype(int)
        m[ticks, :] = True
        m[:, ticks] = True
    else:
        rr, cc = np.mgrid[:size, :size]
        for _ in range(int(rng.integers(2, 6))):
            y, x = rng.uniform(0, size, size=2)
            r = rng.uniform(1.5, size / 6)
            m |= np.hypot(rr - y, cc - x) <= r
    return as_mask(m)
