"""Exact Euclidean distance transforms and signed distance fields.

Distances are measured between pixel centres. The transform is separable: a
column scan gives the vertical distance to the nearest target pixel, then a
lower envelope of parabolas per row combines those into exact squared
Euclidean distances. All intermediate quantities are integers, so the result
of ``squared_edt`` is exact.
"""
from __future__ import annotations

import numpy as np

from .grid import as_mask, _frozen

REGIONS = ("to-foreground", "to-background")


def _column_distances(target: np.ndarray) -> np.ndarray:
    h = target.shape[0]
    out = np.full(target.shape, np.inf)
    run = np.full(target.shape[1], np.inf)
    for r in range(h):
        run = np.where(target[r], 0.0, run + 1.0)
        out[r] = run
    run = np.full(target.shape[1], np.inf)
    for r in range(h - 1, -1, -1):
        run = np.where(target[r], 0.0, run + 1.0)
        out[r] = np.minimum(out[r], run)
    return out


def _lower_envelope(f: list) -> list:
    """1-D squared distance transform of sampled function ``f`` (None = no site).

    Breakpoints between parabolas are kept as exact fractions (num, den).
    """
    n = len(f)
    sites: list[int] = []
    bounds: list[tuple[int, int] | None] = []  # left boundary of each parabola
    for q in range(n):
        if f[q] is None:
            continue
        while sites:
            p = sites[-1]
            num = (f[q] + q * q) - (f[p] + p * p)
            den = 2 * (q - p)
            left = bounds[-1]
            # intersection at or left of the current boundary: p never wins
            if left is not None and num * left[1] <= left[0] * den:
                sites.pop()
                bounds.pop()
            else:
                break
        if sites:
            bounds.append((num, den))
        else:
            bounds.append(None)
        sites.append(q)
    if not sites:
        return [None] * n
    out = [0] * n
    k = 0
    for x in range(n):
        while k + 1 < len(sites) and bounds[k + 1][0] < x * bounds[k + 1][1]:
            k += 1
        out[x] = (x - sites[k]) ** 2 + f[sites[k]]
    return out


def squared_edt(target) -> np.ndarray:
    """Squared distance from every pixel to the nearest ``True`` pixel.

    Returns a float64 grid of exact integers; ``inf`` everywhere if the target
    set is empty.
    """
    target = np.asarray(target, dtype=bool)
    cols = _column_distances(target)
    out = np.empty(target.shape)
    for r in range(target.shape[0]):
        f = [None if not np.isfinite(v) else int(v) ** 2 for v in cols[r]]
        row = _lower_envelope(f)
        out[r] = [np.inf if v is None else float(v) for v in row]
    return out


def edt(mask, region: str = "to-foreground") -> np.ndarray:
    """Euclidean distance to the nearest foreground (or background) pixel.

    Pixels of the target set get 0. When the target set is empty every value
    is ``+inf``.
    """
    if region not in REGIONS:
        raise ValueError(f"region must be one of {REGIONS}")
    mask = as_mask(mask)
    target = mask == 1 if region == "to-foreground" else mask == 0
    return _frozen(np.sqrt(squared_edt(target)))


def sdf(mask) -> np.ndarray:
    """Signed distance field: distance to background minus distance to foreground.

    Positive inside the object, negative outside. Uniform masks have no
    boundary; they map to the constant ``+(w + h)`` (all foreground) or
    ``-(w + h)`` (all background).
    """
    mask = as_mask(mask)
    h, w = mask.shape
    if mask.all():
        return _frozen(np.full(mask.shape, float(w + h)))
    if not mask.any():
        return _frozen(np.full(mask.shape, -float(w + h)))
    inside = np.sqrt(squared_edt(mask == 0))
    outside = np.sqrt(squared_edt(mask == 1))
    return _frozen(inside - outside)


def threshold_mask(field, tau: float) -> np.ndarray:
    """Foreground where ``field >= tau``; lowering ``tau`` grows the region."""
    field = np.asarray(field, dtype=np.float64)
    return _frozen((field >= tau).astype(np.uint8))


def sdf_soft_target(field, scale: float = 1.0) -> np.ndarray:
    """Squash a signed field into (0, 1) with ``0.5 * (tanh(scale * field) + 1)``."""
    if not scale > 0:
        raise ValueError("scale must be positive")
    field = np.asarray(field, dtype=np.float64)
    return _frozen(0.5 * (np.tanh(scale * field) + 1.0))
