"""Segmentation metrics (Dice, IoU, PA, clDice, VoI, Betti error) and the soft Dice loss."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage

from .grid import as_likelihood, as_mask


@dataclass
class LossGrad:
    """A scalar loss and its gradient with respect to every likelihood pixel."""

    value: float
    grad: np.ndarray
    terms: dict = field(default_factory=dict)


@dataclass
class MetricReport:
    dice: float
    iou: float
    pa: float
    cl_dice: float
    voi: float
    betti_error_dim0: int
    betti_error_dim1: int

    def as_dict(self) -> dict:
        return asdict(self)


CSV_COLUMNS = ("dice", "iou", "pa", "cl_dice", "voi", "betti_error_dim0", "betti_error_dim1")


def _pair(pred, gt):
    p, g = as_mask(pred).astype(bool), as_mask(gt).astype(bool)
    if p.shape != g.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {g.shape}")
    return p, g


def dice(pred, gt) -> float:
    p, g = _pair(pred, gt)
    total = int(p.sum()) + int(g.sum())
    if total == 0:
        return 1.0
    return 2.0 * int((p & g).sum()) / total


def iou(pred, gt) -> float:
    p, g = _pair(pred, gt)
    union = int((p | g).sum())
    if union == 0:
        return 1.0
    return int((p & g).sum()) / union


def pixel_accuracy(pred, gt) -> float:
    p, g = _pair(pred, gt)
    return int((p == g).sum()) / p.size


def soft_dice_loss(pred, gt, eps: float = 1.0) -> LossGrad:
    """``1 - (2 sum(p g) + eps) / (sum(p) + sum(g) + eps)`` with its analytic gradient."""
    p = as_likelihood(pred)
    g = as_mask(gt).astype(np.float64)
    if p.shape != g.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {g.shape}")
    inter = float(np.sum(p * g))
    denom = float(p.sum() + g.sum()) + eps
    numer = 2.0 * inter + eps
    grad = -(2.0 * g * denom - numer) / denom ** 2
    return LossGrad(1.0 - numer / denom, grad)


# ---------------------------------------------------------------------------
# skeletons


def _neighbours(img: np.ndarray) -> list[np.ndarray]:
    """P2..P9 (N, NE, E, SE, S, SW, W, NW) for every pixel of a zero-padded image."""
    pad = np.pad(img, 1)
    h, w = img.shape
    offs = [(-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1)]
    return [pad[1 + dr:1 + dr + h, 1 + dc:1 + dc + w] for dr, dc in offs]


def _local(img: np.ndarray, r: int, c: int) -> tuple[int, int]:
    """(number of foreground neighbours, number of 0->1 transitions around the pixel)."""
    h, w = img.shape
    ring = []
    for dr, dc in ((-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1)):
        rr, cc = r + dr, c + dc
        ring.append(int(0 <= rr < h and 0 <= cc < w and img[rr, cc]))
    trans = sum(1 for k in range(8) if ring[k] == 0 and ring[(k + 1) % 8] == 1)
    return sum(ring), trans


def skeletonize(mask) -> np.ndarray:
    """Zhang-Suen thinning to a one-pixel-wide, 8-connected skeleton.

    Candidates of each sub-iteration are found in parallel as in Zhang-Suen,
    then deleted one by one in raster order, re-checking the neighbour count
    and crossing number against the already-thinned image. The re-check keeps
    2x2 blocks (which plain Zhang-Suen erases) and preserves the number of
    8-connected components.
    """
    img = as_mask(mask).astype(np.uint8).copy()
    while True:
        changed = False
        for step in (0, 1):
            n = _neighbours(img)
            b = sum(x.astype(np.int32) for x in n)
            a = sum(((n[k] == 0) & (n[(k + 1) % 8] == 1)).astype(np.int32) for k in range(8))
            p2, p4, p6, p8 = n[0], n[2], n[4], n[6]
            if step == 0:
                side = (p2 * p4 * p6 == 0) & (p4 * p6 * p8 == 0)
            else:
                side = (p2 * p4 * p8 == 0) & (p2 * p6 * p8 == 0)
            cand = (img == 1) & (b >= 2) & (b <= 6) & (a == 1) & side
            for r, c in np.argwhere(cand):
                nb, tr = _local(img, r, c)
                if 2 <= nb <= 6 and tr == 1:
                    img[r, c] = 0
                    changed = True
        if not changed:
            return img


def cl_dice(pred, gt) -> float:
    """Harmonic mean of topology precision and topology sensitivity."""
    p, g = _pair(pred, gt)
    if not p.any() and not g.any():
        return 1.0
    sp = skeletonize(p).astype(bool)
    sg = skeletonize(g).astype(bool)
    if not sp.any() or not sg.any():
        return 0.0
    tprec = (sp & g).sum() / sp.sum()
    tsens = (sg & p).sum() / sg.sum()
    if tprec + tsens == 0:
        return 0.0
    return float(2.0 * tprec * tsens / (tprec + tsens))


def _entropy(probs) -> float:
    return -math.fsum(q * math.log(q) for q in probs if q > 0)


def voi(pred, gt) -> float:
    """Variation of information between the binary label partitions (nats)."""
    p, g = _pair(pred, gt)
    n = p.size
    joint = [int(np.sum((p == a) & (g == b))) / n for a in (False, True) for b in (False, True)]
    h_joint = _entropy(joint)
    h_p = _entropy([joint[0] + joint[1], joint[2] + joint[3]])
    h_g = _entropy([joint[0] + joint[2], joint[1] + joint[3]])
    return max(0.0, 2.0 * h_joint - (h_p + h_g))


# ---------------------------------------------------------------------------
# Betti numbers


def betti_numbers(mask) -> tuple[int, int]:
    """(beta0, beta1) of the foreground complex, from component labels and Euler count.

    Cheap alternative to a diagram at threshold 1; agrees with it exactly.
    """
    m = as_mask(mask).astype(bool)
    _, beta0 = ndimage.label(m)
    edges = np.sum(m[1:, :] & m[:-1, :]) + np.sum(m[:, 1:] & m[:, :-1])
    squares = np.sum(m[1:, 1:] & m[:-1, 1:] & m[1:, :-1] & m[:-1, :-1])
    chi = int(m.sum()) - int(edges) + int(squares)
    return int(beta0), int(beta0) - chi


def mask_betti(mask) -> tuple[int, int]:
    """Betti numbers read off the superlevel diagram of the mask at threshold 1."""
    from .cubical import betti_at, persistence_diagram
    dgm = persistence_diagram(as_mask(mask).astype(np.float64), "superlevel")
    return tuple(betti_at(dgm, 1.0))


def betti_error(pred, gt) -> tuple[int, int]:
    p, g = _pair(pred, gt)
    bp, bg = mask_betti(p), mask_betti(g)
    return abs(bp[0] - bg[0]), abs(bp[1] - bg[1])


def evaluate(pred, gt) -> MetricReport:
    b0, b1 = betti_error(pred, gt)
    return MetricReport(dice(pred, gt), iou(pred, gt), pixel_accuracy(pred, gt),
                        cl_dice(pred, gt), voi(pred, gt), b0, b1)
