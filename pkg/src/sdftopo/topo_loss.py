"""Diagram matchings and the topological losses built on them.

Both losses compare superlevel persistence diagrams of a likelihood map and a
ground-truth mask. The value of a loss is a sum of squared distances between
matched diagram points; each point's birth and death are pixel values at
known critical vertices, so the gradient is scattered back onto exactly those
pixels.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .cubical import (PersistenceDiagram, build_filtration, compute_persistence,
                      image_persistence)
from .grid import as_likelihood, as_mask
from .metrics import LossGrad, soft_dice_loss

__all__ = [
    "DiagramMatching", "LossConfig", "LossGrad", "pad_frame", "wasserstein_matching",
    "wasserstein_loss_grad", "betti_matching", "betti_loss_grad", "combined_loss",
]

LOSS_KINDS = ("wasserstein", "betti")


@dataclass
class DiagramMatching:
    """Indices into the pred/target diagrams; every index appears exactly once."""

    matched: list = field(default_factory=list)
    pred_to_diagonal: list = field(default_factory=list)
    target_to_diagonal: list = field(default_factory=list)
    pred: PersistenceDiagram | None = None
    target: PersistenceDiagram | None = None


@dataclass
class LossConfig:
    alpha: float = 0.9
    p: int = 2
    padding_width: int = 2
    dims: tuple = (0, 1)
    loss_kind: str = "wasserstein"

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.p != 2:
            raise ValueError("only p = 2 is supported for the training loss")
        if self.padding_width not in (0, 2):
            raise ValueError("padding_width must be 0 or 2")
        self.dims = tuple(sorted(set(self.dims)))
        if not self.dims or not set(self.dims) <= {0, 1}:
            raise ValueError("dims must be a non-empty subset of {0, 1}")
        if self.loss_kind not in LOSS_KINDS:
            raise ValueError(f"loss_kind must be one of {LOSS_KINDS}")


def pad_frame(grid, width: int, value: float = 1.0) -> np.ndarray:
    """Surround the grid with a constant frame ``width`` pixels thick."""
    if width < 0:
        raise ValueError("width must be >= 0")
    arr = np.asarray(grid, dtype=np.float64)
    if width == 0:
        return arr.copy()
    return np.pad(arr, width, mode="constant", constant_values=value)


# ---------------------------------------------------------------------------
# Wasserstein matching


def _diag_dist(pts: np.ndarray) -> np.ndarray:
    return np.abs(pts[:, 1] - pts[:, 0]) / math.sqrt(2.0)


def _assign(a: np.ndarray, b: np.ndarray, p: float):
    """Optimal partial matching of two point sets with diagonal escapes.

    Solved as a square assignment problem on the (n + m) x (m + n) matrix
    [[point costs, diagonal costs of a], [diagonal costs of b, 0]].
    """
    n, m = len(a), len(b)
    if n + m == 0:
        return [], [], [], 0.0
    cost = np.zeros((n + m, m + n))
    if n and m:
        cost[:n, :m] = cdist(a, b) ** p
    cost[:n, m:] = (_diag_dist(a) ** p)[:, None]
    cost[n:, :m] = (_diag_dist(b) ** p)[None, :]
    rows, cols = linear_sum_assignment(cost)
    matched, a_diag, b_diag = [], [], []
    for r, c in zip(rows, cols):
        if r < n and c < m:
            matched.append((int(r), int(c)))
        elif r < n:
            a_diag.append(int(r))
        elif c < m:
            b_diag.append(int(c))
    total = math.fsum(cost[r, c] for r, c in zip(rows, cols))
    return matched, sorted(a_diag), sorted(b_diag), total


def wasserstein_matching(d1, d2, p: float = 2, dims=None):
    """p-Wasserstein matching between two diagrams.

    ``d1``/``d2`` are PersistenceDiagrams or ``(n, 2)`` arrays of
    (birth, death). Diagrams are matched one homology dimension at a time over
    their finite points; essential points pair up within a dimension in birth
    order at zero cost. Returns ``(DiagramMatching, distance)`` where
    ``distance = (sum of ||c - c'||^p)^(1/p)`` over the optimal matching.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    if not isinstance(d1, PersistenceDiagram):
        a = np.asarray(d1, dtype=np.float64).reshape(-1, 2)
        b = np.asarray(d2, dtype=np.float64).reshape(-1, 2)
        matched, a_diag, b_diag, total = _assign(a, b, p)
        return DiagramMatching(matched, a_diag, b_diag), total ** (1.0 / p)

    if dims is None:
        dims = sorted({q.dim for q in d1.pairs} | {q.dim for q in d2.pairs})
    result = DiagramMatching(pred=d1, target=d2)
    total = 0.0
    for dim in dims:
        ia = [k for k, q in enumerate(d1.pairs) if q.dim == dim and not q.essential]
        ib = [k for k, q in enumerate(d2.pairs) if q.dim == dim and not q.essential]
        a = np.array([(d1.pairs[k].birth, d1.pairs[k].death) for k in ia]).reshape(-1, 2)
        b = np.array([(d2.pairs[k].birth, d2.pairs[k].death) for k in ib]).reshape(-1, 2)
        matched, a_diag, b_diag, cost = _assign(a, b, p)
        total += cost
        result.matched += [(ia[i], ib[j]) for i, j in matched]
        result.pred_to_diagonal += [ia[i] for i in a_diag]
        result.target_to_diagonal += [ib[j] for j in b_diag]
        ea = [k for k, q in enumerate(d1.pairs) if q.dim == dim and q.essential]
        eb = [k for k, q in enumerate(d2.pairs) if q.dim == dim and q.essential]
        result.matched += list(zip(ea, eb))
        result.pred_to_diagonal += ea[len(eb):]
        result.target_to_diagonal += eb[len(ea):]
    return result, total ** (1.0 / p)


# ---------------------------------------------------------------------------
# losses


def _prepare(pred, gt, cfg: LossConfig):
    pred = as_likelihood(pred)
    gt = as_mask(gt)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {gt.shape}")
    w = cfg.padding_width
    return pad_frame(pred, w, 1.0), pad_frame(gt, w, 1.0)


def _scatter(grad: np.ndarray, vertex, amount: float) -> None:
    grad[vertex] += amount


def _crop(grad: np.ndarray, width: int) -> tuple[np.ndarray, float]:
    """Interior of the padded gradient, plus the L1 mass dropped with the frame."""
    if width == 0:
        return grad, 0.0
    frame = np.ones(grad.shape, dtype=bool)
    frame[width:-width, width:-width] = False
    return grad[width:-width, width:-width].copy(), float(np.abs(grad[frame]).sum())


def _superlevel(img: np.ndarray) -> PersistenceDiagram:
    return compute_persistence(build_filtration(img, "superlevel"))


def wasserstein_loss_grad(pred, gt, cfg: LossConfig | None = None) -> LossGrad:
    """Squared 2-Wasserstein loss between superlevel diagrams of ``pred`` and ``gt``.

    Matched pred points are pulled onto their targets; pred points matched to
    the diagonal are pulled onto the midpoint of their birth and death.
    Gradients landing on the padding frame are discarded.
    """
    cfg = cfg or LossConfig(loss_kind="wasserstein")
    P, G = _prepare(pred, gt, cfg)
    dp, dg = _superlevel(P), _superlevel(G)
    matching, _ = wasserstein_matching(dp, dg, p=2, dims=cfg.dims)
    grad = np.zeros(P.shape)
    terms = []
    n_matched = 0
    for i, j in matching.matched:
        q, r = dp.pairs[i], dg.pairs[j]
        if q.essential or r.essential:
            continue
        n_matched += 1
        db, dd = q.birth - r.birth, q.death - r.death
        terms.append(db * db + dd * dd)
        _scatter(grad, q.birth_cell.critical_vertex, 2.0 * db)
        _scatter(grad, q.death_cell.critical_vertex, 2.0 * dd)
    n_diag = 0
    for i in matching.pred_to_diagonal:
        q = dp.pairs[i]
        if q.essential:
            continue
        n_diag += 1
        gap = q.birth - q.death
        terms.append(0.5 * gap * gap)
        _scatter(grad, q.birth_cell.critical_vertex, gap)
        _scatter(grad, q.death_cell.critical_vertex, -gap)
    for j in matching.target_to_diagonal:
        r = dg.pairs[j]
        if not r.essential:
            terms.append(0.5 * (r.birth - r.death) ** 2)
    inner, dropped = _crop(grad, cfg.padding_width)
    return LossGrad(math.fsum(terms), inner,
                    {"n_matched": n_matched, "n_diagonal": n_diag, "frame_grad_l1": dropped})


def betti_matching(P, G) -> DiagramMatching:
    """Betti matching of two likelihood maps through the comparison image min(P, G).

    Both maps are filtered by superlevel sets; superlevel sets of the
    comparison image sit inside those of P and of G, and the induced
    matchings of these inclusions are composed. Bars of P (or G) whose
    comparison bar is not matched on the other side go to the diagonal.
    """
    P = np.asarray(P, dtype=np.float64)
    G = np.asarray(G, dtype=np.float64)
    if P.shape != G.shape:
        raise ValueError(f"shape mismatch: {P.shape} vs {G.shape}")
    fp = build_filtration(P, "superlevel")
    fg = build_filtration(G, "superlevel")
    fc = build_filtration(np.minimum(P, G), "superlevel")
    via_p = {c: p for c, p in image_persistence(fp, fc) if p is not None}
    via_g = {c: g for c, g in image_persistence(fg, fc) if g is not None}
    dp, dg = compute_persistence(fp), compute_persistence(fg)
    index_p = {q: k for k, q in enumerate(dp.pairs)}
    index_g = {q: k for k, q in enumerate(dg.pairs)}
    matched = []
    for c, p in via_p.items():
        g = via_g.get(c)
        if g is not None:
            matched.append((index_p[p], index_g[g]))
    matched.sort()
    used_p = {i for i, _ in matched}
    used_g = {j for _, j in matched}
    return DiagramMatching(
        matched,
        [k for k in range(len(dp.pairs)) if k not in used_p],
        [k for k in range(len(dg.pairs)) if k not in used_g],
        dp, dg,
    )


def betti_loss_grad(pred, gt, cfg: LossConfig | None = None) -> LossGrad:
    """Betti matching loss: ``sum 2 ||q - mu(q)||^2`` over finite pred bars.

    Unmatched pred bars are charged against their diagonal projection, which
    amounts to ``(birth - death)^2`` per bar.
    """
    cfg = cfg or LossConfig(loss_kind="betti")
    P, G = _prepare(pred, gt, cfg)
    m = betti_matching(P, G)
    dp, dg = m.pred, m.target
    grad = np.zeros(P.shape)
    terms = []
    n_matched = 0
    for i, j in m.matched:
        q, r = dp.pairs[i], dg.pairs[j]
        if q.dim not in cfg.dims or q.essential or r.essential:
            continue
        n_matched += 1
        db, dd = q.birth - r.birth, q.death - r.death
        terms.append(2.0 * (db * db + dd * dd))
        _scatter(grad, q.birth_cell.critical_vertex, 4.0 * db)
        _scatter(grad, q.death_cell.critical_vertex, 4.0 * dd)
    n_diag = 0
    for i in m.pred_to_diagonal:
        q = dp.pairs[i]
        if q.dim not in cfg.dims or q.essential:
            continue
        n_diag += 1
        gap = q.birth - q.death
        terms.append(gap * gap)
        _scatter(grad, q.birth_cell.critical_vertex, 2.0 * gap)
        _scatter(grad, q.death_cell.critical_vertex, -2.0 * gap)
    inner, dropped = _crop(grad, cfg.padding_width)
    return LossGrad(math.fsum(terms), inner,
                    {"n_matched": n_matched, "n_diagonal": n_diag, "frame_grad_l1": dropped})


def topo_loss_grad(pred, gt, cfg: LossConfig) -> LossGrad:
    if cfg.loss_kind == "wasserstein":
        return wasserstein_loss_grad(pred, gt, cfg)
    return betti_loss_grad(pred, gt, cfg)


def combined_loss(pred, gt, cfg: LossConfig | None = None) -> LossGrad:
    """``alpha * soft_dice + (1 - alpha) * topological loss``.

    With ``alpha == 1`` the topological term is not evaluated at all.
    """
    cfg = cfg or LossConfig()
    d = soft_dice_loss(pred, gt)
    terms = {"dice_term": d.value, "topo_term": 0.0, "n_matched": 0, "n_diagonal": 0,
             "frame_grad_l1": 0.0}
    if cfg.alpha == 1.0:
        return LossGrad(d.value, d.grad, terms)
    t = topo_loss_grad(pred, gt, cfg)
    terms.update(t.terms, topo_term=t.value)
    value = cfg.alpha * d.value + (1.0 - cfg.alpha) * t.value
    grad = cfg.alpha * d.grad + (1.0 - cfg.alpha) * t.grad
    return LossGrad(value, grad, terms)
