"""Persistent homology of 2-D cubical complexes built from pixel grids.

Pixels are the vertices of the complex (V-construction): edges join
4-neighbours and squares fill 2x2 blocks. Every cell takes the maximum value
of its vertices. Cells live on a doubled grid of shape ``(2h - 1, 2w - 1)``:
an anchor ``(r, c)`` is a vertex when both coordinates are even, an edge when
exactly one is odd and a square when both are odd.

Superlevel filtrations are handled by negating the image, running the
sublevel machinery, and reporting values in the original units. A superlevel
pair therefore has ``birth >= death`` and essential classes die at ``-inf``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ._reduce import reduce_columns
from .grid import as_image

DIRECTIONS = ("sublevel", "superlevel")

CSV_HEADER = ["dim", "birth", "death", "birth_row", "birth_col", "death_row", "death_col"]

_calls = {"persistence": 0}


def persistence_call_count() -> int:
    """Number of boundary reductions performed so far (test hook)."""
    return _calls["persistence"]


@dataclass(frozen=True)
class Cell:
    dim: int
    anchor: tuple[int, int] | None
    filtration_value: float
    critical_vertex: tuple[int, int]


@dataclass(frozen=True)
class PersistencePair:
    dim: int
    birth: float
    death: float
    birth_cell: Cell
    death_cell: Cell | None = None

    @property
    def essential(self) -> bool:
        return self.death_cell is None

    @property
    def persistence(self) -> float:
        return abs(self.death - self.birth)


@dataclass
class PersistenceDiagram:
    pairs: list[PersistencePair]
    direction: str = "sublevel"

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def in_dim(self, dim: int) -> list[PersistencePair]:
        return [p for p in self.pairs if p.dim == dim]

    def points(self, dim: int, finite: bool = True) -> np.ndarray:
        """(n, 2) array of (birth, death) for one dimension."""
        pts = [(p.birth, p.death) for p in self.pairs
               if p.dim == dim and (not finite or not p.essential)]
        return np.array(pts, dtype=np.float64).reshape(-1, 2)


@dataclass(frozen=True)
class BettiVector:
    beta0: int
    beta1: int

    def __iter__(self):
        return iter((self.beta0, self.beta1))


@lru_cache(maxsize=32)
def _complex(h: int, w: int):
    """Static cell structure of an h x w pixel grid (shared by all filtrations)."""
    H, W = 2 * h - 1, 2 * w - 1
    rr, cc = np.divmod(np.arange(H * W), W)
    dims = (rr % 2) + (cc % 2)
    # the (up to) four vertices of each cell, in lexicographic order
    r0, r1 = rr // 2, (rr + 1) // 2
    c0, c1 = cc // 2, (cc + 1) // 2
    verts = np.stack([r0 * w + c0, r0 * w + c1, r1 * w + c0, r1 * w + c1], axis=1)

    counts = np.array([0, 2, 4])[dims]
    indptr = np.zeros(H * W + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    indices = np.empty(indptr[-1], dtype=np.int64)
    ids = np.arange(H * W)
    horiz = (dims == 1) & (cc % 2 == 1)  # edge between (r, c-1) and (r, c+1)
    vert = (dims == 1) & (rr % 2 == 1)
    sq = dims == 2
    for mask, offsets in ((horiz, (-1, 1)), (vert, (-W, W)), (sq, (-W, -1, 1, W))):
        start = indptr[:-1][mask]
        for k, off in enumerate(offsets):
            indices[start + k] = ids[mask] + off
    for arr in (rr, cc, dims, verts, indptr, indices):
        arr.flags.writeable = False
    return rr, cc, dims, verts, indptr, indices


@dataclass
class CubicalFiltration:
    """A V-construction cubical complex with a total order on its cells.

    ``values`` holds the internal (sublevel) value of every cell, indexed by
    flat cell id ``r * (2w - 1) + c``; for superlevel filtrations these are the
    negated image values. ``order`` lists cell ids by
    ``(value, dim, anchor row, anchor col)`` and ``rank`` is its inverse.
    """

    image: np.ndarray
    direction: str
    values: np.ndarray
    critical: np.ndarray
    order: np.ndarray
    rank: np.ndarray
    _reduced: object = field(default=None, repr=False, compare=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.image.shape

    @property
    def cell_shape(self) -> tuple[int, int]:
        h, w = self.image.shape
        return 2 * h - 1, 2 * w - 1

    @property
    def dims(self) -> np.ndarray:
        return _complex(*self.image.shape)[2]

    def __len__(self):
        return self.values.size

    def output_value(self, cell_id: int) -> float:
        v = float(self.values[cell_id])
        return -v if self.direction == "superlevel" else v

    def cell(self, cell_id: int) -> Cell:
        h, w = self.image.shape
        W = 2 * w - 1
        r, c = divmod(int(cell_id), W)
        crit = int(self.critical[cell_id])
        return Cell((r % 2) + (c % 2), (r, c), self.output_value(cell_id), divmod(crit, w))

    def cells(self) -> list[Cell]:
        """All cells in filtration order."""
        return [self.cell(i) for i in self.order]


def build_filtration(image, direction: str = "sublevel") -> CubicalFiltration:
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {DIRECTIONS}")
    img = as_image(image)
    h, w = img.shape
    rr, cc, dims, verts, _, _ = _complex(h, w)
    flat = img.ravel() if direction == "sublevel" else -img.ravel()
    cand = flat[verts]
    pick = np.argmax(cand, axis=1)  # first maximum = lexicographically smallest vertex
    values = cand[np.arange(len(pick)), pick]
    critical = verts[np.arange(len(pick)), pick]
    order = np.lexsort((cc, rr, dims, values))
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    return CubicalFiltration(img, direction, values, critical, order, rank)


# ---------------------------------------------------------------------------
# reduction


@dataclass
class _Reduced:
    diagram: PersistenceDiagram
    positive: np.ndarray          # cells that create a class
    by_birth: dict                # birth cell id -> pair (non-zero persistence only)
    by_death: dict                # death cell id -> pair
    essential: list               # essential pairs, in filtration order of birth


def _reduce_dim(filt: CubicalFiltration, col_dim: int, skip: np.ndarray, row_rank=None):
    """Reduce all columns of one dimension in ``filt``'s order; returns (column ids, pivot ids)."""
    _, _, dims, _, indptr, indices = _complex(*filt.shape)
    cols = filt.order[dims[filt.order] == col_dim]
    row_rank = filt.rank if row_rank is None else row_rank
    low = reduce_columns(cols.astype(np.int64), indptr, indices, row_rank.astype(np.int64), skip)
    return cols, low


def _make_pair(filt: CubicalFiltration, dim: int, birth: int, death: int | None) -> PersistencePair:
    bcell = filt.cell(birth)
    if death is None:
        inf = -math.inf if filt.direction == "superlevel" else math.inf
        return PersistencePair(dim, bcell.filtration_value, inf, bcell, None)
    dcell = filt.cell(death)
    return PersistencePair(dim, bcell.filtration_value, dcell.filtration_value, bcell, dcell)


def _reduce(filt: CubicalFiltration, clearing: bool = True) -> _Reduced:
    if clearing and filt._reduced is not None:
        return filt._reduced
    _calls["persistence"] += 1
    n = len(filt)
    dims = filt.dims
    no_skip = np.zeros(n, dtype=np.bool_)

    sq_cols, sq_low = _reduce_dim(filt, 2, no_skip)
    raw = []  # (dim, birth id, death id)
    positive = np.zeros(n, dtype=bool)
    for col, low in zip(sq_cols, sq_low):
        if low >= 0:
            raw.append((1, int(filt.order[low]), int(col)))
            positive[filt.order[low]] = True
    skip = positive.copy() if clearing else no_skip
    ed_cols, ed_low = _reduce_dim(filt, 1, skip)
    for col, low in zip(ed_cols, ed_low):
        if low >= 0:
            raw.append((0, int(filt.order[low]), int(col)))
            positive[filt.order[low]] = True
        else:
            positive[col] = True
    killed = np.zeros(n, dtype=bool)
    for _, b, _d in raw:
        killed[b] = True
    # vertices are always positive
    positive[dims == 0] = True
    essential_ids = [int(c) for c in filt.order if positive[c] and not killed[c]]
    if any(dims[c] != 0 for c in essential_ids):
        raise AssertionError("essential 1-cycle on a full rectangular grid")

    pairs, by_birth, by_death, essential = [], {}, {}, []
    for dim, b, d in raw:
        if filt.values[b] == filt.values[d]:
            continue
        pair = _make_pair(filt, dim, b, d)
        by_birth[b] = pair
        by_death[d] = pair
        pairs.append((dim, filt.rank[b], pair))
    for b in essential_ids:
        pair = _make_pair(filt, 0, b, None)
        by_birth[b] = pair
        essential.append(pair)
        pairs.append((0, filt.rank[b], pair))
    pairs.sort(key=lambda t: (t[0], t[1]))
    diagram = PersistenceDiagram([p for _, _, p in pairs], filt.direction)
    red = _Reduced(diagram, positive, by_birth, by_death, essential)
    if clearing:
        filt._reduced = red
    return red


def compute_persistence(filt: CubicalFiltration, clearing: bool = True) -> PersistenceDiagram:
    """Persistence diagram by Z/2 boundary-matrix reduction.

    Squares are reduced first; with ``clearing`` the edges they kill are
    skipped when the edge columns are reduced. Zero-persistence pairs are
    dropped.
    """
    return _reduce(filt, clearing).diagram


def persistence_diagram(image, direction: str = "sublevel") -> PersistenceDiagram:
    return compute_persistence(build_filtration(image, direction))


def _alive(pair: PersistencePair, t: float, direction: str) -> bool:
    if direction == "superlevel":
        return pair.death < t <= pair.birth
    return pair.birth <= t < pair.death


def betti_at(diagram: PersistenceDiagram, t: float) -> BettiVector:
    """Betti numbers of the sublevel (or superlevel) set at threshold ``t``."""
    counts = [0, 0]
    for p in diagram.pairs:
        if p.dim < 2 and _alive(p, t, diagram.direction):
            counts[p.dim] += 1
    return BettiVector(*counts)


def euler_characteristic(filt: CubicalFiltration, t: float) -> int:
    """#vertices - #edges + #squares among cells present at threshold ``t``."""
    internal = -t if filt.direction == "superlevel" else t
    present = filt.values <= internal
    dims = filt.dims[present]
    return int(np.sum(dims == 0) - np.sum(dims == 1) + np.sum(dims == 2))


# ---------------------------------------------------------------------------
# image persistence / induced matchings


def image_persistence(ambient: CubicalFiltration, sub: CubicalFiltration):
    """Match every bar of ``sub`` to a bar of ``ambient`` through the image module.

    ``sub`` must be dominated by ``ambient``: each of its sublevel sets is
    contained in the corresponding sublevel set of ``ambient``. Boundary
    columns are taken in ambient order while pivots are read in sub order;
    a pivot ``(i, j)`` makes the image bar born with sub-cell ``i`` die at
    ambient-cell ``j``. Image bars are tied to sub bars by their birth cell and
    to ambient bars by their death cell (essential bars are paired by birth
    order).

    Returns a list of ``(sub_pair, ambient_pair or None)`` covering every bar of
    the sub diagram.
    """
    if ambient.shape != sub.shape or ambient.direction != sub.direction:
        raise ValueError("filtrations must share grid shape and direction")
    if np.any(sub.values < ambient.values):
        raise ValueError("sub filtration is not contained in the ambient filtration")
    amb = _reduce(ambient)
    sb = _reduce(sub)

    image_death = {}
    for col_dim in (1, 2):
        skip = amb.positive if col_dim == 1 else np.zeros(len(ambient), dtype=np.bool_)
        cols, low = _reduce_dim(ambient, col_dim, skip, row_rank=sub.rank)
        for col, lo in zip(cols, low):
            if lo >= 0:
                image_death[int(sub.order[lo])] = int(col)

    amb_essential = sorted(amb.essential, key=lambda p: _birth_key(ambient, p))
    sub_essential = []
    result = []
    for pair in sb.diagram.pairs:
        b = _cell_id(sub, pair.birth_cell)
        j = image_death.get(b)
        if pair.essential:
            sub_essential.append(pair)
            continue
        if j is None:
            result.append((pair, None))
            continue
        if max(ambient.values[j], sub.values[b]) <= sub.values[b]:
            result.append((pair, None))
        else:
            result.append((pair, amb.by_death.get(j)))
    # essential image bars pair with essential ambient bars in birth order
    sub_essential.sort(key=lambda p: _birth_key(sub, p))
    free = list(amb_essential)
    for pair in sub_essential:
        match = next((q for q in free if q.dim == pair.dim), None)
        if match is not None:
            free.remove(match)
        result.append((pair, match))
    order = {id(p): k for k, p in enumerate(sb.diagram.pairs)}
    result.sort(key=lambda t: order[id(t[0])])
    return result


def _cell_id(filt: CubicalFiltration, cell: Cell) -> int:
    return cell.anchor[0] * filt.cell_shape[1] + cell.anchor[1]


def _birth_key(filt: CubicalFiltration, pair: PersistencePair) -> int:
    return int(filt.rank[_cell_id(filt, pair.birth_cell)])


# ---------------------------------------------------------------------------
# CSV


def _fmt(x: float) -> str:
    return repr(float(x))


def diagram_to_csv(diagram: PersistenceDiagram) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for p in diagram.pairs:
        br, bc = p.birth_cell.critical_vertex
        if p.essential:
            dr = dc = ""
        else:
            dr, dc = p.death_cell.critical_vertex
        writer.writerow([p.dim, _fmt(p.birth), _fmt(p.death), br, bc, dr, dc])
    return buf.getvalue()


def diagram_from_csv(text: str, direction: str | None = None) -> PersistenceDiagram:
    """Parse the CSV written by :func:`diagram_to_csv`.

    Cell anchors are not stored in the file, so parsed cells carry
    ``anchor=None``. The direction is inferred from the pairs unless given.
    """
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != CSV_HEADER:
        raise ValueError("diagram CSV must start with header " + ",".join(CSV_HEADER))
    pairs = []
    for row in rows[1:]:
        if not row:
            continue
        if len(row) != len(CSV_HEADER):
            raise ValueError(f"malformed diagram row {row!r}")
        dim = int(row[0])
        birth, death = float(row[1]), float(row[2])
        bcell = Cell(dim, None, birth, (int(row[3]), int(row[4])))
        dcell = None
        if row[5] != "":
            dcell = Cell(dim + 1, None, death, (int(row[5]), int(row[6])))
        pairs.append(PersistencePair(dim, birth, death, bcell, dcell))
    if direction is None:
        direction = "superlevel" if any(p.death < p.birth for p in pairs) else "sublevel"
    return PersistenceDiagram(pairs, direction)
