"""Brute-force reference implementations used to validate the fast paths.

Everything here is deliberately naive and shares no code with the engines it
checks: cells are enumerated from scratch, reductions use Python sets over the
full boundary matrix, distances are all-pairs scans and matchings are
enumerated exhaustively.
"""
from __future__ import annotations

import itertools
import math
import time

import numpy as np


# ---------------------------------------------------------------------------
# cubical complex, rebuilt independently


def _cells(img: np.ndarray):
    """Yield (key, dim, anchor, value, critical pixel, faces) for every cell.

    Sort key is (value, dim, anchor row, anchor col).
    """
    h, w = img.shape
    out = []
    for r in range(2 * h - 1):
        for c in range(2 * w - 1):
            rows = sorted({r // 2, (r + 1) // 2})
            cols = sorted({c // 2, (c + 1) // 2})
            verts = [(i, j) for i in rows for j in cols]
            best = max(img[v] for v in verts)
            crit = min(v for v in verts if img[v] == best)
            dim = (r % 2) + (c % 2)
            if dim == 0:
                faces = []
            elif dim == 1 and r % 2:
                faces = [(r - 1, c), (r + 1, c)]
            elif dim == 1:
                faces = [(r, c - 1), (r, c + 1)]
            else:
                faces = [(r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)]
            out.append(((float(best), dim, r, c), dim, (r, c), float(best), crit, faces))
    out.sort(key=lambda t: t[0])
    return out


def naive_pairs(image, direction: str = "sublevel"):
    """Persistence pairs by the textbook O(n^3) reduction, no clearing.

    Returns a sorted list of ``(dim, birth, death, birth_vertex, death_vertex)``
    with values in the caller's units; zero-persistence pairs are removed and
    essential pairs have ``death = +-inf`` and ``death_vertex = None``.
    """
    img = np.asarray(image, dtype=float)
    sign = 1.0 if direction == "sublevel" else -1.0
    cells = _cells(sign * img)
    index = {cell[2]: k for k, cell in enumerate(cells)}
    columns = [set(index[f] for f in cell[5]) for cell in cells]
    pivot_of = {}
    paired = set()
    pairs = []
    for j in range(len(columns)):
        col = columns[j]
        while col and max(col) in pivot_of:
            col ^= columns[pivot_of[max(col)]]
        if col:
            i = max(col)
            pivot_of[i] = j
            paired.update((i, j))
            if cells[i][3] != cells[j][3]:
                pairs.append((cells[i][1], sign * cells[i][3], sign * cells[j][3],
                              cells[i][4], cells[j][4]))
    for k, cell in enumerate(cells):
        if k not in paired and not columns[k]:
            pairs.append((cell[1], sign * cell[3], sign * math.inf, cell[4], None))
    return sorted(pairs, key=_pair_key)


def _pair_key(p):
    return (p[0], p[1], p[2], p[3], p[4] or (-1, -1))


def diagram_tuples(diagram):
    """Convert a PersistenceDiagram into the tuple form of :func:`naive_pairs`."""
    out = []
    for p in diagram.pairs:
        dv = None if p.essential else p.death_cell.critical_vertex
        out.append((p.dim, p.birth, p.death, p.birth_cell.critical_vertex, dv))
    return sorted(out, key=_pair_key)


class _DisjointSet:
    def __init__(self):
        self.parent = {}

    def add(self, x):
        self.parent.setdefault(x, x)

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def sweep_betti(image, t: float, direction: str = "sublevel") -> tuple[int, int]:
    """Betti numbers of the threshold set via union-find plus Euler characteristic."""
    img = np.asarray(image, dtype=float)
    present = img <= t if direction == "sublevel" else img >= t
    h, w = img.shape
    ds = _DisjointSet()
    n_edges = 0
    for r in range(h):
        for c in range(w):
            if not present[r, c]:
                continue
            ds.add((r, c))
            for dr, dc in ((-1, 0), (0, -1)):
                rr, cc = r + dr, c + dc
                if rr >= 0 and cc >= 0 and present[rr, cc]:
                    ds.union((r, c), (rr, cc))
                    n_edges += 1
    n_vertices = int(present.sum())
    n_squares = int(np.sum(present[:-1, :-1] & present[1:, :-1] & present[:-1, 1:] & present[1:, 1:]))
    beta0 = len({ds.find(x) for x in ds.parent})
    chi = n_vertices - n_edges + n_squares
    return beta0, beta0 - chi


def sweep_euler(image, t: float, direction: str = "sublevel") -> int:
    b0, b1 = sweep_betti(image, t, direction)
    return b0 - b1


# ---------------------------------------------------------------------------
# dimension-0 induced matchings


def _graph_order(img: np.ndarray):
    """Vertices and edges of the pixel graph sorted by the filtration key."""
    h, w = img.shape
    items = []
    for r in range(h):
        for c in range(w):
            items.append(((img[r, c], 0, 2 * r, 2 * c), (r, c), None))
            if c + 1 < w:
                items.append(((max(img[r, c], img[r, c + 1]), 1, 2 * r, 2 * c + 1),
                              (r, c), (r, c + 1)))
            if r + 1 < h:
                items.append(((max(img[r, c], img[r + 1, c]), 1, 2 * r + 1, 2 * c),
                              (r, c), (r + 1, c)))
    items.sort(key=lambda t: t[0])
    return items


def _zero_dim_bars(img: np.ndarray):
    """Elder-rule bars: dict birth pixel -> (birth value, death value, death edge key)."""
    items = _graph_order(img)
    vrank = {it[1]: k for k, it in enumerate(items) if it[2] is None}
    ds = _DisjointSet()
    oldest = {}
    bars = {}
    for key, a, b in items:
        if b is None:
            ds.add(a)
            oldest[a] = a
            continue
        ra, rb = ds.find(a), ds.find(b)
        if ra == rb:
            continue
        oa, ob = oldest[ra], oldest[rb]
        young, old = (oa, ob) if vrank[oa] > vrank[ob] else (ob, oa)
        bars[young] = (img[young], key[0], key)
        ds.union(ra, rb)
        oldest[ds.find(ra)] = old
    for v in vrank:
        if v not in bars:
            bars[v] = (img[v], math.inf, None)
    return {v: bar for v, bar in bars.items() if bar[0] != bar[1]}


def induced_matching_dim0(ambient, sub, direction: str = "sublevel"):
    """Map each dimension-0 bar of ``sub`` to a bar of ``ambient`` (or None).

    Bars are identified by their birth pixel. For a sub bar born at ``v`` the
    ambient edges are replayed one at a time from scratch; the image class of
    ``v`` dies at the first edge after which the ambient component holding
    ``v`` also holds a pixel that entered the sub filtration before ``v``. The
    sub bar is matched to the ambient bar killed by that same edge, or left
    unmatched when the image class dies on arrival.
    """
    sign = 1.0 if direction == "sublevel" else -1.0
    amb = sign * np.asarray(ambient, dtype=float)
    sb = sign * np.asarray(sub, dtype=float)
    sub_items = _graph_order(sb)
    srank = {it[1]: k for k, it in enumerate(sub_items) if it[2] is None}
    amb_items = _graph_order(amb)
    amb_bars = _zero_dim_bars(amb)
    by_death = {bar[2]: v for v, bar in amb_bars.items() if bar[2] is not None}
    amb_essential = [v for v, bar in amb_bars.items() if bar[2] is None]

    out = {}
    for v, (birth, _death, _) in _zero_dim_bars(sb).items():
        members = {v}
        comp = {v: {v}}
        kill = None
        for key, a, b in amb_items:
            if b is None:
                comp.setdefault(a, {a})
                continue
            ca, cb = comp.setdefault(a, {a}), comp.setdefault(b, {b})
            if ca is cb:
                continue
            merged = ca | cb
            for x in merged:
                comp[x] = merged
            if v in merged:
                members = merged
                if any(srank[u] < srank[v] for u in members):
                    kill = key
                    break
        if kill is None:
            out[v] = amb_essential[0] if amb_essential else None
            continue
        if max(kill[0], birth) <= birth:
            out[v] = None
        else:
            out[v] = by_death.get(kill)
    return out


def betti_matching_dim0(pred, target):
    """Dimension-0 Betti matching of two likelihood maps (superlevel).

    Returns (matched birth-pixel pairs, unmatched pred birth pixels).
    """
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    comp = np.minimum(pred, target)
    via_pred = induced_matching_dim0(pred, comp, "superlevel")
    via_target = induced_matching_dim0(target, comp, "superlevel")
    matched = {}
    for c_bar, p_bar in via_pred.items():
        g_bar = via_target.get(c_bar)
        if p_bar is not None and g_bar is not None:
            matched[p_bar] = g_bar
    pred_bars = _zero_dim_bars(-pred)
    unmatched = sorted(v for v in pred_bars if v not in matched)
    return matched, unmatched


# ---------------------------------------------------------------------------
# distances and matchings


def brute_squared_edt(target) -> np.ndarray:
    target = np.asarray(target, dtype=bool)
    pts = np.argwhere(target)
    out = np.full(target.shape, np.inf)
    if len(pts) == 0:
        return out
    for r in range(target.shape[0]):
        for c in range(target.shape[1]):
            out[r, c] = float(min((r - y) ** 2 + (c - x) ** 2 for y, x in pts))
    return out


def brute_wasserstein(d1, d2, p: float = 2.0) -> float:
    """p-Wasserstein distance by enumerating every partial matching."""
    a = [tuple(x) for x in np.asarray(d1, dtype=float).reshape(-1, 2)]
    b = [tuple(x) for x in np.asarray(d2, dtype=float).reshape(-1, 2)]

    def diag(q):
        return abs(q[1] - q[0]) / math.sqrt(2.0)

    best = math.inf
    for k in range(min(len(a), len(b)) + 1):
        for left in itertools.combinations(range(len(a)), k):
            for right in itertools.permutations(range(len(b)), k):
                cost = sum(math.dist(a[i], b[j]) ** p for i, j in zip(left, right))
                cost += sum(diag(a[i]) ** p for i in range(len(a)) if i not in left)
                cost += sum(diag(b[j]) ** p for j in range(len(b)) if j not in right)
                best = min(best, cost)
    return best ** (1.0 / p)


def central_difference(func, x: np.ndarray, index, step: float = 1e-4) -> float:
    xp = np.array(x, dtype=float)
    xm = np.array(x, dtype=float)
    xp[index] += step
    xm[index] -= step
    return (func(xp) - func(xm)) / (2.0 * step)


# ---------------------------------------------------------------------------
# suites used by the `oracle` CLI command


def distinct_image(rng, size: int) -> np.ndarray:
    """Random image whose pixel values are a permutation of 0..n-1 (scaled to [0, 1))."""
    n = size * size
    return (rng.permutation(n).reshape(size, size) + 0.5) / n


def _suite_persistence(rng, n, size):
    from .cubical import betti_at, persistence_diagram
    for _ in range(n):
        img = distinct_image(rng, size)
        dgm = persistence_diagram(img)
        if diagram_tuples(dgm) != naive_pairs(img):
            return False
        for t in np.unique(img):
            if tuple(betti_at(dgm, t)) != sweep_betti(img, t):
                return False
    return True


def _suite_euler(rng, n, size):
    from .cubical import betti_at, build_filtration, compute_persistence, euler_characteristic
    for _ in range(n):
        img = distinct_image(rng, size)
        filt = build_filtration(img)
        dgm = compute_persistence(filt)
        for t in np.unique(img):
            b0, b1 = betti_at(dgm, t)
            if b0 - b1 != euler_characteristic(filt, t):
                return False
    return True


def _suite_edt(rng, n, size):
    from .distance import squared_edt
    for _ in range(n):
        mask = rng.random((size, size)) < rng.uniform(0.05, 0.6)
        if not np.array_equal(squared_edt(mask), brute_squared_edt(mask)):
            return False
    return True


def _suite_wasserstein(rng, n, size):
    from .topo_loss import wasserstein_matching
    for _ in range(n):
        pts = []
        for _side in range(2):
            k = int(rng.integers(0, min(size, 6) + 1))
            b = rng.random(k)
            pts.append(np.stack([b, b + rng.random(k)], axis=1))
        _, dist = wasserstein_matching(pts[0], pts[1], p=2)
        if abs(dist - brute_wasserstein(pts[0], pts[1], 2)) > 1e-9:
            return False
    return True


def _suite_betti_matching(rng, n, size):
    from .topo_loss import betti_matching
    for _ in range(n):
        pred = distinct_image(rng, size)
        target = distinct_image(rng, size)
        m = betti_matching(pred, target)
        got = {}
        for i, j in m.matched:
            p, q = m.pred.pairs[i], m.target.pairs[j]
            if p.dim == 0:
                got[p.birth_cell.critical_vertex] = q.birth_cell.critical_vertex
        want, _ = betti_matching_dim0(pred, target)
        if got != want:
            return False
    return True


SUITES = {
    "persistence": _suite_persistence,
    "euler": _suite_euler,
    "edt": _suite_edt,
    "wasserstein": _suite_wasserstein,
    "betti-matching": _suite_betti_matching,
}


def run_suite(name: str, n: int, size: int, seed: int) -> dict:
    """Run one (or ``all``) validation suites; returns a report dict."""
    names = list(SUITES) if name == "all" else [name]
    report = {}
    for suite in names:
        if suite not in SUITES:
            raise ValueError(f"unknown suite {suite!r}; choose from {sorted(SUITES)} or 'all'")
        rng = np.random.default_rng(seed)
        start = time.perf_counter()
        ok = SUITES[suite](rng, n, size)
        report[suite] = {"status": "PASS" if ok else "FAIL", "n": n, "size": size,
                         "seconds": time.perf_counter() - start}
    return report
