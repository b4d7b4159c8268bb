"""Z/2 column reduction kernel (numba-compiled)."""
import numpy as np
from numba import njit, types
from numba.typed import List


@njit(cache=True)
def _symdiff(a, b):
    out = np.empty(a.size + b.size, np.int64)
    i = j = k = 0
    while i < a.size and j < b.size:
        if a[i] < b[j]:
            out[k] = a[i]
            i += 1
            k += 1
        elif a[i] > b[j]:
            out[k] = b[j]
            j += 1
            k += 1
        else:
            i += 1
            j += 1
    while i < a.size:
        out[k] = a[i]
        i += 1
        k += 1
    while j < b.size:
        out[k] = b[j]
        j += 1
        k += 1
    return out[:k]


@njit(cache=True)
def reduce_columns(columns, indptr, indices, row_rank, skip):
    """Reduce boundary columns left to right.

    ``columns`` lists cell ids in column order; the boundary of cell ``c`` is
    ``indices[indptr[c]:indptr[c + 1]]``. Rows are compared through
    ``row_rank`` (pivot = largest rank). Cells with ``skip[c]`` set are treated
    as already-zero columns (clearing).

    Returns the pivot rank per column, -1 for zero columns.
    """
    ncol = columns.size
    low = np.full(ncol, -1, np.int64)
    owner = np.full(row_rank.size, -1, np.int64)
    stored = List.empty_list(types.int64[::1])
    empty = np.empty(0, np.int64)
    for k in range(ncol):
        c = columns[k]
        if skip[c]:
            stored.append(empty)
            continue
        col = np.sort(row_rank[indices[indptr[c]:indptr[c + 1]]])
        while col.size > 0:
            o = owner[col[-1]]
            if o < 0:
                break
            col = _symdiff(col, stored[o])
        stored.append(col)
        if col.size > 0:
            low[k] = col[-1]
            owner[col[-1]] = k
    return low
