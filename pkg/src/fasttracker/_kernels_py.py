"""Numpy implementations of the compiled kernels.

Used when the Cython extension is not built, or when the python backend is
forced.  Results match ``_kernels`` exactly on the same input.
"""
import numpy as np


def _intersection(a, b):
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    left = np.maximum(a[:, None, 0], b[None, :, 0])
    top = np.maximum(a[:, None, 1], b[None, :, 1])
    right = np.minimum(a[:, None, 0] + a[:, None, 2], b[None, :, 0] + b[None, :, 2])
    bottom = np.minimum(a[:, None, 1] + a[:, None, 3], b[None, :, 1] + b[None, :, 3])
    iw = right - left
    ih = bottom - top
    inter = np.where((iw > 0.0) & (ih > 0.0), iw * ih, 0.0)
    return a, b, inter


def iou_matrix(a, b):
    a, b, inter = _intersection(a, b)
    area_a = a[:, 2] * a[:, 3]
    area_b = b[:, 2] * b[:, 3]
    union = area_a[:, None] + area_b[None, :] - inter
    out = np.zeros_like(inter)
    np.divide(inter, union, out=out, where=inter > 0.0)
    return np.minimum(out, 1.0)


def coverage_matrix(targets, occluders):
    """Fraction of each target's area covered by each occluder."""
    t, _, inter = _intersection(targets, occluders)
    area_t = (t[:, 2] * t[:, 3])[:, None]
    out = np.zeros_like(inter)
    np.divide(inter, np.broadcast_to(area_t, inter.shape), out=out, where=inter > 0.0)
    return np.minimum(out, 1.0)


def linear_assignment(cost_in):
    """Minimum-cost assignment of a dense rectangular matrix.

    Shortest augmenting path over dual potentials, one row at a time.  The
    column scan is vectorised; ties prefer an unassigned column, then the
    lowest column index.
    """
    cost = np.array(cost_in, dtype=np.float64)
    if cost.ndim != 2:
        raise ValueError("cost matrix must be 2-D")
    if cost.size == 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty.copy()
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix contains non-finite entries")
    transposed = cost.shape[0] > cost.shape[1]
    if transposed:
        cost = cost.T.copy()
    nr, nc = cost.shape
    u = np.zeros(nr)
    v = np.zeros(nc)
    col4row = np.full(nr, -1, dtype=np.int64)
    row4col = np.full(nc, -1, dtype=np.int64)

    for cur in range(nr):
        shortest = np.full(nc, np.inf)
        path = np.full(nc, -1, dtype=np.int64)
        sr = np.zeros(nr, dtype=bool)
        sc = np.zeros(nc, dtype=bool)
        min_val = 0.0
        i = cur
        sink = -1
        while sink == -1:
            sr[i] = True
            open_cols = ~sc
            r = min_val + cost[i] - u[i] - v
            better = open_cols & (r < shortest)
            path[better] = i
            shortest[better] = r[better]
            cand = np.where(open_cols, shortest, np.inf)
            lowest = cand.min()
            if not np.isfinite(lowest):
                raise ValueError("cost matrix is infeasible")
            ties = np.flatnonzero(cand == lowest)
            free = ties[row4col[ties] == -1]
            j = int(free[0]) if free.size else int(ties[0])
            min_val = lowest
            sc[j] = True
            if row4col[j] == -1:
                sink = j
            else:
                i = int(row4col[j])
        u[cur] += min_val
        others = sr.copy()
        others[cur] = False
        idx = np.flatnonzero(others)
        u[idx] += min_val - shortest[col4row[idx]]
        v[sc] -= min_val - shortest[sc]
        j = sink
        while True:
            i = int(path[j])
            row4col[j] = i
            col4row[i], j = j, int(col4row[i])
            if i == cur:
                break

    rows = np.arange(nr, dtype=np.int64)
    if transposed:
        order = np.argsort(col4row, kind="stable")
        return col4row[order], rows[order]
    return rows, col4row.copy()


_F = np.eye(8)
_F[:4, 4:] = np.eye(4)


def kalman_predict(mean, cov, q):
    p = _F @ cov @ _F.T
    p[np.diag_indices(8)] += q
    return _F @ mean, p


def kalman_update(mean, cov, z, r):
    S = cov[:4, :4] + r * np.eye(4)
    try:
        chol = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        raise ValueError("innovation covariance is not positive definite") from None
    y = np.linalg.solve(chol, cov[:4, :])
    gain = np.linalg.solve(chol.T, y).T
    new_mean = mean + gain @ (z - mean[:4])
    a = np.eye(8)
    a[:, :4] -= gain
    p = a @ cov @ a.T + r * (gain @ gain.T)
    return new_mean, 0.5 * (p + p.T)
