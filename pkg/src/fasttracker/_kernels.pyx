# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: pairwise box overlap and rectangular linear assignment.

Boxes are rows of ``(left, top, width, height)``.  Every function here has a
numpy twin in ``_kernels_py`` with identical results.
"""
import numpy as np

from libc.math cimport INFINITY, sqrt
from libc.stdlib cimport free, malloc


cdef inline double _inter(double al, double at, double aw, double ah,
                          double bl, double bt, double bw, double bh) nogil:
    cdef double iw = min(al + aw, bl + bw) - max(al, bl)
    cdef double ih = min(at + ah, bt + bh) - max(at, bt)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    return iw * ih


def iou_matrix(const double[:, :] a, const double[:, :] b):
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0], i, j
    out = np.zeros((n, m), dtype=np.float64)
    cdef double[:, :] o = out
    cdef double inter, area_a, area_b
    with nogil:
        for i in range(n):
            area_a = a[i, 2] * a[i, 3]
            for j in range(m):
                inter = _inter(a[i, 0], a[i, 1], a[i, 2], a[i, 3],
                               b[j, 0], b[j, 1], b[j, 2], b[j, 3])
                if inter > 0.0:
                    area_b = b[j, 2] * b[j, 3]
                    o[i, j] = min(inter / (area_a + area_b - inter), 1.0)
    return out


def coverage_matrix(const double[:, :] targets, const double[:, :] occluders):
    """Fraction of each target's area covered by each occluder."""
    cdef Py_ssize_t n = targets.shape[0], m = occluders.shape[0], i, j
    out = np.zeros((n, m), dtype=np.float64)
    cdef double[:, :] o = out
    cdef double inter, area_t
    with nogil:
        for i in range(n):
            area_t = targets[i, 2] * targets[i, 3]
            for j in range(m):
                inter = _inter(targets[i, 0], targets[i, 1], targets[i, 2], targets[i, 3],
                               occluders[j, 0], occluders[j, 1], occluders[j, 2], occluders[j, 3])
                if inter > 0.0:
                    o[i, j] = min(inter / area_t, 1.0)
    return out


cdef int _solve(double[:, :] cost, Py_ssize_t nr, Py_ssize_t nc,
                long[:] col4row) nogil:
    # Shortest augmenting path with dual potentials; requires nr <= nc.
    cdef double *u
    cdef double *v
    cdef double *shortest
    cdef long *path
    cdef long *row4col
    cdef char *sr
    cdef char *sc
    cdef Py_ssize_t cur, i, j, sink, best_j, k
    cdef double min_val, lowest, r
    cdef int status = 0
    u = <double *> malloc(nr * sizeof(double))
    v = <double *> malloc(nc * sizeof(double))
    shortest = <double *> malloc(nc * sizeof(double))
    path = <long *> malloc(nc * sizeof(long))
    row4col = <long *> malloc(nc * sizeof(long))
    sr = <char *> malloc(nr * sizeof(char))
    sc = <char *> malloc(nc * sizeof(char))
    for i in range(nr):
        u[i] = 0.0
        col4row[i] = -1
    for j in range(nc):
        v[j] = 0.0
        row4col[j] = -1
    for cur in range(nr):
        for i in range(nr):
            sr[i] = 0
        for j in range(nc):
            sc[j] = 0
            shortest[j] = INFINITY
            path[j] = -1
        min_val = 0.0
        i = cur
        sink = -1
        while sink == -1:
            sr[i] = 1
            lowest = INFINITY
            best_j = -1
            for j in range(nc):
                if sc[j]:
                    continue
                r = min_val + cost[i, j] - u[i] - v[j]
                if r < shortest[j]:
                    path[j] = i
                    shortest[j] = r
                # ties prefer an unassigned column, then the lowest index
                if shortest[j] < lowest or (
                    shortest[j] == lowest and best_j >= 0
                    and row4col[j] == -1 and row4col[best_j] != -1
                ):
                    lowest = shortest[j]
                    best_j = j
            if best_j == -1 or lowest == INFINITY:
                status = -1
                break
            min_val = lowest
            sc[best_j] = 1
            if row4col[best_j] == -1:
                sink = best_j
            else:
                i = row4col[best_j]
        if status != 0:
            break
        u[cur] += min_val
        for i in range(nr):
            if sr[i] and i != cur:
                u[i] += min_val - shortest[col4row[i]]
        for j in range(nc):
            if sc[j]:
                v[j] -= min_val - shortest[j]
        j = sink
        while True:
            i = path[j]
            row4col[j] = i
            k = col4row[i]
            col4row[i] = j
            j = k
            if i == cur:
                break
    free(u)
    free(v)
    free(shortest)
    free(path)
    free(row4col)
    free(sr)
    free(sc)
    return status


def linear_assignment(cost_in):
    """Minimum-cost assignment of a dense rectangular matrix.

    Returns ``(rows, cols)`` index arrays of length ``min(n, m)`` sorted by row.
    """
    cost = np.ascontiguousarray(cost_in, dtype=np.float64)
    if cost.ndim != 2:
        raise ValueError("cost matrix must be 2-D")
    if cost.size == 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty.copy()
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix contains non-finite entries")
    transposed = cost.shape[0] > cost.shape[1]
    if transposed:
        cost = np.ascontiguousarray(cost.T)
    cdef Py_ssize_t nr = cost.shape[0], nc = cost.shape[1]
    col4row_arr = np.full(nr, -1, dtype=np.int_)
    cdef long[:] col4row = col4row_arr
    cdef double[:, :] c = cost
    cdef int status
    with nogil:
        status = _solve(c, nr, nc, col4row)
    if status != 0:
        raise ValueError("cost matrix is infeasible")
    rows = np.arange(nr, dtype=np.int64)
    cols = col4row_arr.astype(np.int64)
    if transposed:
        order = np.argsort(cols, kind="stable")
        return cols[order], rows[order]
    return rows, cols


def kalman_predict(const double[::1] mean, const double[:, ::1] cov, const double[::1] q):
    """Constant-velocity step: x' = F x, P' = F P F^T + diag(q)."""
    out_m = np.empty(8)
    out_p = np.empty((8, 8))
    cdef double[::1] m = out_m
    cdef double[:, ::1] p = out_p
    cdef double fp[8][8]
    cdef int i, j
    for i in range(4):
        m[i] = mean[i] + mean[i + 4]
        m[i + 4] = mean[i + 4]
    # F P: top rows gain the velocity rows
    for i in range(8):
        for j in range(8):
            fp[i][j] = cov[i, j] + (cov[i + 4, j] if i < 4 else 0.0)
    for i in range(8):
        for j in range(8):
            p[i, j] = fp[i][j] + (fp[i][j + 4] if j < 4 else 0.0)
    for i in range(8):
        p[i, i] += q[i]
    return out_m, out_p


def kalman_update(const double[::1] mean, const double[:, ::1] cov, const double[::1] z, double r):
    """Joseph-form update with measurement (cx, cy, w, h) and noise r * I.

    Raises ValueError when the innovation covariance is not positive definite.
    """
    out_m = np.empty(8)
    out_p = np.empty((8, 8))
    cdef double[::1] m = out_m
    cdef double[:, ::1] p = out_p
    cdef double L[4][4]
    cdef double K[8][4]
    cdef double Y[4][8]
    cdef double AP[8][8]
    cdef double s, innov[4]
    cdef int i, j, k
    # Cholesky of S = P[:4, :4] + r I
    for i in range(4):
        for j in range(i + 1):
            s = cov[i, j] + (r if i == j else 0.0)
            for k in range(j):
                s -= L[i][k] * L[j][k]
            if i == j:
                if s <= 0.0:
                    raise ValueError("innovation covariance is not positive definite")
                L[i][i] = sqrt(s)
            else:
                L[i][j] = s / L[j][j]
    # solve S Y = P[:4, :] column by column; K = Y^T
    for j in range(8):
        for i in range(4):
            s = cov[i, j]
            for k in range(i):
                s -= L[i][k] * Y[k][j]
            Y[i][j] = s / L[i][i]
        for i in range(3, -1, -1):
            s = Y[i][j]
            for k in range(i + 1, 4):
                s -= L[k][i] * Y[k][j]
            Y[i][j] = s / L[i][i]
    for i in range(8):
        for k in range(4):
            K[i][k] = Y[k][i]
    for k in range(4):
        innov[k] = z[k] - mean[k]
    for i in range(8):
        s = mean[i]
        for k in range(4):
            s += K[i][k] * innov[k]
        m[i] = s
    # A = I - K H with H = [I4 0]
    for i in range(8):
        for j in range(8):
            s = cov[i, j]
            for k in range(4):
                s -= K[i][k] * cov[k, j]
            AP[i][j] = s
    for i in range(8):
        for j in range(8):
            s = AP[i][j]
            for k in range(4):
                s += -AP[i][k] * K[j][k] + r * K[i][k] * K[j][k]
            p[i, j] = s
    for i in range(8):
        for j in range(i + 1, 8):
            s = 0.5 * (p[i, j] + p[j, i])
            p[i, j] = s
            p[j, i] = s
    return out_m, out_p
