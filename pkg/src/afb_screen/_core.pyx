# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: 8-connected labeling and Moore boundary tracing.

Same contracts as ``_fallback``; outputs must be identical.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef int MOORE_DX[8]
cdef int MOORE_DY[8]
MOORE_DX[:] = [-1, -1, 0, 1, 1, 1, 0, -1]
MOORE_DY[:] = [0, -1, -1, -1, 0, 1, 1, 1]


cdef inline Py_ssize_t _find(Py_ssize_t[::1] parent, Py_ssize_t i) nogil:
    cdef Py_ssize_t root = i, nxt
    while parent[root] != root:
        root = parent[root]
    while parent[i] != root:
        nxt = parent[i]
        parent[i] = root
        i = nxt
    return root


cdef inline Py_ssize_t _union(Py_ssize_t[::1] parent, Py_ssize_t a, Py_ssize_t b) nogil:
    # returns the merged root; the smaller root wins
    cdef Py_ssize_t ra = _find(parent, a), rb = _find(parent, b)
    if ra == rb:
        return ra
    if rb < ra:
        parent[ra] = rb
        return rb
    parent[rb] = ra
    return ra


def label8(mask):
    cdef cnp.uint8_t[:, ::1] m = np.ascontiguousarray(mask, dtype=np.uint8)
    cdef Py_ssize_t h = m.shape[0], w = m.shape[1]
    cdef cnp.int64_t[:, ::1] prov = np.zeros((h, w), dtype=np.int64)
    cdef Py_ssize_t nfg = int(np.count_nonzero(np.asarray(m)))
    parent_arr = np.zeros(nfg + 1, dtype=np.intp)
    cdef Py_ssize_t[::1] parent = parent_arr
    cdef Py_ssize_t y, x, lab, nxt = 1, c
    out_arr = np.zeros((h, w), dtype=np.int32)
    cdef cnp.int32_t[:, ::1] out = out_arr
    final_arr = np.zeros(nfg + 1, dtype=np.int32)
    cdef cnp.int32_t[::1] final = final_arr
    cdef cnp.int32_t n = 0

    with nogil:
        for y in range(h):
            for x in range(w):
                if not m[y, x]:
                    continue
                lab = 0
                # visit order W, NW, N, NE matches the fallback
                if x > 0 and prov[y, x - 1]:
                    lab = _find(parent, prov[y, x - 1])
                if y > 0:
                    if x > 0 and prov[y - 1, x - 1]:
                        c = prov[y - 1, x - 1]
                        lab = _find(parent, c) if lab == 0 else _union(parent, lab, c)
                    if prov[y - 1, x]:
                        c = prov[y - 1, x]
                        lab = _find(parent, c) if lab == 0 else _union(parent, lab, c)
                    if x + 1 < w and prov[y - 1, x + 1]:
                        c = prov[y - 1, x + 1]
                        lab = _find(parent, c) if lab == 0 else _union(parent, lab, c)
                if lab == 0:
                    lab = nxt
                    parent[lab] = lab
                    nxt += 1
                prov[y, x] = lab

        for y in range(h):
            for x in range(w):
                if prov[y, x]:
                    c = _find(parent, prov[y, x])
                    if final[c] == 0:
                        n += 1
                        final[c] = n
                    out[y, x] = final[c]
    return out_arr, int(n)


cdef inline int _direction(int dx, int dy) nogil:
    cdef int i
    for i in range(8):
        if MOORE_DX[i] == dx and MOORE_DY[i] == dy:
            return i
    return -1


def trace_moore(local):
    cdef cnp.uint8_t[:, ::1] a = np.ascontiguousarray(local, dtype=np.uint8)
    cdef Py_ssize_t h = a.shape[0], w = a.shape[1]
    cdef Py_ssize_t y, x, n = 0, cap = 64
    cdef int sx = -1, sy = -1
    for y in range(h):
        for x in range(w):
            if a[y, x]:
                sx = <int>x
                sy = <int>y
                break
        if sx >= 0:
            break
    if sx < 0:
        raise ValueError("no foreground pixel to trace")
    buf_arr = np.empty((cap, 2), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] buf = buf_arr
    cdef int cx = sx, cy = sy, back = 0, found, d, i, prev, bx, by
    cdef int fx = -1, fy = -1, fd = -1
    buf[0, 0] = sx
    buf[0, 1] = sy
    n = 1
    while True:
        found = -1
        for i in range(1, 9):
            d = (back + i) & 7
            if a[cy + MOORE_DY[d], cx + MOORE_DX[d]]:
                found = d
                break
        if found < 0:
            break
        if fd < 0:
            fx, fy, fd = cx, cy, found
        elif cx == fx and cy == fy and found == fd:
            break
        prev = (found - 1) & 7
        bx = cx + MOORE_DX[prev]
        by = cy + MOORE_DY[prev]
        cx = cx + MOORE_DX[found]
        cy = cy + MOORE_DY[found]
        back = _direction(bx - cx, by - cy)
        if n == cap:
            cap *= 2
            buf_arr = np.resize(buf_arr, (cap, 2))
            buf = buf_arr
        buf[n, 0] = cx
        buf[n, 1] = cy
        n += 1
    # the walk ends back on the start pixel, which is already first
    if n > 1:
        n -= 1
    return buf_arr[:n].copy()
