"""Pure-Python versions of the compiled kernels in ``_core.pyx``.

Both modules expose the same two functions and must return identical
results; the test suite runs every kernel test against each backend.
"""

import numpy as np

# clockwise Moore neighbourhood in image coordinates (y grows downward),
# starting from west
MOORE_DX = (-1, -1, 0, 1, 1, 1, 0, -1)
MOORE_DY = (0, -1, -1, -1, 0, 1, 1, 1)


def _find(parent, i):
    root = i
    while parent[root] != root:
        root = parent[root]
    while parent[i] != root:
        parent[i], i = root, parent[i]
    return root


def label8(mask):
    """Two-pass 8-connected labeling with union-find.

    Returns ``(labels, n)`` where ``labels`` is an int32 array with 0 for
    background and 1..n numbered by first appearance in raster order.
    """
    m = np.ascontiguousarray(mask, dtype=np.uint8)
    h, w = m.shape
    prov = [[0] * w for _ in range(h)]
    parent = [0]
    rows = m.tolist()
    for y in range(h):
        row = rows[y]
        cur = prov[y]
        up = prov[y - 1] if y > 0 else None
        for x in range(w):
            if not row[x]:
                continue
            lab = 0
            # already-visited neighbours: W, NW, N, NE
            cands = []
            if x > 0 and cur[x - 1]:
                cands.append(cur[x - 1])
            if up is not None:
                if x > 0 and up[x - 1]:
                    cands.append(up[x - 1])
                if up[x]:
                    cands.append(up[x])
                if x + 1 < w and up[x + 1]:
                    cands.append(up[x + 1])
            if not cands:
                lab = len(parent)
                parent.append(lab)
            else:
                lab = _find(parent, cands[0])
                for c in cands[1:]:
                    r = _find(parent, c)
                    if r != lab:
                        if r < lab:
                            parent[lab] = r
                            lab = r
                        else:
                            parent[r] = lab
            cur[x] = lab
    final = [0] * len(parent)
    n = 0
    out = np.zeros((h, w), dtype=np.int32)
    for y in range(h):
        cur = prov[y]
        orow = out[y]
        for x in range(w):
            p = cur[x]
            if p:
                r = _find(parent, p)
                if final[r] == 0:
                    n += 1
                    final[r] = n
                orow[x] = final[r]
    return out, n


def trace_moore(local):
    """Moore boundary following on a 0/1 array padded with a background border.

    Starts from the first foreground pixel in raster order and stops when
    the first move repeats. Returns an ``(m, 2)`` int64 array of ``(x, y)``.
    """
    a = np.ascontiguousarray(local, dtype=np.uint8)
    h, w = a.shape
    nz = np.flatnonzero(a.ravel())
    if len(nz) == 0:
        raise ValueError("no foreground pixel to trace")
    start = int(nz[0])
    sy, sx = divmod(start, w)
    pts = [(sx, sy)]
    cx, cy = sx, sy
    back = 0  # backtrack direction index: west of the start is background
    first_move = None
    while True:
        found = -1
        for i in range(1, 9):
            d = (back + i) & 7
            nx, ny = cx + MOORE_DX[d], cy + MOORE_DY[d]
            if a[ny, nx]:
                found = d
                break
        if found < 0:
            break  # isolated pixel
        move = (cx, cy, found)
        if first_move is None:
            first_move = move
        elif move == first_move:
            break
        prev = (found - 1) & 7
        bx, by = cx + MOORE_DX[prev], cy + MOORE_DY[prev]
        cx, cy = cx + MOORE_DX[found], cy + MOORE_DY[found]
        back = _direction(bx - cx, by - cy)
        pts.append((cx, cy))
    if len(pts) > 1:
        pts.pop()  # the loop re-appends the start before detecting the repeat
    return np.array(pts, dtype=np.int64).reshape(-1, 2)


_DIR_LOOKUP = {(MOORE_DX[i], MOORE_DY[i]): i for i in range(8)}


def _direction(dx, dy):
    return _DIR_LOOKUP[(dx, dy)]
