"""Hot numeric kernels: ray carving, segment collision checks, auction assignment.

Each kernel is numba-compiled when available; setting PREDNBV_NO_NUMBA=1
selects the identical pure-numpy/python code path (see _accel).
"""

from __future__ import annotations

import math

import numpy as np

from ._accel import njit

UNKNOWN = 0
FREE = 1
OCCUPIED = 2


@njit(cache=True)
def carve_rays(cells, ox, oy, oz, res, sx, sy, sz, targets):
    """Integrate sensing rays into a ternary grid.

    Walks each sensor->target ray with a 3D DDA, marking traversed cells FREE
    (never downgrading OCCUPIED) and the target cell OCCUPIED. Rays that leave
    the grid are clipped; the final state is independent of ray order.
    """
    nx, ny, nz = cells.shape
    six = int(math.floor((sx - ox) / res))
    siy = int(math.floor((sy - oy) / res))
    siz = int(math.floor((sz - oz) / res))
    if 0 <= six < nx and 0 <= siy < ny and 0 <= siz < nz:
        if cells[six, siy, siz] != OCCUPIED:
            cells[six, siy, siz] = FREE
    for r in range(targets.shape[0]):
        tx = targets[r, 0]
        ty = targets[r, 1]
        tz = targets[r, 2]
        tix = int(math.floor((tx - ox) / res))
        tiy = int(math.floor((ty - oy) / res))
        tiz = int(math.floor((tz - oz) / res))
        dx = tx - sx
        dy = ty - sy
        dz = tz - sz
        ix, iy, iz = six, siy, siz
        stepx = 1 if dx > 0 else (-1 if dx < 0 else 0)
        stepy = 1 if dy > 0 else (-1 if dy < 0 else 0)
        stepz = 1 if dz > 0 else (-1 if dz < 0 else 0)
        # parametrize the segment by t in [0, 1]
        if dx != 0.0:
            tdx = abs(res / dx)
            bx = ox + (ix + (1 if stepx > 0 else 0)) * res
            tmx = (bx - sx) / dx
        else:
            tdx = np.inf
            tmx = np.inf
        if dy != 0.0:
            tdy = abs(res / dy)
            by = oy + (iy + (1 if stepy > 0 else 0)) * res
            tmy = (by - sy) / dy
        else:
            tdy = np.inf
            tmy = np.inf
        if dz != 0.0:
            tdz = abs(res / dz)
            bz = oz + (iz + (1 if stepz > 0 else 0)) * res
            tmz = (bz - sz) / dz
        else:
            tdz = np.inf
            tmz = np.inf
        max_iter = nx + ny + nz + 3
        reached = ix == tix and iy == tiy and iz == tiz
        for _ in range(max_iter):
            if reached:
                break
            if tmx <= tmy and tmx <= tmz:
                if tmx > 1.0:
                    break
                ix += stepx
                tmx += tdx
            elif tmy <= tmz:
                if tmy > 1.0:
                    break
                iy += stepy
                tmy += tdy
            else:
                if tmz > 1.0:
                    break
                iz += stepz
                tmz += tdz
            if ix < 0 or ix >= nx or iy < 0 or iy >= ny or iz < 0 or iz >= nz:
                break
            if ix == tix and iy == tiy and iz == tiz:
                reached = True
                break
            if cells[ix, iy, iz] != OCCUPIED:
                cells[ix, iy, iz] = FREE
        if 0 <= tix < nx and 0 <= tiy < ny and 0 <= tiz < nz:
            cells[tix, tiy, tiz] = OCCUPIED


@njit(cache=True)
def segment_free(cells, ox, oy, oz, res, ax, ay, az, bx, by, bz, step_len):
    """True iff every sample along [a, b] at step_len spacing stays inside the
    grid and off occupied cells. Unknown cells pass (optimistic planning)."""
    nx, ny, nz = cells.shape
    dx = bx - ax
    dy = by - ay
    dz = bz - az
    length = math.sqrt(dx * dx + dy * dy + dz * dz)
    n = int(length / step_len) + 1
    for k in range(n + 1):
        t = k / n
        px = ax + dx * t
        py = ay + dy * t
        pz = az + dz * t
        ix = int(math.floor((px - ox) / res))
        iy = int(math.floor((py - oy) / res))
        iz = int(math.floor((pz - oz) / res))
        if ix < 0 or ix >= nx or iy < 0 or iy >= ny or iz < 0 or iz >= nz:
            return False
        if cells[ix, iy, iz] == OCCUPIED:
            return False
    return True


@njit(cache=True)
def auction_assign(a, b, eps_final):
    """Approximate min-cost bijection a[i] -> b[assigned[i]] by forward auction
    with epsilon scaling. Costs are Euclidean distances computed on the fly.

    Returns (assigned, prices); the assignment is feasible (a permutation), and
    its cost exceeds the optimum by at most n * eps_final.
    """
    n = a.shape[0]
    prices = np.zeros(n)
    assigned = np.full(n, -1, np.int64)
    owner = np.full(n, -1, np.int64)
    # initial epsilon from the cost scale
    scale = 0.0
    for i in range(n):
        dx = a[i, 0] - b[0, 0]
        dy = a[i, 1] - b[0, 1]
        dz = a[i, 2] - b[0, 2]
        c = math.sqrt(dx * dx + dy * dy + dz * dz)
        if c > scale:
            scale = c
    eps = scale / 2.0 if scale > 0 else eps_final
    if eps < eps_final:
        eps = eps_final
    while True:
        for i in range(n):
            assigned[i] = -1
            owner[i] = -1
        n_assigned = 0
        while n_assigned < n:
            for i in range(n):
                if assigned[i] != -1:
                    continue
                best = -np.inf
                second = -np.inf
                best_j = -1
                for j in range(n):
                    dx = a[i, 0] - b[j, 0]
                    dy = a[i, 1] - b[j, 1]
                    dz = a[i, 2] - b[j, 2]
                    v = -math.sqrt(dx * dx + dy * dy + dz * dz) - prices[j]
                    if v > best:
                        second = best
                        best = v
                        best_j = j
                    elif v > second:
                        second = v
                if second == -np.inf:
                    second = best
                prices[best_j] += best - second + eps
                prev = owner[best_j]
                if prev != -1:
                    assigned[prev] = -1
                    n_assigned -= 1
                owner[best_j] = i
                assigned[i] = best_j
                n_assigned += 1
        if eps <= eps_final:
            break
        eps /= 5.0
        if eps < eps_final:
            eps = eps_final
    return assigned, prices
