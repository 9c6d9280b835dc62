"""Numba implementations of the hot per-pixel kernels.

Signature-for-signature twins of ``kernels_np``, compiled with ``@njit`` and
row-parallel loops. Correlations run kernel-tap-outermost over contiguous row
segments with edge clamping hoisted out of the inner loops: that vectorizes
well single-threaded while reproducing the numpy backend's per-element
accumulation order exactly (tap 0 assigns, later taps accumulate in
ascending order — the same sequence the numpy slice-sum performs).
``fastmath`` stays off so no reassociation breaks that equivalence, and no
reduction crosses a row boundary, keeping results independent of thread
count. Scratch blocks (``ws``, ``stack``, ``mid``) come from the caller and
are fully overwritten; escaping outputs are allocated fresh.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange


@njit(cache=True, parallel=True)
def poly_expand_planes(img, kg, kx, kxx, sinv, m2, m22, ws):
    height, width = img.shape
    n = kg.size
    r = n // 2
    t0, t1, t2 = ws[0], ws[1], ws[2]
    v1, vx, vxx = ws[3], ws[4], ws[5]
    vy, vxy, vyy = ws[6], ws[7], ws[8]

    for y in prange(height):
        yy = y - r
        if yy < 0:
            yy = 0
        w0 = kg[0]
        w1 = kx[0]
        w2 = kxx[0]
        for x in range(width):
            v = img[yy, x]
            t0[y, x] = w0 * v
            t1[y, x] = w1 * v
            t2[y, x] = w2 * v
        for k in range(1, n):
            yy = y + k - r
            if yy < 0:
                yy = 0
            elif yy > height - 1:
                yy = height - 1
            w0 = kg[k]
            w1 = kx[k]
            w2 = kxx[k]
            for x in range(width):
                v = img[yy, x]
                t0[y, x] += w0 * v
                t1[y, x] += w1 * v
                t2[y, x] += w2 * v

    for y in prange(height):
        # tap 0 (offset -r) assigns: its clamped-left segment is [0, r),
        # interior the rest; poly_expand guarantees width >= n > r.
        w0 = kg[0]
        w1 = kx[0]
        w2 = kxx[0]
        u0 = t0[y, 0]
        u1 = t1[y, 0]
        u2 = t2[y, 0]
        for x in range(0, r):
            v1[y, x] = w0 * u0
            vx[y, x] = w1 * u0
            vxx[y, x] = w2 * u0
            vy[y, x] = w0 * u1
            vxy[y, x] = w1 * u1
            vyy[y, x] = w0 * u2
        for x in range(r, width):
            u0 = t0[y, x - r]
            u1 = t1[y, x - r]
            u2 = t2[y, x - r]
            v1[y, x] = w0 * u0
            vx[y, x] = w1 * u0
            vxx[y, x] = w2 * u0
            vy[y, x] = w0 * u1
            vxy[y, x] = w1 * u1
            vyy[y, x] = w0 * u2
        for k in range(1, n):
            off = k - r
            w0 = kg[k]
            w1 = kx[k]
            w2 = kxx[k]
            lo = -off if off < 0 else 0
            if lo > width:
                lo = width
            hi = width - off if off > 0 else width
            if hi < lo:
                hi = lo
            u0 = t0[y, 0]
            u1 = t1[y, 0]
            u2 = t2[y, 0]
            for x in range(0, lo):
                v1[y, x] += w0 * u0
                vx[y, x] += w1 * u0
                vxx[y, x] += w2 * u0
                vy[y, x] += w0 * u1
                vxy[y, x] += w1 * u1
                vyy[y, x] += w0 * u2
            for x in range(lo, hi):
                u0 = t0[y, x + off]
                u1 = t1[y, x + off]
                u2 = t2[y, x + off]
                v1[y, x] += w0 * u0
                vx[y, x] += w1 * u0
                vxx[y, x] += w2 * u0
                vy[y, x] += w0 * u1
                vxy[y, x] += w1 * u1
                vyy[y, x] += w0 * u2
            u0 = t0[y, width - 1]
            u1 = t1[y, width - 1]
            u2 = t2[y, width - 1]
            for x in range(hi, width):
                v1[y, x] += w0 * u0
                vx[y, x] += w1 * u0
                vxx[y, x] += w2 * u0
                vy[y, x] += w0 * u1
                vxy[y, x] += w1 * u1
                vyy[y, x] += w0 * u2

    a11 = np.empty((height, width))
    a12 = np.empty((height, width))
    a22 = np.empty((height, width))
    bx = np.empty((height, width))
    by = np.empty((height, width))
    c = np.empty((height, width))
    for y in prange(height):
        for x in range(width):
            c[y, x] = sinv[0, 0] * v1[y, x] + sinv[0, 1] * vxx[y, x] + sinv[0, 2] * vyy[y, x]
            a11[y, x] = sinv[1, 0] * v1[y, x] + sinv[1, 1] * vxx[y, x] + sinv[1, 2] * vyy[y, x]
            a22[y, x] = sinv[2, 0] * v1[y, x] + sinv[2, 1] * vxx[y, x] + sinv[2, 2] * vyy[y, x]
            bx[y, x] = vx[y, x] / m2
            by[y, x] = vy[y, x] / m2
            a12[y, x] = 0.5 * vxy[y, x] / m22
    return a11, a12, a22, bx, by, c


@njit(cache=True, parallel=True)
def build_point_systems(
    a11_1, a12_1, a22_1, bx1, by1,
    a11_2, a12_2, a22_2, bx2, by2,
    prior_dx, prior_dy,
    stack,
):
    height, width = prior_dx.shape
    ok = np.empty((height, width), dtype=np.bool_)
    for y in prange(height):
        for x in range(width):
            rdx = np.rint(prior_dx[y, x])
            rdy = np.rint(prior_dy[y, x])
            tx = x + rdx
            ty = y + rdy
            inb = 0.0 <= tx <= width - 1 and 0.0 <= ty <= height - 1
            if tx < 0.0:
                tx = 0.0
            elif tx > width - 1:
                tx = float(width - 1)
            if ty < 0.0:
                ty = 0.0
            elif ty > height - 1:
                ty = float(height - 1)
            ix = np.int64(tx)
            iy = np.int64(ty)

            a11 = 0.5 * (a11_1[y, x] + a11_2[iy, ix])
            a12 = 0.5 * (a12_1[y, x] + a12_2[iy, ix])
            a22 = 0.5 * (a22_1[y, x] + a22_2[iy, ix])
            dbx = -0.5 * (bx2[iy, ix] - bx1[y, x]) + (a11 * rdx + a12 * rdy)
            dby = -0.5 * (by2[iy, ix] - by1[y, x]) + (a12 * rdx + a22 * rdy)

            stack[0, y, x] = a11 * a11 + a12 * a12
            stack[1, y, x] = (a11 + a22) * a12
            stack[2, y, x] = a22 * a22 + a12 * a12
            stack[3, y, x] = a11 * dbx + a12 * dby
            stack[4, y, x] = a12 * dbx + a22 * dby
            stack[5, y, x] = dbx * dbx + dby * dby
            ok[y, x] = inb
    return ok


@njit(cache=True, parallel=True)
def blur_stack(stack, kw, mid, out):
    planes, height, width = stack.shape
    n = kw.size
    r = n // 2
    for p in range(planes):
        for y in prange(height):
            yy = y - r
            if yy < 0:
                yy = 0
            w = kw[0]
            for x in range(width):
                mid[p, y, x] = w * stack[p, yy, x]
            for k in range(1, n):
                yy = y + k - r
                if yy < 0:
                    yy = 0
                elif yy > height - 1:
                    yy = height - 1
                w = kw[k]
                for x in range(width):
                    mid[p, y, x] += w * stack[p, yy, x]
        for y in prange(height):
            for k in range(n):
                off = k - r
                w = kw[k]
                lo = -off if off < 0 else 0
                if lo > width:
                    lo = width
                hi = width - off if off > 0 else width
                if hi < lo:
                    hi = lo
                left = mid[p, y, 0]
                if k == 0:
                    for x in range(0, lo):
                        out[p, y, x] = w * left
                    for x in range(lo, hi):
                        out[p, y, x] = w * mid[p, y, x + off]
                    right = mid[p, y, width - 1]
                    for x in range(hi, width):
                        out[p, y, x] = w * right
                else:
                    for x in range(0, lo):
                        out[p, y, x] += w * left
                    for x in range(lo, hi):
                        out[p, y, x] += w * mid[p, y, x + off]
                    right = mid[p, y, width - 1]
                    for x in range(hi, width):
                        out[p, y, x] += w * right


@njit(cache=True, parallel=True)
def _solve_into(agg, eps, dx, dy, e, ok):
    g11, g12, g22 = agg[0], agg[1], agg[2]
    h1, h2, s = agg[3], agg[4], agg[5]
    height, width = s.shape
    for y in prange(height):
        for x in range(width):
            det = g11[y, x] * g22[y, x] - g12[y, x] * g12[y, x]
            tr = g11[y, x] + g22[y, x]
            good = det > eps * tr * tr
            if good:
                ux = (g22[y, x] * h1[y, x] - g12[y, x] * h2[y, x]) / det
                uy = (g11[y, x] * h2[y, x] - g12[y, x] * h1[y, x]) / det
                res = s[y, x] - (ux * h1[y, x] + uy * h2[y, x])
            else:
                ux = 0.0
                uy = 0.0
                res = s[y, x]
            if res < 0.0:
                res = 0.0
            dx[y, x] = ux
            dy[y, x] = uy
            e[y, x] = res
            ok[y, x] = good


@njit(cache=True, parallel=True)
def solve_field_planes(g11, g12, g22, h1, h2, s, eps):
    height, width = s.shape
    dx = np.empty((height, width))
    dy = np.empty((height, width))
    e = np.empty((height, width))
    ok = np.empty((height, width), dtype=np.bool_)
    for y in prange(height):
        for x in range(width):
            det = g11[y, x] * g22[y, x] - g12[y, x] * g12[y, x]
            tr = g11[y, x] + g22[y, x]
            good = det > eps * tr * tr
            if good:
                ux = (g22[y, x] * h1[y, x] - g12[y, x] * h2[y, x]) / det
                uy = (g11[y, x] * h2[y, x] - g12[y, x] * h1[y, x]) / det
                res = s[y, x] - (ux * h1[y, x] + uy * h2[y, x])
            else:
                ux = 0.0
                uy = 0.0
                res = s[y, x]
            if res < 0.0:
                res = 0.0
            dx[y, x] = ux
            dy[y, x] = uy
            e[y, x] = res
            ok[y, x] = good
    return dx, dy, e, ok


@njit(cache=True)
def level_flow(
    a11_1, a12_1, a22_1, bx1, by1,
    a11_2, a12_2, a22_2, bx2, by2,
    dx, dy, kw, eps, iters,
    stack, mid, agg,
):
    """One pyramid level: ``iters`` rounds of build/aggregate/solve.

    Same composition as the public operations (identical subkernels, so the
    results match a hand-orchestrated sequence bitwise), with ``dx``/``dy``
    refined in place and all large intermediates caller-provided.
    """
    height, width = dx.shape
    e = np.empty((height, width))
    ok = np.empty((height, width), dtype=np.bool_)
    valid = np.empty((height, width), dtype=np.bool_)
    warp_ok = ok
    for _ in range(iters):
        warp_ok = build_point_systems(
            a11_1, a12_1, a22_1, bx1, by1,
            a11_2, a12_2, a22_2, bx2, by2,
            dx, dy, stack,
        )
        blur_stack(stack, kw, mid, agg)
        _solve_into(agg, eps, dx, dy, e, ok)
    for y in range(height):
        for x in range(width):
            valid[y, x] = ok[y, x] and warp_ok[y, x]
    return e, valid
