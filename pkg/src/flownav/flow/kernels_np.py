"""Pure-numpy implementations of the hot per-pixel kernels.

Selected when ``FLOWNAV_BACKEND=numpy`` (or when numba is unavailable under
``auto``). Every function here has a signature-identical twin in
``kernels_nb``; the two are kept operation-for-operation aligned so results
agree to float rounding. Scratch buffers (``ws``, ``stack``, ``mid``) are
caller-provided so the driver can reuse them across frames; outputs that
escape into result objects are freshly allocated.
"""

from __future__ import annotations

import numpy as np


def correlate1d(img: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    """Correlate one axis with a small kernel, replicating edge samples."""
    r = kernel.size // 2
    pad = [(0, 0), (0, 0)]
    pad[axis] = (r, r)
    padded = np.pad(img, pad, mode="edge")
    out = np.zeros(img.shape, dtype=np.float64)
    n = img.shape[axis]
    for k in range(kernel.size):
        if axis == 0:
            out += kernel[k] * padded[k : k + n, :]
        else:
            out += kernel[k] * padded[:, k : k + n]
    return out


def poly_expand_planes(img, kg, kx, kxx, sinv, m2, m22, ws):
    """Quadratic-fit coefficient planes via separable correlations.

    ``kg``, ``kx``, ``kxx`` are the applicability kernel and its first two
    coordinate-weighted variants; ``sinv`` is the precomputed 3x3 inverse
    coupling the {1, x^2, y^2} basis functions, ``m2``/``m22`` the second
    moment and its square (the diagonal entries for x, y and xy). ``ws`` is
    a (9, H, W) scratch block for the intermediate correlations.
    """
    ws[0] = correlate1d(img, kg, 0)
    ws[1] = correlate1d(img, kx, 0)
    ws[2] = correlate1d(img, kxx, 0)
    t0, t1, t2 = ws[0], ws[1], ws[2]
    ws[3] = correlate1d(t0, kg, 1)
    ws[4] = correlate1d(t0, kx, 1)
    ws[5] = correlate1d(t0, kxx, 1)
    ws[6] = correlate1d(t1, kg, 1)
    ws[7] = correlate1d(t1, kx, 1)
    ws[8] = correlate1d(t2, kg, 1)
    v1, vx, vxx, vy, vxy, vyy = ws[3], ws[4], ws[5], ws[6], ws[7], ws[8]

    c = sinv[0, 0] * v1 + sinv[0, 1] * vxx + sinv[0, 2] * vyy
    a11 = sinv[1, 0] * v1 + sinv[1, 1] * vxx + sinv[1, 2] * vyy
    a22 = sinv[2, 0] * v1 + sinv[2, 1] * vxx + sinv[2, 2] * vyy
    bx = vx / m2
    by = vy / m2
    a12 = 0.5 * vxy / m22
    return a11, a12, a22, bx, by, c


def build_point_systems(
    a11_1, a12_1, a22_1, bx1, by1,
    a11_2, a12_2, a22_2, bx2, by2,
    prior_dx, prior_dy,
    stack,
):
    """Per-pixel constraint terms before neighborhood aggregation.

    Frame-2 coefficients are sampled at the prior-displaced position (rounded
    to the nearest pixel, clamped to the image). The prior's contribution is
    folded into the constraint vector so the aggregated solve yields total
    displacement rather than an increment. Fills the (6, H, W) ``stack``
    with (g11, g12, g22, h1, h2, s) and returns the in-bounds mask.
    """
    height, width = prior_dx.shape
    rdx = np.rint(prior_dx)
    rdy = np.rint(prior_dy)
    cols = np.arange(width, dtype=np.float64)[None, :]
    rows = np.arange(height, dtype=np.float64)[:, None]
    tx = cols + rdx
    ty = rows + rdy
    ok = (tx >= 0) & (tx <= width - 1) & (ty >= 0) & (ty <= height - 1)
    ix = np.clip(tx, 0, width - 1).astype(np.int64)
    iy = np.clip(ty, 0, height - 1).astype(np.int64)

    a11 = 0.5 * (a11_1 + a11_2[iy, ix])
    a12 = 0.5 * (a12_1 + a12_2[iy, ix])
    a22 = 0.5 * (a22_1 + a22_2[iy, ix])
    dbx = -0.5 * (bx2[iy, ix] - bx1) + (a11 * rdx + a12 * rdy)
    dby = -0.5 * (by2[iy, ix] - by1) + (a12 * rdx + a22 * rdy)

    stack[0] = a11 * a11 + a12 * a12
    stack[1] = (a11 + a22) * a12
    stack[2] = a22 * a22 + a12 * a12
    stack[3] = a11 * dbx + a12 * dby
    stack[4] = a12 * dbx + a22 * dby
    stack[5] = dbx * dbx + dby * dby
    return ok


def blur_stack(stack: np.ndarray, kw: np.ndarray, mid: np.ndarray, out: np.ndarray) -> None:
    """Separable correlation of each plane in a (P, H, W) stack into ``out``.

    ``mid`` is same-shape scratch for the vertical pass.
    """
    for p in range(stack.shape[0]):
        mid[p] = correlate1d(stack[p], kw, 0)
        out[p] = correlate1d(mid[p], kw, 1)


def solve_field_planes(g11, g12, g22, h1, h2, s, eps):
    """Vectorized guarded 2x2 solve; degenerate pixels get d = 0."""
    det = g11 * g22 - g12 * g12
    tr = g11 + g22
    ok = det > eps * tr * tr
    safe = np.where(ok, det, 1.0)
    dx = np.where(ok, (g22 * h1 - g12 * h2) / safe, 0.0)
    dy = np.where(ok, (g11 * h2 - g12 * h1) / safe, 0.0)
    e = np.where(ok, s - (dx * h1 + dy * h2), s)
    e = np.maximum(e, 0.0)
    return dx, dy, e, ok


def level_flow(
    a11_1, a12_1, a22_1, bx1, by1,
    a11_2, a12_2, a22_2, bx2, by2,
    dx, dy, kw, eps, iters,
    stack, mid, agg,
):
    """One pyramid level: ``iters`` rounds of build/aggregate/solve.

    ``dx``/``dy`` carry the prior in and the refined displacement out (in
    place); ``stack``/``mid``/``agg`` are (6, H, W) scratch. Returns fresh
    (e, valid) planes. Composes the exact same kernels the public operations
    use, so a hand-orchestrated build/solve sequence reproduces it bitwise.
    """
    warp_ok = None
    ok = None
    e = None
    for _ in range(iters):
        warp_ok = build_point_systems(
            a11_1, a12_1, a22_1, bx1, by1,
            a11_2, a12_2, a22_2, bx2, by2,
            dx, dy, stack,
        )
        blur_stack(stack, kw, mid, agg)
        sdx, sdy, e, ok = solve_field_planes(
            agg[0], agg[1], agg[2], agg[3], agg[4], agg[5], eps
        )
        dx[:] = sdx
        dy[:] = sdy
    return e, ok & warp_ok
