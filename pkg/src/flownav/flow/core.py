"""Dense displacement estimation from per-pixel quadratic image models.

Each frame is approximated, pixel by pixel, with a local quadratic
f(x0 + u) ~ uT A u + bT u + c under a Gaussian applicability window. For a
pure translation both quadratics share A, and equating coefficients turns the
displacement into the solution of a tiny linear system per pixel. Point
systems are aggregated over a Gaussian neighborhood (trading resolution for
robustness), solved with a singularity guard, and iterated coarse-to-fine
over an image pyramid so displacements beyond the window size stay
recoverable.

The per-pixel kernels dispatch to the numba or numpy backend selected by
``flownav.backend``; everything in this module is backend-agnostic driver
code. Scratch blocks that never escape a call are cached per thread and
reused across frames, which keeps the steady-state allocation rate near
zero without compromising the public operations' purity.
"""

from __future__ import annotations

import threading

import numpy as np

from .. import backend
from . import imops, kernels_np
from .types import FlowField, FlowParams, NormalSystem, PolyField

_scratch_store = threading.local()


def _kernels():
    if backend.active_backend() == "numba":
        from . import kernels_nb

        return kernels_nb
    return kernels_np


def _scratch(name: str, shape: tuple[int, ...]) -> np.ndarray:
    """Reusable per-thread float64 buffer; contents are garbage on entry."""
    store = getattr(_scratch_store, "buffers", None)
    if store is None:
        store = {}
        _scratch_store.buffers = store
    key = (name, shape)
    arr = store.get(key)
    if arr is None:
        arr = np.empty(shape)
        store[key] = arr
    return arr


def _expansion_metadata(params: FlowParams):
    """Kernels + inverse moment coupling for the separable quadratic fit.

    With a normalized separable applicability a(u) = g(ux) g(uy), the normal
    matrix over the basis {1, x, y, x^2, y^2, xy} is block diagonal: {x}, {y}
    and {xy} decouple with weights m2, m2, m2^2, while {1, x^2, y^2} couple
    through a 3x3 matrix built from m2 = sum k^2 g(k) and m4 = sum k^4 g(k).
    """
    r = params.expansion_radius
    kg = imops.gaussian_kernel(params.expansion_sigma, r)
    offsets = np.arange(-r, r + 1, dtype=np.float64)
    kx = offsets * kg
    kxx = offsets * offsets * kg
    m2 = float((offsets**2 * kg).sum())
    m4 = float((offsets**4 * kg).sum())
    coupling = np.array(
        [
            [1.0, m2, m2],
            [m2, m4, m2 * m2],
            [m2, m2 * m2, m4],
        ]
    )
    sinv = np.linalg.inv(coupling)
    return kg, kx, kxx, sinv, m2


def poly_expand(img: np.ndarray, params: FlowParams | None = None) -> PolyField:
    """Fit the local quadratic model at every pixel of a grayscale image.

    Correlations run separably with replicate-edge padding; border pixels are
    still computed but flagged non-interior. Raises ``ValueError`` if the
    image is smaller than the fit window.
    """
    params = params or FlowParams()
    img = np.ascontiguousarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError(f"expected a 2D grayscale image, got ndim={img.ndim}")
    r = params.expansion_radius
    if img.shape[0] < 2 * r + 1 or img.shape[1] < 2 * r + 1:
        raise ValueError(
            f"image {img.shape} too small for expansion radius {r} "
            f"(needs at least {2 * r + 1} px per side)"
        )
    kg, kx, kxx, sinv, m2 = _expansion_metadata(params)
    ws = _scratch("expand", (9, *img.shape))
    a11, a12, a22, bx, by, c = _kernels().poly_expand_planes(
        img, kg, kx, kxx, sinv, m2, m2 * m2, ws
    )
    interior = np.zeros(img.shape, dtype=bool)
    interior[r : img.shape[0] - r, r : img.shape[1] - r] = True
    return PolyField(a11=a11, a12=a12, a22=a22, bx=bx, by=by, c=c, interior=interior)


def _build_planes(
    exp1: PolyField,
    exp2: PolyField,
    prior_dx: np.ndarray,
    prior_dy: np.ndarray,
    params: FlowParams,
) -> NormalSystem:
    shape = exp1.shape
    stack = _scratch("build", (6, *shape))
    warp_ok = _kernels().build_point_systems(
        exp1.a11, exp1.a12, exp1.a22, exp1.bx, exp1.by,
        exp2.a11, exp2.a12, exp2.a22, exp2.bx, exp2.by,
        prior_dx, prior_dy,
        stack,
    )
    kw = imops.gaussian_kernel(params.neighborhood_sigma, params.neighborhood_radius)
    mid = _scratch("blur_mid", (6, *shape))
    agg = np.empty((6, *shape))
    _kernels().blur_stack(stack, kw, mid, agg)
    return NormalSystem(
        g11=agg[0], g12=agg[1], g22=agg[2],
        h1=agg[3], h2=agg[4], s=agg[5],
        warp_ok=warp_ok,
    )


def build_system(
    exp1: PolyField,
    exp2: PolyField,
    prior: FlowField | None,
    params: FlowParams | None = None,
) -> NormalSystem:
    """Aggregate per-pixel displacement constraints into 2x2 normal systems.

    At each pixel the two quadratic models are averaged, with the frame-2
    coefficients fetched at the prior-displaced position (rounded to the
    nearest pixel). The prior's own contribution is folded into the
    constraint vector, so solving the aggregated system yields the total
    displacement. Pixels whose displaced lookup left the image are flagged
    in ``warp_ok``.
    """
    params = params or FlowParams()
    if exp1.shape != exp2.shape:
        raise ValueError(f"expansion shapes differ: {exp1.shape} vs {exp2.shape}")
    height, width = exp1.shape
    if prior is None:
        prior_dx = np.zeros((height, width))
        prior_dy = np.zeros((height, width))
    else:
        if prior.shape != exp1.shape:
            raise ValueError(f"prior shape {prior.shape} != field shape {exp1.shape}")
        prior_dx = np.ascontiguousarray(prior.d[..., 0])
        prior_dy = np.ascontiguousarray(prior.d[..., 1])
    return _build_planes(exp1, exp2, prior_dx, prior_dy, params)


def solve_point(G: np.ndarray, h: np.ndarray, eps: float) -> tuple[np.ndarray, bool]:
    """Guarded solve of one 2x2 normal system.

    Returns (d, True) with d = G^-1 h when det(G) > eps * trace(G)^2; the
    relative test makes the guard invariant to brightness scaling. Otherwise
    the pixel is declared unresolvable (aperture problem / no texture) and
    (0, False) comes back.
    """
    G = np.asarray(G, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    det = G[0, 0] * G[1, 1] - G[0, 1] * G[1, 0]
    tr = G[0, 0] + G[1, 1]
    if det > eps * tr * tr:
        d = np.array(
            [
                (G[1, 1] * h[0] - G[0, 1] * h[1]) / det,
                (G[0, 0] * h[1] - G[0, 1] * h[0]) / det,
            ]
        )
        return d, True
    return np.zeros(2), False


def residual(G: np.ndarray, h: np.ndarray, d: np.ndarray, s: float) -> float:
    """Weighted least-squares error left after the solve, clamped at zero.

    ``s`` is the aggregated squared constraint term carried alongside G and
    h. At the solved displacement the objective collapses to s - dT h, which
    round-off can push a hair below zero; the clamp restores nonnegativity.
    (G is part of the system triple but drops out of the minimum value.)
    """
    del G
    h = np.asarray(h, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    return max(float(s) - float(d @ h), 0.0)


def solve_field(system: NormalSystem, params: FlowParams | None = None) -> FlowField:
    """Solve every pixel's normal system; degenerate pixels get d=0, valid=False."""
    params = params or FlowParams()
    dx, dy, e, ok = _kernels().solve_field_planes(
        system.g11, system.g12, system.g22,
        system.h1, system.h2, system.s,
        params.singularity_epsilon,
    )
    return FlowField(
        d=np.stack([dx, dy], axis=-1),
        e=e,
        valid=ok & system.warp_ok,
    )


def _lowpass(img: np.ndarray, sigma: float) -> np.ndarray:
    """Backend-dispatched separable Gaussian for pyramid construction."""
    radius = max(1, int(np.ceil(2.5 * sigma)))
    k = imops.gaussian_kernel(sigma, radius)
    stack = np.ascontiguousarray(img)[None]
    mid = _scratch("pyr_mid", stack.shape)
    out = np.empty_like(stack)
    _kernels().blur_stack(stack, k, mid, out)
    return out[0]


def gaussian_pyramid(img: np.ndarray, levels: int, scale: float) -> list[np.ndarray]:
    """Low-pass image pyramid, returned finest-first (element 0 = input).

    Each level is Gaussian-smoothed (sigma = 0.5/scale) and bilinearly
    resampled to round(previous * scale). Raises ``ValueError`` when the
    requested depth would take the coarsest level below 8x8.
    """
    if levels < 1:
        raise ValueError("levels must be >= 1")
    if not 0.0 < scale < 1.0:
        raise ValueError("scale must lie in (0, 1)")
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError(f"expected a 2D grayscale image, got ndim={img.ndim}")

    sizes = [img.shape]
    for _ in range(1, levels):
        prev_h, prev_w = sizes[-1]
        sizes.append((int(round(prev_h * scale)), int(round(prev_w * scale))))
    if sizes[-1][0] < 8 or sizes[-1][1] < 8:
        raise ValueError(
            f"{levels} levels at scale {scale} shrink {img.shape} below 8x8 "
            f"(coarsest would be {sizes[-1]})"
        )

    sigma = 0.5 / scale
    pyramid = [img]
    for level_h, level_w in sizes[1:]:
        low = _lowpass(pyramid[-1], sigma)
        pyramid.append(imops.resize_bilinear(low, level_h, level_w))
    return pyramid


def estimate_flow(
    f1: np.ndarray, f2: np.ndarray, params: FlowParams | None = None
) -> FlowField:
    """Dense frame-1 -> frame-2 displacement field, coarse to fine.

    Both images are pyramided; at each level the expansions are computed
    once and ``iterations_per_level`` rounds of build/solve refine the
    displacement, warm-started from the coarser level's upsampled solution
    (positions and magnitudes scaled by the actual per-axis size ratio).
    The finest-level field is returned, residuals included.
    """
    params = params or FlowParams()
    f1 = np.asarray(f1, dtype=np.float64)
    f2 = np.asarray(f2, dtype=np.float64)
    if f1.shape != f2.shape:
        raise ValueError(f"frame shapes differ: {f1.shape} vs {f2.shape}")

    pyr1 = gaussian_pyramid(f1, params.pyramid_levels, params.pyramid_scale)
    pyr2 = gaussian_pyramid(f2, params.pyramid_levels, params.pyramid_scale)

    kw = imops.gaussian_kernel(params.neighborhood_sigma, params.neighborhood_radius)
    kernels = _kernels()
    dx: np.ndarray | None = None
    dy: np.ndarray | None = None
    e: np.ndarray | None = None
    valid: np.ndarray | None = None
    for level in reversed(range(params.pyramid_levels)):
        im1, im2 = pyr1[level], pyr2[level]
        exp1 = poly_expand(im1, params)
        exp2 = poly_expand(im2, params)
        height, width = im1.shape
        if dx is None:
            dx = np.zeros((height, width))
            dy = np.zeros((height, width))
        else:
            prev_h, prev_w = dx.shape
            dx = imops.resize_bilinear(dx, height, width) * (width / prev_w)
            dy = imops.resize_bilinear(dy, height, width) * (height / prev_h)
        e, valid = kernels.level_flow(
            exp1.a11, exp1.a12, exp1.a22, exp1.bx, exp1.by,
            exp2.a11, exp2.a12, exp2.a22, exp2.bx, exp2.by,
            dx, dy, kw,
            params.singularity_epsilon, params.iterations_per_level,
            _scratch("build", (6, height, width)),
            _scratch("blur_mid", (6, height, width)),
            _scratch("blur_agg", (6, height, width)),
        )
    return FlowField(d=np.stack([dx, dy], axis=-1), e=e, valid=valid)
