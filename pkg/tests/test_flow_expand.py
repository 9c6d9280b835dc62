"""Quadratic expansion: analytic cases and a dense least-squares oracle."""

from __future__ import annotations

import numpy as np
import pytest

from flownav.flow import FlowParams, poly_expand
from flownav.flow.imops import gaussian_kernel


def dense_expand_oracle(img: np.ndarray, sigma: float, radius: int):
    """Per-pixel weighted least squares over the basis {1, x, y, x2, y2, xy}.

    Brute-force reference for the separable implementation: builds the full
    normal equations from the 2D applicability window at every interior pixel
    and solves them densely. Returns planes (a11, a12, a22, bx, by, c) that
    are NaN outside the interior.
    """
    height, width = img.shape
    offs = np.arange(-radius, radius + 1)
    g = gaussian_kernel(sigma, radius)
    w2d = np.outer(g, g).reshape(-1)
    ux, uy = np.meshgrid(offs, offs)
    basis = np.stack(
        [np.ones_like(ux), ux, uy, ux**2, uy**2, ux * uy], axis=-1
    ).reshape(-1, 6).astype(np.float64)
    gram = (basis * w2d[:, None]).T @ basis
    gram_inv = np.linalg.inv(gram)

    planes = [np.full((height, width), np.nan) for _ in range(6)]
    a11, a12, a22, bx, by, c = planes
    for y in range(radius, height - radius):
        for x in range(radius, width - radius):
            patch = img[y - radius : y + radius + 1, x - radius : x + radius + 1]
            rhs = (basis * w2d[:, None]).T @ patch.reshape(-1)
            cc, rx, ry, rxx, ryy, rxy = gram_inv @ rhs
            c[y, x] = cc
            bx[y, x] = rx
            by[y, x] = ry
            a11[y, x] = rxx
            a22[y, x] = ryy
            a12[y, x] = rxy / 2.0
    return a11, a12, a22, bx, by, c


def test_constant_image_has_zero_quadratic_terms():
    field = poly_expand(np.full((32, 32), 0.7))
    inn = field.interior
    assert np.abs(field.a11[inn]).max() < 1e-12
    assert np.abs(field.a12[inn]).max() < 1e-12
    assert np.abs(field.a22[inn]).max() < 1e-12
    assert np.abs(field.bx[inn]).max() < 1e-12
    assert np.abs(field.by[inn]).max() < 1e-12
    assert np.abs(field.c[inn] - 0.7).max() < 1e-12


def test_ramp_recovers_gradient():
    ys, xs = np.mgrid[0:32, 0:32]
    img = 0.01 * xs + 0.02 * ys
    field = poly_expand(img)
    inn = field.interior
    assert np.abs(field.a11[inn]).max() < 1e-10
    assert np.abs(field.a12[inn]).max() < 1e-10
    assert np.abs(field.a22[inn]).max() < 1e-10
    assert np.abs(field.bx[inn] - 0.01).max() < 1e-10
    assert np.abs(field.by[inn] - 0.02).max() < 1e-10
    assert np.abs(field.c[inn] - img[inn]).max() < 1e-10


def test_pure_quadratic_in_global_coordinates():
    # f(x) = x^2: the local fit around column x0 must read
    # (x0 + u)^2 = u^2 + 2 x0 u + x0^2, i.e. a11 = 1, bx = 2 x0, c = x0^2.
    ys, xs = np.mgrid[0:24, 0:24].astype(np.float64)
    img = xs**2
    field = poly_expand(img)
    for x0 in (8, 11, 15):
        assert abs(field.a11[12, x0] - 1.0) < 1e-9
        assert abs(field.bx[12, x0] - 2.0 * x0) < 1e-8
        assert abs(field.c[12, x0] - x0 * x0) < 1e-8
        assert abs(field.a12[12, x0]) < 1e-9
        assert abs(field.a22[12, x0]) < 1e-9
        assert abs(field.by[12, x0]) < 1e-8


def test_separable_matches_dense_oracle():
    rng = np.random.default_rng(3)
    img = rng.random((32, 32))
    params = FlowParams()
    field = poly_expand(img, params)
    oracle = dense_expand_oracle(img, params.expansion_sigma, params.expansion_radius)
    inn = field.interior
    for got, want in zip(
        (field.a11, field.a12, field.a22, field.bx, field.by, field.c), oracle
    ):
        assert np.abs(got[inn] - want[inn]).max() < 1e-6


def test_interior_mask_marks_border():
    field = poly_expand(np.zeros((16, 20)))
    r = FlowParams().expansion_radius
    assert not field.interior[: r, :].any()
    assert not field.interior[:, : r].any()
    assert not field.interior[-r:, :].any()
    assert not field.interior[:, -r:].any()
    assert field.interior[r : 16 - r, r : 20 - r].all()


def test_too_small_image_raises():
    with pytest.raises(ValueError):
        poly_expand(np.zeros((8, 32)))
    with pytest.raises(ValueError):
        poly_expand(np.zeros((32, 8)))
    with pytest.raises(ValueError):
        poly_expand(np.zeros((32, 32, 3)))
