"""Field containers and tuning parameters for dense flow estimation.

Coordinate convention used throughout: ``x`` indexes columns (+x rightward),
``y`` indexes rows (+y downward). Displacements are frame-1 -> frame-2, i.e.
a pattern at pixel ``p`` in frame 1 appears at ``p + d(p)`` in frame 2.
All field math is float64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FlowParams:
    """Tuning knobs for the polynomial-expansion flow estimator.

    ``expansion_sigma``/``expansion_radius`` shape the Gaussian applicability
    of the per-pixel quadratic fit; ``neighborhood_sigma``/``neighborhood_radius``
    shape the weight function used to aggregate point systems over a
    neighborhood. ``singularity_epsilon`` is the relative determinant floor
    guarding the 2x2 solve against the aperture problem.
    """

    expansion_sigma: float = 1.5
    expansion_radius: int = 5
    neighborhood_sigma: float = 2.4
    neighborhood_radius: int = 7
    pyramid_levels: int = 3
    pyramid_scale: float = 0.5
    iterations_per_level: int = 3
    singularity_epsilon: float = 1e-6

    def __post_init__(self) -> None:
        if self.expansion_radius < 1 or self.neighborhood_radius < 1:
            raise ValueError("kernel radii must be >= 1")
        if not 0.0 < self.pyramid_scale < 1.0:
            raise ValueError("pyramid_scale must lie in (0, 1)")
        if self.pyramid_levels < 1:
            raise ValueError("pyramid_levels must be >= 1")
        if self.iterations_per_level < 1:
            raise ValueError("iterations_per_level must be >= 1")
        if self.expansion_sigma <= 0 or self.neighborhood_sigma <= 0:
            raise ValueError("kernel sigmas must be > 0")


@dataclass
class PolyField:
    """Per-pixel quadratic model f(x0 + u) ~ uT A u + bT u + c.

    A is symmetric by construction: only the three distinct entries are
    stored (``a11`` couples x with x, ``a12`` the mixed term, ``a22`` y with
    y). ``interior`` is False within ``expansion_radius`` of the border,
    where the fit leaned on replicated edge samples.
    """

    a11: np.ndarray
    a12: np.ndarray
    a22: np.ndarray
    bx: np.ndarray
    by: np.ndarray
    c: np.ndarray
    interior: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.c.shape

    def A(self, y: int, x: int) -> np.ndarray:
        """The 2x2 quadratic coefficient matrix at one pixel."""
        return np.array(
            [[self.a11[y, x], self.a12[y, x]], [self.a12[y, x], self.a22[y, x]]]
        )

    def b(self, y: int, x: int) -> np.ndarray:
        return np.array([self.bx[y, x], self.by[y, x]])


@dataclass
class FlowField:
    """Dense displacement field with per-pixel residual and validity.

    ``d[..., 0]`` is the x (column) displacement, ``d[..., 1]`` the y (row)
    displacement. ``e`` is the nonnegative weighted least-squares residual of
    the local solve; ``valid`` is False where the 2x2 system was degenerate
    or the iterative warp left the image.
    """

    d: np.ndarray
    e: np.ndarray
    valid: np.ndarray

    @classmethod
    def zeros(cls, height: int, width: int) -> "FlowField":
        return cls(
            d=np.zeros((height, width, 2)),
            e=np.zeros((height, width)),
            valid=np.ones((height, width), dtype=bool),
        )

    @property
    def shape(self) -> tuple[int, int]:
        return self.e.shape


@dataclass
class NormalSystem:
    """Neighborhood-aggregated 2x2 normal equations, one system per pixel.

    G (``g11``, ``g12``, ``g22``) and h (``h1``, ``h2``) are the weighted
    sums that the displacement solve inverts; ``s`` is the matching weighted
    sum of squared constraint vectors, kept so the post-solve residual can be
    evaluated without revisiting the neighborhood. ``warp_ok`` is False where
    the prior displacement pointed outside the image (the sample was clamped
    to the edge and the pixel flagged).
    """

    g11: np.ndarray
    g12: np.ndarray
    g22: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    s: np.ndarray
    warp_ok: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.s.shape

    def G(self, y: int, x: int) -> np.ndarray:
        return np.array(
            [[self.g11[y, x], self.g12[y, x]], [self.g12[y, x], self.g22[y, x]]]
        )

    def h(self, y: int, x: int) -> np.ndarray:
        return np.array([self.h1[y, x], self.h2[y, x]])
