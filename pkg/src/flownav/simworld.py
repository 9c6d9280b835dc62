"""Deterministic synthetic flight environment.

A CPU raycaster renders textured vertical cylinders standing on a
procedurally textured ground plane under a gradient sky, through a pinhole
camera defined by its diagonal field of view.  Texture is value noise keyed
to world coordinates, so camera motion produces real parallax; noise
amplitude fades as the pixel footprint outgrows the noise wavelength, which
keeps the far field alias-free.  Vehicle dynamics are a first-order lag
toward the commanded body velocity plus an optional Ornstein-Uhlenbeck wind
perturbation; altitude follows a rate-limited target.  Everything is a pure
function of (world, pose, camera) or of explicit seeded state, so runs
replay bit-for-bit.

World frame: x forward (at yaw 0), y to the right, z up.  A positive
``linear_y`` command therefore increases world y — the same "fly right"
sign convention the controller uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np

from .pilot import TwistCommand

__all__ = [
    "WindParams",
    "Obstacle",
    "World",
    "mirror_world",
    "Pose",
    "CameraModel",
    "GroundTruth",
    "render",
    "DynamicsConfig",
    "WindState",
    "step_dynamics",
    "ground_truth",
    "write_pgm",
    "read_image",
]


# --- world description ---------------------------------------------------------

@dataclass(frozen=True)
class WindParams:
    """Ornstein-Uhlenbeck wind: stationary std (m/s) and correlation time (s)."""

    std: float = 0.0
    corr_time: float = 2.0

    def __post_init__(self) -> None:
        if self.std < 0:
            raise ValueError("wind std must be >= 0")
        if self.corr_time <= 0:
            raise ValueError("wind correlation time must be positive")


@dataclass(frozen=True)
class Obstacle:
    """Vertical textured cylinder standing on the ground plane."""

    center_x: float
    center_y: float
    radius: float
    height: float
    texture_contrast: float = 0.8

    def __post_init__(self) -> None:
        if self.radius <= 0:
            raise ValueError("obstacle radius must be positive")
        if self.height <= 0:
            raise ValueError("obstacle height must be positive")
        if not 0.0 <= self.texture_contrast <= 1.0:
            raise ValueError("texture_contrast must lie in [0, 1]")


@dataclass(frozen=True)
class World:
    """Immutable scene: obstacles, texture seed, sky brightness, wind.

    ``mirror_y`` renders the scene reflected about the y=0 plane; it exists
    so a mirrored scenario produces exactly the left-right-flipped image of
    the original (same texture, opposite side).
    """

    obstacles: Tuple[Obstacle, ...] = ()
    ground_texture_seed: int = 0
    sky_value: float = 0.85
    wind: WindParams = field(default_factory=WindParams)
    bounds: float = 100.0
    mirror_y: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        if not 0.0 < self.sky_value <= 1.0:
            raise ValueError("sky_value must lie in (0, 1]")
        if self.bounds <= 0:
            raise ValueError("bounds must be positive")
        obs = self.obstacles
        for i in range(len(obs)):
            for j in range(i + 1, len(obs)):
                gap = math.hypot(obs[i].center_x - obs[j].center_x,
                                 obs[i].center_y - obs[j].center_y)
                if gap < obs[i].radius + obs[j].radius:
                    raise ValueError("obstacles must not overlap")


def mirror_world(world: World) -> World:
    """The scene reflected about y=0 (obstacles flipped, texture mirrored)."""
    flipped = tuple(replace(o, center_y=-o.center_y) for o in world.obstacles)
    return replace(world, obstacles=flipped, mirror_y=not world.mirror_y)


@dataclass(frozen=True)
class Pose:
    """Vehicle state: position, yaw, and realized body velocity (post-lag)."""

    x: float = 0.0
    y: float = 0.0
    z: float = 0.0
    yaw: float = 0.0
    vel: Tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        if self.z < 0:
            raise ValueError("altitude must be >= 0")
        object.__setattr__(self, "vel", tuple(float(v) for v in self.vel))


@dataclass(frozen=True)
class CameraModel:
    """Pinhole camera set by its diagonal field of view."""

    width: int = 320
    height: int = 240
    fov_diagonal: float = 92.0
    fps: float = 30.0

    def __post_init__(self) -> None:
        if self.width < 16 or self.height < 16:
            raise ValueError("camera resolution too small")
        if not 10.0 < self.fov_diagonal < 170.0:
            raise ValueError("fov_diagonal must lie in (10, 170) degrees")
        if self.fps <= 0:
            raise ValueError("fps must be positive")

    @property
    def focal_px(self) -> float:
        """Focal length in pixels: (diagonal/2) / tan(fov/2)."""
        diag = math.hypot(self.width, self.height)
        return (diag / 2.0) / math.tan(math.radians(self.fov_diagonal) / 2.0)


@dataclass(frozen=True)
class GroundTruth:
    """Nearest obstacle inside the flight corridor, if any."""

    obstacle_in_corridor: bool
    side: Optional[str] = None  # "left" | "center" | "right"
    distance: Optional[float] = None  # forward distance to its center, m

    def __post_init__(self) -> None:
        if self.obstacle_in_corridor:
            if self.side not in ("left", "center", "right"):
                raise ValueError("side required when an obstacle is reported")
            if self.distance is None or self.distance <= 0:
                raise ValueError("distance must be positive when reported")


# --- procedural texture -----------------------------------------------------------

_MIX1 = np.uint64(0x9E3779B97F4A7C15)
_MIX2 = np.uint64(0xBF58476D1CE4E5B9)
_MIX3 = np.uint64(0x94D049BB133111EB)


def _hash01(ix: np.ndarray, iy: np.ndarray, salt: int) -> np.ndarray:
    """Uniform [0,1) values from integer lattice coordinates."""
    h = (ix.astype(np.int64).view(np.uint64) * _MIX1
         ^ iy.astype(np.int64).view(np.uint64) * _MIX2
         ^ np.uint64(salt & 0xFFFFFFFFFFFFFFFF))
    h = (h ^ (h >> np.uint64(30))) * _MIX2
    h = (h ^ (h >> np.uint64(27))) * _MIX3
    h = h ^ (h >> np.uint64(31))
    return (h >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def _value_noise(x: np.ndarray, y: np.ndarray, salt: int) -> np.ndarray:
    """Smooth value noise in [0,1]: hashed lattice, smoothstep bilinear."""
    ix = np.floor(x)
    iy = np.floor(y)
    fx = x - ix
    fy = y - iy
    sx = fx * fx * (3.0 - 2.0 * fx)
    sy = fy * fy * (3.0 - 2.0 * fy)
    v00 = _hash01(ix, iy, salt)
    v10 = _hash01(ix + 1, iy, salt)
    v01 = _hash01(ix, iy + 1, salt)
    v11 = _hash01(ix + 1, iy + 1, salt)
    top = v00 + (v10 - v00) * sx
    bot = v01 + (v11 - v01) * sx
    return top + (bot - top) * sy


def _faded_texture(u, v, footprint, wavelengths, salt):
    """Multi-octave noise centered on 0; octaves fade out as the pixel
    footprint approaches their wavelength (cheap LOD anti-aliasing)."""
    out = 0.0
    amps = (0.65, 0.35)
    for k, (lam, amp) in enumerate(zip(wavelengths, amps)):
        w = np.clip(1.5 - footprint / lam, 0.0, 1.0)
        n = _value_noise(u / lam, v / lam, salt + 7919 * k)
        out = out + amp * w * (n - 0.5)
    return out


# --- rendering -----------------------------------------------------------------------

def render(world: World, pose: Pose, cam: CameraModel) -> np.ndarray:
    """Raycast one grayscale frame, values in [0, 1].

    Deterministic for (world, pose, cam): sky is an elevation gradient,
    ground and cylinders carry world-anchored value noise so ego-motion
    yields true parallax.  The camera looks along the body x axis from the
    pose position; ``pose.z`` must be positive.
    """
    if pose.z <= 0:
        raise ValueError("render requires altitude > 0")
    height, width = cam.height, cam.width
    f = cam.focal_px
    du = np.arange(width, dtype=np.float64) - (width - 1) / 2.0
    dv = np.arange(height, dtype=np.float64) - (height - 1) / 2.0
    DU, DV = np.meshgrid(du, dv)
    if world.mirror_y:
        DU = -DU

    cos_y, sin_y = math.cos(pose.yaw), math.sin(pose.yaw)
    dx = f * cos_y - DU * sin_y
    dy = f * sin_y + DU * cos_y
    dz = -DV
    norm = np.sqrt(dx * dx + dy * dy + dz * dz)

    # Sky: brightness rises with ray elevation.
    elev = np.clip(dz / norm, 0.0, 1.0)
    img = world.sky_value * (0.82 + 0.18 * elev)
    depth = np.full((height, width), np.inf)

    oy_world = -pose.y if world.mirror_y else pose.y

    # Ground plane z = 0.
    descending = dz < -1e-12
    with np.errstate(divide="ignore", invalid="ignore"):
        t_ground = np.where(descending, -pose.z / dz, np.inf)
    ground = descending & (t_ground < depth)
    if np.any(ground):
        tg = t_ground[ground]
        hx = pose.x + tg * dx[ground]
        hy = oy_world + tg * dy[ground]
        ray_len = tg * norm[ground]
        footprint = ray_len * (ray_len / (f * pose.z))
        tex = _faded_texture(hx, hy, footprint, (0.5, 0.15),
                             world.ground_texture_seed)
        img[ground] = np.clip(0.45 + 0.9 * tex, 0.0, 1.0)
        depth[ground] = tg

    # Cylinders, nearest-hit wins via the running depth buffer.
    a = dx * dx + dy * dy
    for index, obs in enumerate(world.obstacles):
        ocy = -obs.center_y if world.mirror_y else obs.center_y
        rel_x = pose.x - obs.center_x
        rel_y = oy_world - ocy
        b = 2.0 * (rel_x * dx + rel_y * dy)
        c = rel_x * rel_x + rel_y * rel_y - obs.radius * obs.radius
        disc = b * b - 4.0 * a * c
        hit = disc > 0.0
        if not np.any(hit):
            continue
        sqrt_disc = np.sqrt(np.where(hit, disc, 0.0))
        t = (-b - sqrt_disc) / (2.0 * a)
        z_hit = pose.z + t * dz
        hit &= (t > 1e-9) & (t < depth) & (z_hit >= 0.0) & (z_hit <= obs.height)
        if not np.any(hit):
            continue
        th = t[hit]
        hx = rel_x + th * dx[hit]
        hy = rel_y + th * dy[hit]
        azimuth = np.arctan2(hy, hx) * obs.radius  # arc length around the shell
        ray_len = th * norm[hit]
        footprint = ray_len / f
        tex = _faded_texture(azimuth, z_hit[hit], footprint, (0.15, 0.05),
                             world.ground_texture_seed + 104729 * (index + 1))
        shade = 0.5 + obs.texture_contrast * tex * 2.0
        img[hit] = np.clip(shade, 0.0, 1.0)
        depth[hit] = th

    return img


# --- dynamics ----------------------------------------------------------------------

@dataclass(frozen=True)
class DynamicsConfig:
    """First-order velocity lag plus the altitude-hold rate limit."""

    tau: float = 0.3
    climb_rate: float = 1.0

    def __post_init__(self) -> None:
        if self.tau <= 0 or self.climb_rate <= 0:
            raise ValueError("tau and climb_rate must be positive")


class WindState:
    """Seeded Ornstein-Uhlenbeck wind velocity, clamped to 3 sigma.

    ``flip_y`` negates the lateral component so a mirrored scenario sees
    exactly mirrored gusts.
    """

    def __init__(self, seed: int, params: WindParams, flip_y: bool = False) -> None:
        self.params = params
        self._rng = np.random.default_rng(seed)
        self._sign_y = -1.0 if flip_y else 1.0
        self.wx = 0.0
        self.wy = 0.0

    def step(self, dt: float) -> Tuple[float, float]:
        """Advance the process and return the world-frame wind velocity."""
        p = self.params
        if p.std == 0.0:
            return 0.0, 0.0
        rho = math.exp(-dt / p.corr_time)
        scale = p.std * math.sqrt(1.0 - rho * rho)
        self.wx = self.wx * rho + scale * float(self._rng.standard_normal())
        self.wy = self.wy * rho + scale * self._sign_y * float(self._rng.standard_normal())
        speed = math.hypot(self.wx, self.wy)
        limit = 3.0 * p.std
        if speed > limit:
            self.wx *= limit / speed
            self.wy *= limit / speed
        return self.wx, self.wy


def step_dynamics(
    pose: Pose,
    cmd: TwistCommand,
    dt: float,
    wind_state: Optional[WindState],
    cfg: DynamicsConfig,
    altitude_target: Optional[float] = None,
) -> Pose:
    """Advance the vehicle one tick.

    Horizontal body velocity relaxes toward the command with time constant
    ``cfg.tau`` (exact first-order discretization, so step partitioning
    does not change the trajectory).  Altitude moves toward
    ``altitude_target`` at most ``cfg.climb_rate`` (None holds the current
    altitude).  Wind, if any, adds a world-frame velocity perturbation.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    alpha = 1.0 - math.exp(-dt / cfg.tau)
    vx = pose.vel[0] + (cmd.linear_x - pose.vel[0]) * alpha
    vy = pose.vel[1] + (cmd.linear_y - pose.vel[1]) * alpha

    if altitude_target is None:
        vz, new_z = 0.0, pose.z
    else:
        gap = altitude_target - pose.z
        vz = max(-cfg.climb_rate, min(cfg.climb_rate, gap / dt))
        new_z = pose.z + vz * dt

    wx, wy = wind_state.step(dt) if wind_state is not None else (0.0, 0.0)
    cos_y, sin_y = math.cos(pose.yaw), math.sin(pose.yaw)
    world_vx = vx * cos_y - vy * sin_y + wx
    world_vy = vx * sin_y + vy * cos_y + wy
    return Pose(
        x=pose.x + world_vx * dt,
        y=pose.y + world_vy * dt,
        z=max(0.0, new_z),
        yaw=pose.yaw,
        vel=(vx, vy, vz),
    )


# --- evaluation oracle -----------------------------------------------------------------

def ground_truth(world: World, pose: Pose, corridor_width: float,
                 horizon: float) -> GroundTruth:
    """Nearest obstacle ahead whose body intrudes into the flight corridor.

    An obstacle qualifies when its forward distance (to its center, along
    the body x axis) lies in (0, horizon] and its lateral offset satisfies
    ``|offset| <= corridor_width/2 + radius``.  The side is ``center`` when
    ``|offset| <= radius/2``, else left/right by the offset's sign.
    """
    if corridor_width <= 0 or horizon <= 0:
        raise ValueError("corridor_width and horizon must be positive")
    cos_y, sin_y = math.cos(pose.yaw), math.sin(pose.yaw)
    best: Optional[Tuple[float, float, float]] = None
    for obs in world.obstacles:
        rel_x = obs.center_x - pose.x
        rel_y = obs.center_y - pose.y
        forward = rel_x * cos_y + rel_y * sin_y
        lateral = -rel_x * sin_y + rel_y * cos_y  # positive = right
        if forward <= 0 or forward > horizon:
            continue
        if abs(lateral) > corridor_width / 2.0 + obs.radius:
            continue
        if best is None or forward < best[0]:
            best = (forward, lateral, obs.radius)
    if best is None:
        return GroundTruth(False)
    forward, lateral, radius = best
    if abs(lateral) <= radius / 2.0:
        side = "center"
    else:
        side = "right" if lateral > 0 else "left"
    return GroundTruth(True, side, forward)


# --- frame export ------------------------------------------------------------------------

def write_pgm(path: Union[str, Path], image: np.ndarray) -> None:
    """Write a grayscale image as binary PGM (P5, 8-bit).

    Float input is treated as [0, 1] and quantized; uint8 passes through.
    """
    img = np.asarray(image)
    if img.ndim != 2:
        raise ValueError("PGM export needs a 2-D grayscale image")
    if img.dtype != np.uint8:
        img = np.clip(np.rint(img.astype(np.float64) * 255.0), 0, 255).astype(np.uint8)
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii")
    Path(path).write_bytes(header + img.tobytes())


def read_image(path: Union[str, Path]) -> np.ndarray:
    """Read a PGM or PNG frame as a grayscale uint8 array."""
    from PIL import Image

    with Image.open(path) as handle:
        return np.asarray(handle.convert("L"), dtype=np.uint8)
