"""Pinhole-camera geometry for a downward-looking drone camera.

Conventions used throughout the toolkit:

* World frame: right-handed ENU, X east, Y north, Z up, meters. The
  observed scene (water or ground surface) is the plane Z = 0.
* Camera frame: right-handed, x right, y down, z forward along the
  optical axis (the usual computer-vision layout).
* At zero attitude the camera looks straight down (nadir) with image x
  mapping to east and image y to south.
* Attitude angles are degrees, composed extrinsically about the fixed
  world axes in the order yaw (about Z), pitch (about Y), roll (about
  X). Yaw is heading-like: positive turns the view clockwise when seen
  from above.
* Functions in this module take pixel coordinates relative to the
  principal point (signed, x right / y down). Conversion from
  corner-origin pixel coordinates is a cx/cy shift done by callers.

Egomotion is expressed in the camera frame of the earlier of the two
poses involved: linear velocity (vx, vy, vz) along camera x/y/z and
angular rate (wx, wy, wz) about the same axes, per unit time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation


class GeometryError(ValueError):
    """A projection, backprojection, or motion computation is undefined."""


# Rays pointing less steeply down than this never get a ground intersection;
# near-grazing rays would put the intersection km away with no accuracy.
MIN_DESCENT_ANGLE_DEG = 1.0


def _finite(*values: float) -> bool:
    return all(math.isfinite(v) for v in values)


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole intrinsics. Focal length and principal point in pixels."""

    f: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self) -> None:
        if not (_finite(self.f) and self.f > 0):
            raise ValueError(f"focal length must be positive, got {self.f!r}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError(
                f"image size must be positive, got {self.width}x{self.height}"
            )
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError(
                f"principal point ({self.cx}, {self.cy}) outside the "
                f"{self.width}x{self.height} image"
            )

    @classmethod
    def centered(cls, f: float, width: int, height: int) -> "Intrinsics":
        """Intrinsics with the principal point at the image center."""
        return cls(f=f, cx=width / 2.0, cy=height / 2.0, width=width, height=height)


@dataclass(frozen=True)
class PixelPoint:
    """Image point, pixels relative to the principal point (x right, y down)."""

    x: float
    y: float


@dataclass(frozen=True)
class WorldPoint:
    """World-frame point in meters (ENU)."""

    x: float
    y: float
    z: float = 0.0


@dataclass(frozen=True)
class CameraPose:
    """Camera position (m, world frame) and attitude (deg).

    ``z`` is the height above the scene plane. Attitude follows the
    module conventions: extrinsic yaw -> pitch -> roll, compass-signed
    yaw, all zeros meaning nadir.
    """

    x: float
    y: float
    z: float
    pitch: float = 0.0
    yaw: float = 0.0
    roll: float = 0.0

    def __post_init__(self) -> None:
        if not _finite(self.x, self.y, self.z, self.pitch, self.yaw, self.roll):
            raise ValueError(f"pose fields must be finite, got {self}")

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)


@dataclass(frozen=True)
class CameraMotion:
    """Camera egomotion over one time unit, in the camera frame.

    ``linear`` is translation velocity along camera (x, y, z);
    ``angular`` is the rotation rate (rad per time unit) about the
    camera (x, y, z) axes.
    """

    linear: tuple[float, float, float]
    angular: tuple[float, float, float]

    def __post_init__(self) -> None:
        if len(self.linear) != 3 or len(self.angular) != 3:
            raise ValueError("linear and angular must each have 3 components")
        if not _finite(*self.linear, *self.angular):
            raise ValueError(f"motion components must be finite, got {self}")

    @classmethod
    def zero(cls) -> "CameraMotion":
        return cls((0.0, 0.0, 0.0), (0.0, 0.0, 0.0))


def _rot_x(rad: float) -> np.ndarray:
    c, s = math.cos(rad), math.sin(rad)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _rot_y(rad: float) -> np.ndarray:
    c, s = math.cos(rad), math.sin(rad)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rot_z(rad: float) -> np.ndarray:
    c, s = math.cos(rad), math.sin(rad)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


# Camera axes in world coordinates at zero attitude: x east, y south, z down.
_NADIR_AXES = np.diag([1.0, -1.0, -1.0])


def rotation_camera_to_world(pose: CameraPose) -> np.ndarray:
    """3x3 matrix taking camera-frame vectors to world-frame vectors."""
    # Compass yaw is clockwise from above, hence the sign flip on Rz.
    att = (
        _rot_x(math.radians(pose.roll))
        @ _rot_y(math.radians(pose.pitch))
        @ _rot_z(-math.radians(pose.yaw))
    )
    return att @ _NADIR_AXES


def rotation_world_to_camera(pose: CameraPose) -> np.ndarray:
    """3x3 matrix taking world-frame vectors to camera-frame vectors."""
    return rotation_camera_to_world(pose).T


def project_points(points: np.ndarray, pose: CameraPose, intr: Intrinsics) -> np.ndarray:
    """Project an (n, 3) array of world points to principal-point pixels.

    Returns an (n, 2) array. Raises GeometryError if any point has
    non-positive depth along the optical axis.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"expected an (n, 3) array, got shape {pts.shape}")
    cam = (pts - pose.position) @ rotation_world_to_camera(pose).T
    depth = cam[:, 2]
    if np.any(depth == 0.0):
        raise GeometryError("point at zero depth has no projection")
    if np.any(depth < 0.0):
        raise GeometryError("point behind the camera")
    out = np.empty((pts.shape[0], 2))
    out[:, 0] = intr.f * cam[:, 0] / depth
    out[:, 1] = intr.f * cam[:, 1] / depth
    return out


def project_world_to_image(
    point: WorldPoint, pose: CameraPose, intr: Intrinsics
) -> PixelPoint:
    """Project a world point to principal-point pixel coordinates."""
    uv = project_points(
        np.array([[point.x, point.y, point.z]]), pose, intr
    )
    return PixelPoint(float(uv[0, 0]), float(uv[0, 1]))


def backproject_pixels(
    x: np.ndarray, y: np.ndarray, pose: CameraPose, intr: Intrinsics
) -> tuple[np.ndarray, np.ndarray]:
    """Intersect viewing rays with the Z=0 plane for pixel arrays.

    ``x`` and ``y`` are principal-point pixel coordinates (any matching
    shape). Returns world (X, Y) arrays of the same shape. Raises
    GeometryError if the camera is not above the plane or any ray
    descends at less than MIN_DESCENT_ANGLE_DEG below horizontal.
    """
    if pose.z <= 0:
        raise GeometryError(
            f"camera height must be positive to hit the scene plane, got {pose.z}"
        )
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r_cw = rotation_camera_to_world(pose)
    # Ray direction per pixel: R_cw @ (x/f, y/f, 1).
    dx = r_cw[0, 0] * x / intr.f + r_cw[0, 1] * y / intr.f + r_cw[0, 2]
    dy = r_cw[1, 0] * x / intr.f + r_cw[1, 1] * y / intr.f + r_cw[1, 2]
    dz = r_cw[2, 0] * x / intr.f + r_cw[2, 1] * y / intr.f + r_cw[2, 2]
    norm = np.sqrt(dx * dx + dy * dy + dz * dz)
    descent = -dz / norm  # sine of the angle below horizontal
    min_descent = math.sin(math.radians(MIN_DESCENT_ANGLE_DEG))
    if np.any(descent < min_descent):
        worst = math.degrees(math.asin(float(np.min(descent))))
        raise GeometryError(
            f"viewing ray descends at {worst:.3f} deg, below the "
            f"{MIN_DESCENT_ANGLE_DEG} deg minimum; no usable ground intersection"
        )
    s = -pose.z / dz
    return pose.x + s * dx, pose.y + s * dy


def backproject_image_to_ground(
    pixel: PixelPoint, pose: CameraPose, intr: Intrinsics
) -> WorldPoint:
    """Intersect one pixel's viewing ray with the scene plane Z=0."""
    gx, gy = backproject_pixels(
        np.array([pixel.x]), np.array([pixel.y]), pose, intr
    )
    return WorldPoint(float(gx[0]), float(gy[0]), 0.0)


def flow_field(
    x: np.ndarray,
    y: np.ndarray,
    motion: CameraMotion,
    intr: Intrinsics,
    z: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Egomotion-induced image flow at pixel arrays (x, y).

    Instantaneous motion field of a plane at depth ``z`` along the
    optical axis, for camera translation ``motion.linear`` and rotation
    rate ``motion.angular``. Pixels relative to the principal point;
    result in pixels per time unit, same shape as the inputs.
    """
    if not (_finite(z) and z > 0):
        raise GeometryError(f"scene depth must be positive, got {z!r}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    f = intr.f
    tx, ty, tz = motion.linear
    wx, wy, wz = motion.angular
    vx = (-f * tx + x * tz) / z + (wx * x * y / f - wy * f - wy * x * x / f + wz * y)
    vy = (-f * ty + y * tz) / z + (wx * f + wx * y * y / f - wy * x * y / f - wz * x)
    return vx, vy


def induced_flow(
    pixel: PixelPoint, motion: CameraMotion, intr: Intrinsics, z: float
) -> tuple[float, float]:
    """Induced flow at a single pixel; see flow_field."""
    vx, vy = flow_field(
        np.array([pixel.x]), np.array([pixel.y]), motion, intr, z
    )
    return float(vx[0]), float(vy[0])


def motion_between_poses(
    prev: CameraPose, curr: CameraPose, dt: float = 1.0
) -> CameraMotion:
    """Camera-frame egomotion taking ``prev`` to ``curr`` over ``dt``.

    Linear velocity is the world displacement rotated into the earlier
    camera frame; angular rate is the rotation vector of the relative
    attitude, also in the earlier camera frame, divided by ``dt``.
    """
    if not (_finite(dt) and dt > 0):
        raise ValueError(f"dt must be positive, got {dt!r}")
    r_wc_prev = rotation_world_to_camera(prev)
    linear = r_wc_prev @ ((curr.position - prev.position) / dt)
    rel = r_wc_prev @ rotation_camera_to_world(curr)
    angular = Rotation.from_matrix(rel).as_rotvec() / dt
    return CameraMotion(
        (float(linear[0]), float(linear[1]), float(linear[2])),
        (float(angular[0]), float(angular[1]), float(angular[2])),
    )
