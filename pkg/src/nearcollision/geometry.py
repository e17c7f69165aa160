"""Pinhole projection of 3D points into the image and per-box range extraction.

Projection model
----------------
A sensor-frame point p = (x, y, z) maps to homogeneous image coordinates

    [u v w]^T = K . [R | -R^T t] . [x y z 1]^T

i.e. the camera-frame point is q = R p - R^T t, and the pixel is
(U, V) = (u / w, v / w).  The extrinsic block [R | -R^T t] is applied
exactly as written; all synthetic data in this package is generated with
the same convention, so the pipeline is self-consistent end to end.

Conventions
-----------
- Sensor frame: X right, Y down, Z forward (meters).
- "range" is the full 3D Euclidean norm from the sensor origin, not the
  camera-frame depth w.
- Points with w <= 1e-9 (at or behind the camera plane) do not project.
- All arithmetic in 64-bit floats.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import json

import numpy as np

from .errors import ConfigurationError

# Points at or behind the camera plane (w below this) do not project.
W_EPS = 1e-9

_ORTHO_TOL = 1e-9


@dataclass(frozen=True)
class Point3:
    """A 3D point in the sensor frame, meters."""

    x: float
    y: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=np.float64)


@dataclass(frozen=True)
class PixelRange:
    """Projection result: continuous pixel coordinates plus range.

    U, V are u/w and v/w; w is the homogeneous depth (camera-frame,
    meters); range is the 3D distance of the source point from the
    sensor origin.  range >= w is not guaranteed: range is the full
    norm, w only the forward component.
    """

    U: float
    V: float
    w: float
    range: float


@dataclass(frozen=True)
class BBox:
    """Axis-aligned pixel-space bounding box with u_min < u_max, v_min < v_max."""

    u_min: float
    v_min: float
    u_max: float
    v_max: float

    def __post_init__(self) -> None:
        if not (self.u_min < self.u_max and self.v_min < self.v_max):
            raise ConfigurationError(
                f"degenerate bbox: ({self.u_min}, {self.v_min}, "
                f"{self.u_max}, {self.v_max})"
            )


def _as_point_array(p) -> np.ndarray:
    if isinstance(p, Point3):
        return p.as_array()
    arr = np.asarray(p, dtype=np.float64)
    if arr.shape != (3,):
        raise ConfigurationError(f"expected a 3-vector point, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class CameraModel:
    """Intrinsics (fx, fy, cx, cy, skew) and extrinsics (R, t) of the camera.

    R must be orthonormal with determinant 1 within 1e-9; fx, fy and the
    image size must be positive.  Construction fails otherwise, so any
    CameraModel instance is valid by the time projection sees it.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    skew: float = 0.0
    R: np.ndarray = field(default_factory=lambda: np.eye(3))
    t: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self) -> None:
        if not (self.fx > 0 and self.fy > 0):
            raise ConfigurationError(
                f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}"
            )
        if not (self.width > 0 and self.height > 0):
            raise ConfigurationError(
                f"image size must be positive, got {self.width}x{self.height}"
            )
        R = np.asarray(self.R, dtype=np.float64).reshape(3, 3).copy()
        t = np.asarray(self.t, dtype=np.float64).reshape(3).copy()
        if not np.all(np.isfinite(R)) or not np.all(np.isfinite(t)):
            raise ConfigurationError("R and t must be finite")
        if np.max(np.abs(R @ R.T - np.eye(3))) >= _ORTHO_TOL:
            raise ConfigurationError("R is not orthonormal within 1e-9")
        if abs(np.linalg.det(R) - 1.0) > _ORTHO_TOL:
            raise ConfigurationError("det(R) must be 1 within 1e-9")
        R.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "t", t)

    @property
    def K(self) -> np.ndarray:
        return np.array(
            [
                [self.fx, self.skew, self.cx],
                [0.0, self.fy, self.cy],
                [0.0, 0.0, 1.0],
            ]
        )


def project_point(cam: CameraModel, p) -> PixelRange | None:
    """Project one sensor-frame point; None when at or behind the camera plane."""
    arr = _as_point_array(p)
    q = cam.R @ arr - cam.R.T @ cam.t
    u, v, w = cam.K @ q
    if w <= W_EPS:
        return None
    return PixelRange(U=float(u / w), V=float(v / w), w=float(w),
                      range=float(np.linalg.norm(arr)))


def project_cloud(cam: CameraModel, cloud) -> list[tuple[int, PixelRange]]:
    """Project every point; keep those in front of the camera and inside the image.

    Accepts a list of Point3 or an (M, 3) array.  Results preserve input
    order and carry the original point index.
    """
    if len(cloud) == 0:
        return []
    if isinstance(cloud, np.ndarray):
        pts = np.asarray(cloud, dtype=np.float64).reshape(-1, 3)
    else:
        pts = np.array([_as_point_array(p) for p in cloud])
    q = pts @ cam.R.T - cam.R.T @ cam.t
    hom = q @ cam.K.T
    w = hom[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        U = hom[:, 0] / w
        V = hom[:, 1] / w
    ranges = np.linalg.norm(pts, axis=1)
    keep = (w > W_EPS) & (U >= 0) & (U < cam.width) & (V >= 0) & (V < cam.height)
    return [
        (int(i), PixelRange(U=float(U[i]), V=float(V[i]), w=float(w[i]),
                            range=float(ranges[i])))
        for i in np.flatnonzero(keep)
    ]


def bbox_median_range(
    projected: list[tuple[int, PixelRange]], box: BBox
) -> float | None:
    """Median range of projected points inside the box; None when empty.

    Box membership is inclusive on all four edges.  Even counts take the
    mean of the two central order statistics.
    """
    ranges = [
        pr.range
        for _, pr in projected
        if box.u_min <= pr.U <= box.u_max and box.v_min <= pr.V <= box.v_max
    ]
    if not ranges:
        return None
    return float(np.median(ranges))


def camera_to_dict(cam: CameraModel) -> dict:
    """Calibration dictionary with R flattened row-major."""
    return {
        "fx": cam.fx,
        "fy": cam.fy,
        "cx": cam.cx,
        "cy": cam.cy,
        "skew": cam.skew,
        "R": [float(x) for x in np.asarray(cam.R).ravel()],
        "t": [float(x) for x in np.asarray(cam.t).ravel()],
        "width": cam.width,
        "height": cam.height,
    }


def camera_from_dict(d: dict) -> CameraModel:
    """Inverse of camera_to_dict; raises ConfigurationError on bad content."""
    try:
        return CameraModel(
            fx=float(d["fx"]),
            fy=float(d["fy"]),
            cx=float(d["cx"]),
            cy=float(d["cy"]),
            skew=float(d["skew"]),
            R=np.array(d["R"], dtype=np.float64).reshape(3, 3),
            t=np.array(d["t"], dtype=np.float64),
            width=int(d["width"]),
            height=int(d["height"]),
        )
    except KeyError as exc:
        raise ConfigurationError(f"calibration missing key {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"malformed calibration: {exc}") from exc


def load_camera(path) -> CameraModel:
    """Load a JSON calibration file (keys fx, fy, cx, cy, skew, R, t, width, height)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read calibration {path}: {exc}") from exc
    return camera_from_dict(data)
