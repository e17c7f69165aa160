"""Deterministic, seeded generator of synthetic egocentric pedestrian scenes.

Scenes run at a fixed 10 Hz.  The platform moves forward at constant
speed; its egomotion is folded into pedestrian coordinates, so every
frame's pedestrian positions are relative to the platform and the
camera extrinsics stay fixed (R = I, t = 0).  The projection convention
of the geometry module then applies unchanged per frame.

Frames of reference
-------------------
- Ground plane (2D): x right, y forward, platform at the origin.
  Pedestrian positions/velocities and all range labels live here.
- Sensor frame (3D): X right, Y down, Z forward; the sensor sits
  SENSOR_HEIGHT above the ground, so a ground point at height h maps to
  Y = SENSOR_HEIGHT - h.

Each pedestrian is a vertical cylinder (radius 0.25 m) rendered as a
filled rectangle whose intensity encodes proximity: clamp(1/range, 0, 1).
LIDAR returns sample the sensor-facing half of the cylinder within a
vertical band around sensor height, with Gaussian radial range noise.

Every random draw flows from SimConfig.seed through named substreams
(trajectories, lidar), so e.g. changing lidar_points_per_pedestrian
never alters trajectories.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .geometry import BBox, CameraModel, camera_from_dict, camera_to_dict, project_point

FRAME_RATE = 10
SENSOR_HEIGHT = 1.0       # camera/LIDAR height above ground, meters
CYLINDER_RADIUS = 0.25    # pedestrian body radius, meters
PEDESTRIAN_HEIGHT = 1.7
# LIDAR returns are restricted to this vertical band around sensor height
# so the per-box median range tracks the horizontal distance.
LIDAR_BAND_HALF = 0.3

_MASK64 = (1 << 64) - 1
_STREAM_TRAJECTORIES = 0
_STREAM_LIDAR = 1

_SPEED_LO, _SPEED_HI = 0.2, 1.5
_SPAWN_DIST = (3.0, 8.0)
_SPAWN_BEARING = np.deg2rad(45.0)   # half-cone of spawn directions around forward
_APPROACH_DIST = (0.2, 0.9)         # closest-approach distance of the guaranteed pedestrian
_APPROACH_MARGIN_S = 2.0            # closest approach this far from either scene end
_TURN_PERIOD_S = (2.0, 4.0)
_TURN_ANGLE = np.deg2rad((10.0, 30.0))

MOTION_MODELS = ("constant_velocity", "piecewise_turn")


@dataclass(frozen=True)
class SimConfig:
    seed: int
    n_pedestrians: int = 3
    duration_s: float = 12.0
    frame_rate: int = FRAME_RATE
    platform_speed: float = 1.0
    pedestrian_speed_range: tuple[float, float] = (_SPEED_LO, _SPEED_HI)
    image_size: tuple[int, int] = (64, 64)   # (height, width)
    lidar_points_per_pedestrian: int = 40
    lidar_range_noise_std: float = 0.01
    motion_model: str = "constant_velocity"

    def __post_init__(self) -> None:
        if self.frame_rate != FRAME_RATE:
            raise ConfigurationError(
                f"frame_rate must be {FRAME_RATE} (labeling math hard-codes it), "
                f"got {self.frame_rate}"
            )
        if not 1 <= self.n_pedestrians <= 8:
            raise ConfigurationError(
                f"n_pedestrians must be in [1, 8], got {self.n_pedestrians}"
            )
        if self.duration_s < 7:
            raise ConfigurationError(
                f"duration_s must be >= 7 (one full 6 s horizon), got {self.duration_s}"
            )
        if abs(self.duration_s * FRAME_RATE - round(self.duration_s * FRAME_RATE)) > 1e-9:
            raise ConfigurationError(
                f"duration_s must be a multiple of 0.1 s, got {self.duration_s}"
            )
        if not _SPEED_LO <= self.platform_speed <= _SPEED_HI:
            raise ConfigurationError(
                f"platform_speed must be in [{_SPEED_LO}, {_SPEED_HI}], "
                f"got {self.platform_speed}"
            )
        lo, hi = self.pedestrian_speed_range
        if not 0 < lo <= hi:
            raise ConfigurationError(
                f"pedestrian_speed_range must satisfy 0 < lo <= hi, got ({lo}, {hi})"
            )
        h, w = self.image_size
        if h <= 0 or w <= 0:
            raise ConfigurationError(f"image_size must be positive, got {self.image_size}")
        if self.lidar_points_per_pedestrian < 1:
            raise ConfigurationError("lidar_points_per_pedestrian must be >= 1")
        if self.lidar_range_noise_std < 0:
            raise ConfigurationError("lidar_range_noise_std must be >= 0")
        if self.motion_model not in MOTION_MODELS:
            raise ConfigurationError(
                f"motion_model must be one of {MOTION_MODELS}, got {self.motion_model!r}"
            )

    @property
    def n_frames(self) -> int:
        return int(round(self.duration_s * FRAME_RATE))


@dataclass
class PedestrianState:
    id: int
    position: np.ndarray    # (2,) meters, platform-centric ground plane
    velocity: np.ndarray    # (2,) m/s, relative to the platform
    height: float = PEDESTRIAN_HEIGHT


@dataclass
class Frame:
    index: int
    timestamp: float
    pedestrians: list[PedestrianState]
    cloud: np.ndarray       # (M, 3) sensor-frame points
    image: np.ndarray       # (H, W) float32 in [0, 1]
    boxes: list[tuple[int, BBox]]


@dataclass
class SceneLog:
    config: SimConfig
    camera: CameraModel
    frames: list[Frame]

    @property
    def scene_id(self) -> int:
        return self.config.seed

    def frame_stack(self) -> np.ndarray:
        """All frame images as one contiguous (F, H, W) float32 array."""
        return np.stack([f.image for f in self.frames])


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed & _MASK64, stream]))


def default_camera(image_size: tuple[int, int]) -> CameraModel:
    """Forward-looking pinhole camera for a given raster size.

    Focal length 7W/16 places a pedestrian at 3-4 m at a useful scale in
    the frame; principal point at the image center.
    """
    h, w = image_size
    return CameraModel(fx=7.0 * w / 16.0, fy=7.0 * w / 16.0,
                       cx=w / 2.0, cy=h / 2.0, width=w, height=h)


# ---------------------------------------------------------------------------
# Trajectory construction


def _sample_spawn_point(cfg: SimConfig, rng: np.random.Generator) -> np.ndarray:
    d = rng.uniform(*_SPAWN_DIST)
    phi = rng.uniform(-_SPAWN_BEARING, _SPAWN_BEARING)
    return np.array([d * np.sin(phi), d * np.cos(phi)])


def _spawn_approaching(cfg: SimConfig, rng: np.random.Generator):
    """Spawn point and relative velocity whose straight-line path passes
    within 1 m of the origin between 2 s and duration - 2 s.

    The closest-approach point q satisfies (q - p0) . q = 0 and |q| = d*;
    the relative speed along u = (q - p0)/|q - p0| is chosen so that the
    world-frame speed |v_rel + (0, platform_speed)| stays inside the
    configured pedestrian speed range whenever such a speed exists.
    """
    s_lo, s_hi = cfg.pedestrian_speed_range
    e = np.array([0.0, cfg.platform_speed])
    t_lo, t_hi = _APPROACH_MARGIN_S, cfg.duration_s - _APPROACH_MARGIN_S
    for _ in range(64):
        p0 = _sample_spawn_point(cfg, rng)
        d0 = np.linalg.norm(p0)
        d_star = rng.uniform(*_APPROACH_DIST)
        side = -1.0 if rng.uniform() < 0.5 else 1.0
        along = d_star * d_star / d0
        perp = np.sqrt(max(d_star * d_star - along * along, 0.0))
        p_hat = p0 / d0
        q = along * p_hat + side * perp * np.array([-p_hat[1], p_hat[0]])
        u = q - p0
        dist = np.linalg.norm(u)
        u /= dist
        lam_window = (dist / t_hi, dist / t_lo)

        # feasible relative speeds: |lam u + e| in [s_lo, s_hi]
        ue = float(u @ e)
        c_hi = cfg.platform_speed ** 2 - s_hi ** 2
        disc_hi = ue * ue - c_hi
        if disc_hi < 0:
            continue
        upper = -ue + np.sqrt(disc_hi)
        intervals = []
        c_lo = cfg.platform_speed ** 2 - s_lo ** 2
        disc_lo = ue * ue - c_lo
        if disc_lo <= 0:
            intervals.append((0.0, upper))
        else:
            b_lo = -ue - np.sqrt(disc_lo)
            b_hi = -ue + np.sqrt(disc_lo)
            intervals.append((0.0, min(upper, b_lo)))
            intervals.append((b_hi, upper))

        feasible = []
        for a, b in intervals:
            a = max(a, lam_window[0])
            b = min(b, lam_window[1])
            if b > a:
                feasible.append((a, b))
        if not feasible:
            continue
        lengths = np.array([b - a for a, b in feasible])
        pick = rng.choice(len(feasible), p=lengths / lengths.sum())
        lam = rng.uniform(*feasible[pick])
        return p0, lam * u

    # No speed-compatible geometry found; fall back to an unconstrained
    # approach (world speed may leave the configured range).
    p0 = _sample_spawn_point(cfg, rng)
    d0 = np.linalg.norm(p0)
    d_star = rng.uniform(*_APPROACH_DIST)
    p_hat = p0 / d0
    q = (d_star * d_star / d0) * p_hat + np.sqrt(
        max(d_star * d_star - (d_star * d_star / d0) ** 2, 0.0)
    ) * np.array([-p_hat[1], p_hat[0]])
    t_star = rng.uniform(t_lo, t_hi)
    return p0, (q - p0) / t_star


def _spawn_background(cfg: SimConfig, rng: np.random.Generator):
    p0 = _sample_spawn_point(cfg, rng)
    speed = rng.uniform(*cfg.pedestrian_speed_range)
    psi = rng.uniform(0.0, 2.0 * np.pi)
    v_world = speed * np.array([np.sin(psi), np.cos(psi)])
    return p0, v_world - np.array([0.0, cfg.platform_speed])


def _turn_plan(cfg: SimConfig, rng: np.random.Generator) -> list[tuple[int, float]]:
    plan = []
    t = rng.uniform(*_TURN_PERIOD_S)
    while t < cfg.duration_s:
        angle = rng.uniform(*_TURN_ANGLE) * (-1.0 if rng.uniform() < 0.5 else 1.0)
        plan.append((int(round(t * FRAME_RATE)), angle))
        t += rng.uniform(*_TURN_PERIOD_S)
    return plan


def _rot2(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def _propagate(cfg: SimConfig, p0: np.ndarray, v_rel: np.ndarray,
               plan: list[tuple[int, float]]):
    """Per-frame positions and relative velocities, (F, 2) each.

    With no turns the closed form p0 + v * (i/10) keeps positions exact
    on the frame grid; turns switch to stepwise integration, rotating
    the world-frame velocity at the planned frames.
    """
    F = cfg.n_frames
    if not plan:
        times = np.arange(F) / FRAME_RATE
        pos = p0 + times[:, None] * v_rel
        vel = np.broadcast_to(v_rel, (F, 2)).copy()
        return pos, vel
    drift = np.array([0.0, cfg.platform_speed])
    turns = dict(plan)
    v_world = v_rel + drift
    pos = np.empty((F, 2))
    vel = np.empty((F, 2))
    p = p0.astype(float).copy()
    for i in range(F):
        if i in turns:
            v_world = _rot2(turns[i]) @ v_world
        pos[i] = p
        vel[i] = v_world - drift
        p = p + vel[i] / FRAME_RATE
    return pos, vel


# ---------------------------------------------------------------------------
# Sensors


def _occluded(pts: np.ndarray, blockers: list[PedestrianState]) -> np.ndarray:
    """Boolean mask of points whose sensor ray pierces another pedestrian's
    cylinder before reaching them."""
    mask = np.zeros(len(pts), dtype=bool)
    g = pts[:, [0, 2]]              # 2D ray endpoints (ground plane)
    for ped in blockers:
        c = np.asarray(ped.position, dtype=float)
        # smallest s in (0, 1) with |s g - c| = CYLINDER_RADIUS
        a = np.einsum("ij,ij->i", g, g)
        b = -2.0 * (g @ c)
        cc = c @ c - CYLINDER_RADIUS ** 2
        disc = b * b - 4.0 * a * cc
        hit = (disc > 0) & (a > 0)
        if not np.any(hit):
            continue
        sq = np.sqrt(np.where(hit, disc, 0.0))
        s1 = (-b - sq) / (2.0 * a)
        s2 = (-b + sq) / (2.0 * a)
        s = np.where(s1 > 1e-9, s1, s2)
        inside = hit & (s > 1e-9) & (s < 1.0 - 1e-9)
        # the ray must pierce the cylinder within its vertical extent
        h_at = SENSOR_HEIGHT - s * pts[:, 1]
        inside &= (h_at >= 0.0) & (h_at <= ped.height)
        mask |= inside
    return mask


def sample_lidar(state: list[PedestrianState], cfg: SimConfig,
                 rng: np.random.Generator) -> np.ndarray:
    """LIDAR-like returns for one frame, as an (M, 3) sensor-frame array.

    Each pedestrian contributes up to lidar_points_per_pedestrian points
    on the sensor-facing half of its cylinder, within a vertical band
    around sensor height.  Points whose ray to the sensor is blocked by
    another pedestrian's cylinder are dropped (the sensor cannot see
    through bodies).  Each surviving point is displaced along its sensor
    ray by N(0, lidar_range_noise_std), so the noise is purely radial in
    range.
    """
    if not state:
        return np.empty((0, 3))
    chunks = []
    n = cfg.lidar_points_per_pedestrian
    for ped in state:
        c = np.asarray(ped.position, dtype=float)
        theta0 = np.arctan2(-c[1], -c[0])   # direction from cylinder center to sensor
        theta = theta0 + rng.uniform(-np.pi / 2, np.pi / 2, size=n)
        band_lo = max(0.0, SENSOR_HEIGHT - LIDAR_BAND_HALF)
        band_hi = min(ped.height, SENSOR_HEIGHT + LIDAR_BAND_HALF)
        if band_hi <= band_lo:
            band_lo, band_hi = 0.0, ped.height
        z_h = rng.uniform(band_lo, band_hi, size=n)
        pts = np.empty((n, 3))
        pts[:, 0] = c[0] + CYLINDER_RADIUS * np.cos(theta)
        pts[:, 2] = c[1] + CYLINDER_RADIUS * np.sin(theta)
        pts[:, 1] = SENSOR_HEIGHT - z_h
        blockers = [o for o in state if o.id != ped.id]
        if blockers:
            pts = pts[~_occluded(pts, blockers)]
        if len(pts) == 0:
            continue
        eps = rng.normal(0.0, cfg.lidar_range_noise_std, size=len(pts))
        norms = np.linalg.norm(pts, axis=1)
        ok = norms > 0
        pts[ok] += (eps[ok] / norms[ok])[:, None] * pts[ok]
        chunks.append(pts)
    if not chunks:
        return np.empty((0, 3))
    return np.concatenate(chunks, axis=0)


def render_frame(state: list[PedestrianState], cam: CameraModel,
                 size: tuple[int, int]):
    """Rasterize pedestrians as filled rectangles; returns (image, boxes).

    Horizontal rectangle extent comes from projecting the cylinder's two
    edge points (center +/- radius perpendicular to the line of sight);
    vertical extent from projecting the ground (foot) and head points.
    Intensity is clamp(1/range, 0, 1) with nearer pedestrians drawn over
    farther ones.  Pedestrians at/behind the camera plane or fully
    outside the image produce no box and no pixels.
    """
    h_px, w_px = size
    image = np.zeros((h_px, w_px), dtype=np.float32)
    rects: dict[int, tuple[int, int, int, int]] = {}
    order = []
    for ped in state:
        c = np.asarray(ped.position, dtype=float)
        d = float(np.linalg.norm(c))
        if d <= 0:
            continue
        p_hat = c / d
        perp = np.array([-p_hat[1], p_hat[0]])
        corners = []
        behind = False
        for edge in (c - CYLINDER_RADIUS * perp, c + CYLINDER_RADIUS * perp):
            for y_sensor in (SENSOR_HEIGHT, SENSOR_HEIGHT - ped.height):
                pr = project_point(cam, (edge[0], y_sensor, edge[1]))
                if pr is None:
                    behind = True
                    break
                corners.append((pr.U, pr.V))
            if behind:
                break
        if behind:
            continue
        us = [u for u, _ in corners]
        vs = [v for _, v in corners]
        u0 = max(int(np.floor(min(us))), 0)
        u1 = min(int(np.ceil(max(us))), w_px)
        v0 = max(int(np.floor(min(vs))), 0)
        v1 = min(int(np.ceil(max(vs))), h_px)
        if u0 >= u1 or v0 >= v1:
            continue
        rects[ped.id] = (u0, v0, u1, v1)
        order.append((d, ped.id))
    # far to near so nearer pedestrians overdraw
    for d, pid in sorted(order, reverse=True):
        u0, v0, u1, v1 = rects[pid]
        image[v0:v1, u0:u1] = min(1.0 / d, 1.0)
    boxes = [
        (pid, BBox(u_min=r[0], v_min=r[1], u_max=r[2], v_max=r[3]))
        for pid, r in sorted(rects.items())
    ]
    return image, boxes


# ---------------------------------------------------------------------------
# Scene assembly


def assemble_scene(cfg: SimConfig, camera: CameraModel, positions: np.ndarray,
                   velocities: np.ndarray, heights=None,
                   lidar_rng: np.random.Generator | None = None) -> SceneLog:
    """Build a SceneLog from explicit per-pedestrian trajectories.

    positions and velocities are (P, F, 2) arrays in the platform-centric
    ground plane.  simulate_scene uses this after sampling trajectories;
    it is also the hook for constructing scenes with hand-crafted
    kinematics.
    """
    P, F = positions.shape[0], cfg.n_frames
    if positions.shape != (P, F, 2) or velocities.shape != (P, F, 2):
        raise ConfigurationError(
            f"trajectories must be (P, {F}, 2); got positions "
            f"{positions.shape}, velocities {velocities.shape}"
        )
    if heights is None:
        heights = [PEDESTRIAN_HEIGHT] * P
    if lidar_rng is None:
        lidar_rng = _rng(cfg.seed, _STREAM_LIDAR)
    frames = []
    for i in range(F):
        states = [
            PedestrianState(id=k, position=positions[k, i].copy(),
                            velocity=velocities[k, i].copy(), height=heights[k])
            for k in range(P)
        ]
        cloud = sample_lidar(states, cfg, lidar_rng)
        image, boxes = render_frame(states, camera, cfg.image_size)
        frames.append(Frame(index=i, timestamp=i / FRAME_RATE,
                            pedestrians=states, cloud=cloud,
                            image=image, boxes=boxes))
    return SceneLog(config=cfg, camera=camera, frames=frames)


def simulate_scene(cfg: SimConfig) -> SceneLog:
    """Generate one scene; a pure function of the config (seed included).

    Pedestrian 0 is constructed so its straight-line relative path
    passes within 1 m of the origin during the log; the rest spawn with
    random headings.  Under piecewise_turn, pedestrian 0 keeps a
    straight path (preserving the near-collision guarantee) while the
    others change heading every few seconds.
    """
    rng = _rng(cfg.seed, _STREAM_TRAJECTORIES)
    spawns = [_spawn_approaching(cfg, rng)]
    for _ in range(1, cfg.n_pedestrians):
        spawns.append(_spawn_background(cfg, rng))
    plans: list[list[tuple[int, float]]] = []
    for k in range(cfg.n_pedestrians):
        if cfg.motion_model == "piecewise_turn" and k > 0:
            plans.append(_turn_plan(cfg, rng))
        else:
            plans.append([])
    pos = np.empty((cfg.n_pedestrians, cfg.n_frames, 2))
    vel = np.empty((cfg.n_pedestrians, cfg.n_frames, 2))
    for k, ((p0, v_rel), plan) in enumerate(zip(spawns, plans)):
        pos[k], vel[k] = _propagate(cfg, p0, v_rel, plan)
    camera = default_camera(cfg.image_size)
    return assemble_scene(cfg, camera, pos, vel)


# ---------------------------------------------------------------------------
# Scene directory I/O


def _config_to_dict(cfg: SimConfig) -> dict:
    return {
        "seed": cfg.seed,
        "n_pedestrians": cfg.n_pedestrians,
        "duration_s": cfg.duration_s,
        "frame_rate": cfg.frame_rate,
        "platform_speed": cfg.platform_speed,
        "pedestrian_speed_range": list(cfg.pedestrian_speed_range),
        "image_size": list(cfg.image_size),
        "lidar_points_per_pedestrian": cfg.lidar_points_per_pedestrian,
        "lidar_range_noise_std": cfg.lidar_range_noise_std,
        "motion_model": cfg.motion_model,
    }


def _config_from_dict(d: dict) -> SimConfig:
    try:
        return SimConfig(
            seed=int(d["seed"]),
            n_pedestrians=int(d["n_pedestrians"]),
            duration_s=float(d["duration_s"]),
            frame_rate=int(d["frame_rate"]),
            platform_speed=float(d["platform_speed"]),
            pedestrian_speed_range=tuple(d["pedestrian_speed_range"]),
            image_size=tuple(d["image_size"]),
            lidar_points_per_pedestrian=int(d["lidar_points_per_pedestrian"]),
            lidar_range_noise_std=float(d["lidar_range_noise_std"]),
            motion_model=str(d["motion_model"]),
        )
    except KeyError as exc:
        raise ConfigurationError(f"scene config missing key {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"malformed scene config: {exc}") from exc


def scene_dir_name(seed: int) -> str:
    return f"scene_{seed}"


def save_scene(log: SceneLog, root: str) -> str:
    """Write scene_<seed>/meta.json + frames.bin under root; returns the path.

    frames.bin holds little-endian float32 pixels, frame-major then
    row-major; meta.json records its SHA-256 so loads can verify it.
    Serialization is fully deterministic (sorted keys, exact float repr).
    """
    scene_dir = os.path.join(root, scene_dir_name(log.config.seed))
    os.makedirs(scene_dir, exist_ok=True)
    stack = log.frame_stack().astype("<f4")
    payload = stack.tobytes()
    digest = hashlib.sha256(payload).hexdigest()
    h, w = log.config.image_size
    meta = {
        "schema_version": 1,
        "config": _config_to_dict(log.config),
        "camera": camera_to_dict(log.camera),
        "n_frames": len(log.frames),
        "height": h,
        "width": w,
        "frames_bin_sha256": digest,
        "frames": [
            {
                "index": f.index,
                "timestamp": f.timestamp,
                "pedestrians": [
                    {
                        "id": p.id,
                        "position": [float(p.position[0]), float(p.position[1])],
                        "velocity": [float(p.velocity[0]), float(p.velocity[1])],
                        "height": p.height,
                    }
                    for p in f.pedestrians
                ],
                "boxes": [
                    [pid, [int(b.u_min), int(b.v_min), int(b.u_max), int(b.v_max)]]
                    for pid, b in f.boxes
                ],
                "cloud": [float(x) for x in f.cloud.ravel()],
            }
            for f in log.frames
        ],
    }
    with open(os.path.join(scene_dir, "frames.bin"), "wb") as fh:
        fh.write(payload)
    with open(os.path.join(scene_dir, "meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, sort_keys=True, separators=(",", ":"))
    return scene_dir


def load_scene(scene_dir: str) -> SceneLog:
    """Inverse of save_scene; verifies the frames.bin content hash."""
    meta_path = os.path.join(scene_dir, "meta.json")
    bin_path = os.path.join(scene_dir, "frames.bin")
    try:
        with open(meta_path, "r", encoding="utf-8") as fh:
            meta = json.load(fh)
        with open(bin_path, "rb") as fh:
            payload = fh.read()
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read scene {scene_dir}: {exc}") from exc
    if hashlib.sha256(payload).hexdigest() != meta["frames_bin_sha256"]:
        raise ConfigurationError(f"frames.bin hash mismatch in {scene_dir}")
    cfg = _config_from_dict(meta["config"])
    camera = camera_from_dict(meta["camera"])
    F, h, w = meta["n_frames"], meta["height"], meta["width"]
    stack = np.frombuffer(payload, dtype="<f4").reshape(F, h, w)
    frames = []
    for rec in meta["frames"]:
        states = [
            PedestrianState(
                id=int(p["id"]),
                position=np.array(p["position"], dtype=float),
                velocity=np.array(p["velocity"], dtype=float),
                height=float(p["height"]),
            )
            for p in rec["pedestrians"]
        ]
        boxes = [
            (int(pid), BBox(u_min=b[0], v_min=b[1], u_max=b[2], v_max=b[3]))
            for pid, b in rec["boxes"]
        ]
        cloud = np.array(rec["cloud"], dtype=float).reshape(-1, 3)
        frames.append(Frame(index=int(rec["index"]), timestamp=float(rec["timestamp"]),
                            pedestrians=states, cloud=cloud,
                            image=stack[rec["index"]].copy(), boxes=boxes))
    return SceneLog(config=cfg, camera=camera, frames=frames)
