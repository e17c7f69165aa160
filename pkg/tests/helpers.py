"""Shared scene builders for tests."""

import numpy as np

from nearcollision.scenesim import SimConfig, assemble_scene, default_camera


def straight_scene(p0, v, seed=1, duration=12.0, n_pedestrians=1, **kw):
    """Single pedestrian on a straight relative path, closed-form grid."""
    cfg = SimConfig(seed=seed, n_pedestrians=n_pedestrians,
                    duration_s=duration, **kw)
    times = np.arange(cfg.n_frames) / 10.0
    pos = (np.asarray(p0) + times[:, None] * np.asarray(v))[None]
    vel = np.broadcast_to(np.asarray(v, dtype=float), (1, cfg.n_frames, 2)).copy()
    return assemble_scene(cfg, default_camera(cfg.image_size), pos, vel)


def multi_scene(trajs, seed=1, duration=12.0, **kw):
    """Scene from a list of (p0, v) straight relative trajectories."""
    cfg = SimConfig(seed=seed, n_pedestrians=max(len(trajs), 1),
                    duration_s=duration, **kw)
    times = np.arange(cfg.n_frames) / 10.0
    if not trajs:
        pos = np.empty((0, cfg.n_frames, 2))
        vel = np.empty((0, cfg.n_frames, 2))
        return assemble_scene(cfg, default_camera(cfg.image_size), pos, vel)
    pos = np.stack([
        np.asarray(p0) + times[:, None] * np.asarray(v) for p0, v in trajs
    ])
    vel = np.stack([
        np.broadcast_to(np.asarray(v, dtype=float), (cfg.n_frames, 2)).copy()
        for _, v in trajs
    ])
    return assemble_scene(cfg, default_camera(cfg.image_size), pos, vel)
