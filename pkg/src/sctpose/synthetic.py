"""Synthetic harmonic motion around a rest skeleton, projected orthographically."""
from dataclasses import dataclass

import numpy as np

from .lpg import h36m_topology
from .tensor import ContractError

# x right, y up, z toward the camera; millimetres, pelvis at the origin
REST_POSE_H36M = np.array([
    [0.0, 0.0, 0.0],
    [-130.0, 0.0, 0.0], [-130.0, -450.0, 20.0], [-130.0, -900.0, 0.0],
    [130.0, 0.0, 0.0], [130.0, -450.0, 20.0], [130.0, -900.0, 0.0],
    [0.0, 230.0, -10.0], [0.0, 480.0, -10.0], [0.0, 580.0, 10.0], [0.0, 700.0, 0.0],
    [170.0, 460.0, 0.0], [190.0, 200.0, -20.0], [200.0, -50.0, 10.0],
    [-170.0, 460.0, 0.0], [-190.0, 200.0, -20.0], [-200.0, -50.0, 10.0],
])
SKELETON_HEIGHT_MM = 1700.0


@dataclass
class SyntheticMotionSpec:
    frames: int = 27
    clips: int = 4
    amplitude: float = 40.0       # per-joint harmonic offset, mm
    max_frequency: float = 3.0    # cycles per clip
    harmonics: int = 2
    root_yaw: float = 0.3         # radians
    root_translation: float = 100.0  # mm, in the x/y plane
    noise_2d: float = 0.0         # mm
    fps: float = 50.0
    seed: int = 0

    def __post_init__(self):
        if self.frames < 2:
            raise ContractError("synthetic clips need at least 2 frames")
        if self.clips < 1:
            raise ContractError("clip count must be positive")


def _yaw(theta):
    c, s = np.cos(theta), np.sin(theta)
    r = np.zeros(theta.shape + (3, 3))
    r[..., 0, 0] = c
    r[..., 0, 2] = s
    r[..., 1, 1] = 1.0
    r[..., 2, 0] = -s
    r[..., 2, 2] = c
    return r


def generate_clip(spec, rng, rest=REST_POSE_H36M):
    f, j = spec.frames, rest.shape[0]
    t = np.arange(f) / f
    offsets = np.zeros((f, j, 3))
    for _ in range(spec.harmonics):
        freq = rng.uniform(0.5, spec.max_frequency, size=(j, 3))
        phase = rng.uniform(0, 2 * np.pi, size=(j, 3))
        amp = spec.amplitude * rng.uniform(0.5, 1.0, size=(j, 3)) / spec.harmonics
        offsets += amp * np.sin(2 * np.pi * freq * t[:, None, None] + phase)
    yaw = spec.root_yaw * np.sin(2 * np.pi * rng.uniform(0.5, 1.5) * t + rng.uniform(0, 2 * np.pi))
    trans = np.zeros((f, 1, 3))
    for axis in (0, 1):
        scale = spec.root_translation * (1.0 if axis == 0 else 0.3)
        trans[:, 0, axis] = scale * np.sin(2 * np.pi * rng.uniform(0.3, 1.0) * t + rng.uniform(0, 2 * np.pi))
    pose3d = np.einsum("fab,fjb->fja", _yaw(yaw), rest + offsets) + trans
    noise = rng.normal(0.0, spec.noise_2d, size=(f, j, 2)) if spec.noise_2d > 0 else np.zeros((f, j, 2))
    if spec.noise_2d > 0:
        conf = np.clip(np.exp(-(noise ** 2).sum(-1) / (2 * spec.noise_2d ** 2)), 0.0, 1.0)
    else:
        conf = np.ones((f, j))
    kp2d = np.concatenate([pose3d[..., :2] + noise, conf[..., None]], axis=-1)
    return {"fps": spec.fps, "joints": j, "frames": pose3d, "keypoints2d": kp2d}


def generate_synthetic(spec, rest=REST_POSE_H36M):
    """List of clip dicts: ``frames`` (F x J x 3 ground truth, mm) and
    ``keypoints2d`` (F x J x 3: projected x, y plus confidence)."""
    rng = np.random.default_rng(spec.seed)
    return [generate_clip(spec, rng, rest) for _ in range(spec.clips)]


def rigid_motion(pose, frames, seed=0):
    """Random rotations and translations of one pose, F x J x 3."""
    rng = np.random.default_rng(seed)
    out = np.empty((frames,) + pose.shape)
    for i in range(frames):
        q, r = np.linalg.qr(rng.normal(size=(3, 3)))
        q *= np.sign(np.diag(r))
        if np.linalg.det(q) < 0:
            q[:, 0] *= -1
        out[i] = pose @ q.T + rng.normal(0, 500, size=3)
    return out


def default_topology():
    return h36m_topology()
