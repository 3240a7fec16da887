"""Skeleton topology, Line Pose Graph features, flip augmentation, pose I/O."""
import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .tensor import ContractError


@dataclass(frozen=True)
class SkeletonTopology:
    parents: tuple
    pairs: tuple = ()
    names: tuple = ()

    def __post_init__(self):
        parents = tuple(int(p) for p in self.parents)
        object.__setattr__(self, "parents", parents)
        object.__setattr__(self, "pairs", tuple((int(a), int(b)) for a, b in self.pairs))
        object.__setattr__(self, "names", tuple(self.names))
        j = len(parents)
        if j < 1 or parents[0] != -1 or any(p == -1 for p in parents[1:]):
            raise ContractError("topology needs exactly one root, at index 0")
        for child, p in enumerate(parents[1:], start=1):
            if not 0 <= p < j or p == child:
                raise ContractError(f"joint {child} has invalid parent {p}")
        for child in range(j):
            seen, node = set(), child
            while node != -1:
                if node in seen:
                    raise ContractError(f"cycle through joint {child}")
                seen.add(node)
                node = parents[node]
        for a, b in self.pairs:
            if a == b or not (0 <= a < j and 0 <= b < j):
                raise ContractError(f"invalid left/right pair ({a}, {b})")
        if self.names and len(self.names) != j:
            raise ContractError("names length does not match joint count")

    @property
    def joint_count(self):
        return len(self.parents)

    @property
    def bones(self):
        """(parent, child) pairs ordered by child index."""
        return [(p, c) for c, p in enumerate(self.parents) if p >= 0]

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            spec = json.load(fh)
        return cls(spec["parents"], spec.get("pairs", ()), spec.get("names", ()))

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump({"parents": list(self.parents), "pairs": [list(p) for p in self.pairs],
                       "names": list(self.names)}, fh)


def h36m_topology():
    """The 17-joint Human3.6M tree shipped with the package."""
    with resources.files("sctpose.data").joinpath("h36m_topology.json").open() as fh:
        spec = json.load(fh)
    return SkeletonTopology(spec["parents"], spec["pairs"], spec["names"])


@dataclass
class PoseSequence:
    data: np.ndarray
    confidence: np.ndarray = None
    fps: float = 50.0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 3 or self.data.shape[0] < 1:
            raise ContractError(f"pose data must be F x J x D with F >= 1, got {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise ContractError("pose data must be finite")
        if self.confidence is not None:
            self.confidence = np.asarray(self.confidence, dtype=np.float64)
            if self.confidence.shape != self.data.shape[:2]:
                raise ContractError("confidence must be F x J")
            if np.any(self.confidence < 0) or np.any(self.confidence > 1):
                raise ContractError("confidence must lie in [0, 1]")

    @property
    def frames(self):
        return self.data.shape[0]

    @property
    def joints(self):
        return self.data.shape[1]


def _check_joints(pose, topo):
    if pose.shape[-2] != topo.joint_count:
        raise ContractError(f"pose has {pose.shape[-2]} joints, topology has {topo.joint_count}")


def line_pose(pose2d, topo):
    """Root joint in slot 0, then bone midpoints in slots 1..J-1 keyed by child index.

    Works on any ``[..., J, D]`` array.
    """
    pose = np.asarray(pose2d, dtype=np.float64)
    _check_joints(pose, topo)
    parents = np.array(topo.parents)
    out = np.empty_like(pose)
    out[..., 0, :] = pose[..., 0, :]
    out[..., 1:, :] = 0.5 * (pose[..., parents[1:], :] + pose[..., 1:, :])
    return out


def augment_sequence(pose2d, topo, confidence=None, use_lpg=True):
    """Stack (x, y, confidence, bone_x, bone_y) per joint.

    ``pose2d`` is ``[..., J, 2]`` or ``[..., J, 3]`` with confidence in the
    last channel. Missing confidence becomes 1. With ``use_lpg=False`` the
    bone channels are omitted and 3 channels are returned.
    """
    pose = np.asarray(pose2d, dtype=np.float64)
    _check_joints(pose, topo)
    if pose.shape[-1] == 3:
        if confidence is not None:
            raise ContractError("confidence given twice")
        confidence = pose[..., 2]
        pose = pose[..., :2]
    elif pose.shape[-1] != 2:
        raise ContractError(f"2D pose needs 2 or 3 channels, got {pose.shape[-1]}")
    conf = np.ones(pose.shape[:-1]) if confidence is None else np.asarray(confidence, dtype=np.float64)
    parts = [pose, conf[..., None]]
    if use_lpg:
        parts.append(line_pose(pose, topo))
    return np.concatenate(parts, axis=-1)


def horizontal_flip(pose, topo):
    """Negate x and swap every left/right pair. Accepts a PoseSequence or ``[..., J, D]`` array."""
    if not topo.pairs:
        raise ContractError("topology has no left/right pairs to flip")
    if isinstance(pose, PoseSequence):
        conf = None if pose.confidence is None else swap_pairs(pose.confidence[..., None], topo)[..., 0]
        return PoseSequence(horizontal_flip(pose.data, topo), conf, pose.fps, dict(pose.extra))
    arr = np.array(pose, dtype=np.float64, copy=True)
    _check_joints(arr, topo)
    arr[..., 0] = -arr[..., 0]
    return swap_pairs(arr, topo)


def swap_pairs(arr, topo):
    """Exchange the joint entries of every left/right pair along axis -2."""
    out = np.array(arr, copy=True)
    for left, right in topo.pairs:
        out[..., left, :] = arr[..., right, :]
        out[..., right, :] = arr[..., left, :]
    return out


def bone_lengths(pose3d, topo):
    pose = np.asarray(pose3d, dtype=np.float64)
    _check_joints(pose, topo)
    parents = np.array(topo.parents)
    return np.linalg.norm(pose[..., 1:, :] - pose[..., parents[1:], :], axis=-1)


def bone_length_variance(pose3d, topo):
    """Population variance over frames of each bone length, and their mean."""
    pose = np.asarray(pose3d, dtype=np.float64)
    if pose.ndim != 3 or pose.shape[0] < 2:
        raise ContractError("bone_length_variance needs an F x J x 3 sequence with F >= 2")
    lengths = bone_lengths(pose, topo)
    # shift by frame 0 so identical frames give exactly zero
    per_bone = (lengths - lengths[0]).var(axis=0)
    return per_bone, float(per_bone.mean())


# JSON-lines pose files ------------------------------------------------------

def read_poses(path):
    """One clip per line: ``{"fps", "joints", "frames": [[[x, y, (z|conf)], ...], ...]}``.

    Returns the parsed dicts with ``frames`` (and a ``keypoints2d`` array when
    present) converted to float arrays.
    """
    clips = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            rec = json.loads(line)
            frames = np.asarray(rec["frames"], dtype=np.float64)
            if frames.ndim != 3 or frames.shape[1] != rec["joints"]:
                raise ContractError(f"{path}:{lineno}: frames shape {frames.shape} vs joints={rec['joints']}")
            rec["frames"] = frames
            if "keypoints2d" in rec:
                rec["keypoints2d"] = np.asarray(rec["keypoints2d"], dtype=np.float64)
            clips.append(rec)
    return clips


def write_poses(path, clips):
    with open(path, "w") as fh:
        for rec in clips:
            out = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in rec.items()}
            out.setdefault("fps", 50)
            out["joints"] = int(np.shape(rec["frames"])[1])
            fh.write(json.dumps(out) + "\n")
