"""Per-frame motion feature construction and inversion (layout humo263.v1).

A feature frame packs, in order:

* ``rot6d``    [0, 126)  6D rotations of the 21 non-root joints
* ``root``     [126, 130) heading angular velocity about +y (rad/frame),
               x and z root velocity in the previous frame's heading frame
               (m/frame), root height (m)
* ``positions``[130, 193) joint positions relative to the root, expressed
               in the root heading frame (m); redundant, kept for
               validation and never used to reconstruct poses
* ``contacts`` [193, 197) binary flags: left heel, right heel, left toe,
               right toe (1 = foot stationary)

The root orientation is represented by its heading (twist about +y) only;
pitch/roll of the root is outside this layout. Inversion integrates the
root trajectory from a canonical start (heading 0, xz at the origin), so
extract -> invert reproduces world geometry exactly for sequences that
start there.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, UnsupportedLayoutError
from .skeleton import (
    NUM_JOINTS,
    PoseFrame,
    Skeleton,
    _fk_arrays,
    heading_angle,
    quat_about_y,
    wrap_angle,
)

HUMO263_V1 = "humo263.v1"

# contact flags map to these skeleton joints, in span order
CONTACT_JOINTS = ("left_ankle", "right_ankle", "left_foot", "right_foot")

DEFAULT_CONTACT_THRESHOLD = 0.005  # m/frame at the reference rate
CONTACT_REFERENCE_FPS = 20.0


@dataclass(frozen=True)
class FeatureLayout:
    """Named spans of a feature vector; spans are disjoint and cover [0, dim)."""

    tag: str
    dim: int
    rot6d: slice
    root: slice
    positions: slice
    contacts: slice

    def spans(self):
        return {
            "rot6d": self.rot6d,
            "root": self.root,
            "positions": self.positions,
            "contacts": self.contacts,
        }


_LAYOUTS = {
    HUMO263_V1: FeatureLayout(
        tag=HUMO263_V1,
        dim=126 + 4 + 63 + 4,
        rot6d=slice(0, 126),
        root=slice(126, 130),
        positions=slice(130, 193),
        contacts=slice(193, 197),
    )
}


def get_layout(tag: str) -> FeatureLayout:
    try:
        return _LAYOUTS[tag]
    except KeyError:
        raise UnsupportedLayoutError(f"unknown feature layout {tag!r}") from None


@dataclass
class MotionSequence:
    """T x D array of per-frame features with frame rate and layout tag."""

    frames: np.ndarray
    fps: float
    layout: str = HUMO263_V1
    units: str = "m"

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 2:
            raise InvalidInputError("frames must be a T x D array")
        if self.frames.shape[0] < 1:
            raise InvalidInputError("motion must contain at least one frame")
        if self.fps <= 0:
            raise InvalidInputError("fps must be positive")
        if self.layout in _LAYOUTS:
            expected = _LAYOUTS[self.layout].dim
            if self.frames.shape[1] != expected:
                raise InvalidInputError(
                    f"layout {self.layout} expects D={expected}, "
                    f"got {self.frames.shape[1]}"
                )

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]


def contact_threshold_for_fps(fps: float) -> float:
    """Foot-speed threshold in m/frame, scaled from the 20 fps default."""
    return DEFAULT_CONTACT_THRESHOLD * (CONTACT_REFERENCE_FPS / fps)


def _rotate_about_y(angles, vecs):
    """Apply R_y(angle) to 3-vectors; angles broadcast against vecs[..., 3]."""
    c = np.cos(angles)
    s = np.sin(angles)
    x, y, z = vecs[..., 0], vecs[..., 1], vecs[..., 2]
    return np.stack([c * x + s * z, y, -s * x + c * z], axis=-1)


def extract_features(
    poses: list[PoseFrame],
    skeleton: Skeleton,
    fps: float = 20.0,
    contact_threshold: float | None = None,
) -> MotionSequence:
    """Build a humo263.v1 feature sequence from poses.

    Velocities are backward differences; frame 0 copies frame 1. Contacts
    flag foot joints whose world speed is below contact_threshold
    (defaults to the fps-scaled standard threshold).
    """
    T = len(poses)
    if T < 2:
        raise InvalidInputError("feature extraction needs at least 2 frames")
    if contact_threshold is None:
        contact_threshold = contact_threshold_for_fps(fps)

    root_pos = np.stack([p.root_position for p in poses])
    root_rot = np.stack([p.root_rotation for p in poses])
    joint_rot = np.stack([p.joint_rotations for p in poses])
    if not (
        np.isfinite(root_pos).all()
        and np.isfinite(root_rot).all()
        and np.isfinite(joint_rot).all()
    ):
        raise InvalidInputError("poses contain non-finite values")

    layout = get_layout(HUMO263_V1)
    out = np.zeros((T, layout.dim), dtype=np.float64)
    out[:, layout.rot6d] = joint_rot.reshape(T, -1)

    heading = heading_angle(root_rot)  # (T,)
    ang_vel = np.empty(T)
    ang_vel[1:] = wrap_angle(heading[1:] - heading[:-1])
    ang_vel[0] = ang_vel[1]

    disp = np.empty((T, 3))
    disp[1:] = root_pos[1:] - root_pos[:-1]
    local_disp = np.empty((T, 3))
    local_disp[1:] = _rotate_about_y(-heading[:-1], disp[1:])
    local_disp[0] = local_disp[1]

    out[:, layout.root.start + 0] = ang_vel
    out[:, layout.root.start + 1] = local_disp[:, 0]
    out[:, layout.root.start + 2] = local_disp[:, 2]
    out[:, layout.root.start + 3] = root_pos[:, 1]

    world = _fk_arrays(skeleton, root_pos, root_rot, joint_rot)  # (T, 22, 3)
    rel = world[:, 1:] - world[:, :1]
    rel = _rotate_about_y(-heading[:, None], rel)
    out[:, layout.positions] = rel.reshape(T, -1)

    contact_idx = [skeleton.joint_index(n) for n in CONTACT_JOINTS]
    foot = world[:, contact_idx]  # (T, 4, 3)
    speed = np.empty((T, len(contact_idx)))
    speed[1:] = np.linalg.norm(foot[1:] - foot[:-1], axis=-1)
    speed[0] = speed[1]
    out[:, layout.contacts] = (speed < contact_threshold).astype(np.float64)

    return MotionSequence(out, fps=fps, layout=HUMO263_V1)


def invert_features(
    motion: MotionSequence,
    skeleton: Skeleton,
    initial_heading: float = 0.0,
    initial_xz: tuple[float, float] = (0.0, 0.0),
) -> list[PoseFrame]:
    """Reconstruct poses from features; no inverse kinematics involved.

    Root heading and xz are integrated from the root span starting at the
    canonical (or supplied) initial state; frame 0's stored velocities are
    the backfilled copies and are not applied. Joint rotations are read
    directly from the rot6d span; the redundant position span is ignored.
    """
    if motion.layout != HUMO263_V1:
        raise UnsupportedLayoutError(
            f"cannot invert layout {motion.layout!r}; expected {HUMO263_V1!r}"
        )
    layout = get_layout(motion.layout)
    T = motion.num_frames
    frames = motion.frames

    ang_vel = frames[:, layout.root.start + 0]
    vx = frames[:, layout.root.start + 1]
    vz = frames[:, layout.root.start + 2]
    height = frames[:, layout.root.start + 3]

    heading = np.empty(T)
    heading[0] = initial_heading
    heading[1:] = initial_heading + np.cumsum(ang_vel[1:])

    pos = np.empty((T, 3))
    pos[0] = (initial_xz[0], height[0], initial_xz[1])
    if T > 1:
        local = np.stack([vx[1:], np.zeros(T - 1), vz[1:]], axis=-1)
        step = _rotate_about_y(heading[:-1], local)
        pos[1:, 0] = initial_xz[0] + np.cumsum(step[:, 0])
        pos[1:, 2] = initial_xz[1] + np.cumsum(step[:, 2])
        pos[1:, 1] = height[1:]

    root_rot = quat_about_y(heading)
    joint_rot = frames[:, layout.rot6d].reshape(T, NUM_JOINTS - 1, 6)
    return [
        PoseFrame(pos[t], root_rot[t], joint_rot[t].copy()) for t in range(T)
    ]


def position_span_deviation(motion: MotionSequence, skeleton: Skeleton) -> float:
    """Max |stored redundant positions - FK positions of the inverted poses|.

    Validation hook for the redundant span; small values mean the span is
    consistent with the rotation and root channels.
    """
    layout = get_layout(motion.layout)
    poses = invert_features(motion, skeleton)
    root_pos = np.stack([p.root_position for p in poses])
    root_rot = np.stack([p.root_rotation for p in poses])
    joint_rot = np.stack([p.joint_rotations for p in poses])
    world = _fk_arrays(skeleton, root_pos, root_rot, joint_rot)
    heading = heading_angle(root_rot)
    rel = _rotate_about_y(-heading[:, None], world[:, 1:] - world[:, :1])
    stored = motion.frames[:, layout.positions].reshape(motion.num_frames, -1, 3)
    return float(np.max(np.abs(stored - rel)))
