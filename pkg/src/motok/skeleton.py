"""Fixed 22-joint skeleton, rotation representations, FK and slerp.

Conventions used throughout the package:

* quaternions are scalar-first ``[w, x, y, z]`` unit quaternions
* the 6D rotation representation is the first two columns of a rotation
  matrix, stored as ``[a0, a1, a2, b0, b1, b2]`` and orthonormalized by
  Gram-Schmidt on read-back
* world up is +y, all lengths in meters

All rotation converters accept arbitrary leading batch dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import InvalidInputError, NormalizationError

NUM_JOINTS = 22
ROOT_INDEX = 0

SKELETON_FORMAT_VERSION = 1

IDENTITY_QUAT = np.array([1.0, 0.0, 0.0, 0.0])
IDENTITY_ROT6D = np.array([1.0, 0.0, 0.0, 0.0, 1.0, 0.0])


@dataclass(frozen=True)
class Skeleton:
    """Joint tree with rest-pose offsets (parent-local, meters).

    joint_names : list[str], length 22, root (pelvis) first
    parents     : (22,) int array, -1 for the root, else an earlier index
    rest_offsets: (22, 3) float array, offset from parent in the rest pose
    """

    joint_names: list[str]
    parents: np.ndarray
    rest_offsets: np.ndarray

    def __post_init__(self):
        if len(self.joint_names) != NUM_JOINTS:
            raise InvalidInputError(
                f"skeleton must have {NUM_JOINTS} joints, got {len(self.joint_names)}"
            )
        parents = np.asarray(self.parents, dtype=np.int64)
        offsets = np.asarray(self.rest_offsets, dtype=np.float64)
        if parents.shape != (NUM_JOINTS,):
            raise InvalidInputError(f"parents must have shape ({NUM_JOINTS},)")
        if offsets.shape != (NUM_JOINTS, 3):
            raise InvalidInputError(f"rest_offsets must have shape ({NUM_JOINTS}, 3)")
        if parents[ROOT_INDEX] != -1:
            raise InvalidInputError("joint 0 must be the root (parent -1)")
        for j in range(1, NUM_JOINTS):
            if not 0 <= parents[j] < j:
                raise InvalidInputError(
                    f"joint {j} has parent {parents[j]}; parents must precede children"
                )
        if np.any(offsets[ROOT_INDEX] != 0.0):
            raise InvalidInputError("root rest offset must be (0, 0, 0)")
        object.__setattr__(self, "parents", parents)
        object.__setattr__(self, "rest_offsets", offsets)

    def joint_index(self, name: str) -> int:
        return self.joint_names.index(name)


@dataclass
class PoseFrame:
    """Root transform plus per-joint rotations in parent-local frames.

    root_position  : (3,) meters
    root_rotation  : (4,) unit quaternion, wxyz
    joint_rotations: (21, 6) 6D rotations for the non-root joints, in
                     skeleton order (joint index 1..21)
    """

    root_position: np.ndarray
    root_rotation: np.ndarray
    joint_rotations: np.ndarray

    def __post_init__(self):
        self.root_position = np.asarray(self.root_position, dtype=np.float64)
        self.root_rotation = np.asarray(self.root_rotation, dtype=np.float64)
        self.joint_rotations = np.asarray(self.joint_rotations, dtype=np.float64)
        if self.root_position.shape != (3,):
            raise InvalidInputError("root_position must be a 3-vector")
        if self.root_rotation.shape != (4,):
            raise InvalidInputError("root_rotation must be a wxyz quaternion")
        if self.joint_rotations.shape != (NUM_JOINTS - 1, 6):
            raise InvalidInputError(
                f"joint_rotations must have shape ({NUM_JOINTS - 1}, 6)"
            )
        norm = np.linalg.norm(self.root_rotation)
        if abs(norm - 1.0) > 1e-9:
            raise InvalidInputError(f"root_rotation must be unit norm, got {norm!r}")

    def copy(self) -> "PoseFrame":
        return PoseFrame(
            self.root_position.copy(),
            self.root_rotation.copy(),
            self.joint_rotations.copy(),
        )


# ---------------------------------------------------------------------------
# rotation conversions
# ---------------------------------------------------------------------------

def rot6d_to_matrix(r6: np.ndarray) -> np.ndarray:
    """Orthonormalize a 6D rotation into a proper rotation matrix.

    Gram-Schmidt: normalize a; b <- b - (b.a_hat) a_hat, normalize; c = a_hat x b_hat.
    Raises NormalizationError if a is near zero or a, b near parallel.
    """
    r6 = np.asarray(r6, dtype=np.float64)
    if r6.shape[-1] != 6:
        raise InvalidInputError("6D rotation input must have last dimension 6")
    a = r6[..., :3]
    b = r6[..., 3:]
    na = np.linalg.norm(a, axis=-1, keepdims=True)
    if np.any(na < 1e-8):
        raise NormalizationError("degenerate 6D rotation: first axis near zero")
    x = a / na
    b_orth = b - np.sum(x * b, axis=-1, keepdims=True) * x
    nb = np.linalg.norm(b_orth, axis=-1, keepdims=True)
    if np.any(nb < 1e-8):
        raise NormalizationError("degenerate 6D rotation: axes near parallel")
    y = b_orth / nb
    z = np.cross(x, y)
    return np.stack([x, y, z], axis=-1)


def matrix_to_rot6d(mat: np.ndarray) -> np.ndarray:
    """First two columns of a rotation matrix, flattened to 6 values."""
    mat = np.asarray(mat, dtype=np.float64)
    if mat.shape[-2:] != (3, 3):
        raise InvalidInputError("rotation matrix input must have shape (..., 3, 3)")
    return np.concatenate([mat[..., :, 0], mat[..., :, 1]], axis=-1)


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    if q.shape[-1] != 4:
        raise InvalidInputError("quaternion input must have last dimension 4")
    q = q / np.linalg.norm(q, axis=-1, keepdims=True)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    m = np.empty(q.shape[:-1] + (3, 3), dtype=np.float64)
    m[..., 0, 0] = 1 - 2 * (y * y + z * z)
    m[..., 0, 1] = 2 * (x * y - w * z)
    m[..., 0, 2] = 2 * (x * z + w * y)
    m[..., 1, 0] = 2 * (x * y + w * z)
    m[..., 1, 1] = 1 - 2 * (x * x + z * z)
    m[..., 1, 2] = 2 * (y * z - w * x)
    m[..., 2, 0] = 2 * (x * z - w * y)
    m[..., 2, 1] = 2 * (y * z + w * x)
    m[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return m


def matrix_to_quat(mat: np.ndarray) -> np.ndarray:
    """Rotation matrix to wxyz quaternion (Shepperd's branch selection)."""
    mat = np.asarray(mat, dtype=np.float64)
    if mat.shape[-2:] != (3, 3):
        raise InvalidInputError("rotation matrix input must have shape (..., 3, 3)")
    batch = mat.shape[:-2]
    m = mat.reshape((-1, 3, 3))
    q = np.empty((m.shape[0], 4), dtype=np.float64)
    m00, m01, m02 = m[:, 0, 0], m[:, 0, 1], m[:, 0, 2]
    m10, m11, m12 = m[:, 1, 0], m[:, 1, 1], m[:, 1, 2]
    m20, m21, m22 = m[:, 2, 0], m[:, 2, 1], m[:, 2, 2]
    tr = m00 + m11 + m22

    c0 = tr > 0.0
    c1 = ~c0 & (m00 >= m11) & (m00 >= m22)
    c2 = ~c0 & ~c1 & (m11 >= m22)
    c3 = ~c0 & ~c1 & ~c2

    s = np.sqrt(np.where(c0, tr + 1.0, 1.0)) * 2.0
    q[c0, 0] = 0.25 * s[c0]
    q[c0, 1] = (m21 - m12)[c0] / s[c0]
    q[c0, 2] = (m02 - m20)[c0] / s[c0]
    q[c0, 3] = (m10 - m01)[c0] / s[c0]

    s = np.sqrt(np.where(c1, 1.0 + m00 - m11 - m22, 1.0)) * 2.0
    q[c1, 0] = (m21 - m12)[c1] / s[c1]
    q[c1, 1] = 0.25 * s[c1]
    q[c1, 2] = (m01 + m10)[c1] / s[c1]
    q[c1, 3] = (m02 + m20)[c1] / s[c1]

    s = np.sqrt(np.where(c2, 1.0 - m00 + m11 - m22, 1.0)) * 2.0
    q[c2, 0] = (m02 - m20)[c2] / s[c2]
    q[c2, 1] = (m01 + m10)[c2] / s[c2]
    q[c2, 2] = 0.25 * s[c2]
    q[c2, 3] = (m12 + m21)[c2] / s[c2]

    s = np.sqrt(np.where(c3, 1.0 - m00 - m11 + m22, 1.0)) * 2.0
    q[c3, 0] = (m10 - m01)[c3] / s[c3]
    q[c3, 1] = (m02 + m20)[c3] / s[c3]
    q[c3, 2] = (m12 + m21)[c3] / s[c3]
    q[c3, 3] = 0.25 * s[c3]

    # canonical sign: non-negative scalar part
    q = np.where(q[:, :1] < 0, -q, q)
    q /= np.linalg.norm(q, axis=-1, keepdims=True)
    return q.reshape(batch + (4,))


def rot6d_to_quat(r6: np.ndarray) -> np.ndarray:
    return matrix_to_quat(rot6d_to_matrix(r6))


def quat_to_rot6d(q: np.ndarray) -> np.ndarray:
    return matrix_to_rot6d(quat_to_matrix(q))


# ---------------------------------------------------------------------------
# quaternion algebra
# ---------------------------------------------------------------------------

def quat_multiply(q1: np.ndarray, q2: np.ndarray) -> np.ndarray:
    q1 = np.asarray(q1, dtype=np.float64)
    q2 = np.asarray(q2, dtype=np.float64)
    w1, x1, y1, z1 = q1[..., 0], q1[..., 1], q1[..., 2], q1[..., 3]
    w2, x2, y2, z2 = q2[..., 0], q2[..., 1], q2[..., 2], q2[..., 3]
    return np.stack(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ],
        axis=-1,
    )


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate 3-vector(s) v by quaternion(s) q."""
    q = np.asarray(q, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    qv = q[..., 1:]
    w = q[..., :1]
    t = 2.0 * np.cross(qv, v)
    return v + w * t + np.cross(qv, t)


def quat_about_y(angle: np.ndarray | float) -> np.ndarray:
    angle = np.asarray(angle, dtype=np.float64)
    half = 0.5 * angle
    zeros = np.zeros_like(angle)
    return np.stack([np.cos(half), zeros, np.sin(half), zeros], axis=-1)


def heading_angle(q: np.ndarray) -> np.ndarray:
    """Twist angle about +y (swing-twist decomposition), in radians.

    The twist quaternion is the normalized projection (w, 0, qy, 0); its
    angle is the heading used for root-relative feature frames.
    """
    q = np.asarray(q, dtype=np.float64)
    w = q[..., 0]
    y = q[..., 2]
    norm = np.sqrt(w * w + y * y)
    # degenerate when the rotation is a half-turn about an axis in the
    # xz plane; define heading 0 there
    angle = np.where(norm < 1e-12, 0.0, 2.0 * np.arctan2(y, w))
    return wrap_angle(angle)


def wrap_angle(a: np.ndarray | float) -> np.ndarray:
    """Wrap radians into (-pi, pi]."""
    a = np.asarray(a, dtype=np.float64)
    wrapped = (a + np.pi) % (2.0 * np.pi) - np.pi
    return np.where(wrapped == -np.pi, np.pi, wrapped)


def slerp(q0: np.ndarray, q1: np.ndarray, t: float) -> np.ndarray:
    """Constant-angular-velocity interpolation on the shorter arc.

    Falls back to normalized lerp when the quaternions are nearly aligned
    (|dot| > 1 - 1e-7). Inputs must be unit quaternions within 1e-6.
    """
    q0 = np.asarray(q0, dtype=np.float64)
    q1 = np.asarray(q1, dtype=np.float64)
    for q in (q0, q1):
        n = np.linalg.norm(q, axis=-1)
        if np.any(np.abs(n - 1.0) > 1e-6):
            raise InvalidInputError("slerp inputs must be unit quaternions")
    dot = np.sum(q0 * q1, axis=-1, keepdims=True)
    q1 = np.where(dot < 0.0, -q1, q1)
    dot = np.abs(dot)
    dot = np.minimum(dot, 1.0)

    theta = np.arccos(dot)
    sin_theta = np.sin(theta)
    near = dot > 1.0 - 1e-7
    # avoid 0/0 in the near-parallel lanes; their result is overwritten
    safe_sin = np.where(near, 1.0, sin_theta)
    w0 = np.where(near, 1.0 - t, np.sin((1.0 - t) * theta) / safe_sin)
    w1 = np.where(near, t, np.sin(t * theta) / safe_sin)
    out = w0 * q0 + w1 * q1
    return out / np.linalg.norm(out, axis=-1, keepdims=True)


# ---------------------------------------------------------------------------
# forward kinematics
# ---------------------------------------------------------------------------

def forward_kinematics(skeleton: Skeleton, pose: PoseFrame) -> np.ndarray:
    """World positions of all 22 joints, shape (22, 3).

    Accumulates parent world transform o (rest offset, local rotation)
    down the tree; the root transform is applied first.
    """
    if pose.joint_rotations.shape[0] != NUM_JOINTS - 1:
        raise InvalidInputError("pose joint count does not match skeleton")
    local = np.empty((NUM_JOINTS, 3, 3), dtype=np.float64)
    local[ROOT_INDEX] = quat_to_matrix(pose.root_rotation)
    local[1:] = rot6d_to_matrix(pose.joint_rotations)

    world_rot = np.empty_like(local)
    positions = np.empty((NUM_JOINTS, 3), dtype=np.float64)
    world_rot[ROOT_INDEX] = local[ROOT_INDEX]
    positions[ROOT_INDEX] = pose.root_position
    for j in range(1, NUM_JOINTS):
        p = skeleton.parents[j]
        positions[j] = positions[p] + world_rot[p] @ skeleton.rest_offsets[j]
        world_rot[j] = world_rot[p] @ local[j]
    return positions


def forward_kinematics_sequence(skeleton: Skeleton, poses) -> np.ndarray:
    """Vectorized FK over a pose sequence, shape (T, 22, 3)."""
    T = len(poses)
    if T == 0:
        return np.zeros((0, NUM_JOINTS, 3))
    root_pos = np.stack([p.root_position for p in poses])
    root_rot = np.stack([p.root_rotation for p in poses])
    joint_rot = np.stack([p.joint_rotations for p in poses])
    return _fk_arrays(skeleton, root_pos, root_rot, joint_rot)


def _fk_arrays(skeleton, root_pos, root_rot, joint_rot6d):
    T = root_pos.shape[0]
    world_rot = np.empty((T, NUM_JOINTS, 3, 3), dtype=np.float64)
    positions = np.empty((T, NUM_JOINTS, 3), dtype=np.float64)
    local = rot6d_to_matrix(joint_rot6d)  # (T, 21, 3, 3)
    world_rot[:, ROOT_INDEX] = quat_to_matrix(root_rot)
    positions[:, ROOT_INDEX] = root_pos
    for j in range(1, NUM_JOINTS):
        p = skeleton.parents[j]
        positions[:, j] = positions[:, p] + np.einsum(
            "tij,j->ti", world_rot[:, p], skeleton.rest_offsets[j]
        )
        world_rot[:, j] = world_rot[:, p] @ local[:, j - 1]
    return positions


# ---------------------------------------------------------------------------
# skeleton definition file
# ---------------------------------------------------------------------------

def load_skeleton(path: str | Path) -> Skeleton:
    """Parse the textual skeleton definition (see data/skeleton22.txt)."""
    return parse_skeleton(Path(path).read_text())


def parse_skeleton(text: str) -> Skeleton:
    names: list[str] = []
    parents: list[int] = []
    offsets: list[list[float]] = []
    version = None
    declared = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        key = fields[0]
        if key == "format_version":
            version = int(fields[1])
        elif key == "joints":
            declared = int(fields[1])
        elif key == "joint":
            if len(fields) != 6:
                raise InvalidInputError(
                    f"skeleton line {lineno}: expected 'joint name parent ox oy oz'"
                )
            names.append(fields[1])
            parents.append(int(fields[2]))
            offsets.append([float(v) for v in fields[3:6]])
        else:
            raise InvalidInputError(f"skeleton line {lineno}: unknown key {key!r}")
    if version != SKELETON_FORMAT_VERSION:
        raise InvalidInputError(f"unsupported skeleton format_version {version!r}")
    if declared is not None and declared != len(names):
        raise InvalidInputError(
            f"skeleton declares {declared} joints but lists {len(names)}"
        )
    return Skeleton(names, np.array(parents), np.array(offsets))


def default_skeleton() -> Skeleton:
    """The bundled 22-joint skeleton (pelvis root + 21 body joints)."""
    text = resources.files("motok.data").joinpath("skeleton22.txt").read_text()
    return parse_skeleton(text)


def identity_pose(root_height: float = 0.0) -> PoseFrame:
    """All rotations identity, root at (0, root_height, 0)."""
    return PoseFrame(
        np.array([0.0, root_height, 0.0]),
        IDENTITY_QUAT.copy(),
        np.tile(IDENTITY_ROT6D, (NUM_JOINTS - 1, 1)),
    )
