"""Five-part decomposition of whole-body frames and its averaging inverse.

Each part vector has 71 entries mirroring the whole-body span order:

* rot6d of the part's 7 joints   [0, 42)
* root span copy                 [42, 46)
* positions of the 7 joints      [46, 67)
* contact span copy              [67, 71)

Shared joints (the spine triplet, plus each collar) are duplicated into
every containing part on decompose and averaged on aggregate. Aggregation
is computed as base-copy + mean deviation, which makes
``aggregate(decompose(x)) == x`` bitwise (deviations of identical copies
are exactly zero).
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import InvalidInputError
from .features import HUMO263_V1, get_layout
from .skeleton import Skeleton

NUM_PARTS = 5
JOINTS_PER_PART = 7
PART_DIM = JOINTS_PER_PART * 9 + 8  # 7 x (6 rot + 3 pos) + 4 root + 4 contacts

PART_ROT6D = slice(0, 42)
PART_ROOT = slice(42, 46)
PART_POSITIONS = slice(46, 67)
PART_CONTACTS = slice(67, 71)

PARTITION_FORMAT_VERSION = 1


@dataclass(frozen=True)
class PartitionSpec:
    """Named 7-joint groups plus precomputed gather/scatter index maps."""

    part_names: list[str]
    part_joints: list[list[str]]  # joint names per part, ordered
    gather: np.ndarray            # (5, 71) whole-frame dim per part slot
    counts: np.ndarray            # (197,) number of part slots per whole dim
    first_part: np.ndarray        # (197,) part index of the first copy
    first_col: np.ndarray         # (197,) column of the first copy

    def joints_of(self, part_name: str) -> list[str]:
        return self.part_joints[self.part_names.index(part_name)]

    def parts_containing(self, joint_name: str) -> list[str]:
        return [
            name
            for name, joints in zip(self.part_names, self.part_joints)
            if joint_name in joints
        ]


def build_partition(
    skeleton: Skeleton, part_names: list[str], part_joints: list[list[str]]
) -> PartitionSpec:
    if len(part_names) != NUM_PARTS:
        raise InvalidInputError(f"expected {NUM_PARTS} parts, got {len(part_names)}")
    layout = get_layout(HUMO263_V1)
    seen: set[str] = set()
    gather = np.empty((NUM_PARTS, PART_DIM), dtype=np.int64)
    for p, (name, joints) in enumerate(zip(part_names, part_joints)):
        if len(joints) != JOINTS_PER_PART:
            raise InvalidInputError(
                f"part {name!r} must list {JOINTS_PER_PART} joints, got {len(joints)}"
            )
        if len(set(joints)) != len(joints):
            raise InvalidInputError(f"part {name!r} repeats a joint")
        cols = []
        for joint in joints:
            idx = skeleton.joint_index(joint)
            if idx == 0:
                raise InvalidInputError("the root joint cannot belong to a part")
            cols.extend(range(layout.rot6d.start + (idx - 1) * 6,
                              layout.rot6d.start + idx * 6))
        cols.extend(range(layout.root.start, layout.root.stop))
        for joint in joints:
            idx = skeleton.joint_index(joint)
            cols.extend(range(layout.positions.start + (idx - 1) * 3,
                              layout.positions.start + idx * 3))
        cols.extend(range(layout.contacts.start, layout.contacts.stop))
        gather[p] = cols
        seen.update(joints)
    missing = set(skeleton.joint_names[1:]) - seen
    if missing:
        raise InvalidInputError(f"parts do not cover joints: {sorted(missing)}")

    counts = np.zeros(layout.dim, dtype=np.int64)
    first_part = np.full(layout.dim, -1, dtype=np.int64)
    first_col = np.full(layout.dim, -1, dtype=np.int64)
    for p in range(NUM_PARTS):
        for c in range(PART_DIM):
            d = gather[p, c]
            counts[d] += 1
            if first_part[d] < 0:
                first_part[d] = p
                first_col[d] = c
    if np.any(counts == 0):
        raise InvalidInputError("partition leaves feature dimensions uncovered")
    return PartitionSpec(
        list(part_names), [list(j) for j in part_joints],
        gather, counts, first_part, first_col,
    )


def load_partition(path: str | Path, skeleton: Skeleton) -> PartitionSpec:
    return parse_partition(Path(path).read_text(), skeleton)


def parse_partition(text: str, skeleton: Skeleton) -> PartitionSpec:
    version = None
    declared = None
    names: list[str] = []
    joints: list[list[str]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if fields[0] == "format_version":
            version = int(fields[1])
        elif fields[0] == "parts":
            declared = int(fields[1])
        elif fields[0] == "part":
            names.append(fields[1])
            joints.append(fields[2:])
        else:
            raise InvalidInputError(f"partition line {lineno}: unknown key {fields[0]!r}")
    if version != PARTITION_FORMAT_VERSION:
        raise InvalidInputError(f"unsupported partition format_version {version!r}")
    if declared is not None and declared != len(names):
        raise InvalidInputError(f"partition declares {declared} parts, lists {len(names)}")
    return build_partition(skeleton, names, joints)


def default_partition(skeleton: Skeleton) -> PartitionSpec:
    text = resources.files("motok.data").joinpath("partition5.txt").read_text()
    return parse_partition(text, skeleton)


def decompose(frame: np.ndarray, spec: PartitionSpec) -> np.ndarray:
    """Whole-body frame(s) (..., 197) -> part features (..., 5, 71).

    Shared joints are duplicated into every containing part; the root and
    contact spans are copied into all five parts.
    """
    frame = np.asarray(frame, dtype=np.float64)
    layout = get_layout(HUMO263_V1)
    if frame.shape[-1] != layout.dim:
        raise InvalidInputError(
            f"expected feature dimension {layout.dim}, got {frame.shape[-1]}"
        )
    return frame[..., spec.gather]


def aggregate(parts: np.ndarray, spec: PartitionSpec) -> np.ndarray:
    """Part features (..., 5, 71) -> whole-body frame(s) (..., 197).

    Every whole-frame entry is the mean of its copies across containing
    parts. Contact flags are re-binarized (>= 0.5) only when the five
    copies disagree.
    """
    parts = np.asarray(parts, dtype=np.float64)
    if parts.shape[-2:] != (NUM_PARTS, PART_DIM):
        raise InvalidInputError(
            f"expected part features (..., {NUM_PARTS}, {PART_DIM}), got {parts.shape}"
        )
    layout = get_layout(HUMO263_V1)
    base = parts[..., spec.first_part, spec.first_col]  # (..., 197)
    dev = parts[..., np.arange(NUM_PARTS)[:, None], np.arange(PART_DIM)[None, :]]
    dev = parts - base[..., spec.gather.reshape(-1)].reshape(parts.shape)
    dev_sum = np.zeros(parts.shape[:-2] + (layout.dim,), dtype=np.float64)
    np.add.at(
        dev_sum.reshape(-1, layout.dim),
        (slice(None), spec.gather.reshape(-1)),
        dev.reshape(-1, NUM_PARTS * PART_DIM),
    )
    out = base + dev_sum / spec.counts

    cont = parts[..., PART_CONTACTS]  # (..., 5, 4)
    disagree = np.ptp(cont, axis=-2) != 0.0
    binarized = np.where(out[..., layout.contacts] >= 0.5, 1.0, 0.0)
    out[..., layout.contacts] = np.where(
        disagree, binarized, out[..., layout.contacts]
    )
    return out


def aggregation_matrix(spec: PartitionSpec) -> np.ndarray:
    """(5*71, 197) matrix M with aggregate(p) == p.flat @ M for the mean path.

    Used by training code for backpropagation through aggregation; the
    entry for slot (p, c) and dim d is 1/counts[d] when gather[p, c] == d.
    """
    layout = get_layout(HUMO263_V1)
    m = np.zeros((NUM_PARTS * PART_DIM, layout.dim), dtype=np.float64)
    flat = spec.gather.reshape(-1)
    m[np.arange(flat.size), flat] = 1.0 / spec.counts[flat]
    return m
