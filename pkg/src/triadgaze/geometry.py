"""Visual-cone target inference.

Coordinates are right-handed with the camera at the origin: +x to the image
right, +y down, +z away from the camera. Positions are in meters, angles in
degrees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np
import yaml

from .errors import AmbiguousRoles, InputError, InvalidObservation

CHILD = "child"
CAREGIVER = "caregiver"
ROBOT = "robot"
OTHER_ROLE = "other"
HUMAN_ROLES = (CHILD, CAREGIVER)
PERSON_ROLES = (CHILD, CAREGIVER, ROBOT)
OTHER_TARGET = "other"

DEFAULT_CONE_HALF_ANGLE = 10.0


def _vec(v) -> tuple[float, float, float]:
    arr = tuple(float(x) for x in v)
    if len(arr) != 3:
        raise InputError(f"expected a 3-vector, got {v!r}")
    return arr


@dataclass(frozen=True)
class SceneLayout:
    targets: dict[str, tuple[float, float, float]]
    seats: dict[str, tuple[float, float, float]]
    cone_half_angle: float = DEFAULT_CONE_HALF_ANGLE
    camera_frame_note: str = "right-handed; camera at origin; +x image right, +y down, +z forward"

    def __post_init__(self):
        object.__setattr__(self, "targets", {str(k): _vec(v) for k, v in self.targets.items()})
        object.__setattr__(self, "seats", {str(k): _vec(v) for k, v in self.seats.items()})
        if not 0.0 < self.cone_half_angle < 90.0:
            raise InputError(f"cone_half_angle must lie in (0, 90), got {self.cone_half_angle}")
        missing = {ROBOT, "screen"} - set(self.targets)
        if missing:
            raise InputError(f"scene must declare targets {sorted(missing)}")
        clash = set(self.targets) & set(self.seats)
        if clash:
            raise InputError(f"names used both as target and seat: {sorted(clash)}")
        points = list(self.seats.items()) + list(self.targets.items())
        for i, (a, pa) in enumerate(points):
            for b, pb in points[i + 1:]:
                if (a in self.seats or b in self.seats) and math.dist(pa, pb) <= 0.0:
                    raise InputError(f"{a} and {b} share a position")

    @classmethod
    def from_dict(cls, data: Mapping) -> "SceneLayout":
        raw_targets = data.get("targets")
        if raw_targets is None or "seats" not in data:
            raise InputError("scene needs 'targets' and 'seats'")
        if isinstance(raw_targets, Mapping):
            targets = dict(raw_targets)
        else:
            targets = {}
            for entry in raw_targets:
                name = entry["name"]
                if name in targets:
                    raise InputError(f"duplicate target name {name!r}")
                targets[name] = entry["position"]
        kwargs = {}
        if "cone_half_angle" in data:
            kwargs["cone_half_angle"] = float(data["cone_half_angle"])
        if "camera_frame_note" in data:
            kwargs["camera_frame_note"] = str(data["camera_frame_note"])
        return cls(targets=targets, seats=dict(data["seats"]), **kwargs)

    @classmethod
    def load(cls, path: str | Path) -> "SceneLayout":
        with open(path) as fh:
            return cls.from_dict(yaml.safe_load(fh))

    def to_dict(self) -> dict:
        return {
            "cone_half_angle": self.cone_half_angle,
            "camera_frame_note": self.camera_frame_note,
            "targets": [{"name": k, "position": list(v)} for k, v in self.targets.items()],
            "seats": {k: list(v) for k, v in self.seats.items()},
        }

    def with_half_angle(self, degrees: float) -> "SceneLayout":
        return SceneLayout(self.targets, self.seats, degrees, self.camera_frame_note)

    def transformed(self, rotation: np.ndarray, translation=(0.0, 0.0, 0.0)) -> "SceneLayout":
        rot = np.asarray(rotation, dtype=float)
        shift = np.asarray(translation, dtype=float)

        def move(p):
            return tuple(rot @ np.asarray(p) + shift)

        return SceneLayout(
            {k: move(v) for k, v in self.targets.items()},
            {k: move(v) for k, v in self.seats.items()},
            self.cone_half_angle,
            self.camera_frame_note,
        )


def default_scene(cone_half_angle: float = DEFAULT_CONE_HALF_ANGLE) -> SceneLayout:
    """Side-by-side seating facing a screen, robot to the child's side."""
    return SceneLayout(
        targets={"screen": (0.0, 0.15, 0.25), ROBOT: (0.55, 0.10, 0.70)},
        seats={CHILD: (0.30, 0.0, 1.60), CAREGIVER: (-0.30, 0.0, 1.60)},
        cone_half_angle=cone_half_angle,
    )


@dataclass(frozen=True)
class FrameObservation:
    timestamp: float
    face_index: int
    gaze_direction: tuple[float, float, float]
    head_position: tuple[float, float, float]
    confidence: float = 1.0
    valid: bool = True

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise InvalidObservation(f"confidence {self.confidence} outside [0, 1]")
        if self.valid:
            norm = math.sqrt(sum(c * c for c in self.gaze_direction))
            if abs(norm - 1.0) > 1e-6:
                raise InvalidObservation(f"gaze direction norm {norm} is not 1 at t={self.timestamp}")

    @property
    def head_reliable(self) -> bool:
        return all(math.isfinite(c) for c in self.head_position)


class TargetHit(NamedTuple):
    target: str | None
    angular_margin: float


class FrameLabel(NamedTuple):
    timestamp: float
    target: str | None
    angular_margin: float


# -- role assignment ---------------------------------------------------------

@dataclass(frozen=True)
class RolePolicy:
    """How detected faces map to roles.

    ``horizontal``: with two faces the rightmost (largest x) is the child; a lone
    face takes the nearest seat; more faces need ``face_map`` or raise.
    ``explicit``: ``face_map`` decides, unknown faces become OTHER.
    ``seat``: each role takes the face nearest its seat; leftovers become OTHER.
    """

    mode: str = "horizontal"
    face_map: Mapping[int, str] = field(default_factory=dict)
    seats: Mapping[str, tuple[float, float, float]] = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in ("horizontal", "explicit", "seat"):
            raise InputError(f"unknown role policy {self.mode!r}")
        if self.mode in ("explicit",) and not self.face_map:
            raise InputError("explicit role policy needs a face_map")
        if self.mode == "seat" and not self.seats:
            raise InputError("seat role policy needs seat positions")


def _nearest_seat_assignment(faces: Sequence[FrameObservation], seats) -> dict[str, FrameObservation]:
    pairs = []
    for role in HUMAN_ROLES:
        if role not in seats:
            continue
        for i, obs in enumerate(faces):
            if obs.head_reliable:
                pairs.append((math.dist(obs.head_position, seats[role]), role, i))
    pairs.sort()
    out: dict[str, FrameObservation] = {}
    used = set()
    for _, role, i in pairs:
        if role in out or i in used:
            continue
        out[role] = faces[i]
        used.add(i)
    for i, obs in enumerate(faces):
        if i not in used:
            out.setdefault(OTHER_ROLE, obs)
    return out


def assign_roles(frame_faces: Sequence[FrameObservation], policy: RolePolicy | None = None) -> dict[str, FrameObservation]:
    """Map the faces detected in one frame onto roles.

    Returns at most one observation per human role; the first unassigned face, if
    any, is reported under ``OTHER_ROLE``.
    """
    policy = policy or RolePolicy()
    faces = list(frame_faces)
    if not faces:
        raise InputError("no faces in frame")
    if policy.face_map:
        out: dict[str, FrameObservation] = {}
        for obs in faces:
            role = policy.face_map.get(obs.face_index, OTHER_ROLE)
            if role in HUMAN_ROLES and role in out:
                raise AmbiguousRoles(f"role {role} mapped twice at t={obs.timestamp}")
            if role not in out:
                out[role] = obs
        return out
    if policy.mode == "seat":
        return _nearest_seat_assignment(faces, policy.seats)
    # horizontal
    if len(faces) == 1:
        seats = policy.seats or {CHILD: (0.3, 0.0, 0.0), CAREGIVER: (-0.3, 0.0, 0.0)}
        return _nearest_seat_assignment(faces, seats)
    if len(faces) == 2:
        a, b = faces
        if not (math.isfinite(a.head_position[0]) and math.isfinite(b.head_position[0])):
            raise AmbiguousRoles(f"face position unknown at t={a.timestamp}")
        if a.head_position[0] == b.head_position[0]:
            raise AmbiguousRoles(f"faces horizontally coincident at t={a.timestamp}")
        right, left = (a, b) if a.head_position[0] > b.head_position[0] else (b, a)
        return {CHILD: right, CAREGIVER: left}
    raise AmbiguousRoles(f"{len(faces)} faces at t={faces[0].timestamp} and no face map")


# -- cone test ---------------------------------------------------------------

def _angles_deg(dirs: np.ndarray, rays: np.ndarray) -> np.ndarray:
    """Angle between ``dirs`` (N,3) and each candidate ray in ``rays`` (N,C,3)."""
    cross = np.cross(dirs[:, None, :], rays)
    sin = np.linalg.norm(cross, axis=-1)
    cos = np.einsum("nk,nck->nc", dirs, rays)
    return np.degrees(np.arctan2(sin, cos))


def cone_hits(
    origins: np.ndarray,
    directions: np.ndarray,
    candidate_names: Sequence[str],
    candidate_positions: np.ndarray,
    half_angle: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized cone test.

    ``candidate_positions`` is (C,3) or (N,C,3). Returns the index of the winning
    candidate per row (-1 for none) and the angular margin (NaN for none). Ties
    on angle go to the lexicographically smallest name.
    """
    origins = np.asarray(origins, dtype=float).reshape(-1, 3)
    directions = np.asarray(directions, dtype=float).reshape(-1, 3)
    pos = np.asarray(candidate_positions, dtype=float)
    if pos.ndim == 2:
        pos = np.broadcast_to(pos, (origins.shape[0],) + pos.shape)
    order = np.argsort(np.asarray(candidate_names, dtype=object).astype(str), kind="stable")
    rays = pos[:, order, :] - origins[:, None, :]
    ang = _angles_deg(directions, rays)
    ang = np.where(np.isfinite(ang), ang, np.inf)
    best = np.argmin(ang, axis=1)
    best_ang = ang[np.arange(ang.shape[0]), best]
    inside = best_ang <= half_angle
    idx = np.where(inside, order[best], -1)
    margin = np.where(inside, half_angle - best_ang, np.nan)
    return idx, margin


def _candidates(scene: SceneLayout, viewer_role: str, person_positions: Mapping[str, Sequence[float]] | None):
    names, points = [], []
    for name, p in scene.targets.items():
        names.append(name)
        points.append(p)
    for role, seat in scene.seats.items():
        if role == viewer_role:
            continue
        pos = (person_positions or {}).get(role)
        if pos is None or not all(math.isfinite(c) for c in pos):
            pos = seat
        names.append(role)
        points.append(tuple(pos))
    return names, np.asarray(points, dtype=float)


def infer_target(
    obs: FrameObservation,
    viewer_role: str,
    scene: SceneLayout,
    person_positions: Mapping[str, Sequence[float]] | None = None,
) -> TargetHit:
    """Target inside the viewer's visual cone closest to the gaze ray.

    Person targets use ``person_positions`` (current head positions) when given,
    otherwise their seats. The gaze origin is the viewer's head, or its seat
    when the head position is not finite.
    """
    if not obs.valid:
        raise InvalidObservation(f"invalid observation at t={obs.timestamp}")
    if obs.head_reliable:
        origin = obs.head_position
    elif viewer_role in scene.seats:
        origin = scene.seats[viewer_role]
    else:
        raise InvalidObservation(f"no gaze origin for {viewer_role} at t={obs.timestamp}")
    names, points = _candidates(scene, viewer_role, person_positions)
    idx, margin = cone_hits(np.array([origin]), np.array([obs.gaze_direction]), names, points, scene.cone_half_angle)
    if idx[0] < 0:
        return TargetHit(None, math.nan)
    return TargetHit(names[idx[0]], float(margin[0]))


def _stream_arrays(stream: Sequence[FrameObservation]):
    n = len(stream)
    ts = np.fromiter((o.timestamp for o in stream), float, n)
    valid = np.fromiter((o.valid for o in stream), bool, n)
    dirs = np.array([o.gaze_direction for o in stream], dtype=float).reshape(n, 3)
    heads = np.array([o.head_position for o in stream], dtype=float).reshape(n, 3)
    return ts, valid, dirs, heads


def label_arrays(
    streams: Mapping[str, tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]],
    scene: SceneLayout,
    other_label: str | None = OTHER_TARGET,
) -> dict[str, tuple[np.ndarray, list, np.ndarray]]:
    """Array form of :func:`label_stream`.

    ``streams`` maps role -> (timestamps, valid, gaze directions, head positions),
    all role streams sharing the same timestamps.
    """
    out = {}
    reference = None
    for role, (ts, _, _, _) in streams.items():
        if reference is None:
            reference = ts
        elif ts.shape != reference.shape or not np.array_equal(ts, reference):
            raise InputError("role streams are not aligned to a common clock")
    for role, (ts, valid, dirs, heads) in streams.items():
        n = ts.size
        origin = heads.copy()
        bad_head = ~np.all(np.isfinite(origin), axis=1)
        if bad_head.any():
            if role not in scene.seats:
                valid = valid & ~bad_head
            else:
                origin[bad_head] = scene.seats[role]
        names = list(scene.targets)
        cols = [np.broadcast_to(np.asarray(p), (n, 3)) for p in scene.targets.values()]
        for other, seat in scene.seats.items():
            if other == role:
                continue
            pos = np.broadcast_to(np.asarray(seat, dtype=float), (n, 3)).copy()
            if other in streams:
                _, ovalid, _, oheads = streams[other]
                usable = np.all(np.isfinite(oheads), axis=1)
                pos[usable] = oheads[usable]
            names.append(other)
            cols.append(pos)
        cand = np.stack(cols, axis=1)
        labels: list = [None] * n
        margins = np.full(n, np.nan)
        if valid.any():
            idx, marg = cone_hits(origin[valid], dirs[valid], names, cand[valid], scene.cone_half_angle)
            for pos_i, (k, m) in zip(np.flatnonzero(valid), zip(idx, marg)):
                if k >= 0:
                    labels[pos_i] = names[k]
                    margins[pos_i] = m
                else:
                    labels[pos_i] = other_label
        out[role] = (ts, labels, margins)
    return out


def label_stream(
    frames: Mapping[str, Sequence[FrameObservation]],
    scene: SceneLayout,
    other_label: str | None = OTHER_TARGET,
) -> dict[str, list[FrameLabel]]:
    """Label every (role, frame) with its attended target.

    Invalid frames get ``None`` (no detection). A valid frame whose cone holds no
    declared target gets ``other_label``: the gaze was measured but rests outside
    the scene.
    """
    arrays = {role: _stream_arrays(stream) for role, stream in frames.items()}
    labelled = label_arrays(arrays, scene, other_label)
    return {
        role: [FrameLabel(float(t), lab, float(m)) for t, lab, m in zip(ts, labs, margins)]
        for role, (ts, labs, margins) in labelled.items()
    }


def unit(v: Iterable[float]) -> tuple[float, float, float]:
    arr = np.asarray(list(v), dtype=float)
    return tuple(arr / np.linalg.norm(arr))
