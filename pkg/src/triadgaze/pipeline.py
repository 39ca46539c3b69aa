"""Per-session pipeline steps shared by the CLI and the tests."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import pandas as pd

from .components import ComponentEvent, JointAttentionEpisode, classify, detect_joint_attention
from .config import RunConfig
from .events import GazeEvent, compress
from .geometry import OTHER_TARGET, PERSON_ROLES, RolePolicy, SceneLayout, default_scene, label_arrays
from .io import role_streams


def scene_for(cfg: RunConfig) -> SceneLayout:
    scene = SceneLayout.load(cfg.scene) if cfg.scene else default_scene()
    return scene.with_half_angle(cfg.cone_half_angle)


def policy_for(cfg: RunConfig, scene: SceneLayout) -> RolePolicy:
    if cfg.role_policy == "explicit":
        return RolePolicy("explicit", face_map=cfg.face_map)
    if cfg.role_policy == "seat":
        return RolePolicy("seat", seats=scene.seats)
    return RolePolicy("horizontal", face_map=cfg.face_map, seats=scene.seats)


def _event_scores(events: list[GazeEvent], ts: np.ndarray, margins: np.ndarray) -> dict[GazeEvent, float]:
    """Mean cone margin over each event's frames (NaN when no frame has one)."""
    out = {}
    for e in events:
        lo = np.searchsorted(ts, e.start - 1e-9, side="left")
        hi = np.searchsorted(ts, e.end - 1e-9, side="left")
        vals = margins[lo:hi]
        vals = vals[np.isfinite(vals)]
        out[e] = float(vals.mean()) if vals.size else math.nan
    return out


def extract_events(
    frames: pd.DataFrame,
    cfg: RunConfig,
    scene: SceneLayout | None = None,
    robot_events: Sequence[GazeEvent] = (),
) -> tuple[list[GazeEvent], dict[GazeEvent, float]]:
    """Frame table -> gaze events per role, plus a margin score per event."""
    scene = scene or scene_for(cfg)
    streams = role_streams(frames, policy_for(cfg, scene))
    labelled = label_arrays(streams, scene, other_label=OTHER_TARGET)
    period = 1.0 / cfg.frame_rate if cfg.frame_rate else None
    events: list[GazeEvent] = []
    scores: dict[GazeEvent, float] = {}
    for role, (ts, labels, margins) in labelled.items():
        evs = compress(zip(ts, labels), cfg.gap_tolerance, cfg.min_duration, person=role, frame_period=period)
        events.extend(evs)
        scores.update(_event_scores(evs, ts, margins))
    events.extend(robot_events)
    events.sort(key=lambda e: (e.person, e.start))
    return events, scores


@dataclass
class Classification:
    components: list[ComponentEvent]
    episodes: list[JointAttentionEpisode]
    ties: list[ComponentEvent] = field(default_factory=list)

    def summary(self) -> dict:
        counts: dict[str, int] = {}
        for c in self.components:
            counts[c.kind] = counts.get(c.kind, 0) + 1
        leaders: dict[str, int] = {}
        for e in self.episodes:
            key = f"{e.leader}->{e.follower}"
            leaders[key] = leaders.get(key, 0) + 1
        return {
            "components": dict(sorted(counts.items())),
            "episodes": len(self.episodes),
            "episodes_by_pair": dict(sorted(leaders.items())),
            "suppressed_ties": len(self.ties),
        }


def classify_events(events: Sequence[GazeEvent], cfg: RunConfig) -> Classification:
    comps = classify(list(events), cfg.min_overlap)
    ties: list = []
    eps = detect_joint_attention(comps, list(events), cfg.latency_window, ties=ties)
    return Classification(comps, eps, ties)


KNOWN_PERSONS = PERSON_ROLES

