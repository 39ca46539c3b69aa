"""Synthetic triadic sessions with exact ground truth.

The robot cycles through facing the child (A), cueing the screen (B) and
cueing the caregiver (C). The child is a semi-Markov gaze agent that may
follow each robot cue after a short latency; the caregiver is a free-running
semi-Markov agent. All times live on the frame grid so that ground-truth
events are exactly what per-frame labelling and compression should recover.
These agents are a test fixture; they make no behavioral claims.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Mapping, NamedTuple, Sequence

import numpy as np
import pandas as pd

from .components import DEFAULT_MIN_OVERLAP, ComponentEvent, JointAttentionEpisode, classify
from .errors import InputError
from .events import NO_DETECTION, GazeEvent, SessionRecord, week_of
from .geometry import CAREGIVER, CHILD, OTHER_TARGET, ROBOT, SceneLayout, default_scene
from .stats.profile import ParticipantProfile, sample_profile

CYCLE = ("face_child", "cue_screen", "cue_caregiver")
ROBOT_FOCUS = {"face_child": CHILD, "cue_screen": "screen", "cue_caregiver": CAREGIVER}
CHILD_RESPONSE = {"face_child": ROBOT, "cue_screen": "screen", "cue_caregiver": CAREGIVER}
FACE_INDEX = {CHILD: 0, CAREGIVER: 1}
FRAME_COLUMNS = [
    "timestamp_s", "face_index", "gaze_dir_x", "gaze_dir_y", "gaze_dir_z",
    "head_x", "head_y", "head_z", "confidence", "valid",
]


@dataclass
class ProtocolScript:
    dwell_means: dict[str, float] = field(
        default_factory=lambda: {"face_child": 2.0, "cue_screen": 6.0, "cue_caregiver": 2.0}
    )
    dwell_spread: float = 0.5  # dwell ~ U(mean*(1-spread), mean*(1+spread))
    session_length: float = 1800.0
    frame_rate: float = 30.0

    def __post_init__(self):
        if set(self.dwell_means) != set(CYCLE):
            raise InputError(f"dwell_means must cover exactly {CYCLE}")
        if any(m <= 0 for m in self.dwell_means.values()):
            raise InputError("dwell means must be positive")
        if not 0 <= self.dwell_spread < 1:
            raise InputError("dwell_spread must lie in [0, 1)")
        if self.session_length <= 0 or self.frame_rate <= 0:
            raise InputError("session_length and frame_rate must be positive")

    @property
    def n_frames(self) -> int:
        return int(round(self.session_length * self.frame_rate))


def _child_defaults():
    return {"screen": math.log(6.0), ROBOT: math.log(3.0), CAREGIVER: math.log(2.5), OTHER_TARGET: math.log(3.0)}


@dataclass
class AgentParams:
    follow_probability: float = 0.8
    follow_latency: tuple[float, float] = (0.2, 0.6)
    off_task_rate: float = 1.0  # glances to "other" per minute
    off_task_duration: float = 1.0  # median glance length, s
    gaze_noise_sigma: float = 0.0  # degrees, per axis
    dwell_log_mean: dict[str, float] = field(default_factory=_child_defaults)
    dwell_log_sd: float = 0.5
    target_weights: dict[str, float] = field(
        default_factory=lambda: {"screen": 0.5, ROBOT: 0.2, CAREGIVER: 0.15, OTHER_TARGET: 0.15}
    )
    dropout_rate: float = 0.0  # tracking losses per minute
    dropout_duration: float = 1.0  # median loss length, s
    week_drift: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.follow_probability <= 1.0:
            raise InputError("follow_probability must lie in [0, 1]")
        lo, hi = self.follow_latency
        if not 0 <= lo <= hi:
            raise InputError("follow_latency must be an ordered (low, high) pair")
        if self.gaze_noise_sigma < 0 or self.dwell_log_sd < 0:
            raise InputError("noise and spread parameters must be non-negative")
        if self.off_task_rate < 0 or self.dropout_rate < 0:
            raise InputError("rates must be non-negative")
        if set(self.target_weights) - set(self.dwell_log_mean):
            raise InputError("every weighted target needs a dwell log-mean")

    def adjusted(self, deltas: Mapping[str, float], scale: float = 1.0) -> "AgentParams":
        """Copy with ``scale * delta`` added to each named parameter.

        Keys are field names or ``dwell_log_mean.<target>`` / ``target_weights.<target>``.
        """
        new = replace(self, dwell_log_mean=dict(self.dwell_log_mean), target_weights=dict(self.target_weights))
        for key, delta in deltas.items():
            if "." in key:
                group, target = key.split(".", 1)
                table = getattr(new, group, None)
                if not isinstance(table, dict) or target not in table:
                    raise InputError(f"unknown agent parameter {key!r}")
                table[target] += scale * delta
            else:
                value = getattr(new, key, None)
                if not isinstance(value, (int, float)) or isinstance(value, bool):
                    raise InputError(f"unknown or non-numeric agent parameter {key!r}")
                setattr(new, key, value + scale * delta)
        new.follow_probability = min(1.0, max(0.0, new.follow_probability))
        new.off_task_rate = max(0.0, new.off_task_rate)
        new.dropout_rate = max(0.0, new.dropout_rate)
        new.gaze_noise_sigma = max(0.0, new.gaze_noise_sigma)
        new.target_weights = {k: max(0.0, v) for k, v in new.target_weights.items()}
        return new

    def at_week(self, week: int) -> "AgentParams":
        return self.adjusted(self.week_drift, scale=week - 1) if self.week_drift else self


def default_caregiver() -> AgentParams:
    return AgentParams(
        follow_probability=0.0,
        off_task_rate=0.0,
        dwell_log_mean={"screen": math.log(8.0), CHILD: math.log(3.0), ROBOT: math.log(3.0), OTHER_TARGET: math.log(5.0)},
        target_weights={"screen": 0.4, CHILD: 0.25, ROBOT: 0.2, OTHER_TARGET: 0.15},
    )


class _Draws:
    """Scalar draws served from pre-generated blocks (fast and seed-stable)."""

    def __init__(self, rng: np.random.Generator, block: int = 4096):
        self.rng = rng
        self.block = block
        self._u = rng.random(block)
        self._z = rng.standard_normal(block)
        self._iu = 0
        self._iz = 0

    def uniform(self) -> float:
        if self._iu == self.block:
            self._u = self.rng.random(self.block)
            self._iu = 0
        v = self._u[self._iu]
        self._iu += 1
        return float(v)

    def normal(self) -> float:
        if self._iz == self.block:
            self._z = self.rng.standard_normal(self.block)
            self._iz = 0
        v = self._z[self._iz]
        self._iz += 1
        return float(v)

    def exponential(self, mean: float) -> float:
        return -mean * math.log(1.0 - self.uniform())


class _Agent:
    def __init__(self, params: AgentParams, draws: _Draws, fps: float):
        self.p = params
        self.d = draws
        self.fps = fps
        names = sorted(t for t, w in params.target_weights.items() if w > 0)
        if not names:
            raise InputError("agent needs at least one target with positive weight")
        self.names = names
        self.weights = np.array([params.target_weights[n] for n in names], dtype=float)

    def frames(self, seconds: float) -> int:
        return max(1, int(round(seconds * self.fps)))

    def dwell(self, target: str) -> int:
        mu = self.p.dwell_log_mean.get(target, math.log(2.0))
        return self.frames(math.exp(mu + self.p.dwell_log_sd * self.d.normal()))

    def pick(self, current: str | None) -> str:
        w = self.weights.copy()
        if current in self.names and len(self.names) > 1:
            w[self.names.index(current)] = 0.0
        cum = np.cumsum(w)
        u = self.d.uniform() * cum[-1]
        return self.names[min(int(np.searchsorted(cum, u, side="right")), len(self.names) - 1)]


def _run_agent(agent: _Agent, n_frames: int, interrupts: Sequence[tuple[int, int, str, object]]) -> list[list]:
    """Return [target, start_frame] change points of one agent's gaze.

    ``interrupts`` are (frame, order, kind, payload) with kind in
    {"follow", "release", "glance"}.
    """
    changes: list[list] = []

    def switch(target: str, t: int):
        if changes and changes[-1][0] == target:
            return
        if changes and changes[-1][1] == t:
            changes.pop()
            if changes and changes[-1][0] == target:
                return
        changes.append([target, t])

    cur = agent.pick(None)
    switch(cur, 0)
    mode = "free"
    free_until = agent.dwell(cur)
    glance_until = math.inf
    resume = "free"
    follow_target = None
    ints = sorted(interrupts)
    i = 0
    inf = math.inf
    while True:
        nxt_int = ints[i][0] if i < len(ints) else inf
        own = free_until if mode == "free" else glance_until if mode == "glance" else inf
        t = min(own, nxt_int)
        if t >= n_frames:
            break
        if own <= nxt_int:
            if mode == "free":
                cur = agent.pick(cur)
                free_until = t + agent.dwell(cur)
            else:
                if resume == "follow":
                    cur, mode = follow_target, "follow"
                else:
                    cur, mode = agent.pick(OTHER_TARGET), "free"
                    free_until = t + agent.dwell(cur)
            switch(cur, t)
            continue
        _, _, kind, payload = ints[i]
        i += 1
        if kind == "follow":
            cur = follow_target = payload
            mode = "follow"
            switch(cur, t)
        elif kind == "release":
            if mode == "follow":
                mode = "free"
                free_until = t + agent.dwell(cur)
            elif mode == "glance":
                resume = "free"
        elif kind == "glance" and mode != "glance":
            resume = mode
            cur = OTHER_TARGET
            mode = "glance"
            glance_until = t + payload
            switch(cur, t)
    return changes


def _poisson_starts(draws: _Draws, rate_per_min: float, n_frames: int, fps: float) -> list[int]:
    if rate_per_min <= 0:
        return []
    mean_gap = 60.0 / rate_per_min * fps
    out, t = [], 0.0
    while True:
        t += draws.exponential(mean_gap)
        if t >= n_frames:
            return out
        out.append(int(t))


def _changes_to_events(person: str, changes: list[list], n_frames: int, fps: float) -> list[GazeEvent]:
    out = []
    for k, (target, start) in enumerate(changes):
        end = changes[k + 1][1] if k + 1 < len(changes) else n_frames
        if end > start:
            out.append(GazeEvent(person, target, start / fps, (end - start) / fps))
    return out


def _apply_dropouts(changes: list[list], dropouts: list[tuple[int, int]], n_frames: int) -> list[list]:
    if not dropouts:
        return changes
    labels = np.empty(n_frames, dtype=object)
    for k, (target, start) in enumerate(changes):
        end = changes[k + 1][1] if k + 1 < len(changes) else n_frames
        labels[start:end] = target
    for s, e in dropouts:
        labels[s:min(e, n_frames)] = NO_DETECTION
    out: list[list] = []
    for i, lab in enumerate(labels):
        if not out or out[-1][0] != lab:
            out.append([lab, i])
    return out


class FrameArrays(NamedTuple):
    timestamps: np.ndarray
    valid: np.ndarray
    gaze: np.ndarray
    head: np.ndarray
    confidence: np.ndarray


@dataclass
class GroundTruth:
    events: list[GazeEvent]
    components: list[ComponentEvent]
    episodes: list[JointAttentionEpisode]
    follow_log: list[dict]
    cycles: int


@dataclass
class SimulationResult:
    frames: dict[str, FrameArrays]
    robot_events: list[GazeEvent]
    truth: GroundTruth
    frame_rate: float
    session_length: float

    def frames_table(self) -> pd.DataFrame:
        parts = []
        for role, fa in self.frames.items():
            parts.append(pd.DataFrame({
                "timestamp_s": fa.timestamps,
                "face_index": FACE_INDEX.get(role, 2),
                "gaze_dir_x": fa.gaze[:, 0],
                "gaze_dir_y": fa.gaze[:, 1],
                "gaze_dir_z": fa.gaze[:, 2],
                "head_x": fa.head[:, 0],
                "head_y": fa.head[:, 1],
                "head_z": fa.head[:, 2],
                "confidence": fa.confidence,
                "valid": fa.valid.astype(int),
            }))
        table = pd.concat(parts, ignore_index=True)
        return table.sort_values(["timestamp_s", "face_index"], kind="stable").reset_index(drop=True)[FRAME_COLUMNS]


def _robot_segments(script: ProtocolScript, draws: _Draws) -> list[tuple[str, int, int]]:
    fps = script.frame_rate
    n = script.n_frames
    segs, t, k = [], 0, 0
    while t < n:
        state = CYCLE[k % 3]
        mean = script.dwell_means[state]
        d = mean * (1.0 + script.dwell_spread * (2.0 * draws.uniform() - 1.0))
        end = min(n, t + max(1, int(round(d * fps))))
        segs.append((state, t, end))
        t, k = end, k + 1
    return segs


def _dropout_intervals(draws: _Draws, params: AgentParams, n_frames: int, fps: float) -> list[tuple[int, int]]:
    out = []
    for s in _poisson_starts(draws, params.dropout_rate, n_frames, fps):
        d = max(1, int(round(params.dropout_duration * math.exp(0.3 * draws.normal()) * fps)))
        out.append((s, s + d))
    return out


def _timelines(script, child, caregiver, draws, roles):
    """Gaze change points for robot, child and caregiver plus the child's follow log."""
    fps = script.frame_rate
    n = script.n_frames
    segs = _robot_segments(script, draws)
    robot_changes = [[ROBOT_FOCUS[state], start] for state, start, _ in segs]
    out = {ROBOT: robot_changes}
    follow_log = []
    if CHILD in roles:
        agent = _Agent(child, draws, fps)
        ints = []
        lo, hi = child.follow_latency
        for k, (state, start, end) in enumerate(segs):
            if draws.uniform() < child.follow_probability:
                lat = max(1, int(round((lo + (hi - lo) * draws.uniform()) * fps)))
                ints.append((start + lat, 1, "follow", CHILD_RESPONSE[state]))
                follow_log.append({"segment": k, "state": state, "cue_frame": start, "switch_frame": start + lat})
            else:
                ints.append((start, 0, "release", None))
        for s in _poisson_starts(draws, child.off_task_rate, n, fps):
            g = max(1, int(round(child.off_task_duration * math.exp(0.3 * draws.normal()) * fps)))
            ints.append((s, 2, "glance", g))
        changes = _run_agent(agent, n, ints)
        out[CHILD] = _apply_dropouts(changes, _dropout_intervals(draws, child, n, fps), n)
    if CAREGIVER in roles:
        agent = _Agent(caregiver, draws, fps)
        ints = [(s, 2, "glance", max(1, int(round(caregiver.off_task_duration * fps))))
                for s in _poisson_starts(draws, caregiver.off_task_rate, n, fps)]
        changes = _run_agent(agent, n, ints)
        out[CAREGIVER] = _apply_dropouts(changes, _dropout_intervals(draws, caregiver, n, fps), n)
    return segs, out, follow_log


def _covering(events: list[GazeEvent], t: float) -> GazeEvent | None:
    for e in events:
        if e.start - 1e-9 <= t < e.end - 1e-9:
            return e
    return None


def _robot_led_episodes(segs, events, components, follow_log, fps, n_frames, min_overlap) -> list[JointAttentionEpisode]:
    """Episodes the child produced by following robot cues after eye contact."""
    child = [e for e in events if e.person == CHILD]
    shared = {}
    for c in components:
        if c.kind == "shared" and ROBOT in c.participants and CHILD in c.participants:
            shared[(c.target, round(c.start * fps))] = c
    episodes = []
    followed = {entry["segment"]: entry for entry in follow_log}
    for k, (state, start, end) in enumerate(segs):
        if state != "face_child":
            continue
        a0, a1 = start / fps, end / fps
        mutual = None
        for e in child:
            if e.target == ROBOT:
                lo, hi = max(e.start, a0), min(e.end, a1)
                if hi - lo >= min_overlap - 1e-9:
                    mutual = (lo, hi - lo)
        if mutual is None:
            continue
        for j in (k + 1, k + 2):
            entry = followed.get(j)
            if entry is None or j >= len(segs) or entry["switch_frame"] >= n_frames:
                continue
            cue_state, c0, _ = segs[j]
            shift = c0 / fps
            arrival = entry["switch_frame"] / fps
            target = CHILD_RESPONSE[cue_state]
            ev = _covering(child, arrival)
            if ev is None or ev.target != target or abs(ev.start - arrival) > 1e-9:
                continue
            if cue_state == "cue_screen":
                held = _covering(child, shift - 0.5 / fps)
                if held is None or held.target != ROBOT or abs(mutual[0] + mutual[1] - shift) > 1e-9:
                    continue
            joint = shared.get((target, entry["switch_frame"]))
            if joint is None:
                continue
            episodes.append(JointAttentionEpisode(
                leader=ROBOT, follower=CHILD, target=target, mutual_interval=mutual, shift_time=shift,
                follow_latency=arrival - shift, shared_interval=(joint.start, joint.duration),
            ))
    return episodes


def _unit_rows(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _perturb(dirs: np.ndarray, sigma_deg: float, rng: np.random.Generator) -> np.ndarray:
    if sigma_deg <= 0:
        return dirs
    helper = np.where(np.abs(dirs[:, [0]]) < 0.9, np.array([[1.0, 0, 0]]), np.array([[0, 1.0, 0]]))
    u = _unit_rows(np.cross(dirs, helper))
    v = np.cross(dirs, u)
    n = rng.standard_normal((dirs.shape[0], 2)) * math.radians(sigma_deg)
    return _unit_rows(dirs + n[:, [0]] * u + n[:, [1]] * v)


def _other_direction(rng, head, rays, min_sep_deg) -> np.ndarray:
    cos_lim = math.cos(math.radians(min_sep_deg))
    rays = _unit_rows(rays)
    for _ in range(10_000):
        d = rng.standard_normal(3)
        d /= np.linalg.norm(d)
        if np.all(rays @ d < cos_lim):
            return d
    raise InputError("could not place an off-scene gaze direction; scene too crowded for the cone")


def _render(role, changes, scene, params, n_frames, fps, rng) -> FrameArrays:
    head = np.asarray(scene.seats[role], dtype=float)
    points = dict(scene.targets)
    for other, seat in scene.seats.items():
        if other != role:
            points[other] = seat
    cand_rays = np.array([np.asarray(p) - head for p in points.values()])
    min_sep = max(3.0 * scene.cone_half_angle, scene.cone_half_angle + 6.0 * params.gaze_noise_sigma + 5.0)
    gaze = np.empty((n_frames, 3))
    valid = np.ones(n_frames, dtype=bool)
    for k, (target, start) in enumerate(changes):
        end = changes[k + 1][1] if k + 1 < len(changes) else n_frames
        if target == NO_DETECTION:
            gaze[start:end] = np.nan
            valid[start:end] = False
        elif target == OTHER_TARGET:
            gaze[start:end] = _other_direction(rng, head, cand_rays, min_sep)
        else:
            d = np.asarray(points[target]) - head
            gaze[start:end] = d / np.linalg.norm(d)
    if valid.any():
        gaze[valid] = _perturb(gaze[valid], params.gaze_noise_sigma, rng)
    ts = np.arange(n_frames) / fps
    heads = np.broadcast_to(head, (n_frames, 3)).copy()
    conf = np.where(valid, 0.95, 0.0)
    return FrameArrays(ts, valid, gaze, heads, conf)


def session_rng(seed: int, *keys: int) -> np.random.Generator:
    """Sub-stream rule: (seed, participant, session) -> SeedSequence([seed, participant, session])."""
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), *[int(k) for k in keys]]))


def simulate(
    script: ProtocolScript | None = None,
    child: AgentParams | None = None,
    caregiver: AgentParams | None = None,
    scene: SceneLayout | None = None,
    seed: int = 0,
    *,
    min_overlap: float = DEFAULT_MIN_OVERLAP,
    render: bool = True,
    rng: np.random.Generator | None = None,
) -> SimulationResult:
    """One synthetic session: per-role frame streams plus ground truth.

    Ground-truth events come straight from the agents' state; components are the
    classification of those events and episodes are the robot-led follows the
    child actually produced after eye contact.
    """
    script = script or ProtocolScript()
    child = child or AgentParams()
    caregiver = caregiver or default_caregiver()
    scene = scene or default_scene()
    rng = rng or session_rng(seed)
    draws = _Draws(rng)
    fps, n = script.frame_rate, script.n_frames
    segs, changes, follow_log = _timelines(script, child, caregiver, draws, (CHILD, CAREGIVER))
    events = []
    for person in (CAREGIVER, CHILD, ROBOT):
        events.extend(_changes_to_events(person, changes[person], n, fps))
    robot_events = [e for e in events if e.person == ROBOT]
    components = classify(events, min_overlap)
    episodes = _robot_led_episodes(segs, events, components, follow_log, fps, n, min_overlap)
    frames = {}
    if render:
        for role, params in ((CHILD, child), (CAREGIVER, caregiver)):
            frames[role] = _render(role, changes[role], scene, params, n, fps, rng)
    truth = GroundTruth(events, components, episodes, follow_log, sum(1 for s in segs if s[0] == "cue_caregiver"))
    return SimulationResult(frames, robot_events, truth, fps, script.session_length)


# -- cohorts -----------------------------------------------------------------------

@dataclass
class Cohort:
    sessions: list[SessionRecord]
    profiles: dict[str, ParticipantProfile]
    manifest: dict


class CohortSession(NamedTuple):
    session_id: str
    day: int
    record: SessionRecord
    result: SimulationResult | None


class CohortPlan:
    """Participants, study days and per-session agent parameters of a cohort.

    Iterating yields one :class:`CohortSession` at a time so callers can render
    and write frames without holding the whole cohort in memory.
    """

    def __init__(
        self,
        n_participants: int = 13,
        weeks: int = 4,
        profiles: Callable[[np.random.Generator], ParticipantProfile] | None = None,
        drift: Mapping[str, Mapping[str, float]] | None = None,
        seed: int = 0,
        *,
        sessions_per_participant: int = 25,
        window_days: int = 30,
        script: ProtocolScript | None = None,
        child: AgentParams | None = None,
        caregiver: AgentParams | None = None,
        clinical_effects: Mapping[str, Mapping[str, Mapping[str, float]]] | None = None,
        roles: Sequence[str] = (CHILD, CAREGIVER),
    ):
        if n_participants < 2 or weeks < 2:
            raise InputError("a cohort needs at least 2 participants and 2 weeks")
        if not 1 <= sessions_per_participant <= window_days:
            raise InputError("sessions_per_participant must lie in 1..window_days")
        if window_days > 30:
            raise InputError("the study window is at most 30 days")
        if not set(roles) <= {CHILD, CAREGIVER} or not roles:
            raise InputError(f"roles must be drawn from {(CHILD, CAREGIVER)}")
        self.seed = seed
        self.weeks = weeks
        self.roles = tuple(roles)
        self.script = script or ProtocolScript()
        base = {CHILD: child or AgentParams(), CAREGIVER: caregiver or default_caregiver()}
        self.base = base
        self.drift = {r: dict(v) for r, v in (drift or {}).items()}
        self.effects = {r: {p: dict(c) for p, c in v.items()} for r, v in (clinical_effects or {}).items()}
        for r in list(self.drift) + list(self.effects):
            if r not in base:
                raise InputError(f"unknown role {r!r} in drift/effects")
        for r, table in self.drift.items():
            base[r].adjusted(table)  # validates the keys
        draw_profile = profiles or sample_profile
        self.participants = []
        for p_idx in range(n_participants):
            pid = f"P{p_idx + 1:02d}"
            prng = session_rng(seed, p_idx + 1, 0)
            prof = draw_profile(prng)
            days = sorted(int(d) for d in prng.choice(np.arange(1, window_days + 1), sessions_per_participant, replace=False))
            z = prof.zscores()
            params = {}
            for role, p in base.items():
                shift = {key: sum(beta * z[cov] for cov, beta in coefs.items())
                         for key, coefs in self.effects.get(role, {}).items()}
                params[role] = p.adjusted(shift) if shift else p
            self.participants.append((p_idx + 1, pid, prof, days, params))
        self.manifest = {
            "seed": seed,
            "n_participants": n_participants,
            "weeks": weeks,
            "sessions_per_participant": sessions_per_participant,
            "window_days": window_days,
            "roles": list(self.roles),
            "drift": self.drift,
            "clinical_effects": self.effects,
            "script": asdict(self.script),
            "agents": {r: asdict(p) for r, p in base.items()},
            "participants": {pid: {"days": days, "profile": prof.as_dict()} for _, pid, prof, days, _ in self.participants},
            "seed_rule": "session stream = SeedSequence([seed, participant_number, day]); profile and days use day 0",
        }

    def __len__(self) -> int:
        return sum(len(p[3]) for p in self.participants)

    def session_params(self, params: Mapping[str, AgentParams], week: int) -> dict[str, AgentParams]:
        return {r: (p.adjusted(self.drift[r], scale=week - 1) if r in self.drift else p) for r, p in params.items()}

    def iter_sessions(self, render: bool = False, scene: SceneLayout | None = None,
                      min_overlap: float = DEFAULT_MIN_OVERLAP):
        script = self.script
        fps, n = script.frame_rate, script.n_frames
        for number, pid, prof, days, base_params in self.participants:
            for day in days:
                week = week_of(day, self.weeks)
                params = self.session_params(base_params, week)
                rng = session_rng(self.seed, number, day)
                if render:
                    res = simulate(script, params[CHILD], params[CAREGIVER], scene, rng=rng, min_overlap=min_overlap)
                    events = res.truth.events
                else:
                    res = None
                    _, changes, _ = _timelines(script, params[CHILD], params[CAREGIVER], _Draws(rng), self.roles)
                    events = []
                    for person in sorted(changes):
                        events.extend(_changes_to_events(person, changes[person], n, fps))
                record = SessionRecord(pid, day, week, events, fps, prof, (0.0, n / fps))
                yield CohortSession(f"{pid}_d{day:02d}", day, record, res)


def generate_cohort(
    n_participants: int = 13,
    weeks: int = 4,
    profiles: Callable[[np.random.Generator], ParticipantProfile] | None = None,
    drift: Mapping[str, Mapping[str, float]] | None = None,
    seed: int = 0,
    **kwargs,
) -> Cohort:
    """Event-level cohort with planted weekly drifts and clinical effects.

    ``drift`` maps role -> {parameter: change per week}; ``clinical_effects`` maps
    role -> {parameter: {covariate: change per reference SD}}. Parameter keys
    follow :meth:`AgentParams.adjusted`. Frames are not rendered; use
    :class:`CohortPlan` directly for that. Session ground truth is the record's
    event list (robot log included).
    """
    plan = CohortPlan(n_participants, weeks, profiles, drift, seed, **kwargs)
    sessions = [s.record for s in plan.iter_sessions()]
    profiles_out = {pid: prof for _, pid, prof, _, _ in plan.participants}
    return Cohort(sessions, profiles_out, plan.manifest)
