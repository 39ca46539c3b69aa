"""Individual / shared / mutual gaze components and joint-attention episodes."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import combinations
from typing import Mapping, Sequence

from .events import NO_DETECTION, TIME_EPS, GazeEvent, split_by_person

log = logging.getLogger(__name__)

INDIVIDUAL = "individual"
SHARED = "shared"
MUTUAL = "mutual"
KINDS = (INDIVIDUAL, SHARED, MUTUAL, NO_DETECTION)

DEFAULT_MIN_OVERLAP = 0.25
DEFAULT_LATENCY_WINDOW = 3.0


@dataclass(frozen=True, order=True)
class ComponentEvent:
    start: float
    duration: float
    kind: str
    participants: tuple[str, ...]
    target: str | None

    def __post_init__(self):
        object.__setattr__(self, "participants", tuple(sorted(self.participants)))
        if self.kind == MUTUAL and (len(self.participants) != 2 or self.target is not None):
            raise ValueError("mutual gaze needs exactly two participants and no target")
        if self.kind == SHARED and (len(self.participants) < 2 or self.target is None):
            raise ValueError("shared gaze needs two or more participants and a target")

    @property
    def end(self) -> float:
        return self.start + self.duration


@dataclass(frozen=True)
class JointAttentionEpisode:
    leader: str
    follower: str
    target: str
    mutual_interval: tuple[float, float]
    shift_time: float
    follow_latency: float
    shared_interval: tuple[float, float]


def _events_by_person(events_by_person) -> dict[str, list[GazeEvent]]:
    if isinstance(events_by_person, Mapping):
        return {p: sorted(evs, key=lambda e: e.start) for p, evs in events_by_person.items()}
    return split_by_person(events_by_person)


def _pair_intersections(a: list[GazeEvent], b: list[GazeEvent]):
    """Two-pointer sweep over two time-sorted, non-overlapping event lists."""
    i = j = 0
    while i < len(a) and j < len(b):
        lo = max(a[i].start, b[j].start)
        hi = min(a[i].end, b[j].end)
        if hi - lo > TIME_EPS:
            yield a[i], b[j], lo, hi
        if a[i].end < b[j].end:
            i += 1
        else:
            j += 1


def mutual_components(by_person: dict[str, list[GazeEvent]], min_overlap: float) -> list[ComponentEvent]:
    out = []
    for pa, pb in combinations(sorted(by_person), 2):
        a_on_b = [e for e in by_person[pa] if e.target == pb]
        b_on_a = [e for e in by_person[pb] if e.target == pa]
        for _, _, lo, hi in _pair_intersections(a_on_b, b_on_a):
            if hi - lo >= min_overlap - TIME_EPS:
                out.append(ComponentEvent(lo, hi - lo, MUTUAL, (pa, pb), None))
    return out


def shared_components(by_person: dict[str, list[GazeEvent]], min_overlap: float) -> list[ComponentEvent]:
    """Maximal intervals over which a fixed set of two or more people share a target."""
    by_target: dict[str, list[GazeEvent]] = {}
    for evs in by_person.values():
        for e in evs:
            if e.target != NO_DETECTION:
                by_target.setdefault(e.target, []).append(e)
    out = []
    for target, evs in sorted(by_target.items()):
        if len({e.person for e in evs}) < 2:
            continue
        marks = []
        for e in evs:
            marks.append((e.start, 1, e.person))
            marks.append((e.end, -1, e.person))
        marks.sort(key=lambda m: (m[0], m[1]))
        active: dict[str, int] = {}
        seg_start, seg_set = None, frozenset()
        k = 0
        while k < len(marks):
            t = marks[k][0]
            # apply every mark within TIME_EPS of t together
            while k < len(marks) and marks[k][0] - t <= TIME_EPS:
                _, delta, person = marks[k]
                active[person] = active.get(person, 0) + delta
                if active[person] == 0:
                    del active[person]
                k += 1
            new_set = frozenset(active)
            if new_set != seg_set:
                if len(seg_set) >= 2 and t - seg_start >= min_overlap - TIME_EPS and t - seg_start > TIME_EPS:
                    out.append(ComponentEvent(seg_start, t - seg_start, SHARED, tuple(seg_set), target))
                seg_start, seg_set = t, new_set
    return out


def classify(events_by_person, min_overlap: float = DEFAULT_MIN_OVERLAP) -> list[ComponentEvent]:
    """Classify gaze events into individual, shared, mutual and no-detection components.

    Components overlap by design: every gaze event yields an individual (or
    no-detection) component, and shared/mutual intervals are added on top.
    """
    if min_overlap < 0:
        raise ValueError("min_overlap must be non-negative")
    by_person = _events_by_person(events_by_person)
    out = []
    for person, evs in by_person.items():
        for e in evs:
            kind = NO_DETECTION if e.target == NO_DETECTION else INDIVIDUAL
            out.append(ComponentEvent(e.start, e.duration, kind, (person,), None if kind == NO_DETECTION else e.target))
    out.extend(mutual_components(by_person, min_overlap))
    out.extend(shared_components(by_person, min_overlap))
    out.sort(key=lambda c: (c.start, KINDS.index(c.kind), c.participants, c.target or ""))
    return out


def _event_covering(evs: list[GazeEvent], t: float, target: str) -> GazeEvent | None:
    for e in evs:
        if e.target == target and e.start - TIME_EPS <= t < e.end - TIME_EPS:
            return e
    return None


def _event_starting(evs: list[GazeEvent], t: float) -> GazeEvent | None:
    for e in evs:
        if abs(e.start - t) <= TIME_EPS:
            return e
    return None


def detect_joint_attention(
    components: Sequence[ComponentEvent],
    events_by_person,
    latency_window: float = DEFAULT_LATENCY_WINDOW,
    *,
    ties: list | None = None,
) -> list[JointAttentionEpisode]:
    """Mutual gaze, then one partner shifts to a target and the other follows.

    For each mutual interval the partner whose gaze leaves first is the leader;
    the leader's very next event names the target. The follower must start an
    event on that target within ``latency_window`` seconds of the leader's shift,
    and a shared component holding both must begin at that arrival. Exact
    simultaneous shifts are ambiguous and are skipped; they are appended to
    ``ties`` when a list is supplied.
    """
    if latency_window <= 0:
        raise ValueError("latency_window must be positive")
    by_person = _events_by_person(events_by_person)
    shared_starts: dict[str, list[ComponentEvent]] = {}
    for c in components:
        if c.kind == SHARED:
            shared_starts.setdefault(c.target, []).append(c)

    episodes = []
    for m in components:
        if m.kind != MUTUAL:
            continue
        a, b = m.participants
        ev_a = _event_covering(by_person.get(a, []), m.start, b)
        ev_b = _event_covering(by_person.get(b, []), m.start, a)
        if ev_a is None or ev_b is None:
            continue
        if abs(ev_a.end - ev_b.end) <= TIME_EPS:
            log.info("simultaneous shift out of mutual gaze %s at t=%.3f; skipped", m.participants, ev_a.end)
            if ties is not None:
                ties.append(m)
            continue
        (leader, lead_ev), follower = ((a, ev_a), b) if ev_a.end < ev_b.end else ((b, ev_b), a)
        shift = lead_ev.end
        nxt = _event_starting(by_person[leader], shift)
        if nxt is None or nxt.target in (NO_DETECTION, leader, follower):
            continue
        target = nxt.target
        arrival = None
        for e in by_person[follower]:
            if e.target == target and shift - TIME_EPS <= e.start <= shift + latency_window + TIME_EPS:
                arrival = e
                break
        if arrival is None:
            continue
        shared = None
        for c in shared_starts.get(target, []):
            if abs(c.start - arrival.start) <= TIME_EPS and leader in c.participants and follower in c.participants:
                shared = c
                break
        if shared is None:
            continue
        episodes.append(
            JointAttentionEpisode(
                leader=leader,
                follower=follower,
                target=target,
                mutual_interval=(m.start, m.duration),
                shift_time=shift,
                follow_latency=arrival.start - shift,
                shared_interval=(shared.start, shared.duration),
            )
        )
    episodes.sort(key=lambda e: (e.shift_time, e.leader, e.follower))
    return episodes


def gaze_following_count(
    events_by_person,
    subject: str,
    cue_source: str,
    cue_target: str,
    latency_window: float = DEFAULT_LATENCY_WINDOW,
    min_overlap: float = DEFAULT_MIN_OVERLAP,
) -> int:
    """How often ``subject`` follows a cue toward ``cue_target`` after eye contact.

    A cue is ``cue_source`` starting to look at ``cue_target``. It counts when
    the subject and cue source shared mutual gaze that ended at or before the
    cue (each mutual interval licenses only the first cue after it) and the
    subject starts looking at ``cue_target`` within ``latency_window`` seconds.
    """
    by_person = _events_by_person(events_by_person)
    pair = {subject: by_person.get(subject, []), cue_source: by_person.get(cue_source, [])}
    mutual_ends = sorted(c.end for c in mutual_components(pair, min_overlap))
    if not mutual_ends:
        return 0
    cues = [e.start for e in by_person.get(cue_source, []) if e.target == cue_target]
    arrivals = [e.start for e in by_person.get(subject, []) if e.target == cue_target]
    count = 0
    last_used = None
    for t_cue in cues:
        licensed = [t for t in mutual_ends if t <= t_cue + TIME_EPS]
        if not licensed or licensed[-1] == last_used:
            continue
        last_used = licensed[-1]
        if any(t_cue - TIME_EPS <= a <= t_cue + latency_window + TIME_EPS for a in arrivals):
            count += 1
    return count


def gaze_following_rate(
    events_by_person,
    subject: str,
    cue_source: str,
    cue_target: str,
    latency_window: float = DEFAULT_LATENCY_WINDOW,
    min_overlap: float = DEFAULT_MIN_OVERLAP,
    per_minutes: float | None = None,
) -> float:
    """Gaze-following count, optionally normalized per ``per_minutes`` of session."""
    count = gaze_following_count(events_by_person, subject, cue_source, cue_target, latency_window, min_overlap)
    if per_minutes is None:
        return float(count)
    by_person = _events_by_person(events_by_person)
    all_evs = [e for evs in by_person.values() for e in evs]
    if not all_evs:
        return 0.0
    minutes = (max(e.end for e in all_evs) - min(e.start for e in all_evs)) / 60.0
    return count / minutes * per_minutes if minutes > 0 else 0.0
