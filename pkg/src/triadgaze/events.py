"""Frame labels to timed gaze events, and per-session/per-week bookkeeping."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import EmptyWeek, InputError, UnorderedInput

NO_DETECTION = "no_detection"
TIME_EPS = 1e-9

DEFAULT_GAP_TOLERANCE = 0.2
DEFAULT_MIN_DURATION = 0.1
DEFAULT_FRAME_RATE = 30.0
ANALYSIS_WEEKS = 4


class GazeEvent(NamedTuple):
    person: str
    target: str
    start: float
    duration: float

    @property
    def end(self) -> float:
        return self.start + self.duration

    def contains(self, t: float) -> bool:
        return self.start - TIME_EPS <= t < self.end - TIME_EPS


def events_close(a: Sequence[GazeEvent], b: Sequence[GazeEvent], tol: float = 1e-9) -> bool:
    """Event lists equal up to floating-point noise in the times."""
    if len(a) != len(b):
        return False
    return all(
        x.person == y.person and x.target == y.target
        and abs(x.start - y.start) <= tol and abs(x.duration - y.duration) <= tol
        for x, y in zip(a, b)
    )


def _infer_period(ts: np.ndarray, frame_period: float | None) -> float:
    if frame_period is not None:
        if frame_period <= 0:
            raise InputError("frame period must be positive")
        return float(frame_period)
    if ts.size < 2:
        return 1.0 / DEFAULT_FRAME_RATE
    steps = np.diff(ts)
    steps = steps[steps > 0]
    if steps.size == 0:
        raise InputError("cannot infer a frame period from identical timestamps")
    return float(np.median(steps))


def _runs(labels: list) -> list[list]:
    runs: list[list] = []
    for i, lab in enumerate(labels):
        if runs and runs[-1][0] == lab:
            runs[-1][2] = i
        else:
            runs.append([lab, i, i])
    return runs


def _merge(runs: list[list]) -> list[list]:
    out: list[list] = []
    for lab, a, b in runs:
        if out and out[-1][0] == lab:
            out[-1][2] = b
        else:
            out.append([lab, a, b])
    return out


def compress(
    labels: Iterable[tuple[float, str | None]],
    gap_tolerance: float = DEFAULT_GAP_TOLERANCE,
    min_duration: float = DEFAULT_MIN_DURATION,
    *,
    person: str = "",
    frame_period: float | None = None,
) -> list[GazeEvent]:
    """Group consecutive same-target frames into events.

    ``None`` labels mean nothing was detected. Short ``None`` runs (at most
    ``gap_tolerance`` seconds) between two runs of the same target are absorbed
    into that target; runs shorter than ``min_duration`` are demoted to no
    detection first. Event duration is last-minus-first timestamp plus one frame
    period.
    """
    if gap_tolerance < 0 or min_duration < 0:
        raise InputError("gap_tolerance and min_duration must be non-negative")
    pairs = list(labels)
    if not pairs:
        return []
    ts = np.fromiter((p[0] for p in pairs), float, len(pairs))
    regress = np.flatnonzero(np.diff(ts) < 0)
    if regress.size:
        i = int(regress[0]) + 1
        raise UnorderedInput(f"timestamp goes backwards at frame {i} ({ts[i - 1]} -> {ts[i]})")
    period = _infer_period(ts, frame_period)
    labs = [None if (p[1] is None or p[1] == NO_DETECTION) else p[1] for p in pairs]

    def span(run) -> float:
        return float(ts[run[2]] - ts[run[1]]) + period

    def absorb(runs):
        if gap_tolerance <= 0:
            return runs
        for j in range(1, len(runs) - 1):
            lab = runs[j][0]
            if lab is None and runs[j - 1][0] is not None and runs[j - 1][0] == runs[j + 1][0]:
                if span(runs[j]) <= gap_tolerance + TIME_EPS:
                    runs[j][0] = runs[j - 1][0]
        return _merge(runs)

    runs = absorb(_runs(labs))
    if min_duration > 0:
        for run in runs:
            if run[0] is not None and span(run) < min_duration - TIME_EPS:
                run[0] = None
        runs = absorb(_merge(runs))

    return [
        GazeEvent(person, NO_DETECTION if lab is None else lab, float(ts[a]), span([lab, a, b]))
        for lab, a, b in runs
    ]


def expand(events: Sequence[GazeEvent], frame_rate: float = DEFAULT_FRAME_RATE) -> list[tuple[float, str | None]]:
    """Per-frame labels reproducing ``events`` (inverse of :func:`compress`)."""
    if frame_rate <= 0:
        raise InputError("frame rate must be positive")
    period = 1.0 / frame_rate
    out: list[tuple[float, str | None]] = []
    for ev in sorted(events, key=lambda e: e.start):
        n = int(round(ev.duration * frame_rate))
        if n < 1:
            raise InputError(f"event shorter than one frame: {ev}")
        first = int(round(ev.start * frame_rate))
        lab = None if ev.target == NO_DETECTION else ev.target
        out.extend(((first + k) * period, lab) for k in range(n))
    return out


def check_event_stream(events: Sequence[GazeEvent]) -> None:
    """Raise if one person's events violate ordering, positivity or maximality."""
    by_person: dict[str, list[GazeEvent]] = defaultdict(list)
    for ev in events:
        by_person[ev.person].append(ev)
    for person, evs in by_person.items():
        prev = None
        for ev in evs:
            if not ev.duration > 0:
                raise InputError(f"non-positive duration: {ev}")
            if prev is not None:
                if ev.start < prev.end - TIME_EPS:
                    raise InputError(f"{person}: events overlap or are out of order at t={ev.start}")
                if ev.target == prev.target and abs(ev.start - prev.end) <= TIME_EPS:
                    raise InputError(f"{person}: consecutive events share target {ev.target!r} at t={ev.start}")
            prev = ev


def split_by_person(events: Iterable[GazeEvent]) -> dict[str, list[GazeEvent]]:
    out: dict[str, list[GazeEvent]] = defaultdict(list)
    for ev in events:
        out[ev.person].append(ev)
    return {p: sorted(v, key=lambda e: e.start) for p, v in out.items()}


def merge_adjacent(events: Sequence[GazeEvent]) -> list[GazeEvent]:
    """Re-join abutting events of one person that share a target."""
    out: list[GazeEvent] = []
    for ev in sorted(events, key=lambda e: (e.person, e.start)):
        last = out[-1] if out else None
        if last and last.person == ev.person and last.target == ev.target and abs(last.end - ev.start) <= TIME_EPS:
            out[-1] = last._replace(duration=ev.end - last.start)
        else:
            out.append(ev)
    return out


# -- sessions and weeks -------------------------------------------------------

def week_of(day: int, n_weeks: int = ANALYSIS_WEEKS) -> int:
    """Analysis week of a 1-based study day: days 1-7 -> 1, 8-14 -> 2, ...

    Days past the last full week fold into the final analysis week.
    """
    if day < 1:
        raise InputError(f"study day must be >= 1, got {day}")
    return min(math.ceil(day / 7), n_weeks)


@dataclass
class SessionRecord:
    participant_id: str
    session_index: int
    week_index: int
    events: list[GazeEvent]
    frame_rate: float = DEFAULT_FRAME_RATE
    clinical: object | None = None
    span: tuple[float, float] | None = None

    def __post_init__(self):
        if not 1 <= self.session_index <= 30:
            raise InputError(f"session_index must be in 1..30, got {self.session_index}")
        if not 1 <= self.week_index <= 5:
            raise InputError(f"week_index must be in 1..5, got {self.week_index}")
        self.events = sorted(self.events, key=lambda e: (e.person, e.start))

    def events_for(self, person: str, target: str | None = None) -> list[GazeEvent]:
        return [e for e in self.events if e.person == person and (target is None or e.target == target)]

    def complete_events(self, person: str, target: str | None = None) -> list[GazeEvent]:
        """Like :meth:`events_for` minus events cut by either edge of ``span``.

        Their durations are censored by the recording window, not observed.
        """
        evs = self.events_for(person, target)
        if self.span is None:
            return evs
        lo, hi = self.span
        return [e for e in evs if e.start > lo + TIME_EPS and e.end < hi - TIME_EPS]


@dataclass
class WeeklyAggregate:
    week: int
    n_sessions: int
    mean_instances: float
    mean_duration: float
    var_log_duration: float
    durations: list[float] = field(default_factory=list, repr=False)


def aggregate_weekly(
    sessions: Sequence[SessionRecord],
    person: str,
    target: str,
    weeks: Iterable[int] | None = None,
) -> dict[int, WeeklyAggregate]:
    """Per-week instance counts and durations of ``person`` looking at ``target``.

    Instance counts are averaged over the week's sessions; durations are pooled
    across them. Requested weeks with no sessions raise :class:`EmptyWeek`.
    """
    by_week: dict[int, list[SessionRecord]] = defaultdict(list)
    for s in sessions:
        by_week[s.week_index].append(s)
    wanted = sorted(set(weeks)) if weeks is not None else sorted(by_week)
    empty = [w for w in wanted if not by_week.get(w)]
    if empty:
        raise EmptyWeek(empty)
    out = {}
    for w in wanted:
        counts, durs = [], []
        for s in by_week[w]:
            matched = s.events_for(person, target)
            counts.append(len(matched))
            durs.extend(e.duration for e in matched)
        logs = np.log(durs) if durs else np.array([])
        out[w] = WeeklyAggregate(
            week=w,
            n_sessions=len(by_week[w]),
            mean_instances=float(np.mean(counts)),
            mean_duration=float(np.mean(durs)) if durs else math.nan,
            var_log_duration=float(np.var(logs, ddof=1)) if len(durs) > 1 else math.nan,
            durations=durs,
        )
    return out
