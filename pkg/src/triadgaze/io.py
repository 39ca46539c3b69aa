"""File formats: frame CSVs, event CSVs, ELAN exports and report files."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

from .components import ComponentEvent, JointAttentionEpisode
from .errors import AmbiguousRoles, InputError, SchemaError, UnorderedInput
from .events import GazeEvent, check_event_stream
from .geometry import CAREGIVER, CHILD, HUMAN_ROLES, FrameObservation, RolePolicy, assign_roles

FRAME_COLUMNS = [
    "timestamp_s", "face_index", "gaze_dir_x", "gaze_dir_y", "gaze_dir_z",
    "head_x", "head_y", "head_z", "confidence", "valid",
]
EVENT_COLUMNS = ["person", "target", "start_s", "duration_s"]
ELAN_COLUMNS = ["tier", "annotation", "start_ms", "end_ms"]
NORM_TOL = 1e-6


def _fmt(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write via a temp file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    atomic_write_text(path, buf.getvalue())


def write_json(path: str | Path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True, default=_json_default, allow_nan=True) + "\n")


def _json_default(o):
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (set, frozenset, tuple)):
        return list(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _read_table(path: str | Path, required: Sequence[str], sep: str = ",") -> pd.DataFrame:
    try:
        df = pd.read_csv(path, sep=sep, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise SchemaError(f"{path}: empty file, expected header {', '.join(required)}") from None
    df.columns = [c.strip() for c in df.columns]
    missing = [c for c in required if c not in df.columns]
    if missing:
        raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}")
    return df


def _numeric(df: pd.DataFrame, col: str, path) -> np.ndarray:
    vals = pd.to_numeric(df[col].str.strip(), errors="coerce")
    bad = vals.isna() & ~df[col].str.strip().str.lower().isin(["nan", ""])
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        raise SchemaError(f"{path}: column {col} row {row + 2} is not numeric: {df[col].iloc[row]!r}")
    return vals.to_numpy(dtype=float)


# -- frames ----------------------------------------------------------------------

def read_frames(path: str | Path) -> pd.DataFrame:
    """Per-frame gaze/head-pose table with validated types and ordering."""
    df = _read_table(path, FRAME_COLUMNS)
    out = pd.DataFrame({c: _numeric(df, c, path) for c in FRAME_COLUMNS})
    if out["timestamp_s"].isna().any():
        raise SchemaError(f"{path}: missing timestamps")
    if out["face_index"].isna().any() or (out["face_index"] % 1 != 0).any():
        raise SchemaError(f"{path}: face_index must be an integer")
    out["face_index"] = out["face_index"].astype(int)
    valid_raw = df["valid"].str.strip().str.lower()
    out["valid"] = valid_raw.isin(["1", "true", "1.0"])
    if not valid_raw.isin(["0", "1", "true", "false", "0.0", "1.0"]).all():
        raise SchemaError(f"{path}: column valid must be 0/1 or true/false")
    conf = out["confidence"].to_numpy()
    if np.any((conf < 0) | (conf > 1)):
        raise SchemaError(f"{path}: confidence outside [0, 1]")
    ts = out["timestamp_s"].to_numpy()
    back = np.flatnonzero(np.diff(ts) < 0)
    if back.size:
        raise UnorderedInput(f"{path}: timestamp goes backwards at data row {int(back[0]) + 3}")
    g = out[["gaze_dir_x", "gaze_dir_y", "gaze_dir_z"]].to_numpy()
    norms = np.linalg.norm(g, axis=1)
    bad = out["valid"].to_numpy() & ~(np.abs(norms - 1.0) <= NORM_TOL)
    if bad.any():
        raise SchemaError(f"{path}: valid frame at data row {int(np.flatnonzero(bad)[0]) + 2} has non-unit gaze direction")
    return out


def write_frames(path: str | Path, table: pd.DataFrame) -> None:
    rows = table[FRAME_COLUMNS].itertuples(index=False, name=None)
    write_csv(path, FRAME_COLUMNS, (
        (float(t), int(f), float(x), float(y), float(z), float(hx), float(hy), float(hz), float(c), int(v))
        for t, f, x, y, z, hx, hy, hz, c, v in rows
    ))


def role_streams(
    frames: pd.DataFrame,
    policy: RolePolicy | None = None,
) -> dict[str, tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]]:
    """Split a frame table into aligned per-role arrays on the common clock.

    Returns role -> (timestamps, valid, gaze directions, head positions). A role
    with no face at a timestamp gets an invalid frame there.
    """
    policy = policy or RolePolicy()
    ts_all = frames["timestamp_s"].to_numpy()
    clock, inverse = np.unique(ts_all, return_inverse=True)
    n = clock.size
    gaze_all = frames[["gaze_dir_x", "gaze_dir_y", "gaze_dir_z"]].to_numpy(dtype=float)
    head_all = frames[["head_x", "head_y", "head_z"]].to_numpy(dtype=float)
    valid_all = frames["valid"].to_numpy(dtype=bool)
    face_all = frames["face_index"].to_numpy()
    role_of_row = np.full(len(frames), "", dtype=object)

    counts = np.bincount(inverse, minlength=n)
    if policy.face_map:
        for i, f in enumerate(face_all):
            role_of_row[i] = policy.face_map.get(int(f), "other")
        pairs = [(int(inverse[i]), role_of_row[i]) for i in range(len(frames)) if role_of_row[i] in HUMAN_ROLES]
        if len(set(pairs)) != len(pairs):
            raise AmbiguousRoles("face map assigns one role to two faces in a frame")
    else:
        order = np.argsort(inverse, kind="stable")
        starts = np.concatenate([[0], np.cumsum(counts)])
        slow = np.ones(n, dtype=bool)
        if policy.mode == "horizontal":
            # two faces with distinct finite x: rightmost is the child
            two = np.flatnonzero(counts == 2)
            a, b = order[starts[two]], order[starts[two] + 1]
            xa, xb = head_all[a, 0], head_all[b, 0]
            ok = np.isfinite(xa) & np.isfinite(xb) & (xa != xb)
            a, b, xa, xb = a[ok], b[ok], xa[ok], xb[ok]
            right = np.where(xa > xb, a, b)
            left = np.where(xa > xb, b, a)
            role_of_row[right] = CHILD
            role_of_row[left] = CAREGIVER
            slow[two[ok]] = False
        for k in np.flatnonzero(slow):
            rows = order[starts[k]:starts[k + 1]]
            faces = [
                FrameObservation(float(clock[k]), int(face_all[r]), tuple(gaze_all[r]), tuple(head_all[r]),
                                 float(frames["confidence"].iat[r]), bool(valid_all[r]))
                for r in rows
            ]
            assigned = assign_roles(faces, policy)
            for role, obs in assigned.items():
                for r, f in zip(rows, faces):
                    if f is obs:
                        role_of_row[r] = role

    out = {}
    for role in HUMAN_ROLES:
        rows = np.flatnonzero(role_of_row == role)
        valid = np.zeros(n, dtype=bool)
        gaze = np.full((n, 3), np.nan)
        head = np.full((n, 3), np.nan)
        idx = inverse[rows]
        valid[idx] = valid_all[rows]
        gaze[idx] = gaze_all[rows]
        head[idx] = head_all[rows]
        if rows.size:
            out[role] = (clock, valid, gaze, head)
    return out


# -- events ------------------------------------------------------------------------

def write_events(path: str | Path, events: Sequence[GazeEvent], scores: Mapping[GazeEvent, float] | None = None) -> None:
    """Event CSV; an optional ``score_deg`` column carries the mean cone margin."""
    ordered = sorted(events, key=lambda e: (e.person, e.start))
    if scores is None:
        write_csv(path, EVENT_COLUMNS, ((e.person, e.target, e.start, e.duration) for e in ordered))
    else:
        write_csv(path, EVENT_COLUMNS + ["score_deg"],
                  ((e.person, e.target, e.start, e.duration, float(scores.get(e, math.nan))) for e in ordered))


def read_events(path: str | Path, persons: Sequence[str] | None = None) -> tuple[list[GazeEvent], dict[GazeEvent, float]]:
    """Events and their scores (if a ``score_deg`` column is present)."""
    df = _read_table(path, EVENT_COLUMNS)
    if df.empty:
        return [], {}
    start = _numeric(df, "start_s", path)
    dur = _numeric(df, "duration_s", path)
    if np.isnan(start).any() or np.isnan(dur).any():
        raise SchemaError(f"{path}: start_s and duration_s must be present on every row")
    people = df["person"].str.strip().tolist()
    targets = df["target"].str.strip().tolist()
    if persons is not None:
        unknown = sorted(set(people) - set(persons))
        if unknown:
            raise SchemaError(f"{path}: unknown person label(s) {unknown}; expected one of {sorted(persons)}")
    events = [GazeEvent(p, t, float(s), float(d)) for p, t, s, d in zip(people, targets, start, dur)]
    events.sort(key=lambda e: (e.person, e.start))
    check_event_stream(events)
    scores = {}
    if "score_deg" in df.columns:
        sc = _numeric(df, "score_deg", path)
        scores = {GazeEvent(p, t, float(s), float(d)): float(v) for p, t, s, d, v in zip(people, targets, start, dur, sc)}
    return events, scores


def write_components(path: str | Path, components: Sequence[ComponentEvent]) -> None:
    write_csv(path, ["kind", "participants", "target", "start_s", "duration_s"],
              ((c.kind, "+".join(c.participants), c.target or "", c.start, c.duration) for c in components))


def read_components(path: str | Path) -> list[ComponentEvent]:
    df = _read_table(path, ["kind", "participants", "target", "start_s", "duration_s"])
    if df.empty:
        return []
    start = _numeric(df, "start_s", path)
    dur = _numeric(df, "duration_s", path)
    out = []
    for k, row in enumerate(df.itertuples(index=False)):
        target = row.target if isinstance(row.target, str) and row.target else None
        out.append(ComponentEvent(float(start[k]), float(dur[k]), str(row.kind), tuple(str(row.participants).split("+")),
                                  target))
    return out


def write_episodes(path: str | Path, episodes: Sequence[JointAttentionEpisode]) -> None:
    write_csv(path, ["leader", "follower", "target", "mutual_start_s", "mutual_duration_s", "shift_s",
                     "follow_latency_s", "shared_start_s", "shared_duration_s"],
              ((e.leader, e.follower, e.target, e.mutual_interval[0], e.mutual_interval[1], e.shift_time,
                e.follow_latency, e.shared_interval[0], e.shared_interval[1]) for e in episodes))


# -- annotations -----------------------------------------------------------------------

def read_elan(path: str | Path) -> list[tuple[str, str, float, float]]:
    """Tab-separated ELAN export (tier, annotation, start_ms, end_ms) in seconds.

    The header row is optional; extra columns are ignored.
    """
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh, delimiter="\t"), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 4:
                raise SchemaError(f"{path}:{lineno}: expected 4 tab-separated fields ({', '.join(ELAN_COLUMNS)})")
            tier, annotation, start, end = (c.strip() for c in row[:4])
            if lineno == 1 and [tier, annotation, start, end] == ELAN_COLUMNS:
                continue
            try:
                s_ms, e_ms = float(start), float(end)
            except ValueError:
                raise SchemaError(f"{path}:{lineno}: start_ms/end_ms must be numeric") from None
            rows.append((tier, annotation, s_ms / 1000.0, e_ms / 1000.0))
    return rows


def write_elan(path: str | Path, rows: Iterable[tuple[str, str, float, float]], header: bool = True) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, delimiter="\t", lineterminator="\n")
    if header:
        w.writerow(ELAN_COLUMNS)
    for tier, ann, start, end in rows:
        w.writerow([tier, ann, int(round(start * 1000)), int(round(end * 1000))])
    atomic_write_text(path, buf.getvalue())


# -- cohort tables ---------------------------------------------------------------------

def read_sessions_table(path: str | Path) -> pd.DataFrame:
    """Session manifest: session_id, participant_id, day (and optionally week)."""
    df = _read_table(path, ["session_id", "participant_id", "day"])
    df["day"] = _numeric(df, "day", path).astype(int)
    if "week" in df.columns:
        df["week"] = _numeric(df, "week", path).astype(int)
    if df["session_id"].duplicated().any():
        raise SchemaError(f"{path}: duplicate session_id")
    return df


def read_participants_table(path: str | Path, covariates: Sequence[str]) -> pd.DataFrame:
    df = _read_table(path, ["participant_id", *covariates])
    for c in covariates:
        df[c] = _numeric(df, c, path)
    return df.set_index("participant_id")
