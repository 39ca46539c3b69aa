"""Command-line front end: extract | classify | evaluate | analyze | simulate.

Exit codes: 0 success, 1 input error, 2 internal invariant violation.
"""

from __future__ import annotations

import glob
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Sequence

import click

from . import io as fio
from .analysis import analyze_sessions, render_report
from .annotation import compare_subjects, evaluate_session, format_table, quantize
from .config import RunConfig
from .errors import InputError, InvariantViolation, SchemaError
from .events import GazeEvent, SessionRecord, check_event_stream, week_of
from .geometry import CAREGIVER, CHILD, ROBOT
from .pipeline import KNOWN_PERSONS, classify_events, extract_events, scene_for
from .stats import ParticipantProfile

log = logging.getLogger("triadgaze")

SUFFIXES = (".frames.csv", ".events.csv", ".robot.csv", ".csv", ".tsv", ".txt")


def session_id(path: str | Path) -> str:
    name = Path(path).name
    for suf in SUFFIXES:
        if name.endswith(suf):
            return name[: -len(suf)]
    return Path(path).stem


def expand_inputs(patterns: Sequence[str], default_suffix: str) -> list[str]:
    """Files named directly, matched by glob, or found in a directory."""
    out: list[str] = []
    for pat in patterns:
        p = Path(pat)
        if p.is_dir():
            out.extend(sorted(str(f) for f in p.glob(f"*{default_suffix}")))
        elif any(ch in pat for ch in "*?["):
            out.extend(sorted(glob.glob(pat)))
        elif p.exists():
            out.append(str(p))
        else:
            raise InputError(f"input not found: {pat}")
    seen, unique = set(), []
    for f in out:
        if f not in seen:
            seen.add(f)
            unique.append(f)
    return unique


def _map(fn: Callable, items: list, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(*it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_star, [(fn, it) for it in items]))


def _star(packed):
    fn, args = packed
    return fn(*args)


def threshold_options(f):
    opts = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False), help="YAML run configuration."),
        click.option("--out", "out_dir", type=click.Path(file_okay=False), help="Output directory."),
        click.option("--seed", type=int, help="Random seed."),
        click.option("--jobs", type=int, help="Worker processes for per-session work."),
        click.option("--scene", type=click.Path(dir_okay=False), help="Scene layout YAML."),
        click.option("--cone-half-angle", type=float),
        click.option("--gap-tolerance", type=float),
        click.option("--min-duration", type=float),
        click.option("--min-overlap", type=float),
        click.option("--latency-window", type=float),
        click.option("--iou-threshold", type=float),
        click.option("--frame-rate", type=float),
        click.option("--weeks", "n_weeks", type=int, help="Number of analysis weeks."),
    ]
    for opt in reversed(opts):
        f = opt(f)
    return f


def build_config(config_path, **overrides) -> RunConfig:
    cfg = RunConfig.load(config_path)
    return cfg.with_overrides(**overrides)


def _write_summary(out: Path, name: str, cfg: RunConfig, payload: dict) -> None:
    fio.write_json(out / name, {"config_hash": cfg.config_hash(), **payload})


# -- workers (module level so they pickle) --------------------------------------------

def _extract_one(path: str, cfg_data: dict, out_dir: str) -> dict:
    cfg = RunConfig.from_mapping(cfg_data)
    frames = fio.read_frames(path)
    sid = session_id(path)
    robot_path = Path(path).with_name(f"{sid}.robot.csv")
    robot: list[GazeEvent] = []
    if robot_path.exists():
        robot, _ = fio.read_events(robot_path, persons=(ROBOT,))
    events, scores = extract_events(frames, cfg, robot_events=robot)
    fio.write_events(Path(out_dir) / f"{sid}.events.csv", events, scores)
    return {"session": sid, "events": len(events), "robot_log": robot_path.name if robot else None}


def _classify_one(path: str, cfg_data: dict, out_dir: str) -> dict:
    cfg = RunConfig.from_mapping(cfg_data)
    sid = session_id(path)
    events: list[GazeEvent] = []
    if Path(path).stat().st_size > 0:
        events, _ = fio.read_events(path, persons=KNOWN_PERSONS)
    result = classify_events(events, cfg)
    out = Path(out_dir)
    fio.write_components(out / f"{sid}.components.csv", result.components)
    fio.write_episodes(out / f"{sid}.episodes.csv", result.episodes)
    summary = {"session": sid, **result.summary()}
    fio.write_json(out / f"{sid}.classify.json", {"config_hash": cfg.config_hash(), **summary})
    return summary


# -- commands ---------------------------------------------------------------------------

@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def cli(verbose: bool):
    """Triadic gaze analysis pipeline."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(message)s")


@cli.command()
@click.argument("inputs", nargs=-1)
@threshold_options
def extract(inputs, config_path, **kw):
    """Frame CSVs -> per-session event CSVs.

    A sibling ``<session>.robot.csv`` (robot attention log) is merged in when present.
    """
    cfg = build_config(config_path, **kw)
    files = expand_inputs(list(inputs) or cfg.inputs, ".frames.csv")
    if not files:
        raise InputError("no frame files given")
    scene_for(cfg)  # fail early on a bad scene file
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data = cfg.to_dict()
    results = _map(_extract_one, [(f, data, str(out)) for f in files], cfg.jobs)
    _write_summary(out, "extract.json", cfg, {"sessions": results})
    click.echo(f"extracted {len(results)} session(s) into {out}")


@cli.command("classify")
@click.argument("inputs", nargs=-1)
@threshold_options
def classify_cmd(inputs, config_path, **kw):
    """Event CSVs -> component and joint-attention episode reports."""
    cfg = build_config(config_path, **kw)
    files = expand_inputs(list(inputs) or cfg.inputs, ".events.csv")
    if not files:
        raise InputError("no event files given")
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data = cfg.to_dict()
    results = _map(_classify_one, [(f, data, str(out)) for f in files], cfg.jobs)
    _write_summary(out, "classify.json", cfg, {"sessions": results})
    click.echo(f"classified {len(results)} session(s) into {out}")


@cli.command()
@click.option("--detected", "detected", multiple=True, required=True, help="Detected event CSV (repeatable).")
@click.option("--annotations", "annotations", multiple=True, required=True, help="ELAN tab-separated export (repeatable, paired with --detected in order).")
@threshold_options
def evaluate(detected, annotations, config_path, **kw):
    """Agreement between detected events and human annotations."""
    cfg = build_config(config_path, **kw)
    if len(detected) != len(annotations):
        raise InputError("--detected and --annotations must be given the same number of times")
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sessions, texts = [], []
    pooled: dict[str, list[int]] = {}
    accuracy: dict[str, list[float]] = {}
    for det_path, ann_path in zip(detected, annotations):
        events, scores = fio.read_events(det_path, persons=KNOWN_PERSONS)
        raw = fio.read_elan(ann_path)
        unknown = sorted({r[0] for r in raw} - set(KNOWN_PERSONS))
        if unknown:
            raise SchemaError(f"{ann_path}: unknown tier(s) {unknown}")
        rep = evaluate_session(events, quantize(raw, cfg.quantum), event_scores=scores, min_overlap=cfg.min_overlap,
                               iou_threshold=cfg.iou_threshold, quantum=cfg.quantum)
        sid = session_id(det_path)
        sessions.append({"session": sid, **rep.as_record()})
        texts.append(f"[{sid}]")
        texts.append(format_table(rep.event_level, rep.overall_event, "Event-level detection accuracy (IoU matching)"))
        texts.append(format_table(rep.time_level, rep.overall_time, "Time-level detection accuracy (0.25 s bins)"))
        texts.append("")
        for person, (correct, total) in rep.per_person_correct.items():
            acc = pooled.setdefault(person, [0, 0])
            acc[0] += correct
            acc[1] += total
            if total:
                accuracy.setdefault(person, []).append(correct / total)
    comparison = None
    if all(p in pooled and pooled[p][1] > 0 for p in (CAREGIVER, CHILD)):
        per_session = {p: accuracy[p] for p in (CAREGIVER, CHILD)}
        use_anova = all(len(v) >= 2 for v in per_session.values())
        try:
            comp = compare_subjects(tuple(pooled[CAREGIVER]), tuple(pooled[CHILD]),
                                    per_session if use_anova else None, arcsine=cfg.stats.arcsine,
                                    alternative=cfg.stats.z_alternative)
            comparison = {"z": comp.z.as_record(), "anova": comp.anova.as_record() if comp.anova else None,
                          "correct": {p: pooled[p] for p in (CAREGIVER, CHILD)}}
            texts.append(f"Caregiver vs child detection accuracy: z={comp.z.value:.3f} "
                         f"one-tailed p={comp.z.p_value:.3g}" if cfg.stats.z_alternative != "two-sided"
                         else f"Caregiver vs child detection accuracy: z={comp.z.value:.3f} p={comp.z.p_value:.3g}")
            if comp.anova:
                texts.append(f"ANOVA on per-session accuracy: F={comp.anova.value:.3f} p={comp.anova.p_value:.3g}")
        except InputError as exc:
            texts.append(f"subject comparison skipped: {exc}")
    texts.append(f"config hash: {cfg.config_hash()}")
    fio.atomic_write_text(out / "evaluation.txt", "\n".join(texts) + "\n")
    _write_summary(out, "evaluation.json", cfg, {"sessions": sessions, "subject_comparison": comparison})
    click.echo("\n".join(texts))


def load_sessions(event_files: Sequence[str], sessions_table: str, participants_table: str | None,
                  n_weeks: int) -> list[SessionRecord]:
    table = fio.read_sessions_table(sessions_table)
    profiles = {}
    if participants_table:
        covs = ParticipantProfile.covariates()
        ptab = fio.read_participants_table(participants_table, covs)
        for pid, row in ptab.iterrows():
            profiles[str(pid)] = ParticipantProfile(**{c: float(row[c]) for c in covs})
    by_id = {session_id(f): f for f in event_files}
    records = []
    for row in table.itertuples(index=False):
        sid = str(row.session_id)
        if sid not in by_id:
            raise InputError(f"no event file for session {sid}")
        events, _ = fio.read_events(by_id[sid], persons=KNOWN_PERSONS)
        week = int(row.week) if "week" in table.columns else week_of(int(row.day), n_weeks)
        pid = str(row.participant_id)
        if participants_table and pid not in profiles:
            raise InputError(f"participant {pid} missing from {participants_table}")
        span = (min(e.start for e in events), max(e.end for e in events)) if events else None
        records.append(SessionRecord(pid, int(row.day), week, events, clinical=profiles.get(pid), span=span))
    return records


@cli.command()
@click.argument("inputs", nargs=-1)
@click.option("--sessions", "sessions_table", type=click.Path(dir_okay=False), help="sessions.csv manifest.")
@click.option("--participants", "participants_table", type=click.Path(dir_okay=False), help="participants.csv with clinical scores.")
@click.option("--levene-center", type=click.Choice(["mean", "median"]))
@click.option("--categorical-week", is_flag=True, default=None)
@click.option("--keep-censored", is_flag=True, default=None,
              help="Keep events cut by a session edge in duration statistics.")
@threshold_options
def analyze(inputs, sessions_table, participants_table, levene_center, categorical_week, keep_censored,
            config_path, **kw):
    """Weekly statistics over event CSVs listed in a sessions manifest."""
    cfg = build_config(config_path, sessions_table=sessions_table, participants_table=participants_table,
                       **{"stats.levene_center": levene_center, "stats.categorical_week": categorical_week,
                          "stats.drop_censored": None if keep_censored is None else not keep_censored}, **kw)
    if not cfg.sessions_table:
        raise InputError("analyze needs a sessions table (--sessions)")
    files = expand_inputs(list(inputs) or cfg.inputs, ".events.csv")
    records = load_sessions(files, cfg.sessions_table, cfg.participants_table, cfg.n_weeks)
    report = analyze_sessions(records, options=cfg.stats, seed=cfg.seed)
    out = Path(cfg.out_dir)
    h = cfg.config_hash()
    fio.write_json(out / "results.json", report.as_dict(h))
    text = render_report(report, h)
    fio.atomic_write_text(out / "report.txt", text)
    click.echo(text, nl=False)


@cli.command()
@click.option("--participants", type=int, help="Number of participants.")
@click.option("--sessions", type=int, help="Sessions per participant (distinct days in a 30-day window).")
@click.option("--session-length", type=float, help="Seconds per session.")
@click.option("--noise", "noise_deg", type=float, help="Gaze noise sigma, degrees.")
@click.option("--follow-probability", type=float)
@click.option("--frames/--no-frames", default=None, help="Also render per-frame CSVs.")
@click.option("--drift", multiple=True, help="Weekly drift ROLE.PARAM=DELTA, e.g. caregiver.dwell_log_mean.child=0.3")
@threshold_options
def simulate(participants, sessions, session_length, noise_deg, follow_probability, frames, drift,
             config_path, **kw):
    """Write a synthetic cohort: events, robot logs, optional frames and a manifest."""
    from .sim import AgentParams, CohortPlan, ProtocolScript, default_caregiver

    parsed_drift = {}
    for item in drift:
        try:
            lhs, value = item.split("=", 1)
            role, param = lhs.split(".", 1)
            parsed_drift.setdefault(role, {})[param] = float(value)
        except ValueError:
            raise InputError(f"bad --drift {item!r}; expected ROLE.PARAM=DELTA") from None
    sim_over = {"sim.participants": participants, "sim.sessions": sessions, "sim.session_length": session_length,
                "sim.noise_deg": noise_deg, "sim.follow_probability": follow_probability, "sim.frames": frames}
    if parsed_drift:
        sim_over["sim.drift"] = parsed_drift
    cfg = build_config(config_path, **sim_over, **kw)
    s = cfg.sim
    scene = scene_for(cfg)
    child = AgentParams(follow_probability=s.follow_probability, gaze_noise_sigma=s.noise_deg)
    caregiver = default_caregiver()
    caregiver.gaze_noise_sigma = s.noise_deg
    plan = CohortPlan(s.participants, s.weeks, seed=cfg.seed, sessions_per_participant=s.sessions,
                      script=ProtocolScript(session_length=s.session_length, frame_rate=s.frame_rate),
                      child=child, caregiver=caregiver, drift=s.drift)
    out = Path(cfg.out_dir)
    (out / "events").mkdir(parents=True, exist_ok=True)
    rows = []
    for cs in plan.iter_sessions(render=s.frames, scene=scene, min_overlap=cfg.min_overlap):
        rec = cs.record
        rows.append((cs.session_id, rec.participant_id, cs.day, rec.week_index))
        fio.write_events(out / "events" / f"{cs.session_id}.events.csv", rec.events)
        if cs.result is not None:
            fdir = out / "frames"
            fio.write_frames(fdir / f"{cs.session_id}.frames.csv", cs.result.frames_table())
            fio.write_events(fdir / f"{cs.session_id}.robot.csv", cs.result.robot_events)
            tdir = out / "truth"
            fio.write_components(tdir / f"{cs.session_id}.components.csv", cs.result.truth.components)
            fio.write_episodes(tdir / f"{cs.session_id}.episodes.csv", cs.result.truth.episodes)
    fio.write_csv(out / "sessions.csv", ["session_id", "participant_id", "day", "week"], rows)
    covs = ParticipantProfile.covariates()
    fio.write_csv(out / "participants.csv", ["participant_id", *covs],
                  ([pid, *[prof.as_dict()[c] for c in covs]] for _, pid, prof, _, _ in plan.participants))
    fio.write_json(out / "manifest.json", {"config_hash": cfg.config_hash(), **plan.manifest})
    click.echo(f"simulated {len(rows)} session(s) for {s.participants} participant(s) into {out}")


def main(argv: Sequence[str] | None = None) -> int:
    """Entry point returning the process exit code."""
    try:
        cli.main(args=list(argv) if argv is not None else None, prog_name="triadgaze", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.UsageError as exc:
        exc.show()
        return 1
    except InvariantViolation as exc:
        click.echo(f"internal error: {exc}", err=True)
        return 2
    except InputError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    return 0


def run() -> None:
    sys.exit(main())
