"""Weekly statistics battery over a set of sessions."""

from __future__ import annotations

import hashlib
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import StatsOptions
from .errors import DegenerateInput, InputError, RankDeficient
from .events import NO_DETECTION, SessionRecord, aggregate_weekly
from .geometry import CAREGIVER, CHILD
from .stats import (
    ParticipantProfile,
    TestResult,
    anova_oneway,
    levene,
    ols_regress,
    paired_t,
    shapiro_wilk,
    tukey_hsd,
)


def inputs_hash(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        arr = np.ascontiguousarray(np.asarray(a, dtype=float))
        h.update(str(arr.shape).encode())
        h.update(arr.tobytes())
    return h.hexdigest()[:16]


@dataclass
class AnalysisReport:
    records: list[dict] = field(default_factory=list)
    weekly: list[dict] = field(default_factory=list)
    notices: list[str] = field(default_factory=list)

    def add_test(self, name: str, result: TestResult, inputs: str, **context) -> None:
        rec = {"name": name, "inputs_hash": inputs, **context, **result.as_record()}
        if "n" in result.detail:
            rec["n"] = result.detail["n"]
        self.records.append(rec)

    def find(self, name: str, **context) -> list[dict]:
        return [r for r in self.records if r["name"] == name and all(r.get(k) == v for k, v in context.items())]

    def as_dict(self, config_hash: str | None = None) -> dict:
        return {"config_hash": config_hash, "records": self.records, "weekly": self.weekly, "notices": self.notices}


def _fmt_p(p: float) -> str:
    if math.isnan(p):
        return "n/a"
    return "<0.001" if p < 0.001 else f"{p:.3f}"


def _fmt_df(df) -> str:
    if df is None:
        return "-"
    if isinstance(df, (list, tuple)):
        return ",".join(f"{v:g}" for v in df)
    return f"{df:g}"


def render_report(report: AnalysisReport, config_hash: str | None = None) -> str:
    lines = ["Gaze statistics report"]
    if config_hash:
        lines.append(f"config hash: {config_hash}")
    lines.append("")
    lines.append("Weekly aggregates (instances per session, mean duration s, var of log duration)")
    for w in report.weekly:
        lines.append(
            f"  {w['person']:>9} -> {w['target']:<10} week {w['week']}: sessions={w['n_sessions']:<3} "
            f"instances={w['mean_instances']:.2f} duration={w['mean_duration']:.3f} var_log={w['var_log_duration']:.4f}"
        )
    sections = [
        ("Weekly contrasts (paired t, first vs last week)", ("paired_t_instances", "paired_t_log_duration")),
        ("Week effects across all weeks", ("anova_log_duration_by_week", "levene_log_duration_by_week")),
        ("Regressions", ("ols_log_duration", "ols_instances")),
        ("Post-hoc comparisons across targets (Tukey HSD on log duration)", ("tukey_log_duration",)),
        ("Normality of log durations", ("shapiro_log_duration",)),
    ]
    for title, names in sections:
        lines.append("")
        lines.append(title)
        for r in report.records:
            if r["name"] not in names:
                continue
            label = f"{r.get('person', '')} -> {r.get('target', '')}"
            if "pair" in r:
                label = f"{r['person']}: {r['pair'][0]} vs {r['pair'][1]}"
            extra = ""
            if r["name"].startswith("ols"):
                wk = r["coefficients"].get("week")
                if wk:
                    extra = f"  beta_week={wk['beta']:.4f} (p={_fmt_p(wk['p'])})"
                extra += f"  R2={r['r_squared']:.3f} n={r['n']}"
            lines.append(
                f"  {r['name']:<30} {label:<32} {r['statistic']}={r['value']:.4f} df={_fmt_df(r['df'])} "
                f"p={_fmt_p(r['p'])}{extra}"
            )
    if report.notices:
        lines.append("")
        lines.append("Notices")
        lines.extend(f"  - {n}" for n in report.notices)
    return "\n".join(lines) + "\n"


def _timed(s: SessionRecord, person: str, target: str, drop_censored: bool):
    return s.complete_events(person, target) if drop_censored else s.events_for(person, target)


def _participant_means(sessions: Sequence[SessionRecord], person: str, target: str, week: int,
                       drop_censored: bool):
    counts: dict[str, list[int]] = defaultdict(list)
    logs: dict[str, list[float]] = defaultdict(list)
    for s in sessions:
        if s.week_index != week:
            continue
        counts[s.participant_id].append(len(s.events_for(person, target)))
        logs[s.participant_id].extend(math.log(e.duration) for e in _timed(s, person, target, drop_censored))
    inst = {p: float(np.mean(v)) for p, v in counts.items()}
    dur = {p: float(np.mean(v)) for p, v in logs.items() if v}
    return inst, dur


def _design(rows: list[tuple[SessionRecord, int]], covariates: list[str], categorical_week: bool, weeks: list[int]):
    """Predictor columns for one row per (session, repeat)."""
    cols: dict[str, list[float]] = {}
    wk = [float(s.week_index) for s, _ in rows]
    if categorical_week:
        for w in weeks[1:]:
            cols[f"week_{w}"] = [1.0 if v == w else 0.0 for v in wk]
    else:
        cols["week"] = wk
    for c in covariates:
        cols[c] = [float(getattr(s.clinical, c)) for s, _ in rows]
    return cols


def _fit(report, name, cols, y, clusters, opts: StatsOptions, context):
    try:
        res = ols_regress(cols, y, standardize=opts.standardize, clusters=clusters)
    except RankDeficient as exc:
        covs = [c for c in cols if not c.startswith("week")]
        if not covs:
            report.notices.append(f"{name} {context}: {exc}")
            return None
        report.notices.append(f"{name} {context}: {exc}; refit with week only")
        cols = {k: v for k, v in cols.items() if k.startswith("week")}
        try:
            res = ols_regress(cols, y, standardize=opts.standardize, clusters=clusters)
        except (RankDeficient, DegenerateInput) as exc2:
            report.notices.append(f"{name} {context}: {exc2}")
            return None
    except DegenerateInput as exc:
        report.notices.append(f"{name} {context}: {exc}")
        return None
    rec = {
        "name": name,
        "inputs_hash": inputs_hash(y, *cols.values()),
        **context,
        "statistic": "F",
        "value": res.f_statistic,
        "df": [res.df_model, res.df_resid],
        "p": res.f_p_value,
        "n": res.n,
        "r_squared": res.r_squared,
        "standardized": res.standardized,
        "coefficients": {
            k: {"beta": c.beta, "se": c.std_error, "t": c.t, "p": c.p_value, "ci": [c.ci_low, c.ci_high]}
            for k, c in res.coefficients.items()
        },
        "notes": list(res.notes),
    }
    report.records.append(rec)
    return res


def analyze_sessions(
    sessions: Sequence[SessionRecord],
    *,
    persons: Sequence[str] = (CHILD, CAREGIVER),
    targets: Sequence[str] | None = None,
    options: StatsOptions | None = None,
    seed: int = 0,
) -> AnalysisReport:
    """Per-target weekly aggregates, week contrasts, regressions, Tukey, Levene and normality.

    Regressions use one row per gaze event (log duration) or per session
    (instance count) with week as an ordinal predictor plus every clinical
    covariate when all sessions carry a profile. With ``drop_censored`` the
    duration statistics skip events cut by a session edge; counts keep them.
    """
    if not sessions:
        raise InputError("no sessions to analyze")
    opts = options or StatsOptions()
    report = AnalysisReport()
    weeks = sorted({s.week_index for s in sessions})
    covariates = ParticipantProfile.covariates() if all(s.clinical is not None for s in sessions) else []
    if not covariates:
        report.notices.append("clinical covariates unavailable for some sessions; regressions use week only")
    if len(weeks) < 2:
        report.notices.append(f"only week {weeks[0]} present: weekly contrasts and week effects skipped")
    rng = np.random.default_rng(seed)
    ordered = sorted(sessions, key=lambda s: (s.participant_id, s.session_index))

    for person in persons:
        present = sorted({e.target for s in ordered for e in s.events
                          if e.person == person and e.target != NO_DETECTION})
        wanted = [t for t in (targets or present) if t in present]
        per_target_logs: dict[str, np.ndarray] = {}
        for target in wanted:
            ctx = {"person": person, "target": target}
            agg = aggregate_weekly(ordered, person, target, weeks)
            for w, a in agg.items():
                report.weekly.append({**ctx, "week": w, "n_sessions": a.n_sessions, "mean_instances": a.mean_instances,
                                      "mean_duration": a.mean_duration, "var_log_duration": a.var_log_duration})

            rows = [(s, e) for s in ordered for e in _timed(s, person, target, opts.drop_censored)]
            logs = np.array([math.log(e.duration) for _, e in rows])
            per_target_logs[target] = logs

            if len(weeks) >= 2:
                first, last = weeks[0], weeks[-1]
                inst_a, dur_a = _participant_means(ordered, person, target, first, opts.drop_censored)
                inst_b, dur_b = _participant_means(ordered, person, target, last, opts.drop_censored)
                for name, (xa, xb) in (("paired_t_instances", (inst_a, inst_b)),
                                       ("paired_t_log_duration", (dur_a, dur_b))):
                    common = sorted(set(xa) & set(xb))
                    a = [xa[p] for p in common]
                    b = [xb[p] for p in common]
                    try:
                        # last minus first, so a positive t means an increase
                        res = paired_t(b, a)
                        report.add_test(name, res, inputs_hash(a, b), **ctx, weeks=[first, last])
                    except DegenerateInput as exc:
                        report.notices.append(f"{name} {person}->{target}: {exc}")
                groups = [logs[[r[0].week_index == w for r in rows]] for w in weeks] if rows else []
                groups = [g for g in groups if g.size >= 2]
                if len(groups) >= 2:
                    for name, fn in (("anova_log_duration_by_week", anova_oneway),
                                     ("levene_log_duration_by_week", lambda g: levene(g, opts.levene_center))):
                        try:
                            report.add_test(name, fn(groups), inputs_hash(*groups), **ctx)
                        except DegenerateInput as exc:
                            report.notices.append(f"{name} {person}->{target}: {exc}")

            if len(rows) >= 3:
                cols = _design([(s, 0) for s, _ in rows], covariates, opts.categorical_week and len(weeks) > 1, weeks)
                if len(weeks) < 2:
                    cols = {k: v for k, v in cols.items() if not k.startswith("week")}
                if cols:
                    _fit(report, "ols_log_duration", cols, logs, [s.participant_id for s, _ in rows], opts, ctx)
            counts = [float(len(s.events_for(person, target))) for s in ordered]
            cols = _design([(s, 0) for s in ordered], covariates, opts.categorical_week and len(weeks) > 1, weeks)
            if len(weeks) < 2:
                cols = {k: v for k, v in cols.items() if not k.startswith("week")}
            if cols and len(ordered) >= 3:
                _fit(report, "ols_instances", cols, counts, [s.participant_id for s in ordered], opts, ctx)

            if logs.size >= 3:
                sample = logs
                if logs.size > opts.shapiro_max_n:
                    sample = np.sort(rng.choice(logs, opts.shapiro_max_n, replace=False))
                    report.notices.append(
                        f"shapiro {person}->{target}: random subsample of {opts.shapiro_max_n} of {logs.size} durations"
                    )
                try:
                    report.add_test("shapiro_log_duration", shapiro_wilk(sample), inputs_hash(sample), **ctx)
                except DegenerateInput as exc:
                    report.notices.append(f"shapiro {person}->{target}: {exc}")

        groups = {t: g for t, g in per_target_logs.items() if g.size >= 2}
        if len(groups) >= 2:
            labels = sorted(groups)
            try:
                res = tukey_hsd([groups[t] for t in labels], labels)
                h = inputs_hash(*[groups[t] for t in labels])
                for pair, r in res.items():
                    report.add_test("tukey_log_duration", r, h, person=person, pair=list(pair),
                                    mean_diff=r.detail["mean_diff"])
            except DegenerateInput as exc:
                report.notices.append(f"tukey {person}: {exc}")
    return report
