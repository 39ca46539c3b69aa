"""Agreement between detected gaze and human annotations."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, NamedTuple, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.stats import rankdata

from .components import INDIVIDUAL, KINDS, MUTUAL, SHARED, ComponentEvent, classify
from .errors import ClockMismatch, InputError
from .events import NO_DETECTION, TIME_EPS, GazeEvent
from .stats import TestResult, anova_oneway, two_proportion_z

QUANTUM = 0.25
DEFAULT_IOU = 0.5


class AnnotationEvent(NamedTuple):
    person: str
    target: str
    start: float
    end: float


def quantize(raw: Iterable[tuple[str, str, float, float]], quantum: float = QUANTUM) -> list[AnnotationEvent]:
    """Widen annotations outward to the quantum grid (start down, end up)."""
    out = []
    for person, target, start, end in raw:
        if not start < end:
            raise InputError(f"annotation for {person} has start >= end ({start}, {end})")
        lo = math.floor(round(start / quantum, 9)) * quantum
        hi = math.ceil(round(end / quantum, 9)) * quantum
        out.append(AnnotationEvent(person, target, lo, hi))
    return out


def annotations_to_events(annotations: Sequence[AnnotationEvent]) -> list[GazeEvent]:
    """Annotations as gaze events; overlapping spans of one person are clipped."""
    out = []
    last_end: dict[str, float] = {}
    for a in sorted(annotations, key=lambda a: (a.person, a.start)):
        start = max(a.start, last_end.get(a.person, -math.inf))
        if a.end - start <= TIME_EPS:
            continue
        prev = out[-1] if out and out[-1].person == a.person else None
        if prev and prev.target == a.target and abs(prev.end - start) <= TIME_EPS:
            out[-1] = prev._replace(duration=a.end - prev.start)
        else:
            out.append(GazeEvent(a.person, a.target, start, a.end - start))
        last_end[a.person] = a.end
    return out


# -- matching ------------------------------------------------------------------

class Span(NamedTuple):
    key: Hashable
    start: float
    end: float


def iou(a: Span, b: Span) -> float:
    inter = min(a.end, b.end) - max(a.start, b.start)
    if inter <= 0:
        return 0.0
    union = max(a.end, b.end) - min(a.start, b.start)
    return inter / union


@dataclass
class Alignment:
    matches: list[tuple[int, int, float]]
    false_positives: list[int]
    false_negatives: list[int]
    n_detected: int
    n_annotated: int

    @property
    def tp(self) -> int:
        return len(self.matches)

    @property
    def fp(self) -> int:
        return len(self.false_positives)

    @property
    def fn(self) -> int:
        return len(self.false_negatives)


def align(detected: Sequence[Span], annotated: Sequence[Span], iou_threshold: float = DEFAULT_IOU) -> Alignment:
    """One-to-one matching of same-key spans with IoU >= threshold.

    Maximizes the number of matches, then their total IoU.
    """
    if detected and annotated:
        d_lo, d_hi = min(s.start for s in detected), max(s.end for s in detected)
        a_lo, a_hi = min(s.start for s in annotated), max(s.end for s in annotated)
        if d_hi <= a_lo or a_hi <= d_lo:
            raise ClockMismatch(
                f"detected span [{d_lo:.2f}, {d_hi:.2f}] and annotated span [{a_lo:.2f}, {a_hi:.2f}] are disjoint"
            )
    by_key: dict[Hashable, list[int]] = defaultdict(list)
    for j, s in enumerate(annotated):
        by_key[s.key].append(j)
    weight = np.zeros((len(detected), len(annotated)))
    for i, d in enumerate(detected):
        for j in by_key.get(d.key, ()):
            v = iou(d, annotated[j])
            if v >= iou_threshold - 1e-12 and v > 0:
                # the constant makes match count dominate total IoU
                weight[i, j] = 1.0 + len(detected) + v
    used_d, used_a, matches = set(), set(), []
    if weight.size:
        for i, j in zip(*linear_sum_assignment(weight, maximize=True)):
            if weight[i, j] > 0:
                used_d.add(int(i))
                used_a.add(int(j))
                matches.append((int(i), int(j), weight[i, j] - 1.0 - len(detected)))
    matches.sort()
    return Alignment(
        matches=matches,
        false_positives=[i for i in range(len(detected)) if i not in used_d],
        false_negatives=[j for j in range(len(annotated)) if j not in used_a],
        n_detected=len(detected),
        n_annotated=len(annotated),
    )


def component_span(c: ComponentEvent) -> Span:
    return Span((c.kind, c.participants, c.target), c.start, c.end)


def event_span(e: GazeEvent) -> Span:
    return Span((e.person, e.target), e.start, e.end)


def component_f1(detected: Sequence[ComponentEvent], reference: Sequence[ComponentEvent],
                 iou_threshold: float = DEFAULT_IOU) -> float:
    """Event-level F1 of detected components against reference components.

    Components match one-to-one within the same (kind, participants, target)
    key at IoU >= ``iou_threshold``; counts are pooled over every kind.
    """
    d = [component_span(c) for c in detected]
    r = [component_span(c) for c in reference]
    if not d and not r:
        return 1.0
    if not d or not r:
        return 0.0
    al = align(d, r, iou_threshold)
    return 2 * al.tp / (2 * al.tp + al.fp + al.fn)


# -- metrics -------------------------------------------------------------------

def _ratio(num: float, den: float) -> float:
    return num / den if den > 0 else math.nan


def auc_mann_whitney(pos_scores: Sequence[float], neg_scores: Sequence[float]) -> float:
    """P(score_pos > score_neg) + 0.5 P(tie), from midranks."""
    pos = np.asarray(pos_scores, dtype=float)
    neg = np.asarray(neg_scores, dtype=float)
    if pos.size == 0 or neg.size == 0:
        return math.nan
    ranks = rankdata(np.concatenate([pos, neg]))
    u = ranks[: pos.size].sum() - pos.size * (pos.size + 1) / 2.0
    return float(u / (pos.size * neg.size))


def auc_trapezoid(pos_scores: Sequence[float], neg_scores: Sequence[float]) -> float:
    """Area under the ROC curve traced by sweeping a threshold over the scores."""
    pos = np.asarray(pos_scores, dtype=float)
    neg = np.asarray(neg_scores, dtype=float)
    if pos.size == 0 or neg.size == 0:
        return math.nan
    thresholds = np.unique(np.concatenate([pos, neg]))[::-1]
    tpr = [0.0] + [float(np.mean(pos >= t)) for t in thresholds]
    fpr = [0.0] + [float(np.mean(neg >= t)) for t in thresholds]
    area = 0.0
    for k in range(1, len(tpr)):
        area += (fpr[k] - fpr[k - 1]) * (tpr[k] + tpr[k - 1]) / 2.0
    return area


@dataclass
class ConfusionMetrics:
    n: int
    tp: int
    fp: int
    fn: int
    tn: int
    sensitivity: float
    specificity: float
    ppv: float
    npv: float
    f1: float
    auc: float = math.nan

    @classmethod
    def from_counts(cls, tp, fp, fn, tn, n=None, pos_scores=(), neg_scores=()) -> "ConfusionMetrics":
        sens = _ratio(tp, tp + fn)
        spec = _ratio(tn, tn + fp)
        ppv = _ratio(tp, tp + fp)
        npv = _ratio(tn, tn + fn)
        f1 = _ratio(2 * ppv * sens, ppv + sens) if not (math.isnan(ppv) or math.isnan(sens)) else math.nan
        return cls(
            n=tp + fp if n is None else n,
            tp=tp, fp=fp, fn=fn, tn=tn,
            sensitivity=sens, specificity=spec, ppv=ppv, npv=npv, f1=f1,
            auc=auc_mann_whitney(pos_scores, neg_scores),
        )

    def as_record(self) -> dict:
        return {k: getattr(self, k) for k in ("n", "tp", "fp", "fn", "tn", "sensitivity", "specificity", "ppv", "npv", "auc", "f1")}


RATE_FIELDS = ("sensitivity", "specificity", "ppv", "npv", "auc", "f1")


def weighted_average(rows: Sequence[ConfusionMetrics]) -> ConfusionMetrics:
    """Row-count weighted mean of each rate (NaN rates skipped), counts summed."""
    tp = sum(r.tp for r in rows)
    fp = sum(r.fp for r in rows)
    fn = sum(r.fn for r in rows)
    tn = sum(r.tn for r in rows)
    n = sum(r.n for r in rows)
    rates = {}
    for name in RATE_FIELDS:
        vals = [(getattr(r, name), r.n) for r in rows if not math.isnan(getattr(r, name)) and r.n > 0]
        total = sum(w for _, w in vals)
        rates[name] = sum(v * w for v, w in vals) / total if total > 0 else math.nan
    return ConfusionMetrics(n=n, tp=tp, fp=fp, fn=fn, tn=tn, **rates)


def bin_keys(spans: Sequence[Span], t0: float, n_bins: int, quantum: float = QUANTUM) -> list[set]:
    """Keys active at each bin's midpoint."""
    out: list[set] = [set() for _ in range(n_bins)]
    for s in spans:
        first = max(0, int(math.ceil((s.start - t0) / quantum - 0.5 - 1e-9)))
        last = min(n_bins - 1, int(math.floor((s.end - t0) / quantum - 0.5 - 1e-9)))
        for b in range(first, last + 1):
            out[b].add(s.key)
    return out


@dataclass
class BinTally:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0
    n_bins: int = 0


def bin_tally(detected: Sequence[Span], annotated: Sequence[Span], t0: float, t1: float, quantum: float = QUANTUM) -> BinTally:
    n_bins = max(0, int(math.ceil((t1 - t0) / quantum - 1e-9)))
    det = bin_keys(detected, t0, n_bins, quantum)
    ann = bin_keys(annotated, t0, n_bins, quantum)
    tally = BinTally(n_bins=n_bins)
    for d, a in zip(det, ann):
        tally.tp += len(d & a)
        tally.fp += len(d - a)
        tally.fn += len(a - d)
        if not d and not a:
            tally.tn += 1
    return tally


# -- session evaluation ----------------------------------------------------------

def component_scores(components: Sequence[ComponentEvent], events: Sequence[GazeEvent],
                     event_scores: Mapping[GazeEvent, float]) -> list[float]:
    """Detection score per component: the weakest contributing event margin."""
    by_person: dict[str, list[GazeEvent]] = defaultdict(list)
    for e in events:
        by_person[e.person].append(e)
    out = []
    for c in components:
        vals = []
        for p in c.participants:
            for e in by_person.get(p, ()):
                if e.start - TIME_EPS <= c.start < e.end - TIME_EPS:
                    vals.append(event_scores.get(e, math.nan))
                    break
        out.append(min(vals) if vals and not any(math.isnan(v) for v in vals) else math.nan)
    return out


@dataclass
class EvaluationReport:
    event_level: dict[str, ConfusionMetrics]
    time_level: dict[str, ConfusionMetrics]
    overall_event: ConfusionMetrics
    overall_time: ConfusionMetrics
    frame_accuracy: dict[str, float]
    per_person_correct: dict[str, tuple[int, int]] = field(default_factory=dict)

    def micro_f1(self) -> float:
        """F1 from counts pooled over every component kind."""
        tp = sum(m.tp for m in self.event_level.values())
        fp = sum(m.fp for m in self.event_level.values())
        fn = sum(m.fn for m in self.event_level.values())
        return _ratio(2 * tp, 2 * tp + fp + fn)

    def as_record(self) -> dict:
        return {
            "event_level": {k: v.as_record() for k, v in self.event_level.items()},
            "time_level": {k: v.as_record() for k, v in self.time_level.items()},
            "overall_event": self.overall_event.as_record(),
            "overall_time": self.overall_time.as_record(),
            "frame_accuracy": self.frame_accuracy,
            "per_person_correct": {k: list(v) for k, v in self.per_person_correct.items()},
            "micro_f1": self.micro_f1(),
        }


def frame_accuracy(detected: Sequence[GazeEvent], annotated: Sequence[GazeEvent], t0: float, t1: float,
                   quantum: float = QUANTUM) -> dict[str, float]:
    """Per person, share of annotated bins whose detected label agrees."""
    n_bins = max(0, int(math.ceil((t1 - t0) / quantum - 1e-9)))
    out = {}
    for person in sorted({e.person for e in annotated}):
        det = bin_keys([Span(e.target, e.start, e.end) for e in detected if e.person == person], t0, n_bins, quantum)
        ann = bin_keys([Span(e.target, e.start, e.end) for e in annotated if e.person == person], t0, n_bins, quantum)
        agree = total = 0
        for d, a in zip(det, ann):
            if a:
                total += 1
                agree += bool(d & a)
        out[person] = agree / total if total else math.nan
    return out


def evaluate_session(
    detected_events: Sequence[GazeEvent],
    annotations: Sequence[AnnotationEvent],
    *,
    event_scores: Mapping[GazeEvent, float] | None = None,
    min_overlap: float = 0.25,
    iou_threshold: float = DEFAULT_IOU,
    quantum: float = QUANTUM,
) -> EvaluationReport:
    """Score detected components against annotated ones, per kind and overall.

    Event-level counts come from IoU matching; true negatives (and the whole
    time-level table) come from quantized bins where neither source reports a
    component of that kind.
    """
    ann_events = annotations_to_events(annotations)
    det_comps = classify(detected_events, min_overlap)
    ann_comps = classify(ann_events, min_overlap)
    spans_all = [e for e in detected_events] + [e for e in ann_events]
    if not spans_all:
        raise InputError("nothing to evaluate")
    t0 = math.floor(min(e.start for e in spans_all) / quantum) * quantum
    t1 = max(e.end for e in spans_all)
    scores = component_scores(det_comps, detected_events, event_scores or {})

    event_level, time_level = {}, {}
    for kind in KINDS:
        d_idx = [i for i, c in enumerate(det_comps) if c.kind == kind]
        d = [component_span(det_comps[i]) for i in d_idx]
        a = [component_span(c) for c in ann_comps if c.kind == kind]
        if d and a:
            al = align(d, a, iou_threshold)
        else:
            al = Alignment([], list(range(len(d))), list(range(len(a))), len(d), len(a))
        tally = bin_tally(d, a, t0, t1, quantum)
        matched = {i for i, _, _ in al.matches}
        pos = [scores[d_idx[i]] for i in matched if not math.isnan(scores[d_idx[i]])]
        neg = [scores[d_idx[i]] for i in al.false_positives if not math.isnan(scores[d_idx[i]])]
        event_level[kind] = ConfusionMetrics.from_counts(al.tp, al.fp, al.fn, tally.tn, n=len(d),
                                                         pos_scores=pos, neg_scores=neg)
        time_level[kind] = ConfusionMetrics.from_counts(tally.tp, tally.fp, tally.fn, tally.tn,
                                                        n=tally.tp + tally.fp)

    per_person = {}
    indiv_det = [e for e in detected_events if e.target != NO_DETECTION]
    indiv_ann = [e for e in ann_events if e.target != NO_DETECTION]
    if indiv_det and indiv_ann:
        al = align([event_span(e) for e in indiv_det], [event_span(e) for e in indiv_ann], iou_threshold)
        matched = {i for i, _, _ in al.matches}
        for person in sorted({e.person for e in indiv_det}):
            idx = [i for i, e in enumerate(indiv_det) if e.person == person]
            per_person[person] = (sum(i in matched for i in idx), len(idx))

    return EvaluationReport(
        event_level=event_level,
        time_level=time_level,
        overall_event=weighted_average([event_level[k] for k in KINDS]),
        overall_time=weighted_average([time_level[k] for k in KINDS]),
        frame_accuracy=frame_accuracy(detected_events, ann_events, t0, t1, quantum),
        per_person_correct=per_person,
    )


TABLE_LABELS = {INDIVIDUAL: "Individual Gaze", SHARED: "Shared Gaze", MUTUAL: "Mutual Gaze", NO_DETECTION: "No Detection"}


def format_table(rows: Mapping[str, ConfusionMetrics], overall: ConfusionMetrics, title: str = "Detection accuracy") -> str:
    def pct(v):
        return "   n/a" if math.isnan(v) else f"{100 * v:5.1f}%"

    header = f"{'Gaze Component':<20} {'N':>7} {'Sens':>6} {'Spec':>6} {'PPV':>6} {'NPV':>6} {'AUC':>6} {'F1':>6}"
    lines = [title, header, "-" * len(header)]
    for kind in KINDS:
        m = rows[kind]
        lines.append(f"{TABLE_LABELS[kind]:<20} {m.n:>7} " + " ".join(pct(getattr(m, f)) for f in
                     ("sensitivity", "specificity", "ppv", "npv", "auc", "f1")))
    lines.append("-" * len(header))
    lines.append(f"{'Overall Performance':<20} {overall.n:>7} " + " ".join(pct(getattr(overall, f)) for f in
                 ("sensitivity", "specificity", "ppv", "npv", "auc", "f1")))
    return "\n".join(lines)


# -- subject comparison ------------------------------------------------------------

@dataclass
class SubjectComparison:
    z: TestResult
    anova: TestResult | None


def compare_subjects(
    first: tuple[int, int],
    second: tuple[int, int],
    session_accuracy: Mapping[str, Sequence[float]] | None = None,
    *,
    arcsine: bool = True,
    alternative: str = "greater",
) -> SubjectComparison:
    """Two-proportion z-test of detection accuracy (``(correct, total)`` per group),
    plus a one-way ANOVA over per-session accuracies when those are given.

    The default one-tailed alternative is that the first group is detected
    more accurately.
    """
    (c1, n1), (c2, n2) = first, second
    if n1 <= 0 or n2 <= 0:
        raise InputError("each group needs at least one event")
    z = two_proportion_z(c1 / n1, n1, c2 / n2, n2, alternative=alternative)
    anova = None
    if session_accuracy:
        groups = []
        for vals in session_accuracy.values():
            arr = np.asarray(vals, dtype=float)
            groups.append(np.arcsin(np.sqrt(arr)) if arcsine else arr)
        anova = anova_oneway(groups)
    return SubjectComparison(z, anova)
