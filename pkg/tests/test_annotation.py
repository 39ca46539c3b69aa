import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import _iou, brute_matching, pairwise_auc
from triadgaze.annotation import (
    AnnotationEvent,
    ConfusionMetrics,
    Span,
    align,
    auc_mann_whitney,
    auc_trapezoid,
    compare_subjects,
    evaluate_session,
    format_table,
    quantize,
    weighted_average,
)
from triadgaze.components import KINDS
from triadgaze.errors import ClockMismatch, InputError
from triadgaze.events import GazeEvent
from triadgaze.io import read_elan, write_elan


def test_quantize_widens_outward():
    (a,) = quantize([("child", "robot", 3.13, 5.01)])
    assert (a.start, a.end) == (3.0, 5.25)


def test_quantize_grid_point_is_fixed():
    (a,) = quantize([("child", "robot", 2.0, 2.5)])
    assert (a.start, a.end) == (2.0, 2.5)


def test_quantize_rejects_empty_interval():
    with pytest.raises(InputError):
        quantize([("child", "robot", 2.0, 2.0)])


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 1000), st.floats(0.001, 60))
def test_quantized_interval_contains_original(start, length):
    (a,) = quantize([("c", "t", start, start + length)])
    assert a.start <= start + 1e-9 and a.end >= start + length - 1e-9
    assert (a.end - a.start) - length < 0.5


def spans(*rows, key="k"):
    return [Span(key, s, e) for s, e in rows]


def test_identical_timelines_all_match():
    s = spans((0, 1), (2, 4), (5, 6))
    al = align(s, s)
    assert al.tp == 3 and al.fp == al.fn == 0


def test_empty_detection_gives_only_false_negatives():
    al = align([], spans((0, 1), (2, 3)))
    assert al.tp == 0 and al.fn == 2 and al.fp == 0


def test_keys_must_agree():
    al = align(spans((0, 1), key="a"), spans((0, 1), key="b"))
    assert al.tp == 0


def test_disjoint_clocks_raise():
    with pytest.raises(ClockMismatch):
        align(spans((0, 1)), spans((100, 101)))


def ten_event_timelines():
    ann = spans(*[(4 * i, 4 * i + 2) for i in range(10)])
    det = []
    for i in range(10):
        if i < 7:
            det.append(Span("k", 4 * i + 0.25 * (i % 3), 4 * i + 2 + 0.25 * (i % 2)))  # IoU >= 0.5
        else:
            det.append(Span("k", 4 * i + 1.5, 4 * i + 3.5))  # IoU 1/7
    return det, ann


def test_ten_events_seven_matches():
    det, ann = ten_event_timelines()
    al = align(det, ann)
    want = brute_matching(det, ann)
    assert len(want) == 7
    assert {(i, j) for i, j, _ in al.matches} == want


@pytest.mark.parametrize("seed", range(50))
def test_matching_is_optimal_against_exhaustive_search(seed):
    rng = np.random.default_rng(seed)

    def draw(n):
        out = []
        for _ in range(n):
            s = int(rng.integers(0, 20)) * 0.25
            out.append(Span(str(rng.choice(["a", "b"])), s, s + int(rng.integers(1, 8)) * 0.25))
        return out

    det, ann = draw(int(rng.integers(1, 7))), draw(int(rng.integers(1, 7)))
    try:
        al = align(det, ann)
    except ClockMismatch:
        return
    best = brute_matching(det, ann)
    assert al.tp == len(best)
    assert sum(v for *_, v in al.matches) == pytest.approx(sum(_iou(det[i], ann[j]) for i, j in best))
    assert al.tp + al.fn == len(ann) and al.tp + al.fp == len(det)


def test_nine_one_nine_one():
    m = ConfusionMetrics.from_counts(tp=9, fp=1, fn=1, tn=9)
    for name in ("sensitivity", "specificity", "ppv", "npv", "f1"):
        assert getattr(m, name) == pytest.approx(0.9)


def test_perfect_separation_auc_is_one():
    assert auc_mann_whitney([5, 6, 7], [1, 2]) == 1.0


def test_auc_worked_example():
    pos, neg = [0.9, 0.8], [0.85, 0.1]
    assert pairwise_auc(pos, neg) == 0.75
    assert auc_mann_whitney(pos, neg) == pytest.approx(0.75)
    assert auc_trapezoid(pos, neg) == pytest.approx(0.75)


@pytest.mark.parametrize("seed", range(30))
def test_auc_routes_agree(seed):
    rng = np.random.default_rng(seed)
    pos = np.round(rng.normal(1, 1, rng.integers(1, 30)), 1)
    neg = np.round(rng.normal(0, 1, rng.integers(1, 30)), 1)
    assert auc_mann_whitney(pos, neg) == pytest.approx(pairwise_auc(pos, neg), abs=1e-12)
    assert auc_trapezoid(pos, neg) == pytest.approx(pairwise_auc(pos, neg), abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50), st.integers(0, 50))
def test_f1_is_harmonic_mean_of_ppv_and_sensitivity(tp, fp, fn, tn):
    m = ConfusionMetrics.from_counts(tp, fp, fn, tn)
    if tp == 0:
        return
    assert m.f1 == pytest.approx(2 * m.ppv * m.sensitivity / (m.ppv + m.sensitivity))
    assert m.f1 == pytest.approx(2 * tp / (2 * tp + fp + fn))


def test_weighted_average_stays_within_row_range():
    rows = [ConfusionMetrics.from_counts(9, 1, 1, 9), ConfusionMetrics.from_counts(3, 3, 1, 5),
            ConfusionMetrics.from_counts(0, 0, 0, 4)]
    avg = weighted_average(rows)
    for name in ("sensitivity", "specificity", "ppv", "f1"):
        vals = [getattr(r, name) for r in rows if not math.isnan(getattr(r, name))]
        assert min(vals) - 1e-12 <= getattr(avg, name) <= max(vals) + 1e-12
    # counts weigh the first row 10:6
    assert avg.sensitivity == pytest.approx((0.9 * 10 + 0.75 * 6) / 16)


def test_z_from_published_proportions():
    r = compare_subjects((round(0.94 * 10909), 10909), (round(0.88 * 12408), 12408)).z
    assert 15.5 <= r.value <= 16.7 and r.p_value <= 0.001


def test_equal_proportions_give_zero():
    assert compare_subjects((50, 100), (50, 100)).z.value == 0.0


def test_z_by_hand():
    pooled = (60 + 50) / 200
    z = (0.6 - 0.5) / math.sqrt(pooled * (1 - pooled) * (1 / 100 + 1 / 100))
    r = compare_subjects((60, 100), (50, 100)).z
    assert r.value == pytest.approx(z, rel=1e-12)
    assert r.value == pytest.approx(1.421338, abs=1e-6)


def test_subject_anova_on_accuracies():
    res = compare_subjects((90, 100), (80, 100), {"caregiver": [0.9, 0.95, 0.92], "child": [0.8, 0.78, 0.85]})
    assert res.anova.statistic_name == "F" and res.anova.p_value < 0.05


def _session():
    ev = [
        GazeEvent("child", "caregiver", 0.0, 2.0), GazeEvent("caregiver", "child", 0.0, 2.5),
        GazeEvent("child", "screen", 2.0, 6.0), GazeEvent("caregiver", "other", 2.5, 1.0),
        GazeEvent("caregiver", "screen", 3.5, 4.5),
    ]
    ann = [AnnotationEvent(e.person, e.target, e.start, e.end) for e in ev]
    return ev, ann


def test_identical_session_scores_perfectly():
    ev, ann = _session()
    rep = evaluate_session(ev, ann, event_scores={e: 1.0 for e in ev})
    for kind in KINDS:
        m = rep.event_level[kind]
        assert m.fp == m.fn == 0
        if m.tp:
            assert m.sensitivity == m.ppv == m.f1 == 1.0
    assert rep.micro_f1() == 1.0
    assert all(v == 1.0 for v in rep.frame_accuracy.values())
    assert math.isnan(rep.overall_event.auc)  # no false detections to rank against
    text = format_table(rep.event_level, rep.overall_event)
    assert "Mutual Gaze" in text and "Overall Performance" in text


def test_bookkeeping_conservation():
    ev, ann = _session()
    shifted = [e._replace(start=e.start + 0.4) for e in ev]
    rep = evaluate_session(shifted, ann)
    from triadgaze.annotation import annotations_to_events
    from triadgaze.components import classify

    det = classify(shifted, 0.25)
    ref = classify(annotations_to_events(ann), 0.25)
    for kind in KINDS:
        m = rep.event_level[kind]
        assert m.tp + m.fn == sum(c.kind == kind for c in ref)
        assert m.tp + m.fp == sum(c.kind == kind for c in det)


def test_elan_round_trip_converts_milliseconds(tmp_path):
    path = tmp_path / "a.txt"
    path.write_text("child\trobot\t3130\t5010\ncaregiver\tscreen\t0\t2500\n")
    raw = read_elan(path)
    assert ("child", "robot", 3.13, 5.01) in [tuple(r) for r in raw]
    out = tmp_path / "b.txt"
    write_elan(out, raw)
    assert sorted(read_elan(out)) == sorted(raw)
