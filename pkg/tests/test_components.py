import logging

import numpy as np
import pytest

from oracles import brute_components, brute_joint_attention, random_triad_stream
from triadgaze.components import (
    INDIVIDUAL,
    MUTUAL,
    SHARED,
    ComponentEvent,
    classify,
    detect_joint_attention,
    gaze_following_count,
    gaze_following_rate,
)
from triadgaze.events import NO_DETECTION, GazeEvent, compress, expand, split_by_person

C, G, R = "child", "caregiver", "robot"


def ev(person, target, start, end):
    return GazeEvent(person, target, float(start), float(end - start))


def kinds(components, kind):
    return [c for c in components if c.kind == kind]


def test_mutual_is_the_intersection():
    comps = classify([ev(C, G, 0, 5), ev(G, C, 2, 4)], 0.25)
    (m,) = kinds(comps, MUTUAL)
    assert (m.start, m.end, m.participants) == (2.0, 4.0, (G, C))
    assert len(kinds(comps, INDIVIDUAL)) == 2


def test_shared_over_common_target():
    comps = classify([ev(C, "screen", 1, 3), ev(G, "screen", 1, 3)], 0.25)
    (s,) = kinds(comps, SHARED)
    assert (s.start, s.end, s.target) == (1.0, 3.0, "screen")


def test_short_overlap_below_threshold_dropped():
    events = [ev(C, G, 0, 1.0), ev(G, C, 0.95, 2)]
    assert not kinds(classify(events, 0.1), MUTUAL)
    mutual, _ = brute_components(events, 0.1)
    assert not any(mutual.values())
    assert kinds(classify(events, 0.05), MUTUAL)


def test_no_detection_passes_through():
    comps = classify([ev(C, NO_DETECTION, 0, 1), ev(C, "screen", 1, 2)], 0.25)
    assert [c.kind for c in comps] == [NO_DETECTION, INDIVIDUAL]


def test_shared_splits_when_the_set_changes():
    comps = classify([ev(C, "screen", 0, 6), ev(G, "screen", 1, 6), ev(R, "screen", 3, 5)], 0.25)
    spans = [(s.start, s.end, s.participants) for s in kinds(comps, SHARED)]
    assert spans == [(1, 3, (G, C)), (3, 5, (G, C, R)), (5, 6, (G, C))]


def test_component_invariants():
    with pytest.raises(ValueError):
        ComponentEvent(0, 1, MUTUAL, (C,), None)
    with pytest.raises(ValueError):
        ComponentEvent(0, 1, SHARED, (C, G), None)


SCRIPT = [ev(C, G, 0, 2), ev(G, C, 0, 2.5), ev(C, "screen", 2, 8), ev(G, "other", 2.5, 3.5), ev(G, "screen", 3.5, 8)]


def test_scripted_episode():
    comps = classify(SCRIPT, 0.25)
    (e,) = detect_joint_attention(comps, SCRIPT, 3.0)
    assert (e.leader, e.follower, e.target) == (C, G, "screen")
    assert e.follow_latency == pytest.approx(1.5)
    assert e.shared_interval[0] == pytest.approx(3.5)


def test_arrival_outside_window():
    late = SCRIPT[:3] + [ev(G, "other", 2.5, 6), ev(G, "screen", 6, 8)]
    assert detect_joint_attention(classify(late, 0.25), late, 3.0) == []


def test_simultaneous_shift_is_suppressed_and_logged(caplog):
    events = [ev(C, G, 0, 2), ev(G, C, 0, 2), ev(C, "screen", 2, 5), ev(G, "screen", 2, 5)]
    ties = []
    with caplog.at_level(logging.INFO, logger="triadgaze.components"):
        assert detect_joint_attention(classify(events, 0.25), events, 3.0, ties=ties) == []
    assert len(ties) == 1 and "simultaneous" in caplog.text


def test_robot_can_lead():
    events = [ev(R, C, 0, 2), ev(C, R, 0, 2.4), ev(R, "screen", 2, 6), ev(C, "screen", 2.4, 6)]
    (e,) = detect_joint_attention(classify(events, 0.25), events, 3.0)
    assert (e.leader, e.follower) == (R, C)


def test_latency_window_must_be_positive():
    with pytest.raises(ValueError):
        detect_joint_attention([], [], 0.0)


@pytest.mark.parametrize("seed", range(30))
def test_classification_ignores_person_order(seed):
    rng = np.random.default_rng(seed)
    events = random_triad_stream(rng, 60)
    by = split_by_person(events)
    shuffled = {p: by[p] for p in reversed(sorted(by))}
    assert classify(by, 0.25) == classify(shuffled, 0.25)


def _recompressed(events):
    out = []
    for person, evs in split_by_person(events).items():
        out += compress(expand(evs, 4.0), 0, 0, person=person, frame_period=0.25)
    return out


@pytest.mark.parametrize("seed", range(30))
def test_split_then_recompressed_input_classifies_identically(seed):
    rng = np.random.default_rng(seed)
    events = random_triad_stream(rng, 60)
    pieces = []
    for e in events:
        cut = int(rng.integers(1, 4)) * 0.25 if e.duration > 1.0 else 0.0
        if cut:
            pieces += [e._replace(duration=cut), e._replace(start=e.start + cut, duration=e.duration - cut)]
        else:
            pieces.append(e)
    original = classify(_recompressed(events), 0.25)
    again = classify(_recompressed(pieces), 0.25)
    assert again == original


@pytest.mark.parametrize("seed", range(40))
def test_episodes_match_brute_force_and_grow_with_window(seed):
    rng = np.random.default_rng(1000 + seed)
    events = random_triad_stream(rng, 120)
    comps = classify(events, 0.25)
    previous = -1
    for window in (0.25, 0.5, 1.0, 3.0, 6.0):
        eps = detect_joint_attention(comps, events, window)
        got = sorted((e.leader, e.follower, e.target, round(e.mutual_interval[0], 6), round(e.shift_time, 6),
                      round(e.shift_time + e.follow_latency, 6), round(sum(e.shared_interval), 6)) for e in eps)
        assert got == brute_joint_attention(events, window, 0.25)
        assert len(eps) >= previous
        previous = len(eps)
        for e in eps:
            assert 0 <= e.follow_latency <= window + 1e-9
            assert e.target not in (e.leader, e.follower)
            mutual = [c for c in comps if c.kind == MUTUAL and (c.start, c.duration) == e.mutual_interval]
            assert mutual and mutual[0].end <= e.shift_time + 1e-9
            shared = [c for c in comps if c.kind == SHARED and c.start == e.shared_interval[0]
                      and c.target == e.target]
            assert shared and e.leader in shared[0].participants and e.follower in shared[0].participants


def test_gaze_following_without_mutual_is_zero():
    events = [ev(R, "screen", 0, 5), ev(C, "screen", 1, 5)]
    assert gaze_following_count(events, C, R, "screen") == 0


def test_gaze_following_counts_licensed_cues():
    events = [
        ev(R, C, 0, 2), ev(C, R, 0, 2.5), ev(R, G, 2, 4), ev(C, G, 2.5, 4),
        ev(R, "screen", 4, 6), ev(R, G, 6, 8), ev(C, "screen", 4, 6.5), ev(C, G, 6.5, 8),
    ]
    # the second cue toward the caregiver has no fresh eye contact before it
    assert gaze_following_count(events, C, R, G) == 1
    assert gaze_following_rate(events, C, R, G, per_minutes=1.0) == pytest.approx(1 / (8 / 60))


def test_brute_components_agree_with_classify():
    for seed in range(20):
        events = random_triad_stream(np.random.default_rng(seed), 80)
        comps = classify(events, 0.25)
        mutual, shared = brute_components(events, 0.25)
        got_m = sorted((c.participants, round(c.start, 6), round(c.end, 6)) for c in comps if c.kind == MUTUAL)
        want_m = sorted((k, round(s, 6), round(e, 6)) for k, ivs in mutual.items() for s, e in ivs)
        assert got_m == want_m
        got_s = sorted((c.target, c.participants, round(c.start, 6), round(c.end, 6)) for c in comps if c.kind == SHARED)
        want_s = sorted((t, tuple(sorted(w)), round(s, 6), round(e, 6)) for (w, t), ivs in shared.items() for s, e in ivs)
        assert got_s == want_s
